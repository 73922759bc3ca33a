//! Planar primitives, the discrete Weber function and the Fermat–Torricelli
//! point solver.

mod ft;
mod polygon;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

pub use ft::{
    absorbing_check, ft_point, solution_set_contains, solution_set_contains_within, solution_set_diameter_estimate,
    stationarity_tolerance, weber_value, FtResult, FtSolver, ABSORBING_TOLERANCE, COLLINEAR_TOLERANCE,
    DATUM_HIT_DISTANCE, DATUM_RESTART_OFFSET,
};
pub use polygon::{convex_hull, hull_contains, BoundingBox, ConvexPolygon};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}) is not a member of the point set")]
    NotMember { x: f64, y: f64 },
    #[error("operation requires a nonempty point set")]
    EmptySet,
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("polygon needs at least three vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not convex")]
    NotConvex,
    #[error("polygon has zero area")]
    Degenerate,
    #[error("probe count must be at least 2, got {0}")]
    TooFewProbes(usize),
}

/// A location (or a displacement) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Point { x, y })
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotates counterclockwise about the origin.
    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, rhs: Point) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Unit vector along `v`, or the zero vector when `v` is zero.
#[inline]
pub fn vers(v: Point) -> Point {
    let n = v.norm();
    if n > 0.0 {
        Point::new(v.x / n, v.y / n)
    } else {
        Point::ORIGIN
    }
}

/// An ordered multiset of points. Insertion order is kept and duplicates
/// count with multiplicity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        PointSet {
            points: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, p: Point) {
        debug_assert!(p.is_finite());
        self.points.push(p);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn as_slice(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn last(&self) -> Option<Point> {
        self.points.last().copied()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.points.contains(&p)
    }
}

impl From<Vec<Point>> for PointSet {
    fn from(points: Vec<Point>) -> Self {
        PointSet { points }
    }
}

impl FromIterator<Point> for PointSet {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        PointSet {
            points: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a Point;
    type IntoIter = std::slice::Iter<'a, Point>;
    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

impl AsRef<[Point]> for PointSet {
    fn as_ref(&self) -> &[Point] {
        &self.points
    }
}
