use rand::Rng;

use super::{GeometryError, Point};

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn new(min: Point, max: Point) -> Self {
        BoundingBox { min, max }
    }

    /// Smallest box holding every point; `None` for an empty slice.
    pub fn of(points: &[Point]) -> Option<Self> {
        let first = *points.first()?;
        let mut b = BoundingBox::new(first, first);
        for p in &points[1..] {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn inflated(&self, margin: f64) -> Self {
        let d = Point::new(margin, margin);
        BoundingBox::new(self.min - d, self.max + d)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            self.min.x + rng.random::<f64>() * self.width(),
            self.min.y + rng.random::<f64>() * self.height(),
        )
    }
}

/// A convex polygon with counterclockwise vertices and positive area.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    /// Validates convexity; clockwise input is reoriented. Collinear
    /// consecutive vertices are allowed.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let area = signed_area(&vertices);
        if area.abs() <= f64::EPSILON * bbox_scale(&vertices) {
            return Err(GeometryError::Degenerate);
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let scale = bbox_scale(&vertices);
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) < -1e-12 * scale {
                return Err(GeometryError::NotConvex);
            }
        }
        Ok(ConvexPolygon { vertices })
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0)
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let (x0, x1) = (x0.min(x1), x0.max(x1));
        let (y0, y1) = (y0.min(y1), y0.max(y1));
        ConvexPolygon {
            vertices: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        }
    }

    /// Regular polygon, handy as a disk approximation.
    pub fn regular(center: Point, radius: f64, sides: usize) -> Self {
        let sides = sides.max(3);
        let vertices = (0..sides)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / sides as f64;
                center + Point::new(a.cos(), a.sin()) * radius
            })
            .collect();
        ConvexPolygon { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let mut c = Point::ORIGIN;
        let mut a2 = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.cross(q);
            a2 += w;
            c += (p + q) * w;
        }
        c * (1.0 / (3.0 * a2))
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of(&self.vertices).expect("polygon has vertices")
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.distance(*b));
            }
        }
        d
    }

    /// Inside or on the boundary, up to `tol` of slack along edge normals.
    pub fn contains_within(&self, p: Point, tol: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            e.cross(p - a) >= -tol * e.norm()
        })
    }

    pub fn contains(&self, p: Point) -> bool {
        self.contains_within(p, 0.0)
    }

    /// Keeps the part where `normal · x ≤ offset`. Returns `None` when
    /// nothing of positive area survives.
    pub fn clip_half_plane(&self, normal: Point, offset: f64) -> Option<ConvexPolygon> {
        let out = clip_vertices(&self.vertices, normal, offset);
        if out.len() < 3 || signed_area(&out) <= 0.0 {
            None
        } else {
            Some(ConvexPolygon { vertices: out })
        }
    }

    /// Uniform point via fan triangulation from vertex 0.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let v = &self.vertices;
        let total = self.area();
        let mut pick = rng.random::<f64>() * total;
        let mut tri = v.len() - 2;
        for i in 1..v.len() - 1 {
            let a = 0.5 * (v[i] - v[0]).cross(v[i + 1] - v[0]);
            if pick < a {
                tri = i;
                break;
            }
            pick -= a;
        }
        let tri = tri.min(v.len() - 2).max(1);
        let (mut u, mut w) = (rng.random::<f64>(), rng.random::<f64>());
        if u + w > 1.0 {
            u = 1.0 - u;
            w = 1.0 - w;
        }
        v[0] + (v[tri] - v[0]) * u + (v[tri + 1] - v[0]) * w
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

fn bbox_scale(v: &[Point]) -> f64 {
    BoundingBox::of(v).map_or(0.0, |b| b.diagonal().powi(2))
}

/// Sutherland–Hodgman against a single half-plane.
fn clip_vertices(v: &[Point], normal: Point, offset: f64) -> Vec<Point> {
    let n = v.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let da = normal.dot(a) - offset;
        let db = normal.dot(b) - offset;
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Convex hull (Andrew's monotone chain), counterclockwise, without
/// collinear points. Degenerate inputs return 1 or 2 points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 {
            let k = lower.len();
            if (lower[k - 1] - lower[k - 2]).cross(p - lower[k - 2]) <= 0.0 {
                lower.pop();
            } else {
                break;
            }
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 {
            let k = upper.len();
            if (upper[k - 1] - upper[k - 2]).cross(p - upper[k - 2]) <= 0.0 {
                upper.pop();
            } else {
                break;
            }
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Whether `p` lies in the convex hull of `points`, within distance `tol`.
pub fn hull_contains(points: &[Point], p: Point, tol: f64) -> bool {
    let hull = convex_hull(points);
    match hull.len() {
        0 => false,
        1 => hull[0].distance(p) <= tol,
        2 => segment_distance(hull[0], hull[1], p) <= tol,
        n => {
            let inside = (0..n).all(|i| {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                (b - a).cross(p - a) >= 0.0
            });
            inside
                || (0..n)
                    .map(|i| segment_distance(hull[i], hull[(i + 1) % n], p))
                    .fold(f64::INFINITY, f64::min)
                    <= tol
        }
    }
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let e = b - a;
    let len2 = e.norm_squared();
    if len2 == 0.0 {
        return a.distance(p);
    }
    let t = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
    (a + e * t).distance(p)
}
