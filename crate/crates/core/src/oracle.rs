//! Brute-force reference computations for cross-checking the solvers.

use thiserror::Error;

use crate::geometry::{weber_value, BoundingBox, Point};
use crate::process::SpatialDensity;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("empty input")]
    Empty,
    #[error("{generators} generators but {counters} counters")]
    LengthMismatch { generators: usize, counters: usize },
    #[error("counter {0} is zero")]
    ZeroCounter(usize),
    #[error("raster carries no mass")]
    ZeroMass,
}

/// Regular lattice over a box; nodes at `min + (i, j)·resolution`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub bbox: BoundingBox,
    pub resolution: f64,
}

impl GridSpec {
    pub fn new(bbox: BoundingBox, resolution: f64) -> Result<Self, OracleError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(OracleError::BadResolution(resolution));
        }
        Ok(GridSpec { bbox, resolution })
    }

    /// Grid over the bounding box of `points`.
    pub fn covering(points: &[Point], resolution: f64) -> Result<Self, OracleError> {
        let bbox = BoundingBox::of(points).ok_or(OracleError::Empty)?;
        Self::new(bbox, resolution)
    }

    fn counts(&self) -> (usize, usize) {
        let nx = (self.bbox.width() / self.resolution).ceil() as usize + 1;
        let ny = (self.bbox.height() / self.resolution).ceil() as usize + 1;
        (nx, ny)
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.bbox.min.x + i as f64 * self.resolution,
            self.bbox.min.y + j as f64 * self.resolution,
        )
    }
}

/// Grid node with the smallest Weber value; the first node scanned wins ties.
pub fn grid_median(points: &[Point], grid: &GridSpec) -> Result<Point, OracleError> {
    if points.is_empty() {
        return Err(OracleError::Empty);
    }
    let (nx, ny) = grid.counts();
    let mut best = grid.node(0, 0);
    let mut best_w = f64::INFINITY;
    for j in 0..ny {
        for i in 0..nx {
            let p = grid.node(i, j);
            let w = weber_value(p, points);
            if w < best_w {
                best_w = w;
                best = p;
            }
        }
    }
    Ok(best)
}

/// Cell-centred masses of a density on a lattice, normalized to one.
#[derive(Clone, Debug)]
pub struct DensityRaster {
    pub centres: Vec<Point>,
    pub masses: Vec<f64>,
}

impl DensityRaster {
    /// Cells of edge `grid.resolution` tiling `grid.bbox`; mass is the pdf at
    /// the cell centre times the cell area.
    pub fn from_density(density: &SpatialDensity, grid: &GridSpec) -> Result<Self, OracleError> {
        let nx = (grid.bbox.width() / grid.resolution).round().max(1.0) as usize;
        let ny = (grid.bbox.height() / grid.resolution).round().max(1.0) as usize;
        let (hx, hy) = (grid.bbox.width() / nx as f64, grid.bbox.height() / ny as f64);
        let mut centres = Vec::with_capacity(nx * ny);
        let mut masses = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let c = Point::new(
                    grid.bbox.min.x + (i as f64 + 0.5) * hx,
                    grid.bbox.min.y + (j as f64 + 0.5) * hy,
                );
                let m = density.pdf(c) * hx * hy;
                if m > 0.0 {
                    centres.push(c);
                    masses.push(m);
                }
            }
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(OracleError::ZeroMass);
        }
        masses.iter_mut().for_each(|m| *m /= total);
        Ok(DensityRaster { centres, masses })
    }
}

/// Riemann sum of `min_i ‖p_i − q‖` against the raster.
pub fn grid_multimedian(positions: &[Point], raster: &DensityRaster) -> Result<f64, OracleError> {
    if positions.is_empty() {
        return Err(OracleError::Empty);
    }
    Ok(raster
        .centres
        .iter()
        .zip(&raster.masses)
        .map(|(&q, &m)| {
            let d = positions.iter().map(|&p| p.distance(q)).fold(f64::INFINITY, f64::min);
            m * d
        })
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MacQueenRule {
    /// `p ← (c·q + p)/(c + 1)`.
    #[default]
    Printed,
    /// Running mean, `p ← (c·p + q)/(c + 1)`.
    Classical,
}

/// Moves the generator nearest to `sample` (lowest index on ties) and
/// increments its counter. Returns the index moved.
pub fn macqueen_step(
    generators: &mut [Point],
    counters: &mut [u64],
    sample: Point,
    rule: MacQueenRule,
) -> Result<usize, OracleError> {
    if generators.len() != counters.len() {
        return Err(OracleError::LengthMismatch {
            generators: generators.len(),
            counters: counters.len(),
        });
    }
    if generators.is_empty() {
        return Err(OracleError::Empty);
    }
    if let Some(k) = counters.iter().position(|&c| c == 0) {
        return Err(OracleError::ZeroCounter(k));
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &g) in generators.iter().enumerate() {
        let d = (g - sample).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let c = counters[best] as f64;
    let p = generators[best];
    generators[best] = match rule {
        MacQueenRule::Printed => (sample * c + p) * (1.0 / (c + 1.0)),
        MacQueenRule::Classical => (p * c + sample) * (1.0 / (c + 1.0)),
    };
    counters[best] += 1;
    Ok(best)
}
