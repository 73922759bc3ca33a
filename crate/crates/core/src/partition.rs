//! Voronoi membership, explicit cells, the multimedian cost and the median
//! Voronoi residual.

use thiserror::Error;

use crate::geometry::{ft_point, vers, ConvexPolygon, GeometryError, Point};
use crate::process::{concern_rng, ProcessError, RngConcern, SpatialDensity};

/// Separation below which two generators are treated as coincident.
pub const COINCIDENCE_DISTANCE: f64 = 1e-12;
/// Displacement applied to a coincident generator before retrying.
pub const PERTURBATION: f64 = 1e-9;
pub const DEFAULT_BUDGET: usize = 200_000;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("no agent positions given")]
    NoPositions,
    #[error("generators {0} and {1} coincide")]
    Coincident(usize, usize),
    #[error("generator {0} lies outside the workspace")]
    OutsideWorkspace(usize),
    #[error("cell {0} is empty after clipping")]
    EmptyCell(usize),
    #[error("region carries no sampled probability mass")]
    ZeroMass,
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Index of the closest position to `q`; the lowest index wins ties.
pub fn nearest_agent(q: Point, positions: &[Point]) -> Result<usize, PartitionError> {
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (i, &p) in positions.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best_d {
            best_d = d;
            best = Some(i);
        }
    }
    best.ok_or(PartitionError::NoPositions)
}

/// Whether `q` lies in the cell of agent `i`, looking only at agents inside
/// the circle of radius `‖p_i − q‖` about `q`.
pub fn in_voronoi_cell(i: usize, q: Point, positions: &[Point]) -> bool {
    let r2 = (positions[i] - q).norm_squared();
    for (j, &p) in positions.iter().enumerate() {
        if j == i {
            continue;
        }
        let d2 = (p - q).norm_squared();
        if d2 > r2 {
            continue;
        }
        if d2 < r2 || j < i {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug)]
pub struct Tessellation {
    pub generators: Vec<Point>,
    /// Counterclockwise cells clipped to the workspace, indexed like
    /// `generators`.
    pub cells: Vec<ConvexPolygon>,
}

impl Tessellation {
    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(ConvexPolygon::area).sum()
    }
}

fn check_generators(positions: &[Point], workspace: &ConvexPolygon) -> Result<(), PartitionError> {
    if positions.is_empty() {
        return Err(PartitionError::NoPositions);
    }
    let tol = 1e-9 * (1.0 + workspace.diameter());
    for (i, &p) in positions.iter().enumerate() {
        if !p.is_finite() {
            return Err(GeometryError::NonFinite.into());
        }
        if !workspace.contains_within(p, tol) {
            return Err(PartitionError::OutsideWorkspace(i));
        }
        for (j, &q) in positions[..i].iter().enumerate() {
            if p.distance(q) <= COINCIDENCE_DISTANCE {
                return Err(PartitionError::Coincident(j, i));
            }
        }
    }
    Ok(())
}

/// Cells by clipping the workspace with one bisector half-plane per other
/// generator.
pub fn voronoi_cells(positions: &[Point], workspace: &ConvexPolygon) -> Result<Tessellation, PartitionError> {
    check_generators(positions, workspace)?;
    let mut cells = Vec::with_capacity(positions.len());
    for (i, &pi) in positions.iter().enumerate() {
        let mut cell = workspace.clone();
        for (j, &pj) in positions.iter().enumerate() {
            if j == i {
                continue;
            }
            let normal = pj - pi;
            let offset = 0.5 * (pj.norm_squared() - pi.norm_squared());
            cell = cell
                .clip_half_plane(normal, offset)
                .ok_or(PartitionError::EmptyCell(i))?;
        }
        cells.push(cell);
    }
    Ok(Tessellation {
        generators: positions.to_vec(),
        cells,
    })
}

/// Copy of `positions` where each generator that coincides with an earlier
/// one is moved [`PERTURBATION`] (times its index plus one) toward the
/// workspace centroid. Logged at warn level.
pub fn separate_coincident(positions: &[Point], workspace: &ConvexPolygon) -> Vec<Point> {
    let mut generators = positions.to_vec();
    let centre = workspace.centroid();
    for _ in 0..positions.len().max(1) * 4 {
        let clash = (0..generators.len()).find_map(|b| {
            (0..b)
                .find(|&a| generators[a].distance(generators[b]) <= COINCIDENCE_DISTANCE)
                .map(|a| (a, b))
        });
        let Some((a, b)) = clash else { break };
        log::warn!("generators {a} and {b} coincide; perturbing {b} by {PERTURBATION:e}");
        let p = generators[b];
        let dir = vers(centre - p);
        let dir = if dir == Point::ORIGIN {
            Point::new(1.0, 0.0)
        } else {
            dir
        };
        generators[b] = p + dir * PERTURBATION * (1 + b) as f64;
    }
    generators
}

/// [`voronoi_cells`] after [`separate_coincident`].
pub fn voronoi_cells_perturbed(positions: &[Point], workspace: &ConvexPolygon) -> Result<Tessellation, PartitionError> {
    voronoi_cells(&separate_coincident(positions, workspace), workspace)
}

/// Monte Carlo integration against a density. Every call restarts from the
/// same seed, so repeated calls see the same sample.
#[derive(Clone, Debug)]
pub struct DensityIntegrator<'a> {
    pub density: &'a SpatialDensity,
    pub budget: usize,
    pub seed: u64,
}

impl<'a> DensityIntegrator<'a> {
    pub fn new(density: &'a SpatialDensity, budget: usize, seed: u64) -> Self {
        DensityIntegrator { density, budget, seed }
    }

    pub fn with_default_budget(density: &'a SpatialDensity, seed: u64) -> Self {
        Self::new(density, DEFAULT_BUDGET, seed)
    }

    /// The `budget` draws of this integrator.
    pub fn draw(&self) -> Result<Vec<Point>, PartitionError> {
        let mut rng = concern_rng(self.seed, RngConcern::Integrator);
        (0..self.budget)
            .map(|_| self.density.sample(&mut rng).map_err(PartitionError::from))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

fn mean_and_stderr(values: impl Iterator<Item = f64>) -> Option<Estimate> {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    if n == 0 {
        return None;
    }
    let stderr = if n > 1 {
        (m2 / (n - 1) as f64 / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Some(Estimate { value: mean, stderr })
}

/// Estimate of `E[min_i ‖p_i − q‖]` with `q` drawn from the density.
/// Draws outside the workspace are discarded.
pub fn multimedian_value(
    positions: &[Point],
    integrator: &DensityIntegrator<'_>,
    workspace: &ConvexPolygon,
) -> Result<Estimate, PartitionError> {
    if positions.is_empty() {
        return Err(PartitionError::NoPositions);
    }
    let sample = integrator.draw()?;
    let est = mean_and_stderr(sample.iter().filter(|q| workspace.contains(**q)).map(|&q| {
        positions
            .iter()
            .map(|&p| (p - q).norm_squared())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }));
    est.ok_or(PartitionError::ZeroMass)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralizedMedian {
    pub point: Point,
    /// Draws that fell in the region.
    pub samples: usize,
    /// Root of the trace of the asymptotic covariance of the sample median.
    pub stderr: f64,
}

fn median_of_sample(points: &[Point], anchor: Point) -> Result<GeneralizedMedian, PartitionError> {
    if points.is_empty() {
        return Err(PartitionError::ZeroMass);
    }
    let m = ft_point(points, anchor).point;
    let (mut a, mut b) = ([0.0f64; 3], [0.0f64; 3]);
    for &q in points {
        let v = m - q;
        let d = v.norm();
        if d <= 0.0 {
            continue;
        }
        let u = v * (1.0 / d);
        a[0] += (1.0 - u.x * u.x) / d;
        a[1] -= u.x * u.y / d;
        a[2] += (1.0 - u.y * u.y) / d;
        b[0] += u.x * u.x;
        b[1] += u.x * u.y;
        b[2] += u.y * u.y;
    }
    let det = a[0] * a[2] - a[1] * a[1];
    let stderr = if det > 0.0 && points.len() > 1 {
        let inv = [a[2] / det, -a[1] / det, a[0] / det];
        let ib = [
            inv[0] * b[0] + inv[1] * b[1],
            inv[0] * b[1] + inv[1] * b[2],
            inv[1] * b[0] + inv[2] * b[1],
            inv[1] * b[1] + inv[2] * b[2],
        ];
        let cxx = ib[0] * inv[0] + ib[1] * inv[1];
        let cyy = ib[2] * inv[1] + ib[3] * inv[2];
        (cxx + cyy).max(0.0).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(GeneralizedMedian {
        point: m,
        samples: points.len(),
        stderr,
    })
}

/// Geometric median of the integrator's draws that land in `cell`.
pub fn generalized_median(
    cell: &ConvexPolygon,
    integrator: &DensityIntegrator<'_>,
) -> Result<GeneralizedMedian, PartitionError> {
    let kept: Vec<Point> = integrator.draw()?.into_iter().filter(|&q| cell.contains(q)).collect();
    median_of_sample(&kept, cell.centroid())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvtResidual {
    /// `max_i ‖p_i − median(V_i)‖` over cells with mass.
    pub value: f64,
    /// Per-generator distance; `None` for cells without sampled mass.
    pub per_cell: Vec<Option<f64>>,
    /// Three times the largest per-cell median standard error.
    pub tolerance: f64,
}

/// Distance from each generator to the generalized median of its cell. One
/// draw of the integrator is shared by all cells; each draw is assigned to
/// its nearest generator.
pub fn mvt_residual(
    positions: &[Point],
    integrator: &DensityIntegrator<'_>,
    workspace: &ConvexPolygon,
) -> Result<MvtResidual, PartitionError> {
    check_generators(positions, workspace)?;
    let mut buckets: Vec<Vec<Point>> = vec![Vec::new(); positions.len()];
    for q in integrator.draw()? {
        if workspace.contains(q) {
            buckets[nearest_agent(q, positions)?].push(q);
        }
    }
    let mut per_cell = Vec::with_capacity(positions.len());
    let (mut value, mut worst_se) = (0.0f64, 0.0f64);
    for (i, bucket) in buckets.iter().enumerate() {
        match median_of_sample(bucket, positions[i]) {
            Ok(gm) => {
                let d = positions[i].distance(gm.point);
                value = value.max(d);
                worst_se = worst_se.max(gm.stderr);
                per_cell.push(Some(d));
            }
            Err(PartitionError::ZeroMass) => {
                log::debug!("cell {i} has no sampled mass; skipped");
                per_cell.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(MvtResidual {
        value,
        per_cell,
        tolerance: 3.0 * worst_se,
    })
}
