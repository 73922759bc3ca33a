//! Spatial target densities and the Poisson arrival stream.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};
use thiserror::Error;

use crate::geometry::{BoundingBox, ConvexPolygon, GeometryError, Point};

/// Draw budget for rejection sampling before the density is declared
/// malformed.
pub const MAX_REJECTION_DRAWS: usize = 1_000_000;
/// Monte Carlo sample count for truncated-normal mass on general polygons.
pub const NORMALIZER_SAMPLES: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("arrival rate must be finite and nonnegative, got {0}")]
    InvalidRate(f64),
    #[error("interval [{0}, {1}) is empty")]
    EmptyInterval(f64, f64),
    #[error("standard deviation must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("grid density: {0}")]
    Grid(String),
    #[error("grid density line {line}: {message}")]
    GridParse { line: usize, message: String },
    #[error("rejection sampling produced no point in {0} draws")]
    RejectionExhausted(usize),
    #[error("support carries no probability mass")]
    ZeroMass,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Independent random streams, one per concern.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RngConcern {
    ArrivalTimes = 0,
    Locations = 1,
    Placement = 2,
    Integrator = 3,
}

pub fn concern_rng(seed: u64, concern: RngConcern) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(concern as u64);
    rng
}

/// Piecewise-constant density on a rectangular raster. Row 0 is the row at
/// the lowest `y`.
#[derive(Clone, Debug)]
pub struct GridRaster {
    rows: usize,
    cols: usize,
    bbox: BoundingBox,
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl GridRaster {
    /// Normalizes `weights` (row-major) to unit total mass.
    pub fn new(rows: usize, cols: usize, bbox: BoundingBox, weights: Vec<f64>) -> Result<Self, ProcessError> {
        if rows == 0 || cols == 0 {
            return Err(ProcessError::Grid("raster needs at least one cell".into()));
        }
        if weights.len() != rows * cols {
            return Err(ProcessError::Grid(format!(
                "expected {} weights, found {}",
                rows * cols,
                weights.len()
            )));
        }
        if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
            return Err(ProcessError::Grid("extent must have positive area".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ProcessError::Grid("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ProcessError::ZeroMass);
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(ProcessError::Grid(format!("normalized mass is {mass}")));
        }
        let index = WeightedIndex::new(&weights).map_err(|e| ProcessError::Grid(e.to_string()))?;
        Ok(GridRaster {
            rows,
            cols,
            bbox,
            weights,
            index,
        })
    }

    /// Parses `rows cols x0 y0 x1 y1` followed by row-major weights.
    pub fn parse(text: &str) -> Result<Self, ProcessError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(ProcessError::GridParse {
            line: 1,
            message: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(ProcessError::GridParse {
                line: hline,
                message: "header must be `rows cols x0 y0 x1 y1`".into(),
            });
        }
        let bad = |message: String| ProcessError::GridParse { line: hline, message };
        let rows: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad rows `{}`", fields[0])))?;
        let cols: usize = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad cols `{}`", fields[1])))?;
        let mut ext = [0.0f64; 4];
        for (k, f) in fields[2..].iter().enumerate() {
            ext[k] = f.parse().map_err(|_| bad(format!("bad extent value `{f}`")))?;
        }
        let mut weights = Vec::with_capacity(rows * cols);
        for (line, l) in lines {
            for tok in l.split_whitespace() {
                let w: f64 = tok.parse().map_err(|_| ProcessError::GridParse {
                    line,
                    message: format!("bad weight `{tok}`"),
                })?;
                weights.push(w);
            }
        }
        let bbox = BoundingBox::new(
            Point::new(ext[0].min(ext[2]), ext[1].min(ext[3])),
            Point::new(ext[0].max(ext[2]), ext[1].max(ext[3])),
        );
        GridRaster::new(rows, cols, bbox, weights)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn cell_width(&self) -> f64 {
        self.bbox.width() / self.cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.bbox.height() / self.rows as f64
    }

    /// Probability mass of cell `(row, col)`.
    pub fn mass(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        if !self.bbox.contains(p) {
            return None;
        }
        let c = (((p.x - self.bbox.min.x) / self.cell_width()) as usize).min(self.cols - 1);
        let r = (((p.y - self.bbox.min.y) / self.cell_height()) as usize).min(self.rows - 1);
        Some((r, c))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let k = self.index.sample(rng);
        let (r, c) = (k / self.cols, k % self.cols);
        Point::new(
            self.bbox.min.x + (c as f64 + rng.random::<f64>()) * self.cell_width(),
            self.bbox.min.y + (r as f64 + rng.random::<f64>()) * self.cell_height(),
        )
    }
}

#[derive(Clone, Debug)]
pub enum DensityKind {
    Uniform,
    /// Isotropic normal restricted to the support and renormalized.
    TruncatedNormal {
        center: Point,
        sigma: f64,
    },
    /// Raster weights; an extension for user-supplied densities.
    Grid(GridRaster),
}

/// A normalized target-location density with convex support.
#[derive(Clone, Debug)]
pub struct SpatialDensity {
    kind: DensityKind,
    support: ConvexPolygon,
    /// Probability of the support under the untruncated kernel.
    normalizer: f64,
}

impl SpatialDensity {
    pub fn uniform(support: ConvexPolygon) -> Self {
        let normalizer = support.area();
        SpatialDensity {
            kind: DensityKind::Uniform,
            support,
            normalizer,
        }
    }

    pub fn uniform_unit_square() -> Self {
        Self::uniform(ConvexPolygon::unit_square())
    }

    /// The mass of the support is computed exactly for axis-aligned
    /// rectangles and by Monte Carlo otherwise.
    pub fn truncated_normal(center: Point, sigma: f64, support: ConvexPolygon) -> Result<Self, ProcessError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ProcessError::InvalidSigma(sigma));
        }
        if !center.is_finite() {
            return Err(GeometryError::NonFinite.into());
        }
        let normalizer = match axis_aligned_rectangle(&support) {
            Some(b) => {
                let nx = NormalCdf::new(center.x, sigma).expect("valid sigma");
                let ny = NormalCdf::new(center.y, sigma).expect("valid sigma");
                (nx.cdf(b.max.x) - nx.cdf(b.min.x)) * (ny.cdf(b.max.y) - ny.cdf(b.min.y))
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_7a11);
                let normal = Normal::new(0.0, sigma).expect("valid sigma");
                let hits = (0..NORMALIZER_SAMPLES)
                    .filter(|_| {
                        let p = center + Point::new(normal.sample(&mut rng), normal.sample(&mut rng));
                        support.contains(p)
                    })
                    .count();
                hits as f64 / NORMALIZER_SAMPLES as f64
            }
        };
        if normalizer <= 0.0 {
            return Err(ProcessError::ZeroMass);
        }
        Ok(SpatialDensity {
            kind: DensityKind::TruncatedNormal { center, sigma },
            support,
            normalizer,
        })
    }

    pub fn grid(raster: GridRaster) -> Self {
        let b = raster.bbox();
        SpatialDensity {
            support: ConvexPolygon::rectangle(b.min.x, b.min.y, b.max.x, b.max.y),
            kind: DensityKind::Grid(raster),
            normalizer: 1.0,
        }
    }

    pub fn load_grid(path: &Path) -> Result<Self, ProcessError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::grid(GridRaster::parse(&text)?))
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn support(&self) -> &ConvexPolygon {
        &self.support
    }

    pub fn pdf(&self, p: Point) -> f64 {
        match &self.kind {
            DensityKind::Uniform => {
                if self.support.contains(p) {
                    1.0 / self.normalizer
                } else {
                    0.0
                }
            }
            DensityKind::TruncatedNormal { center, sigma } => {
                if !self.support.contains(p) {
                    return 0.0;
                }
                let s2 = sigma * sigma;
                let r2 = (p - *center).norm_squared();
                (-0.5 * r2 / s2).exp() / (std::f64::consts::TAU * s2 * self.normalizer)
            }
            DensityKind::Grid(g) => match g.cell_of(p) {
                Some((r, c)) => g.mass(r, c) / (g.cell_width() * g.cell_height()),
                None => 0.0,
            },
        }
    }

    /// Draws one target location.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point, ProcessError> {
        match &self.kind {
            DensityKind::Uniform => Ok(self.support.sample_uniform(rng)),
            DensityKind::TruncatedNormal { center, sigma } => {
                let normal = Normal::new(0.0, *sigma).expect("validated sigma");
                for _ in 0..MAX_REJECTION_DRAWS {
                    let p = *center + Point::new(normal.sample(rng), normal.sample(rng));
                    if self.support.contains(p) {
                        return Ok(p);
                    }
                }
                Err(ProcessError::RejectionExhausted(MAX_REJECTION_DRAWS))
            }
            DensityKind::Grid(g) => Ok(g.sample(rng)),
        }
    }
}

fn axis_aligned_rectangle(poly: &ConvexPolygon) -> Option<BoundingBox> {
    let b = poly.bounding_box();
    let on_corner = |v: &Point| (v.x == b.min.x || v.x == b.max.x) && (v.y == b.min.y || v.y == b.max.y);
    let v = poly.vertices();
    (v.len() == 4 && v.iter().all(on_corner) && (poly.area() - b.width() * b.height()).abs() <= 1e-12 * poly.area())
        .then_some(b)
}

/// Homogeneous Poisson arrivals in time with i.i.d. locations.
#[derive(Clone, Debug)]
pub struct ArrivalStream {
    rate: f64,
    density: SpatialDensity,
    time_rng: ChaCha8Rng,
    location_rng: ChaCha8Rng,
    gap: Option<Exp<f64>>,
    cursor: f64,
    pending: Option<f64>,
}

impl ArrivalStream {
    pub fn new(rate: f64, density: SpatialDensity, seed: u64) -> Result<Self, ProcessError> {
        Self::starting_at(rate, density, seed, 0.0)
    }

    pub fn starting_at(rate: f64, density: SpatialDensity, seed: u64, t0: f64) -> Result<Self, ProcessError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(ProcessError::InvalidRate(rate));
        }
        let gap = (rate > 0.0).then(|| Exp::new(rate).expect("positive rate"));
        Ok(ArrivalStream {
            rate,
            density,
            time_rng: concern_rng(seed, RngConcern::ArrivalTimes),
            location_rng: concern_rng(seed, RngConcern::Locations),
            gap,
            cursor: t0,
            pending: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn density(&self) -> &SpatialDensity {
        &self.density
    }

    /// Time of the next event, without consuming it.
    pub fn peek(&mut self) -> Option<f64> {
        let gap = self.gap.as_ref()?;
        if self.pending.is_none() {
            self.pending = Some(self.cursor + gap.sample(&mut self.time_rng));
        }
        self.pending
    }

    /// Consumes the next event and draws its location.
    pub fn next_event(&mut self) -> Result<Option<(f64, Point)>, ProcessError> {
        let Some(t) = self.peek() else {
            return Ok(None);
        };
        self.pending = None;
        self.cursor = t;
        let p = self.density.sample(&mut self.location_rng)?;
        Ok(Some((t, p)))
    }

    /// All events in `[t0, t1)`. The stream fast-forwards to `t0` if it is
    /// behind; an event beyond `t1` is kept for the next call.
    pub fn sample_arrivals(&mut self, t0: f64, t1: f64) -> Result<Vec<(f64, Point)>, ProcessError> {
        if !(t0 < t1) {
            return Err(ProcessError::EmptyInterval(t0, t1));
        }
        if self.cursor < t0 {
            self.cursor = t0;
            if self.pending.is_some_and(|t| t < t0) {
                self.pending = None;
            }
        }
        let mut out = Vec::new();
        while let Some(t) = self.peek() {
            if t >= t1 {
                break;
            }
            if let Some(ev) = self.next_event()? {
                out.push(ev);
            }
        }
        Ok(out)
    }
}
