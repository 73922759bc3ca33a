//! Discrete Weber function and its minimizer (the Fermat–Torricelli point).
//!
//! Damped Weiszfeld iteration with an exact order-statistic solve for
//! collinear sets, datum optimality tests, restarts off non-optimal data and
//! a final Newton polish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::polygon::{convex_hull, BoundingBox};
use super::{vers, GeometryError, Point};

/// Slack on the absorbing condition `‖Σ vers(q0 − q)‖ ≤ 1`.
pub const ABSORBING_TOLERANCE: f64 = 1e-12;
/// An iterate this close to a datum is treated as sitting on it.
pub const DATUM_HIT_DISTANCE: f64 = 1e-12;
/// Displacement used to leave a non-optimal datum.
pub const DATUM_RESTART_OFFSET: f64 = 1e-8;
/// Cross products below this times `diam²` count as collinear.
pub const COLLINEAR_TOLERANCE: f64 = 1e-12;

const DATUM_RECHECK_PERIOD: usize = 16;
const MAX_RESTARTS: usize = 64;
const MAX_BACKTRACKS: usize = 60;
const NEWTON_STEPS: usize = 8;

/// Upper bound on the unit-vector-sum residual of a non-anchored solution
/// of `n` points.
pub fn stationarity_tolerance(n: usize) -> f64 {
    1e-6 * n.max(1) as f64
}

/// `Σ ‖p − e‖` over the set; zero for an empty set.
pub fn weber_value(p: Point, points: &[Point]) -> f64 {
    points.iter().map(|&e| p.distance(e)).sum()
}

fn unit_vector_sum(p: Point, points: &[Point]) -> Point {
    let mut s = Point::ORIGIN;
    for &q in points {
        s += vers(p - q);
    }
    s
}

/// Absorbing condition for a member `q0`: one copy of `q0` is removed and the
/// unit vectors `vers(q0 − q)` of the rest are summed (remaining copies of
/// `q0` contribute zero). Returns `(magnitude ≤ 1, magnitude)`.
pub fn absorbing_check(q0: Point, points: &[Point]) -> Result<(bool, f64), GeometryError> {
    if !points.contains(&q0) {
        return Err(GeometryError::NotMember { x: q0.x, y: q0.y });
    }
    let magnitude = unit_vector_sum(q0, points).norm();
    Ok((magnitude <= 1.0 + ABSORBING_TOLERANCE, magnitude))
}

/// Membership in the solution set `{p : ‖Σ vers(p − q)‖ ≤ 1}`.
pub fn solution_set_contains(p: Point, points: &[Point]) -> Result<bool, GeometryError> {
    solution_set_contains_within(p, points, 0.0)
}

/// Same as [`solution_set_contains`] with the bound relaxed to `1 + tol`.
pub fn solution_set_contains_within(p: Point, points: &[Point], tol: f64) -> Result<bool, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    Ok(unit_vector_sum(p, points).norm() <= 1.0 + tol)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FtResult {
    pub point: Point,
    pub iterations: usize,
    /// Norm of the unit-vector sum at `point`. For an anchored result the
    /// datum's own copies are left out and the norm is divided by their
    /// multiplicity, so it never exceeds one.
    pub residual: f64,
    /// The returned point is a member of the input set.
    pub anchored: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct FtSolver {
    pub max_iterations: usize,
    /// Converged once a step is shorter than this times `1 + diam(B)`.
    pub step_tolerance: f64,
}

impl Default for FtSolver {
    fn default() -> Self {
        FtSolver {
            max_iterations: 10_000,
            step_tolerance: 1e-9,
        }
    }
}

/// Minimizer of the Weber function of `points`, with `tie_anchor` choosing
/// among minimizers when they are not unique (and standing in for an empty
/// set).
pub fn ft_point(points: &[Point], tie_anchor: Point) -> FtResult {
    FtSolver::default().solve(points, tie_anchor, None)
}

struct DatumTest {
    optimal: bool,
    gradient: Point,
    multiplicity: usize,
}

fn datum_test(points: &[Point], c: Point) -> DatumTest {
    let mut gradient = Point::ORIGIN;
    let mut multiplicity = 0;
    for &q in points {
        if q == c {
            multiplicity += 1;
        } else {
            gradient += vers(c - q);
        }
    }
    DatumTest {
        optimal: multiplicity > 0 && gradient.norm() <= multiplicity as f64 + ABSORBING_TOLERANCE,
        gradient,
        multiplicity,
    }
}

fn anchored_at(c: Point, test: &DatumTest, iterations: usize) -> FtResult {
    FtResult {
        point: c,
        iterations,
        residual: test.gradient.norm() / test.multiplicity as f64,
        anchored: true,
    }
}

struct Pass {
    weber: f64,
    sum_w: f64,
    sum_wp: Point,
    nearest: usize,
    nearest_d: f64,
}

fn weiszfeld_pass(points: &[Point], y: Point) -> Pass {
    let mut pass = Pass {
        weber: 0.0,
        sum_w: 0.0,
        sum_wp: Point::ORIGIN,
        nearest: 0,
        nearest_d: f64::INFINITY,
    };
    for (i, &q) in points.iter().enumerate() {
        let d = y.distance(q);
        pass.weber += d;
        if d < pass.nearest_d {
            pass.nearest_d = d;
            pass.nearest = i;
        }
        if d > 0.0 {
            let w = 1.0 / d;
            pass.sum_w += w;
            pass.sum_wp += q * w;
        }
    }
    pass
}

fn nearest_index(points: &[Point], y: Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &q) in points.iter().enumerate() {
        let d = (q - y).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn centroid(points: &[Point]) -> Point {
    let mut c = Point::ORIGIN;
    for &p in points {
        c += p;
    }
    c * (1.0 / points.len() as f64)
}

impl FtSolver {
    /// Solves from `warm_start` when given, else from the centroid.
    pub fn solve(&self, points: &[Point], tie_anchor: Point, warm_start: Option<Point>) -> FtResult {
        self.solve_inner(points, tie_anchor, warm_start, None)
    }

    /// Like [`FtSolver::solve`], also returning the Weber value of every
    /// accepted Weiszfeld iterate.
    pub fn solve_traced(&self, points: &[Point], tie_anchor: Point, warm_start: Option<Point>) -> (FtResult, Vec<f64>) {
        let mut trace = Vec::new();
        let r = self.solve_inner(points, tie_anchor, warm_start, Some(&mut trace));
        (r, trace)
    }

    fn solve_inner(
        &self,
        points: &[Point],
        tie_anchor: Point,
        warm_start: Option<Point>,
        mut trace: Option<&mut Vec<f64>>,
    ) -> FtResult {
        if points.is_empty() {
            return FtResult {
                point: tie_anchor,
                iterations: 0,
                residual: 0.0,
                anchored: false,
            };
        }
        let bbox = BoundingBox::of(points).expect("nonempty");
        let diam = bbox.diagonal();
        if diam == 0.0 {
            let t = datum_test(points, points[0]);
            return anchored_at(points[0], &t, 0);
        }
        if let Some(r) = collinear_median(points, tie_anchor, diam) {
            return r;
        }

        let start = warm_start.unwrap_or_else(|| centroid(points));
        let mut candidates = vec![points[nearest_index(points, start)]];
        if let Some(&last) = points.last() {
            if last != candidates[0] {
                candidates.push(last);
            }
        }
        for c in candidates {
            let t = datum_test(points, c);
            if t.optimal {
                return anchored_at(c, &t, 0);
            }
        }

        let tol = self.step_tolerance * (1.0 + diam);
        let mut y = start;
        let mut accepted: Option<(Point, f64)> = None;
        let mut iterations = 0;
        let mut restarts = 0;
        let mut backtracks = 0;
        while iterations < self.max_iterations {
            iterations += 1;
            let pass = weiszfeld_pass(points, y);
            if pass.nearest_d <= DATUM_HIT_DISTANCE {
                let c = points[pass.nearest];
                let t = datum_test(points, c);
                if t.optimal {
                    return anchored_at(c, &t, iterations);
                }
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    break;
                }
                y = c - vers(t.gradient) * DATUM_RESTART_OFFSET;
                continue;
            }
            if let Some((prev, w_prev)) = accepted {
                if pass.weber > w_prev + 1e-14 * w_prev {
                    backtracks += 1;
                    if backtracks > MAX_BACKTRACKS || (y - prev).norm() <= tol {
                        y = prev;
                        break;
                    }
                    y = prev + (y - prev) * 0.5;
                    continue;
                }
            }
            accepted = Some((y, pass.weber));
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(pass.weber);
            }
            if iterations % DATUM_RECHECK_PERIOD == 0 {
                let c = points[pass.nearest];
                let t = datum_test(points, c);
                if t.optimal {
                    return anchored_at(c, &t, iterations);
                }
            }
            let next = pass.sum_wp * (1.0 / pass.sum_w);
            let step = (next - y).norm();
            y = next;
            if step <= tol {
                break;
            }
        }

        let c = points[nearest_index(points, y)];
        let t = datum_test(points, c);
        if t.optimal {
            return anchored_at(c, &t, iterations);
        }
        y = newton_polish(points, y, diam);
        FtResult {
            point: y,
            iterations,
            residual: unit_vector_sum(y, points).norm(),
            anchored: false,
        }
    }
}

/// Newton refinement of a smooth interior iterate. A step is kept only if it
/// does not raise the Weber value.
fn newton_polish(points: &[Point], mut y: Point, diam: f64) -> Point {
    let mut w = weber_value(y, points);
    for _ in 0..NEWTON_STEPS {
        let (mut g, mut hxx, mut hxy, mut hyy) = (Point::ORIGIN, 0.0, 0.0, 0.0);
        for &q in points {
            let v = y - q;
            let d = v.norm();
            if d <= DATUM_HIT_DISTANCE {
                return y;
            }
            let u = v * (1.0 / d);
            g += u;
            hxx += (1.0 - u.x * u.x) / d;
            hxy -= u.x * u.y / d;
            hyy += (1.0 - u.y * u.y) / d;
        }
        let det = hxx * hyy - hxy * hxy;
        if !(det > 0.0) {
            return y;
        }
        let step = Point::new((hyy * g.x - hxy * g.y) / det, (hxx * g.y - hxy * g.x) / det);
        let next = y - step;
        let w_next = weber_value(next, points);
        if !(w_next <= w) {
            return y;
        }
        y = next;
        w = w_next;
        if step.norm() <= 1e-15 * (1.0 + diam) {
            break;
        }
    }
    y
}

/// Exact minimizer for sets lying on one line; `None` when the set is not
/// collinear.
fn collinear_median(points: &[Point], tie_anchor: Point, diam: f64) -> Option<FtResult> {
    let a = points[0];
    let b = points[nearest_far(points, a)];
    let e = b - a;
    let limit = COLLINEAR_TOLERANCE * diam * diam;
    if points.iter().any(|&q| e.cross(q - a).abs() > limit) {
        return None;
    }
    let len = e.norm();
    let dir = e * (1.0 / len);
    let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, &q)| ((q - a).dot(dir), i)).collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let n = points.len();
    let datum = |idx: usize| {
        let c = points[idx];
        let t = datum_test(points, c);
        anchored_at(c, &t, 0)
    };
    if n % 2 == 1 {
        return Some(datum(order[n / 2].1));
    }
    let (t_lo, lo) = order[n / 2 - 1];
    let (t_hi, hi) = order[n / 2];
    if points[lo] == points[hi] || t_lo >= t_hi {
        return Some(datum(lo));
    }
    let t = (tie_anchor - a).dot(dir);
    if t <= t_lo {
        return Some(datum(lo));
    }
    if t >= t_hi {
        return Some(datum(hi));
    }
    let s = (t - t_lo) / (t_hi - t_lo);
    let p = points[lo] + (points[hi] - points[lo]) * s;
    Some(FtResult {
        point: p,
        iterations: 0,
        residual: unit_vector_sum(p, points).norm(),
        anchored: false,
    })
}

fn nearest_far(points: &[Point], a: Point) -> usize {
    let mut best = 0;
    let mut best_d = -1.0;
    for (i, &q) in points.iter().enumerate() {
        let d = (q - a).norm_squared();
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Monte Carlo estimate of the diameter of the solution set of `points`.
///
/// Probes are drawn uniformly in the bounding box of the set inflated by its
/// diameter (by one unit for a single distinct point, whose solution set is
/// the whole plane). The FT point is always kept; the result is the largest
/// distance between kept points.
pub fn solution_set_diameter_estimate(points: &[Point], probe_count: usize, seed: u64) -> Result<f64, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    if probe_count < 2 {
        return Err(GeometryError::TooFewProbes(probe_count));
    }
    let diam = point_diameter(points);
    let margin = if diam > 0.0 { diam } else { 1.0 };
    let bbox = BoundingBox::of(points).expect("nonempty").inflated(margin);
    let ft = ft_point(points, bbox.min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = vec![ft.point];
    for _ in 0..probe_count {
        let p = bbox.sample(&mut rng);
        if unit_vector_sum(p, points).norm() <= 1.0 {
            kept.push(p);
        }
    }
    Ok(point_diameter(&kept))
}

fn point_diameter(points: &[Point]) -> f64 {
    let hull = convex_hull(points);
    let mut d: f64 = 0.0;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            d = d.max(a.distance(*b));
        }
    }
    d
}
