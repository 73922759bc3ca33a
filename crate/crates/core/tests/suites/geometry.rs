use dvr::geometry::{
    absorbing_check, ft_point, hull_contains, solution_set_contains_within, solution_set_diameter_estimate,
    stationarity_tolerance, weber_value, FtSolver,
};
use dvr::Point;
use proptest::prelude::*;

use super::{check, point_in, point_set, Check};

pub const CHECKS: &[Check] = &[
    ("ft_translation_equivariance", ft_translation_equivariance),
    ("ft_rotation_equivariance", ft_rotation_equivariance),
    ("ft_scaling_equivariance", ft_scaling_equivariance),
    ("ft_beats_random_probes", ft_beats_random_probes),
    ("anchored_iff_member", anchored_iff_member),
    ("residual_bounds", residual_bounds),
    ("ft_in_convex_hull", ft_in_convex_hull),
    ("weiszfeld_descent_is_monotone", weiszfeld_descent_is_monotone),
    ("new_target_stays_in_solution_set", new_target_stays_in_solution_set),
    ("permutation_invariance", permutation_invariance),
    (
        "diameter_estimate_shrinks_with_samples",
        diameter_estimate_shrinks_with_samples,
    ),
];

fn close(a: Point, b: Point, tol: f64) -> bool {
    a.distance(b) <= tol
}

pub fn ft_translation_equivariance() {
    check(200, (point_set(3, 30), point_in(-5.0, 5.0)), |(b, v)| {
        let anchor = Point::new(0.5, 0.5);
        let base = ft_point(&b, anchor).point;
        let moved: Vec<Point> = b.iter().map(|&q| q + v).collect();
        let shifted = ft_point(&moved, anchor + v).point;
        prop_assert!(close(shifted, base + v, 1e-7), "{shifted} vs {}", base + v);
        Ok(())
    });
}

pub fn ft_rotation_equivariance() {
    check(200, (point_set(3, 30), 0.0..std::f64::consts::TAU), |(b, a)| {
        let anchor = Point::new(0.5, 0.5);
        let base = ft_point(&b, anchor).point;
        let turned: Vec<Point> = b.iter().map(|q| q.rotated(a)).collect();
        let r = ft_point(&turned, anchor.rotated(a)).point;
        prop_assert!(close(r, base.rotated(a), 1e-7), "{r} vs {}", base.rotated(a));
        Ok(())
    });
}

pub fn ft_scaling_equivariance() {
    check(200, (point_set(3, 30), 0.1..10.0f64), |(b, k)| {
        let anchor = Point::new(0.5, 0.5);
        let base = ft_point(&b, anchor).point;
        let scaled: Vec<Point> = b.iter().map(|&q| q * k).collect();
        let r = ft_point(&scaled, anchor * k).point;
        prop_assert!(close(r, base * k, 1e-7 * k), "{r} vs {}", base * k);
        Ok(())
    });
}

pub fn ft_beats_random_probes() {
    let probes = proptest::collection::vec(point_in(-0.5, 1.5), 100);
    check(200, (point_set(1, 50), probes), |(b, probes)| {
        let w = weber_value(ft_point(&b, Point::ORIGIN).point, &b);
        for p in probes {
            prop_assert!(w <= weber_value(p, &b) + 1e-6 * b.len() as f64);
        }
        Ok(())
    });
}

/// Sets with deliberate duplicates and a few far points, so that data-point
/// minimizers occur often.
fn clustered_set() -> impl Strategy<Value = Vec<Point>> {
    (point_set(1, 6), 1usize..6, point_set(0, 6)).prop_map(|(core, copies, extra)| {
        let mut b = Vec::new();
        for _ in 0..copies {
            b.push(core[0]);
        }
        b.extend(core);
        b.extend(extra.into_iter().map(|q| q * 3.0));
        b
    })
}

pub fn anchored_iff_member() {
    check(300, prop_oneof![point_set(1, 20), clustered_set()], |b| {
        let r = ft_point(&b, Point::new(0.3, 0.3));
        prop_assert_eq!(r.anchored, b.contains(&r.point));
        if r.anchored {
            prop_assert!(absorbing_check(r.point, &b).is_ok());
        }
        Ok(())
    });
}

pub fn residual_bounds() {
    check(300, prop_oneof![point_set(1, 40), clustered_set()], |b| {
        let r = ft_point(&b, Point::new(0.3, 0.3));
        prop_assert!(r.residual <= 1.0 + 1e-9, "{r:?}");
        if !r.anchored {
            prop_assert!(r.residual <= stationarity_tolerance(b.len()), "{r:?}");
        }
        Ok(())
    });
}

pub fn ft_in_convex_hull() {
    check(300, prop_oneof![point_set(1, 40), clustered_set()], |b| {
        let r = ft_point(&b, Point::new(7.0, -3.0));
        prop_assert!(hull_contains(&b, r.point, 1e-9), "{r:?}");
        Ok(())
    });
}

pub fn weiszfeld_descent_is_monotone() {
    check(200, (point_set(3, 40), point_in(-1.0, 2.0)), |(b, start)| {
        let (_, trace) = FtSolver::default().solve_traced(&b, Point::ORIGIN, Some(start));
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
        }
        Ok(())
    });
}

/// The new minimizer lies in the solution set of the old set unless it sits
/// on one of the old data points, where the unit-vector sum can reach two.
pub fn new_target_stays_in_solution_set() {
    check(300, (point_set(3, 30), point_in(-0.5, 1.5)), |(b, e)| {
        let mut grown = b.clone();
        grown.push(e);
        let r = ft_point(&grown, e);
        prop_assume!(!(r.anchored && r.point != e));
        prop_assert!(solution_set_contains_within(r.point, &b, 1e-6).unwrap(), "{r:?}");
        if solution_set_contains_within(e, &b, -1e-9).unwrap() {
            prop_assert_eq!(r.point, e);
        }
        Ok(())
    });
}

pub fn permutation_invariance() {
    check(
        100,
        point_set(3, 30).prop_flat_map(|b| (Just(b.clone()), Just(b).prop_shuffle())),
        |(a, b)| {
            let pa = ft_point(&a, Point::ORIGIN).point;
            let pb = ft_point(&b, Point::ORIGIN).point;
            prop_assert!(close(pa, pb, 1e-8));
            Ok(())
        },
    );
}

pub fn diameter_estimate_shrinks_with_samples() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let density = dvr::process::SpatialDensity::uniform_unit_square();
    let all: Vec<Point> = (0..2048).map(|_| density.sample(&mut rng).unwrap()).collect();
    let schedule = [8, 32, 128, 512, 2048];
    let d: Vec<f64> = schedule
        .iter()
        .map(|&n| solution_set_diameter_estimate(&all[..n], 20_000, 3).unwrap())
        .collect();
    for w in d.windows(2) {
        assert!(w[1] <= w[0], "{d:?}");
    }
    assert!(d[4] < 0.1 * d[0], "{d:?}");
}
