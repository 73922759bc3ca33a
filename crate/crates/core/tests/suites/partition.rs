use dvr::partition::{in_voronoi_cell, multimedian_value, nearest_agent, voronoi_cells, DensityIntegrator};
use dvr::process::SpatialDensity;
use dvr::{ConvexPolygon, Point};
use proptest::prelude::*;

use super::{check, point_in, point_set, Check};

pub const CHECKS: &[Check] = &[
    ("circle_scan_matches_nearest_agent", circle_scan_matches_nearest_agent),
    ("cells_tile_the_workspace", cells_tile_the_workspace),
    ("cells_agree_with_nearest_agent", cells_agree_with_nearest_agent),
    ("multimedian_permutation_invariant", multimedian_permutation_invariant),
    ("multimedian_drops_when_agent_added", multimedian_drops_when_agent_added),
    ("grid_configuration_beats_random", grid_configuration_beats_random),
];

pub fn grid9() -> Vec<Point> {
    let mut v = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            v.push(Point::new((2 * i + 1) as f64 / 6.0, (2 * j + 1) as f64 / 6.0));
        }
    }
    v
}

pub fn circle_scan_matches_nearest_agent() {
    check(10_000, (point_set(1, 12), point_in(-0.2, 1.2)), |(positions, q)| {
        let nearest = nearest_agent(q, &positions).unwrap();
        for i in 0..positions.len() {
            prop_assert_eq!(in_voronoi_cell(i, q, &positions), nearest == i);
        }
        Ok(())
    });
}

fn workspace() -> impl Strategy<Value = ConvexPolygon> {
    prop_oneof![
        Just(ConvexPolygon::unit_square()),
        Just(ConvexPolygon::regular(Point::new(0.5, 0.5), 0.7, 7)),
        Just(ConvexPolygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.5, 1.0)]).unwrap()),
    ]
}

fn inside(ws: &ConvexPolygon, raw: Vec<Point>) -> Vec<Point> {
    // Map unit-square draws into the workspace by shrinking toward its centroid.
    let c = ws.centroid();
    raw.into_iter()
        .map(|p| {
            let mut q = p;
            while !ws.contains(q) {
                q = c + (q - c) * 0.5;
            }
            q
        })
        .collect()
}

pub fn cells_tile_the_workspace() {
    check(200, (workspace(), point_set(1, 25)), |(ws, raw)| {
        let gens = inside(&ws, raw);
        prop_assume!(voronoi_cells(&gens, &ws).is_ok());
        let t = voronoi_cells(&gens, &ws).unwrap();
        prop_assert!((t.total_area() - ws.area()).abs() <= 1e-6 * ws.area());
        for (g, c) in t.generators.iter().zip(&t.cells) {
            prop_assert!(c.contains_within(*g, 1e-9));
        }
        Ok(())
    });
}

pub fn cells_agree_with_nearest_agent() {
    check(
        100,
        (point_set(2, 15), proptest::collection::vec(point_in(0.0, 1.0), 50)),
        |(gens, probes)| {
            let ws = ConvexPolygon::unit_square();
            prop_assume!(voronoi_cells(&gens, &ws).is_ok());
            let t = voronoi_cells(&gens, &ws).unwrap();
            for q in probes {
                let i = nearest_agent(q, &gens).unwrap();
                prop_assert!(t.cells[i].contains_within(q, 1e-9));
            }
            Ok(())
        },
    );
}

pub fn multimedian_permutation_invariant() {
    let d = SpatialDensity::uniform_unit_square();
    let integ = DensityIntegrator::new(&d, 5_000, 11);
    check(
        50,
        point_set(2, 10).prop_flat_map(|b| (Just(b.clone()), Just(b).prop_shuffle())),
        |(a, b)| {
            let ha = multimedian_value(&a, &integ, d.support()).unwrap();
            let hb = multimedian_value(&b, &integ, d.support()).unwrap();
            prop_assert_eq!(ha, hb);
            Ok(())
        },
    );
}

pub fn multimedian_drops_when_agent_added() {
    let d = SpatialDensity::uniform_unit_square();
    let integ = DensityIntegrator::new(&d, 5_000, 12);
    check(50, (point_set(1, 10), point_in(0.0, 1.0)), |(a, extra)| {
        let before = multimedian_value(&a, &integ, d.support()).unwrap();
        let mut b = a.clone();
        b.push(extra);
        let after = multimedian_value(&b, &integ, d.support()).unwrap();
        prop_assert!(after.value <= before.value + 3.0 * before.stderr.max(after.stderr));
        Ok(())
    });
}

pub fn grid_configuration_beats_random() {
    let d = SpatialDensity::uniform_unit_square();
    let integ = DensityIntegrator::new(&d, 20_000, 13);
    let grid = multimedian_value(&grid9(), &integ, d.support()).unwrap();
    check(100, point_set(9, 9), |config| {
        let h = multimedian_value(&config, &integ, d.support()).unwrap();
        prop_assert!(
            grid.value <= h.value + 3.0 * grid.stderr.max(h.stderr),
            "{grid:?} vs {h:?}"
        );
        Ok(())
    });
}
