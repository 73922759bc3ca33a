use dvr::process::{concern_rng, ArrivalStream, RngConcern, SpatialDensity};
use dvr::{ConvexPolygon, Point};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{check, Check};

pub const CHECKS: &[Check] = &[
    ("uniform_locations_pass_chi_square", uniform_locations_pass_chi_square),
    ("normal_locations_pass_chi_square", normal_locations_pass_chi_square),
    ("mean_count_matches_rate", mean_count_matches_rate),
    ("disjoint_counts_uncorrelated", disjoint_counts_uncorrelated),
    (
        "merged_streams_have_exponential_gaps",
        merged_streams_have_exponential_gaps,
    ),
    ("streams_are_reproducible", streams_are_reproducible),
    ("chunked_sampling_matches_whole", chunked_sampling_matches_whole),
];

const BINS: usize = 10;
const DRAWS: usize = 100_000;

fn chi_square_p(density: &SpatialDensity, expected: &[f64], seed: u64) -> f64 {
    let mut rng = concern_rng(seed, RngConcern::Locations);
    let mut counts = vec![0usize; BINS * BINS];
    for _ in 0..DRAWS {
        let p = density.sample(&mut rng).unwrap();
        let i = ((p.x * BINS as f64) as usize).min(BINS - 1);
        let j = ((p.y * BINS as f64) as usize).min(BINS - 1);
        counts[j * BINS + i] += 1;
    }
    let stat: f64 = counts
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((BINS * BINS - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

pub fn uniform_locations_pass_chi_square() {
    let d = SpatialDensity::uniform_unit_square();
    let expected = vec![DRAWS as f64 / (BINS * BINS) as f64; BINS * BINS];
    let p = chi_square_p(&d, &expected, 1);
    assert!(p > 0.001, "p = {p}");
}

pub fn normal_locations_pass_chi_square() {
    let (mu, sigma) = (0.25, 0.25);
    let d = SpatialDensity::truncated_normal(Point::new(mu, mu), sigma, ConvexPolygon::unit_square()).unwrap();
    let n = Normal::new(mu, sigma).unwrap();
    let edges: Vec<f64> = (0..=BINS).map(|k| n.cdf(k as f64 / BINS as f64)).collect();
    let axis: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    let total: f64 = axis.iter().sum::<f64>().powi(2);
    let mut expected = Vec::with_capacity(BINS * BINS);
    for j in 0..BINS {
        for i in 0..BINS {
            expected.push(DRAWS as f64 * axis[i] * axis[j] / total);
        }
    }
    let p = chi_square_p(&d, &expected, 2);
    assert!(p > 0.001, "p = {p}");
}

pub fn mean_count_matches_rate() {
    let (rate, horizon) = (0.5, 1e4);
    let total: usize = (0..100)
        .map(|seed| {
            let mut s = ArrivalStream::new(rate, SpatialDensity::uniform_unit_square(), seed).unwrap();
            s.sample_arrivals(0.0, horizon).unwrap().len()
        })
        .sum();
    let mean = total as f64 / 100.0;
    let expect = rate * horizon;
    assert!((mean - expect).abs() <= 3.0 * expect.sqrt(), "mean {mean}");
}

pub fn disjoint_counts_uncorrelated() {
    let (a, b): (Vec<f64>, Vec<f64>) = (0..1000)
        .map(|seed| {
            let mut s = ArrivalStream::new(5.0, SpatialDensity::uniform_unit_square(), seed).unwrap();
            let first = s.sample_arrivals(0.0, 10.0).unwrap().len() as f64;
            let second = s.sample_arrivals(10.0, 20.0).unwrap().len() as f64;
            (first, second)
        })
        .unzip();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let rho = cov / (va * vb).sqrt();
    assert!(rho.abs() < 0.05, "rho = {rho}");
}

/// Asymptotic Kolmogorov tail probability.
fn kolmogorov_p(n: usize, d: f64) -> f64 {
    let t = (n as f64).sqrt() * d;
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * t * t).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn merged_streams_have_exponential_gaps() {
    let (l1, l2, horizon) = (1.0, 2.0, 2000.0);
    let mut s1 = ArrivalStream::new(l1, SpatialDensity::uniform_unit_square(), 40).unwrap();
    let mut s2 = ArrivalStream::new(l2, SpatialDensity::uniform_unit_square(), 41).unwrap();
    let mut times: Vec<f64> = s1
        .sample_arrivals(0.0, horizon)
        .unwrap()
        .into_iter()
        .chain(s2.sample_arrivals(0.0, horizon).unwrap())
        .map(|(t, _)| t)
        .collect();
    times.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len();
    let rate = l1 + l2;
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let f = 1.0 - (-rate * g).exp();
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    let p = kolmogorov_p(n, d);
    assert!(p > 0.001, "D = {d}, p = {p}");
}

pub fn streams_are_reproducible() {
    check(50, (any::<u64>(), 0.1..20.0f64), |(seed, rate)| {
        let make = || ArrivalStream::new(rate, SpatialDensity::uniform_unit_square(), seed).unwrap();
        let a = make().sample_arrivals(0.0, 50.0).unwrap();
        let b = make().sample_arrivals(0.0, 50.0).unwrap();
        prop_assert_eq!(&a, &b);
        let mut other = ArrivalStream::new(rate, SpatialDensity::uniform_unit_square(), seed ^ 1).unwrap();
        let c = other.sample_arrivals(0.0, 50.0).unwrap();
        prop_assert_ne!(a, c);
        Ok(())
    });
}

pub fn chunked_sampling_matches_whole() {
    check(
        50,
        (any::<u64>(), proptest::collection::vec(0.1..10.0f64, 1..8)),
        |(seed, cuts)| {
            let make = || ArrivalStream::new(3.0, SpatialDensity::uniform_unit_square(), seed).unwrap();
            let mut edges = vec![0.0];
            for c in cuts {
                edges.push(edges.last().unwrap() + c);
            }
            let whole = make().sample_arrivals(0.0, *edges.last().unwrap()).unwrap();
            let mut s = make();
            let mut pieces = Vec::new();
            for w in edges.windows(2) {
                pieces.extend(s.sample_arrivals(w[0], w[1]).unwrap());
            }
            prop_assert_eq!(whole, pieces);
            Ok(())
        },
    );
}
