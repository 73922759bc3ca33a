//! Scenario files, command-line overrides, and the run and sweep drivers.
//!
//! A scenario is a line-oriented `key = value` document; `#` starts a
//! comment. Keys:
//!
//! | key | value |
//! |-----|-------|
//! | `workspace` | `unit_square` or `polygon x y, x y, ...` |
//! | `density` | `uniform`, `normal cx cy sigma` or `grid PATH` |
//! | `lambda` | arrival rate (required) |
//! | `agents` | agent count (required) |
//! | `policy` | `nc` or `sb` (required) |
//! | `horizon` | simulated time (required) |
//! | `initial_positions` | `random` or `x y; x y; ...` |
//! | `dt` | decision step, default 0.01 |
//! | `seeds` | `1, 2, 5` or `a..b` (half open), default `0` |
//! | `out` | output directory, default `out` |
//! | `metric_cadence` | steps between samples, default a tenth of the run |
//! | `integrator_budget` | Monte Carlo draws per diagnostic, default 200000 |
//! | `warmup_fraction` | default 0.1 |
//! | `sweep_lambda` | `0.5, 1, 2` or `geometric first last count` |
//! | `sweep_policies` | `nc, sb`; defaults to `policy` |
//! | `sweep_baseline` | `true` adds single-agent rows |
//!
//! Grid paths are relative to the scenario file. Command-line flags take
//! precedence over file keys.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{
    little_check, run, write_summary, write_targets_csv, write_trails_csv, EngineError, InitialPositions, RunMetrics,
    SimConfig, DEFAULT_DT, DEFAULT_WARMUP_FRACTION,
};
use crate::geometry::{ConvexPolygon, Point};
use crate::partition::DEFAULT_BUDGET;
use crate::policy::Policy;
use crate::process::{GridRaster, SpatialDensity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_PARSE: i32 = 2;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("scenario has no sweep grid (`sweep_lambda` is absent or empty)")]
    EmptySweep,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DensitySpec {
    Uniform,
    Normal { center: Point, sigma: f64 },
    Grid(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub lambdas: Vec<f64>,
    pub policies: Vec<Policy>,
    pub baseline: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub workspace: ConvexPolygon,
    pub density: DensitySpec,
    pub lambda: f64,
    pub agents: usize,
    pub policy: Policy,
    pub horizon: f64,
    pub initial_positions: InitialPositions,
    pub dt: f64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub metric_cadence: usize,
    pub integrator_budget: usize,
    pub warmup_fraction: f64,
    pub sweep_lambdas: Option<Vec<f64>>,
    pub sweep_policies: Option<Vec<Policy>>,
    pub sweep_baseline: bool,
}

/// Flag values that replace scenario keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub policy: Option<Policy>,
    pub lambda: Option<f64>,
    pub agents: Option<usize>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("invalid {what} `{}`", s.trim()))
}

fn parse_point(s: &str) -> Result<Point, String> {
    let f: Vec<&str> = s.split_whitespace().collect();
    if f.len() != 2 {
        return Err(format!("expected `x y`, found `{}`", s.trim()));
    }
    Point::try_new(parse_num(f[0], "coordinate")?, parse_num(f[1], "coordinate")?).map_err(|e| e.to_string())
}

fn parse_list<T, F: Fn(&str) -> Result<T, String>>(s: &str, sep: char, f: F) -> Result<Vec<T>, String> {
    s.split(sep).filter(|t| !t.trim().is_empty()).map(f).collect()
}

fn parse_seeds(v: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (parse_num(a, "seed")?, parse_num(b, "seed")?);
        if a >= b {
            return Err(format!("empty seed range {a}..{b}"));
        }
        return Ok((a..b).collect());
    }
    let seeds = parse_list(v, ',', |t| parse_num(t, "seed"))?;
    if seeds.is_empty() {
        return Err("empty seed list".into());
    }
    Ok(seeds)
}

fn parse_lambdas(v: &str) -> Result<Vec<f64>, String> {
    let mut words = v.split_whitespace();
    if words.next() == Some("geometric") {
        let rest: Vec<&str> = words.collect();
        if rest.len() != 3 {
            return Err("expected `geometric first last count`".into());
        }
        let a: f64 = parse_num(rest[0], "rate")?;
        let b: f64 = parse_num(rest[1], "rate")?;
        let n: usize = parse_num(rest[2], "count")?;
        if !(a > 0.0 && b > 0.0) {
            return Err("geometric grid needs positive endpoints".into());
        }
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n)
                .map(|k| {
                    if k + 1 == n {
                        b
                    } else {
                        a * (b / a).powf(k as f64 / (n - 1) as f64)
                    }
                })
                .collect(),
        });
    }
    parse_list(v, ',', |t| parse_num(t, "rate"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("invalid boolean `{other}`")),
    }
}

impl Scenario {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), overrides)
    }

    /// `base` resolves relative grid paths.
    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, ScenarioError> {
        let mut workspace = None;
        let mut density = None;
        let mut lambda = None;
        let mut agents = None;
        let mut policy = None;
        let mut horizon = None;
        let mut initial = None;
        let mut dt = None;
        let mut seeds = None;
        let mut out = None;
        let mut cadence = None;
        let mut budget = None;
        let mut warmup = None;
        let mut sweep_lambdas = None;
        let mut sweep_policies = None;
        let mut sweep_baseline = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ScenarioError::Line { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let r: Result<(), String> = (|| {
                match key {
                    "workspace" => {
                        workspace = Some(if value == "unit_square" {
                            ConvexPolygon::unit_square()
                        } else if let Some(rest) = value.strip_prefix("polygon") {
                            ConvexPolygon::new(parse_list(rest, ',', parse_point)?).map_err(|e| e.to_string())?
                        } else {
                            return Err(format!("unknown workspace `{value}`"));
                        })
                    }
                    "density" => {
                        let mut w = value.split_whitespace();
                        density = Some(match w.next() {
                            Some("uniform") => DensitySpec::Uniform,
                            Some("normal") => {
                                let f: Vec<&str> = w.collect();
                                if f.len() != 3 {
                                    return Err("expected `normal cx cy sigma`".into());
                                }
                                DensitySpec::Normal {
                                    center: parse_point(&format!("{} {}", f[0], f[1]))?,
                                    sigma: parse_num(f[2], "sigma")?,
                                }
                            }
                            Some("grid") => {
                                let rest = value["grid".len()..].trim();
                                if rest.is_empty() {
                                    return Err("expected `grid PATH`".into());
                                }
                                DensitySpec::Grid(base.join(rest))
                            }
                            _ => return Err(format!("unknown density `{value}`")),
                        })
                    }
                    "lambda" => lambda = Some(parse_num(value, "lambda")?),
                    "agents" => agents = Some(parse_num(value, "agent count")?),
                    "policy" => policy = Some(value.parse::<Policy>()?),
                    "horizon" => horizon = Some(parse_num(value, "horizon")?),
                    "initial_positions" => {
                        initial = Some(if value == "random" {
                            InitialPositions::Random
                        } else {
                            InitialPositions::Explicit(parse_list(value, ';', parse_point)?)
                        })
                    }
                    "dt" => dt = Some(parse_num(value, "dt")?),
                    "seeds" => seeds = Some(parse_seeds(value)?),
                    "out" => out = Some(PathBuf::from(value)),
                    "metric_cadence" => cadence = Some(parse_num(value, "cadence")?),
                    "integrator_budget" => budget = Some(parse_num(value, "budget")?),
                    "warmup_fraction" => warmup = Some(parse_num(value, "warm-up fraction")?),
                    "sweep_lambda" => sweep_lambdas = Some(parse_lambdas(value)?),
                    "sweep_policies" => sweep_policies = Some(parse_list(value, ',', |t| t.parse::<Policy>())?),
                    "sweep_baseline" => sweep_baseline = Some(parse_bool(value)?),
                    other => return Err(format!("unknown key `{other}`")),
                }
                Ok(())
            })();
            r.map_err(err)?;
        }

        Ok(Scenario {
            workspace: workspace.unwrap_or_else(ConvexPolygon::unit_square),
            density: density.unwrap_or(DensitySpec::Uniform),
            lambda: overrides.lambda.or(lambda).ok_or(ScenarioError::Missing("lambda"))?,
            agents: overrides.agents.or(agents).ok_or(ScenarioError::Missing("agents"))?,
            policy: overrides.policy.or(policy).ok_or(ScenarioError::Missing("policy"))?,
            horizon: overrides.horizon.or(horizon).ok_or(ScenarioError::Missing("horizon"))?,
            initial_positions: initial.unwrap_or(InitialPositions::Random),
            dt: overrides.dt.or(dt).unwrap_or(DEFAULT_DT),
            seeds: overrides.seed.map(|s| vec![s]).or(seeds).unwrap_or_else(|| vec![0]),
            out: overrides.out.clone().or(out).unwrap_or_else(|| PathBuf::from("out")),
            metric_cadence: cadence.unwrap_or(0),
            integrator_budget: budget.unwrap_or(DEFAULT_BUDGET),
            warmup_fraction: warmup.unwrap_or(DEFAULT_WARMUP_FRACTION),
            sweep_lambdas,
            sweep_policies,
            sweep_baseline: sweep_baseline.unwrap_or(false),
        })
    }

    pub fn build_density(&self) -> Result<SpatialDensity, ScenarioError> {
        let invalid = |e: String| ScenarioError::Invalid(e);
        match &self.density {
            DensitySpec::Uniform => Ok(SpatialDensity::uniform(self.workspace.clone())),
            DensitySpec::Normal { center, sigma } => {
                SpatialDensity::truncated_normal(*center, *sigma, self.workspace.clone())
                    .map_err(|e| invalid(e.to_string()))
            }
            DensitySpec::Grid(path) => {
                let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
                    path: path.clone(),
                    source,
                })?;
                let raster = GridRaster::parse(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                Ok(SpatialDensity::grid(raster))
            }
        }
    }

    /// Engine configuration for one run.
    pub fn config(&self, density: &SpatialDensity, seed: u64) -> SimConfig {
        SimConfig {
            workspace: self.workspace.clone(),
            density: density.clone(),
            lambda: self.lambda,
            agents: self.agents,
            initial_positions: self.initial_positions.clone(),
            policy: self.policy,
            dt: self.dt,
            horizon: self.horizon,
            seed,
            metric_cadence: self.metric_cadence,
            integrator_budget: self.integrator_budget,
            warmup_fraction: self.warmup_fraction,
        }
    }

    pub fn sweep(&self) -> Result<Sweep, ScenarioError> {
        let lambdas = self.sweep_lambdas.clone().unwrap_or_default();
        let policies = self.sweep_policies.clone().unwrap_or_else(|| vec![self.policy]);
        if lambdas.is_empty() || policies.is_empty() {
            return Err(ScenarioError::EmptySweep);
        }
        Ok(Sweep {
            lambdas,
            policies,
            baseline: self.sweep_baseline,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, EngineError> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs every seed and writes `targets_seed{N}.csv`, `trails_seed{N}.csv`
/// and `summary_seed{N}.txt` under the output directory.
pub fn execute_scenario(scenario: &Scenario) -> Result<Vec<(u64, RunMetrics)>, EngineError> {
    let density = scenario
        .build_density()
        .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
    fs::create_dir_all(&scenario.out)?;
    let results: Vec<Result<(u64, RunMetrics), EngineError>> = scenario
        .seeds
        .par_iter()
        .map(|&seed| {
            let config = scenario.config(&density, seed);
            let output = run(config.clone())?;
            let dir = &scenario.out;
            let mut w = create(&dir.join(format!("targets_seed{seed}.csv")))?;
            write_targets_csv(&mut w, &output.targets)?;
            w.flush()?;
            let mut w = create(&dir.join(format!("trails_seed{seed}.csv")))?;
            write_trails_csv(&mut w, &output.trails)?;
            w.flush()?;
            let mut w = create(&dir.join(format!("summary_seed{seed}.txt")))?;
            write_summary(&mut w, &config, &output.metrics)?;
            w.flush()?;
            Ok((seed, output.metrics))
        })
        .collect();
    results.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    /// `nc`, `sb`, or `single` for the one-agent baseline.
    pub policy: String,
    pub seed: u64,
    pub mean_wait: Option<f64>,
    pub little_ratio: Option<f64>,
    pub hm_final: Option<f64>,
    pub mvt_residual: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (rate, policy, seed), plus baseline rows when requested.
pub fn execute_sweep(scenario: &Scenario) -> Result<Vec<SweepRow>, EngineError> {
    let sweep = scenario
        .sweep()
        .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
    let density = scenario
        .build_density()
        .map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
    let mut jobs: Vec<(f64, Option<Policy>, u64)> = Vec::new();
    for &lambda in &sweep.lambdas {
        for &p in &sweep.policies {
            for &seed in &scenario.seeds {
                jobs.push((lambda, Some(p), seed));
            }
        }
        if sweep.baseline {
            for &seed in &scenario.seeds {
                jobs.push((lambda, None, seed));
            }
        }
    }
    let rows: Vec<Result<SweepRow, EngineError>> = jobs
        .par_iter()
        .map(|&(lambda, policy, seed)| {
            let mut config = scenario.config(&density, seed);
            config.lambda = lambda;
            match policy {
                Some(p) => config.policy = p,
                None => {
                    config.agents = 1;
                    config.policy = Policy::Nc;
                    if let InitialPositions::Explicit(ps) = &config.initial_positions {
                        config.initial_positions = InitialPositions::Explicit(ps[..1].to_vec());
                    }
                }
            }
            let out = run(config)?;
            let m = &out.metrics;
            let last = m.final_diagnostic();
            Ok(SweepRow {
                lambda,
                policy: policy.map_or("single".to_string(), |p| p.label().to_string()),
                seed,
                mean_wait: m.mean_wait,
                little_ratio: little_check(m).ok(),
                hm_final: last.map(|d| d.hm.value),
                mvt_residual: last.map(|d| d.mvt),
            })
        })
        .collect();
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_, _>>()?;
    fs::create_dir_all(&scenario.out)?;
    let mut w = create(&scenario.out.join("sweep.csv"))?;
    writeln!(w, "lambda,policy,seed,mean_wait,little_ratio,hm_final,mvt_residual")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.lambda,
            r.policy,
            r.seed,
            fmt_opt(r.mean_wait),
            fmt_opt(r.little_ratio),
            fmt_opt(r.hm_final),
            fmt_opt(r.mvt_residual)
        )?;
    }
    w.flush()?;
    Ok(rows)
}

/// Loads, runs and reports; returns the process exit code.
pub fn run_scenario(path: &Path, overrides: &Overrides) -> i32 {
    let scenario = match Scenario::load(path, overrides) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_PARSE;
        }
    };
    match execute_scenario(&scenario) {
        Ok(results) => {
            for (seed, m) in results {
                println!(
                    "seed {seed}: serviced {} mean_wait {} little_ratio {} unstable {}",
                    m.total_serviced,
                    fmt_opt(m.mean_wait),
                    fmt_opt(little_check(&m).ok()),
                    m.unstable
                );
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Loads a scenario with a sweep grid and writes `sweep.csv`; returns the
/// process exit code.
pub fn run_sweep(path: &Path, overrides: &Overrides) -> i32 {
    let scenario = match Scenario::load(path, overrides).and_then(|s| s.sweep().map(|_| s)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_PARSE;
        }
    };
    match execute_sweep(&scenario) {
        Ok(rows) => {
            println!(
                "{} rows written to {}",
                rows.len(),
                scenario.out.join("sweep.csv").display()
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
