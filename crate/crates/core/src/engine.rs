//! Fixed-step simulation with exact capture times.

use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::{ConvexPolygon, Point};
use crate::partition::{
    multimedian_value, mvt_residual, separate_coincident, DensityIntegrator, Estimate, PartitionError, DEFAULT_BUDGET,
};
use crate::policy::{nc_goal, sb_goal, AgentState, Goal, Policy};
use crate::process::{concern_rng, ArrivalStream, ProcessError, RngConcern, SpatialDensity};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
/// Serviced targets required in the window before the Little ratio is
/// reported.
pub const LITTLE_MIN_SERVICED: usize = 100;
/// Fraction of window arrivals left unserviced above which a run is flagged
/// unstable.
pub const UNSTABLE_BACKLOG_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("agent {agent} left the workspace at t = {t}")]
    OutsideWorkspace { agent: usize, t: f64 },
    #[error("only {serviced} targets serviced after warm-up; need {needed}")]
    InsufficientData { serviced: usize, needed: usize },
    #[error("run is unstable: {unserviced} of {arrivals} post-warm-up arrivals unserviced")]
    Unstable { unserviced: usize, arrivals: usize },
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialPositions {
    Explicit(Vec<Point>),
    /// Uniform in the workspace from the placement stream.
    Random,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub workspace: ConvexPolygon,
    pub density: SpatialDensity,
    pub lambda: f64,
    pub agents: usize,
    pub initial_positions: InitialPositions,
    pub policy: Policy,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Steps between trail samples and diagnostics; 0 picks a tenth of the
    /// run.
    pub metric_cadence: usize,
    /// Monte Carlo draws per diagnostic; 0 disables H_m and MVT sampling.
    pub integrator_budget: usize,
    pub warmup_fraction: f64,
}

impl SimConfig {
    /// Uniform density on the workspace, random placement, default step,
    /// cadence, budget and warm-up.
    pub fn new(workspace: ConvexPolygon, lambda: f64, agents: usize, policy: Policy, horizon: f64, seed: u64) -> Self {
        SimConfig {
            density: SpatialDensity::uniform(workspace.clone()),
            workspace,
            lambda,
            agents,
            initial_positions: InitialPositions::Random,
            policy,
            dt: DEFAULT_DT,
            horizon,
            seed,
            metric_cadence: 0,
            integrator_budget: DEFAULT_BUDGET,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
        }
    }

    pub fn total_steps(&self) -> u64 {
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as u64
    }

    pub fn cadence_steps(&self) -> u64 {
        if self.metric_cadence > 0 {
            self.metric_cadence as u64
        } else {
            (self.total_steps() / 10).max(1)
        }
    }

    pub fn warmup(&self) -> f64 {
        self.warmup_fraction * self.horizon
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return bad(format!("horizon {} must be at least dt {}", self.horizon, self.dt));
        }
        if self.agents == 0 {
            return bad("at least one agent is required".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!("warm-up fraction {} outside [0, 1)", self.warmup_fraction));
        }
        let tol = 1e-9 * (1.0 + self.workspace.diameter());
        if let Some(v) = self
            .density
            .support()
            .vertices()
            .iter()
            .find(|v| !self.workspace.contains_within(**v, tol))
        {
            return bad(format!("density support vertex {v} lies outside the workspace"));
        }
        if let InitialPositions::Explicit(ps) = &self.initial_positions {
            if ps.len() != self.agents {
                return bad(format!("{} initial positions for {} agents", ps.len(), self.agents));
            }
            for (i, p) in ps.iter().enumerate() {
                if !p.is_finite() || !self.workspace.contains(*p) {
                    return bad(format!("initial position {i} {p} lies outside the workspace"));
                }
                if ps[..i].contains(p) {
                    return bad(format!("initial position {i} {p} repeats an earlier one"));
                }
            }
        }
        Ok(())
    }

    fn initial_points(&self) -> Vec<Point> {
        match &self.initial_positions {
            InitialPositions::Explicit(ps) => ps.clone(),
            InitialPositions::Random => {
                let mut rng = concern_rng(self.seed, RngConcern::Placement);
                (0..self.agents)
                    .map(|_| self.workspace.sample_uniform(&mut rng))
                    .collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetRecord {
    pub id: usize,
    pub position: Point,
    pub t_arrival: f64,
    pub t_service: Option<f64>,
    pub agent: Option<usize>,
}

impl TargetRecord {
    pub fn wait(&self) -> Option<f64> {
        self.t_service.map(|s| s - self.t_arrival)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrailSample {
    pub t: f64,
    pub agent: usize,
    pub reference: Point,
    pub position: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticSample {
    pub t: f64,
    /// Multimedian cost of the reference points.
    pub hm: Estimate,
    /// Distance from the references to the medians of their own cells.
    pub mvt: f64,
    pub mvt_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub lambda: f64,
    pub horizon: f64,
    pub warmup: f64,
    /// Waits of targets that arrived after warm-up and were serviced, in
    /// arrival order.
    pub waits: Vec<f64>,
    pub mean_wait: Option<f64>,
    /// Time-average number of outstanding targets over `[warmup, horizon]`.
    pub mean_outstanding: f64,
    pub serviced_per_agent: Vec<usize>,
    pub total_arrivals: usize,
    pub total_serviced: usize,
    pub window_arrivals: usize,
    pub window_unserviced: usize,
    pub unstable: bool,
    pub diagnostics: Vec<DiagnosticSample>,
}

impl RunMetrics {
    /// Steady-state statistics from the target records alone.
    pub fn from_records(targets: &[TargetRecord], agents: usize, lambda: f64, horizon: f64, warmup: f64) -> Self {
        let mut waits = Vec::new();
        let mut serviced_per_agent = vec![0; agents];
        let (mut window_arrivals, mut window_unserviced, mut total_serviced) = (0, 0, 0);
        let mut outstanding = 0.0;
        for t in targets {
            if let Some(a) = t.agent {
                serviced_per_agent[a] += 1;
                total_serviced += 1;
            }
            let end = t.t_service.unwrap_or(horizon).min(horizon);
            outstanding += (end - t.t_arrival.max(warmup)).max(0.0);
            if t.t_arrival >= warmup {
                window_arrivals += 1;
                match t.wait() {
                    Some(w) => waits.push(w),
                    None => window_unserviced += 1,
                }
            }
        }
        let span = horizon - warmup;
        let mean_wait = (!waits.is_empty()).then(|| waits.iter().sum::<f64>() / waits.len() as f64);
        RunMetrics {
            lambda,
            horizon,
            warmup,
            mean_wait,
            waits,
            mean_outstanding: if span > 0.0 { outstanding / span } else { 0.0 },
            serviced_per_agent,
            total_arrivals: targets.len(),
            total_serviced,
            window_arrivals,
            window_unserviced,
            unstable: window_unserviced as f64 > UNSTABLE_BACKLOG_FRACTION * window_arrivals as f64,
            diagnostics: Vec::new(),
        }
    }

    /// Cumulative mean of `waits`.
    pub fn running_mean(&self) -> Vec<f64> {
        let mut sum = 0.0;
        self.waits
            .iter()
            .enumerate()
            .map(|(i, w)| {
                sum += w;
                sum / (i + 1) as f64
            })
            .collect()
    }

    pub fn final_diagnostic(&self) -> Option<&DiagnosticSample> {
        self.diagnostics.last()
    }
}

/// `n̄ / (λ·T̄)` over the post-warm-up window.
pub fn little_check(metrics: &RunMetrics) -> Result<f64, EngineError> {
    if metrics.waits.len() < LITTLE_MIN_SERVICED {
        return Err(EngineError::InsufficientData {
            serviced: metrics.waits.len(),
            needed: LITTLE_MIN_SERVICED,
        });
    }
    if metrics.unstable {
        return Err(EngineError::Unstable {
            unserviced: metrics.window_unserviced,
            arrivals: metrics.window_arrivals,
        });
    }
    let t = metrics.mean_wait.expect("nonempty waits");
    Ok(metrics.mean_outstanding / (metrics.lambda * t))
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub targets: Vec<TargetRecord>,
    pub trails: Vec<TrailSample>,
}

/// Single-threaded simulation state.
#[derive(Clone, Debug)]
pub struct Simulation {
    config: SimConfig,
    stream: ArrivalStream,
    agents: Vec<AgentState>,
    targets: Vec<TargetRecord>,
    /// Outstanding target ids, ascending.
    demand: Vec<usize>,
    step_index: u64,
    total_steps: u64,
    time: f64,
    trails: Vec<TrailSample>,
    diagnostics: Vec<DiagnosticSample>,
    positions: Vec<Point>,
    demand_points: Vec<Point>,
    goals: Vec<Option<(Point, Option<usize>)>>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let stream = ArrivalStream::new(config.lambda, config.density.clone(), config.seed)?;
        let agents: Vec<AgentState> = config
            .initial_points()
            .into_iter()
            .enumerate()
            .map(|(i, p)| AgentState::new(i, p))
            .collect();
        let m = agents.len();
        Ok(Simulation {
            total_steps: config.total_steps(),
            config,
            stream,
            agents,
            targets: Vec::new(),
            demand: Vec::new(),
            step_index: 0,
            time: 0.0,
            trails: Vec::new(),
            diagnostics: Vec::new(),
            positions: Vec::with_capacity(m),
            demand_points: Vec::new(),
            goals: Vec::with_capacity(m),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn targets(&self) -> &[TargetRecord] {
        &self.targets
    }

    pub fn outstanding(&self) -> &[usize] {
        &self.demand
    }

    pub fn is_finished(&self) -> bool {
        self.step_index >= self.total_steps
    }

    /// Every generated target is either outstanding or in exactly one
    /// agent's visited set.
    pub fn conservation_holds(&self) -> bool {
        let visited: usize = self.agents.iter().map(AgentState::serviced_count).sum();
        let serviced = self.targets.iter().filter(|t| t.t_service.is_some()).count();
        self.targets.len() == self.demand.len() + visited && serviced == visited
    }

    /// Adds a target at the current time, outside the Poisson stream.
    pub fn inject_target(&mut self, position: Point) -> usize {
        let t = self.time;
        self.push_target(t, position)
    }

    fn push_target(&mut self, t: f64, position: Point) -> usize {
        let id = self.targets.len();
        self.targets.push(TargetRecord {
            id,
            position,
            t_arrival: t,
            t_service: None,
            agent: None,
        });
        self.demand.push(id);
        id
    }

    fn step_end(&self) -> f64 {
        ((self.step_index + 1) as f64 * self.config.dt).min(self.config.horizon)
    }

    fn decide(&mut self) {
        self.positions.clear();
        self.positions.extend(self.agents.iter().map(|a| a.position));
        self.demand_points.clear();
        self.demand_points
            .extend(self.demand.iter().map(|&id| self.targets[id].position));
        self.goals.clear();
        for a in self.agents.iter_mut() {
            let goal = match self.config.policy {
                Policy::Nc => nc_goal(a, &self.demand_points),
                Policy::Sb => sb_goal(a, &self.positions, &self.demand_points).1,
            };
            self.goals.push(match goal {
                Goal::Stay => None,
                Goal::Target(k) => Some((self.demand_points[k], Some(self.demand[k]))),
                Goal::Reference => Some((a.refresh_reference(), None)),
            });
        }
    }

    /// Advances one decision step, sub-stepping at arrivals and captures.
    pub fn step(&mut self) -> Result<(), EngineError> {
        if self.is_finished() {
            return Ok(());
        }
        let t1 = self.step_end();
        let mut cur = self.time;
        loop {
            while let Some(ta) = self.stream.peek() {
                if ta > cur || ta >= t1 {
                    break;
                }
                let (ta, q) = self.stream.next_event()?.expect("peeked");
                self.push_target(ta, q);
            }
            self.decide();

            let mut event = t1;
            if let Some(ta) = self.stream.peek() {
                if ta < t1 {
                    event = ta;
                }
            }
            let mut h = event - cur;
            let mut capture = false;
            for (a, g) in self.agents.iter().zip(&self.goals) {
                if let Some((goal, Some(_))) = g {
                    let d = a.position.distance(*goal);
                    if d <= h {
                        h = d;
                        capture = true;
                    }
                }
            }

            let mut captured: Vec<(usize, usize)> = Vec::new();
            for (i, a) in self.agents.iter_mut().enumerate() {
                let Some((goal, target)) = self.goals[i] else { continue };
                let d = a.position.distance(goal);
                if d <= h {
                    a.position = goal;
                    if let (true, Some(id)) = (capture, target) {
                        if !captured.iter().any(|&(tid, _)| tid == id) {
                            captured.push((id, i));
                        }
                    }
                } else if d > 0.0 {
                    a.position = a.position + (goal - a.position) * (h / d);
                }
            }

            let next = if capture { (cur + h).min(event) } else { event };
            for (id, agent) in captured {
                let rec = &mut self.targets[id];
                rec.t_service = Some(next);
                rec.agent = Some(agent);
                let pos = rec.position;
                self.demand.retain(|&k| k != id);
                self.agents[agent].record_service_deferred(pos);
            }
            cur = next;
            if cur >= t1 {
                break;
            }
        }
        self.time = t1;
        self.step_index += 1;
        let tol = 1e-9 * (1.0 + self.config.workspace.diameter());
        if let Some(a) = self
            .agents
            .iter()
            .find(|a| !self.config.workspace.contains_within(a.position, tol))
        {
            return Err(EngineError::OutsideWorkspace {
                agent: a.id,
                t: self.time,
            });
        }
        Ok(())
    }

    /// Current reference points, computed without updating agent caches.
    pub fn references(&self) -> Vec<Point> {
        self.agents.iter().map(AgentState::computed_reference).collect()
    }

    fn sample(&mut self) -> Result<(), EngineError> {
        let refs = self.references();
        for (a, r) in self.agents.iter().zip(&refs) {
            self.trails.push(TrailSample {
                t: self.time,
                agent: a.id,
                reference: *r,
                position: a.position,
            });
        }
        if self.config.integrator_budget > 0 {
            let integ = DensityIntegrator::new(&self.config.density, self.config.integrator_budget, self.config.seed);
            let gens = separate_coincident(&refs, &self.config.workspace);
            let hm = multimedian_value(&gens, &integ, &self.config.workspace)?;
            let mvt = mvt_residual(&gens, &integ, &self.config.workspace)?;
            self.diagnostics.push(DiagnosticSample {
                t: self.time,
                hm,
                mvt: mvt.value,
                mvt_tolerance: mvt.tolerance,
            });
        }
        Ok(())
    }

    /// Runs to the horizon, sampling trails and diagnostics at the metric
    /// cadence and at the end.
    pub fn run_to_end(mut self) -> Result<RunOutput, EngineError> {
        let cadence = self.config.cadence_steps();
        self.sample()?;
        while !self.is_finished() {
            self.step()?;
            if self.step_index.is_multiple_of(cadence) || self.is_finished() {
                self.sample()?;
            }
        }
        debug_assert!(self.conservation_holds());
        let c = &self.config;
        let mut metrics = RunMetrics::from_records(&self.targets, c.agents, c.lambda, c.horizon, c.warmup());
        metrics.diagnostics = self.diagnostics;
        Ok(RunOutput {
            metrics,
            targets: self.targets,
            trails: self.trails,
        })
    }
}

pub fn run(config: SimConfig) -> Result<RunOutput, EngineError> {
    Simulation::new(config)?.run_to_end()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_targets_csv<W: Write>(mut w: W, targets: &[TargetRecord]) -> io::Result<()> {
    writeln!(w, "target_id,t_arrival,t_service,agent_id,wait")?;
    for t in targets {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.id,
            t.t_arrival,
            opt(t.t_service),
            t.agent.map(|a| a.to_string()).unwrap_or_default(),
            opt(t.wait())
        )?;
    }
    Ok(())
}

pub fn write_trails_csv<W: Write>(mut w: W, trails: &[TrailSample]) -> io::Result<()> {
    writeln!(w, "t,agent_id,ref_x,ref_y,pos_x,pos_y")?;
    for s in trails {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.t, s.agent, s.reference.x, s.reference.y, s.position.x, s.position.y
        )?;
    }
    Ok(())
}

/// `key = value` lines.
pub fn write_summary<W: Write>(mut w: W, config: &SimConfig, metrics: &RunMetrics) -> io::Result<()> {
    writeln!(w, "policy = {}", config.policy)?;
    writeln!(w, "seed = {}", config.seed)?;
    writeln!(w, "lambda = {}", config.lambda)?;
    writeln!(w, "agents = {}", config.agents)?;
    writeln!(w, "dt = {}", config.dt)?;
    writeln!(w, "horizon = {}", config.horizon)?;
    writeln!(w, "warmup = {}", metrics.warmup)?;
    writeln!(w, "arrivals = {}", metrics.total_arrivals)?;
    writeln!(w, "serviced = {}", metrics.total_serviced)?;
    writeln!(w, "window_arrivals = {}", metrics.window_arrivals)?;
    writeln!(w, "window_unserviced = {}", metrics.window_unserviced)?;
    writeln!(w, "mean_wait = {}", opt(metrics.mean_wait))?;
    writeln!(w, "mean_outstanding = {}", metrics.mean_outstanding)?;
    writeln!(w, "little_ratio = {}", opt(little_check(metrics).ok()))?;
    writeln!(w, "unstable = {}", metrics.unstable)?;
    let counts: Vec<String> = metrics.serviced_per_agent.iter().map(|c| c.to_string()).collect();
    writeln!(w, "serviced_per_agent = {}", counts.join(","))?;
    let last = metrics.final_diagnostic();
    writeln!(w, "hm_final = {}", opt(last.map(|d| d.hm.value)))?;
    writeln!(w, "hm_final_stderr = {}", opt(last.map(|d| d.hm.stderr)))?;
    writeln!(w, "mvt_residual = {}", opt(last.map(|d| d.mvt)))?;
    writeln!(w, "mvt_tolerance = {}", opt(last.map(|d| d.mvt_tolerance)))?;
    Ok(())
}
