//! The no-communication (`nc`) and sensor-based (`sb`) control laws.

use std::fmt;
use std::str::FromStr;

use crate::geometry::{vers, FtSolver, Point, PointSet};
use crate::partition::in_voronoi_cell;

/// Distance under which an agent counts as being at its goal.
pub const ARRIVAL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Chase the nearest outstanding target.
    Nc,
    /// Chase the nearest outstanding target in the agent's own Voronoi cell.
    Sb,
}

impl Policy {
    pub fn label(self) -> &'static str {
        match self {
            Policy::Nc => "nc",
            Policy::Sb => "sb",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "nc" => Ok(Policy::Nc),
            "sb" => Ok(Policy::Sb),
            other => Err(format!("unknown policy `{other}` (expected nc or sb)")),
        }
    }
}

/// One agent: where it is, what it has serviced and where it waits.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub id: usize,
    pub position: Point,
    visited: PointSet,
    reference: Point,
    stale: bool,
    anchor: Point,
    solver: FtSolver,
}

impl AgentState {
    /// The reference starts at the initial position.
    pub fn new(id: usize, position: Point) -> Self {
        AgentState {
            id,
            position,
            visited: PointSet::new(),
            reference: position,
            stale: false,
            anchor: position,
            solver: FtSolver::default(),
        }
    }

    pub fn visited(&self) -> &PointSet {
        &self.visited
    }

    pub fn serviced_count(&self) -> usize {
        self.visited.len()
    }

    /// Cached reference point; out of date if [`Self::is_stale`].
    pub fn reference(&self) -> Point {
        self.reference
    }

    pub fn is_stale(&self) -> bool {
        self.stale
    }

    /// Adds `target` to the visited set and recomputes the reference, warm
    /// started at the previous one. The tie anchor is the current position.
    pub fn record_service(&mut self, target: Point) {
        self.record_service_deferred(target);
        self.refresh_reference();
    }

    /// Adds `target` to the visited set and marks the reference stale.
    pub fn record_service_deferred(&mut self, target: Point) {
        self.visited.push(target);
        self.anchor = self.position;
        self.stale = true;
    }

    /// Brings the cached reference up to date and returns it.
    pub fn refresh_reference(&mut self) -> Point {
        if self.stale {
            self.reference = self.computed_reference();
            self.stale = false;
        }
        self.reference
    }

    /// Up-to-date reference without touching the cache.
    pub fn computed_reference(&self) -> Point {
        if !self.stale || self.visited.is_empty() {
            return self.reference;
        }
        let warm = if self.visited.len() > 1 {
            Some(self.reference)
        } else {
            None
        };
        self.solver.solve(self.visited.as_slice(), self.anchor, warm).point
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityCommand {
    /// Unit vector, or zero.
    pub direction: Point,
    /// Speed in `[0, 1]`.
    pub magnitude: f64,
}

impl VelocityCommand {
    pub const ZERO: VelocityCommand = VelocityCommand {
        direction: Point::ORIGIN,
        magnitude: 0.0,
    };

    /// Full speed from `from` toward `to`, or zero within the arrival
    /// tolerance.
    pub fn toward(from: Point, to: Point) -> Self {
        if from.distance(to) <= ARRIVAL_TOLERANCE {
            VelocityCommand::ZERO
        } else {
            VelocityCommand {
                direction: vers(to - from),
                magnitude: 1.0,
            }
        }
    }

    pub fn velocity(&self) -> Point {
        self.direction * self.magnitude
    }
}

/// What an agent is heading for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    Stay,
    /// Index into the demand slice.
    Target(usize),
    Reference,
}

/// Which rule of the sensor-based law fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbBranch {
    /// Nothing visited yet: behave like `nc`.
    FirstVisit,
    OwnCell,
    /// No demand in the own cell.
    Fallback,
}

fn nearest_in<I: Iterator<Item = usize>>(from: Point, demand: &[Point], candidates: I) -> Option<usize> {
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for k in candidates {
        let d = (demand[k] - from).norm_squared();
        if d < best_d {
            best_d = d;
            best = Some(k);
        }
    }
    best
}

/// `demand` is ordered by target id, so the lowest index wins ties.
pub fn nc_goal(agent: &AgentState, demand: &[Point]) -> Goal {
    if let Some(k) = nearest_in(agent.position, demand, 0..demand.len()) {
        Goal::Target(k)
    } else if agent.visited.is_empty() {
        Goal::Stay
    } else {
        Goal::Reference
    }
}

pub fn sb_goal(agent: &AgentState, positions: &[Point], demand: &[Point]) -> (SbBranch, Goal) {
    if agent.visited.is_empty() {
        return (SbBranch::FirstVisit, nc_goal(agent, demand));
    }
    let own = (0..demand.len()).filter(|&k| in_voronoi_cell(agent.id, demand[k], positions));
    match nearest_in(agent.position, demand, own) {
        Some(k) => (SbBranch::OwnCell, Goal::Target(k)),
        None => (SbBranch::Fallback, Goal::Reference),
    }
}

fn command_for(agent: &AgentState, goal: Goal, demand: &[Point]) -> VelocityCommand {
    match goal {
        Goal::Stay => VelocityCommand::ZERO,
        Goal::Target(k) => VelocityCommand::toward(agent.position, demand[k]),
        Goal::Reference => VelocityCommand::toward(agent.position, agent.computed_reference()),
    }
}

pub fn nc_command(agent: &AgentState, demand: &[Point]) -> VelocityCommand {
    command_for(agent, nc_goal(agent, demand), demand)
}

/// `positions[agent.id]` must equal `agent.position`.
pub fn sb_command(agent: &AgentState, positions: &[Point], demand: &[Point]) -> VelocityCommand {
    debug_assert_eq!(positions[agent.id], agent.position);
    command_for(agent, sb_goal(agent, positions, demand).1, demand)
}
