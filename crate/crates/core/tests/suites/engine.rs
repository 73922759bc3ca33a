use dvr::engine::{run, SimConfig, Simulation};
use dvr::geometry::hull_contains;
use dvr::partition::in_voronoi_cell;
use dvr::policy::{nc_command, sb_command, sb_goal, AgentState, Goal, Policy, SbBranch};
use dvr::{ConvexPolygon, Point};
use proptest::prelude::*;

use super::{check, point_in, point_set, Check};

pub const CHECKS: &[Check] = &[
    ("runs_are_bit_exact", runs_are_bit_exact),
    ("targets_are_conserved_every_step", targets_are_conserved_every_step),
    ("halving_dt_keeps_mean_wait", halving_dt_keeps_mean_wait),
    ("service_counts_add_up", service_counts_add_up),
    ("references_settle", references_settle),
    ("single_agent_policies_agree", single_agent_policies_agree),
    ("commands_are_unit_bounded", commands_are_unit_bounded),
    ("sb_branches_are_exclusive", sb_branches_are_exclusive),
    ("service_keeps_reference_in_hull", service_keeps_reference_in_hull),
];

pub fn config(lambda: f64, agents: usize, policy: Policy, horizon: f64, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(ConvexPolygon::unit_square(), lambda, agents, policy, horizon, seed);
    c.integrator_budget = 0;
    c
}

pub fn runs_are_bit_exact() {
    for policy in [Policy::Nc, Policy::Sb] {
        let mut c = config(2.0, 4, policy, 200.0, 9);
        c.integrator_budget = 2_000;
        let a = run(c.clone()).unwrap();
        let b = run(c).unwrap();
        assert_eq!(a.targets, b.targets);
        assert_eq!(a.trails, b.trails);
        assert_eq!(a.metrics.diagnostics, b.metrics.diagnostics);
    }
}

pub fn targets_are_conserved_every_step() {
    let policy = prop_oneof![Just(Policy::Nc), Just(Policy::Sb)];
    check(
        20,
        (0.0..20.0f64, 1usize..6, policy, any::<u64>()),
        |(lambda, m, policy, seed)| {
            let mut sim = Simulation::new(config(lambda, m, policy, 20.0, seed)).unwrap();
            while !sim.is_finished() {
                sim.step().unwrap();
                prop_assert!(sim.conservation_holds(), "t = {}", sim.time());
                for a in sim.agents() {
                    prop_assert!(sim.config().workspace.contains_within(a.position, 1e-9));
                }
            }
            Ok(())
        },
    );
}

pub fn halving_dt_keeps_mean_wait() {
    for policy in [Policy::Nc, Policy::Sb] {
        let coarse = config(1.0, 3, policy, 2000.0, 5);
        let mut fine = coarse.clone();
        fine.dt = coarse.dt / 2.0;
        let a = run(coarse).unwrap().metrics.mean_wait.unwrap();
        let b = run(fine).unwrap().metrics.mean_wait.unwrap();
        assert!((a - b).abs() < 0.01 * a, "{policy}: {a} vs {b}");
    }
}

pub fn service_counts_add_up() {
    check(10, (0.5..8.0f64, 1usize..6, any::<u64>()), |(lambda, m, seed)| {
        let out = run(config(lambda, m, Policy::Sb, 100.0, seed)).unwrap();
        let mx = &out.metrics;
        prop_assert_eq!(mx.serviced_per_agent.iter().sum::<usize>(), mx.total_serviced);
        prop_assert_eq!(mx.total_arrivals, out.targets.len());
        for t in &out.targets {
            if let Some(w) = t.wait() {
                prop_assert!(w >= 0.0);
            }
        }
        Ok(())
    });
}

/// Largest reference displacement between consecutive trail samples, per
/// quarter of the run.
pub fn quarter_displacements(trails: &[dvr::engine::TrailSample], agents: usize, horizon: f64) -> [f64; 4] {
    let mut out = [0.0f64; 4];
    for a in 0..agents {
        let mine: Vec<_> = trails.iter().filter(|s| s.agent == a).collect();
        for w in mine.windows(2) {
            let q = ((w[1].t / horizon * 4.0).ceil() as usize).clamp(1, 4) - 1;
            out[q] = out[q].max(w[0].reference.distance(w[1].reference));
        }
    }
    out
}

pub fn references_settle() {
    let horizon = 4000.0;
    let mut c = config(0.5, 9, Policy::Sb, horizon, 3);
    c.metric_cadence = 100;
    let out = run(c).unwrap();
    let q = quarter_displacements(&out.trails, 9, horizon);
    assert!(q[3] <= 0.5 * q[0], "{q:?}");
}

fn agent_with_visits(id: usize) -> impl Strategy<Value = AgentState> {
    (point_in(0.0, 1.0), point_set(0, 8)).prop_map(move |(at, visits)| {
        let mut a = AgentState::new(id, at);
        for v in visits {
            a.record_service(v);
        }
        a
    })
}

pub fn single_agent_policies_agree() {
    check(300, (agent_with_visits(0), point_set(0, 10)), |(a, demand)| {
        let positions = [a.position];
        prop_assert_eq!(nc_command(&a, &demand), sb_command(&a, &positions, &demand));
        Ok(())
    });
}

fn fleet() -> impl Strategy<Value = (Vec<AgentState>, Vec<Point>)> {
    (1usize..6).prop_flat_map(|m| {
        let agents: Vec<_> = (0..m).map(agent_with_visits).collect();
        (agents, point_set(0, 10))
    })
}

pub fn commands_are_unit_bounded() {
    check(200, fleet(), |(agents, demand)| {
        let positions: Vec<Point> = agents.iter().map(|a| a.position).collect();
        for a in &agents {
            for cmd in [nc_command(a, &demand), sb_command(a, &positions, &demand)] {
                prop_assert!(cmd.velocity().norm() <= 1.0 + 1e-12);
                prop_assert!((0.0..=1.0).contains(&cmd.magnitude));
            }
        }
        Ok(())
    });
}

pub fn sb_branches_are_exclusive() {
    check(300, fleet(), |(agents, demand)| {
        let positions: Vec<Point> = agents.iter().map(|a| a.position).collect();
        for a in &agents {
            let own = demand.iter().any(|&q| in_voronoi_cell(a.id, q, &positions));
            let (branch, goal) = sb_goal(a, &positions, &demand);
            match branch {
                SbBranch::FirstVisit => prop_assert!(a.visited().is_empty()),
                SbBranch::OwnCell => {
                    prop_assert!(!a.visited().is_empty() && own);
                    let Goal::Target(k) = goal else {
                        return Err(TestCaseError::fail("own-cell branch without a target"));
                    };
                    prop_assert!(in_voronoi_cell(a.id, demand[k], &positions));
                }
                SbBranch::Fallback => {
                    prop_assert!(!a.visited().is_empty() && !own);
                    prop_assert_eq!(goal, Goal::Reference);
                }
            }
        }
        Ok(())
    });
}

pub fn service_keeps_reference_in_hull() {
    check(300, (agent_with_visits(0), point_in(0.0, 1.0)), |(mut a, q)| {
        let before = a.serviced_count();
        a.record_service(q);
        prop_assert_eq!(a.serviced_count(), before + 1);
        prop_assert_eq!(a.visited().last(), Some(q));
        prop_assert!(!a.is_stale());
        prop_assert!(hull_contains(a.visited().as_slice(), a.reference(), 1e-9));
        Ok(())
    });
}
