//! Execution of a controller path: run the active local controller and
//! hand over to the next node on the path once the state enters its set.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::EPS_INTERIOR;
use crate::graph::{ControllerGraph, PlanningProblem};
use crate::linalg::Vector;
use crate::lti::{self, CostModel, Equilibrium, Trajectory};
use crate::scenario::Termination;

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    /// `‖y - y_f‖ <= output_tol` with the final node active.
    Converged,
    /// `max_steps` elapsed first.
    MaxSteps,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::MaxSteps => "max-steps",
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExecuteOptions {
    pub termination: Termination,
    /// Jump to the farthest path node whose set holds the state instead of
    /// only the next one.
    pub skip_ahead: bool,
}

/// Record of one closed-loop run over `t = 0..=N`.
#[derive(Clone, Debug)]
pub struct PlanResult {
    /// Node sequence σ_0..σ_f (empty for the unswitched baseline).
    pub path: Vec<usize>,
    /// `switch_times[i]` is the first step at which `path[i + 1]` or a later
    /// node was active.
    pub switch_times: Vec<usize>,
    /// States, inputs and outputs at every step `0..=N`, including `u(N)`.
    pub trajectory: Trajectory,
    /// Active node at every step.
    pub active: Vec<Option<usize>>,
    pub feasible_u: Vec<bool>,
    pub feasible_y: Vec<bool>,
    pub cost: f64,
    pub termination: TerminationReason,
}

impl PlanResult {
    /// Final step index `N`.
    pub fn steps(&self) -> usize {
        self.trajectory.states.len().saturating_sub(1)
    }

    pub fn input_violations(&self) -> usize {
        self.feasible_u.iter().filter(|f| !**f).count()
    }

    pub fn output_violations(&self) -> usize {
        self.feasible_y.iter().filter(|f| !**f).count()
    }

    pub fn is_feasible(&self) -> bool {
        self.input_violations() == 0 && self.output_violations() == 0
    }
}

/// `Σ_{t=0}^{N} (x - x̄)ᵀ Q (x - x̄) + (u - ū)ᵀ R (u - ū)` about `reference`.
pub fn evaluate_cost(traj: &Trajectory, cost: &CostModel, reference: &Equilibrium, stop_time: usize) -> f64 {
    traj.states
        .iter()
        .zip(&traj.inputs)
        .take(stop_time + 1)
        .map(|(x, u)| cost.stage(&(x - &reference.x), &(u - &reference.u)))
        .sum()
}

struct Recorder<'a> {
    prob: &'a PlanningProblem<'a>,
    traj: Trajectory,
    active: Vec<Option<usize>>,
    feasible_u: Vec<bool>,
    feasible_y: Vec<bool>,
}

impl<'a> Recorder<'a> {
    fn new(prob: &'a PlanningProblem<'a>) -> Self {
        Self {
            prob,
            traj: Trajectory {
                states: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
            active: Vec::new(),
            feasible_u: Vec::new(),
            feasible_y: Vec::new(),
        }
    }

    fn push(&mut self, x: &Vector, u: Vector, node: Option<usize>) -> Vector {
        let y = self.prob.system.output(x);
        self.feasible_u
            .push(self.prob.input_set.contains_with_slack(&u, EPS_INTERIOR));
        self.feasible_y
            .push(self.prob.output_set.contains_with_slack(&y, EPS_INTERIOR));
        self.traj.states.push(x.clone());
        self.traj.inputs.push(u);
        self.traj.outputs.push(y.clone());
        self.active.push(node);
        y
    }

    fn finish(
        self,
        path: Vec<usize>,
        switch_times: Vec<usize>,
        reference: &Equilibrium,
        termination: TerminationReason,
    ) -> PlanResult {
        let n = self.traj.states.len() - 1;
        let cost = evaluate_cost(&self.traj, self.prob.cost, reference, n);
        PlanResult {
            path,
            switch_times,
            trajectory: self.traj,
            active: self.active,
            feasible_u: self.feasible_u,
            feasible_y: self.feasible_y,
            cost,
            termination,
        }
    }
}

/// Runs the switching law along `path` from `x0`.
///
/// The cost is measured about the equilibrium of the last path node. A run
/// that exhausts `max_steps` is returned inside [`Error::Timeout`].
pub fn execute(
    prob: &PlanningProblem<'_>,
    graph: &ControllerGraph,
    path: &[usize],
    x0: &Vector,
    yf: &Vector,
    opts: &ExecuteOptions,
) -> Result<PlanResult> {
    let Some(&last) = path.last() else {
        return Err(Error::InvalidArgument("empty controller path".into()));
    };
    if let Some(&bad) = path.iter().find(|&&i| i >= graph.n_nodes()) {
        return Err(Error::InvalidArgument(format!("path node {bad} not in graph")));
    }
    if !graph.nodes[path[0]].contains(x0) {
        return Err(Error::A2Violated);
    }
    let reference = graph.nodes[last].equilibrium();
    let mut rec = Recorder::new(prob);
    let mut switch_times = Vec::new();
    let mut idx = 0;
    let mut x = x0.clone();
    let mut t = 0;
    loop {
        let next = if opts.skip_ahead {
            (idx + 1..path.len())
                .rev()
                .find(|&j| graph.nodes[path[j]].contains(&x))
        } else {
            Some(idx + 1).filter(|&j| j < path.len() && graph.nodes[path[j]].contains(&x))
        };
        if let Some(j) = next {
            switch_times.extend(std::iter::repeat_n(t, j - idx));
            idx = j;
        }
        let node = &graph.nodes[path[idx]];
        let y = rec.push(&x, node.control(&x), Some(node.id));
        if idx + 1 == path.len() && (&y - yf).norm() <= opts.termination.output_tol {
            return Ok(rec.finish(path.to_vec(), switch_times, &reference, TerminationReason::Converged));
        }
        if t == opts.termination.max_steps {
            let partial = rec.finish(path.to_vec(), switch_times, &reference, TerminationReason::MaxSteps);
            return Err(Error::Timeout(Box::new(partial)));
        }
        x = prob.system.step(&x, rec.traj.inputs.last().expect("input recorded"));
        t += 1;
    }
}

/// A single unconstrained LQR about the equilibrium for `yf`, with every
/// step annotated for constraint violations.
pub fn baseline_lqr_run(
    prob: &PlanningProblem<'_>,
    x0: &Vector,
    yf: &Vector,
    termination: &Termination,
) -> Result<PlanResult> {
    let lqr = lti::solve_dare(prob.system, prob.cost)?;
    let reference = lti::equilibrium_for_output(prob.system, yf)?.particular().clone();
    let mut rec = Recorder::new(prob);
    let mut x = x0.clone();
    let mut t = 0;
    let reason = loop {
        let u = &lqr.f * (&x - &reference.x) + &reference.u;
        let y = rec.push(&x, u, None);
        if (&y - yf).norm() <= termination.output_tol {
            break TerminationReason::Converged;
        }
        if t == termination.max_steps {
            break TerminationReason::MaxSteps;
        }
        x = prob.system.step(&x, rec.traj.inputs.last().expect("input recorded"));
        t += 1;
    };
    Ok(rec.finish(Vec::new(), Vec::new(), &reference, reason))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Polytope, UnionOfPolytopes};
    use crate::graph::{LocalController, WeightedDigraph};
    use crate::linalg::Matrix;
    use crate::lti::LtiSystem;
    use crate::scenario::DesignMethod;

    fn scalar() -> (LtiSystem, CostModel, Polytope, UnionOfPolytopes) {
        let m = |v: f64| Matrix::from_element(1, 1, v);
        (
            LtiSystem::new(m(0.5), m(1.0), m(1.0)).unwrap(),
            CostModel::new(m(1.0), m(1.0)).unwrap(),
            Polytope::from_box(&[-10.0], &[10.0]).unwrap(),
            UnionOfPolytopes::new(vec![Polytope::from_box(&[-10.0], &[10.0]).unwrap()]).unwrap(),
        )
    }

    fn node(id: usize, c: f64, rho: f64) -> LocalController {
        let v = Vector::from_element(1, c);
        LocalController {
            id,
            sample: id,
            component: 0,
            gain: Matrix::zeros(1, 1),
            p: Matrix::identity(1, 1),
            rho,
            x_bar: v.clone(),
            // 0.5 x̄ + ū = x̄
            u_bar: &v * 0.5,
            y_bar: v,
            cost_to_go: Matrix::identity(1, 1),
        }
    }

    fn graph(nodes: Vec<LocalController>) -> ControllerGraph {
        let edges = WeightedDigraph::new(nodes.len());
        ControllerGraph {
            method: DesignMethod::FixedGainLqr,
            nodes,
            edges,
        }
    }

    fn opts(tol: f64) -> ExecuteOptions {
        ExecuteOptions {
            termination: Termination {
                output_tol: tol,
                max_steps: 200,
            },
            skip_ahead: false,
        }
    }

    #[test]
    fn single_node_at_target() {
        let (sys, cost, u, y) = scalar();
        let prob = PlanningProblem { system: &sys, cost: &cost, input_set: &u, output_set: &y };
        let g = graph(vec![node(0, 0.0, 1.0)]);
        let x0 = Vector::zeros(1);
        let r = execute(&prob, &g, &[0], &x0, &x0, &opts(1e-9)).unwrap();
        assert_eq!(r.steps(), 0);
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.termination, TerminationReason::Converged);
    }

    #[test]
    fn switch_time_matches_replay() {
        let (sys, cost, u, y) = scalar();
        let prob = PlanningProblem { system: &sys, cost: &cost, input_set: &u, output_set: &y };
        // Node 0 regulates to 1, node 1 (radius 1.5 about 0) contains 1.
        let g = graph(vec![node(0, 1.0, 5.0), node(1, 0.0, 1.5)]);
        let x0 = Vector::from_element(1, 5.0);
        let r = execute(&prob, &g, &[0, 1], &x0, &Vector::zeros(1), &opts(1e-6)).unwrap();
        let mut x = 5.0;
        let mut t = 0;
        while x > 1.5 {
            x = 0.5 * (x - 1.0) + 1.0;
            t += 1;
        }
        assert_eq!(r.switch_times, vec![t]);
        for (s, a) in r.active.iter().enumerate() {
            assert_eq!(*a, Some(if s < t { 0 } else { 1 }));
        }
        assert!(r.is_feasible());
    }

    #[test]
    fn start_outside_first_set() {
        let (sys, cost, u, y) = scalar();
        let prob = PlanningProblem { system: &sys, cost: &cost, input_set: &u, output_set: &y };
        let g = graph(vec![node(0, 0.0, 1.0)]);
        let x0 = Vector::from_element(1, 2.0);
        assert!(matches!(
            execute(&prob, &g, &[0], &x0, &Vector::zeros(1), &opts(1e-6)),
            Err(Error::A2Violated)
        ));
    }

    #[test]
    fn timeout_keeps_partial_run() {
        let (sys, cost, u, y) = scalar();
        let prob = PlanningProblem { system: &sys, cost: &cost, input_set: &u, output_set: &y };
        let g = graph(vec![node(0, 0.0, 10.0)]);
        let x0 = Vector::from_element(1, 1.0);
        let o = ExecuteOptions {
            termination: Termination { output_tol: 0.0, max_steps: 5 },
            skip_ahead: false,
        };
        match execute(&prob, &g, &[0], &x0, &Vector::zeros(1), &o) {
            Err(Error::Timeout(r)) => {
                assert_eq!(r.steps(), 5);
                assert_eq!(r.termination, TerminationReason::MaxSteps);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn geometric_cost() {
        let (sys, cost, _, _) = scalar();
        let traj = lti::simulate(&sys, &Vector::from_element(1, 1.0), |_| Vector::zeros(1), 60);
        let traj = Trajectory {
            inputs: vec![Vector::zeros(1); traj.states.len()],
            ..traj
        };
        let origin = Equilibrium {
            x: Vector::zeros(1),
            u: Vector::zeros(1),
            y: Vector::zeros(1),
            unique: true,
        };
        let j = evaluate_cost(&traj, &cost, &origin, 60);
        assert!((j - 4.0 / 3.0).abs() < 1e-12);
    }
}
