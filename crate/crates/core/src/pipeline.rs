//! End-to-end planning run over a [`Scenario`], stage by stage, with
//! wall-clock timings.

use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::Error;
use crate::graph::{
    self, ControllerGraph, FreeSpaceGraph, Path, PlanningProblem, Rejection, Sample, WeightedDigraph,
};
use crate::planner::{self, ExecuteOptions, PlanResult};
use crate::scenario::Scenario;
use crate::synthesis::{VerificationReport, VerifyOptions};

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Check,
    Grid,
    Synthesize,
    Edges,
    Verify,
    Search,
    Execute,
    Baseline,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Self::Check,
        Self::Grid,
        Self::Synthesize,
        Self::Edges,
        Self::Verify,
        Self::Search,
        Self::Execute,
        Self::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::Grid => "grid",
            Self::Synthesize => "synthesize",
            Self::Edges => "edges",
            Self::Verify => "verify",
            Self::Search => "search",
            Self::Execute => "execute",
            Self::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimings {
    entries: Vec<(Stage, Duration)>,
    total: Duration,
}

impl StageTimings {
    pub fn get(&self, stage: Stage) -> Option<Duration> {
        self.entries.iter().find(|(s, _)| *s == stage).map(|(_, d)| *d)
    }

    pub fn entries(&self) -> &[(Stage, Duration)] {
        &self.entries
    }

    /// Wall time of the whole run, measured independently of the stages.
    pub fn total(&self) -> Duration {
        self.total
    }

    pub fn stage_sum(&self) -> Duration {
        self.entries.iter().map(|(_, d)| *d).sum()
    }

    /// Node synthesis plus edge construction.
    pub fn graph_build(&self) -> Duration {
        self.get(Stage::Synthesize).unwrap_or_default() + self.get(Stage::Edges).unwrap_or_default()
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    /// Last stage to run.
    pub until: Stage,
    /// Re-certify every node after the graph is built.
    pub verify: bool,
    pub verify_options: VerifyOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            until: Stage::Baseline,
            verify: false,
            verify_options: VerifyOptions::default(),
        }
    }
}

/// Everything a run produced, filled in stage by stage.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub free_space: Option<FreeSpaceGraph>,
    pub existence: Option<bool>,
    pub samples: Vec<Sample>,
    pub rejected: Vec<Rejection>,
    pub graph: Option<ControllerGraph>,
    pub verification: Vec<VerificationReport>,
    pub path: Option<Path>,
    pub plan: Option<PlanResult>,
    pub baseline: Option<PlanResult>,
    pub timings: StageTimings,
}

/// A stage error plus whatever was produced before it.
#[derive(Debug)]
pub struct PipelineFailure {
    pub stage: Stage,
    pub error: Error,
    pub artifacts: Box<Artifacts>,
}

impl fmt::Display for PipelineFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for PipelineFailure {}

struct Run {
    artifacts: Artifacts,
    started: Instant,
}

impl Run {
    fn stage<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Artifacts) -> crate::Result<T>) -> Result<T, Error> {
        let t = Instant::now();
        let r = f(&mut self.artifacts);
        let elapsed = t.elapsed();
        log::info!("{stage}: {:.3} s", elapsed.as_secs_f64());
        self.artifacts.timings.entries.push((stage, elapsed));
        r
    }

    fn fail(mut self, stage: Stage, error: Error) -> PipelineFailure {
        self.artifacts.timings.total = self.started.elapsed();
        PipelineFailure {
            stage,
            error,
            artifacts: Box::new(self.artifacts),
        }
    }

    fn done(mut self) -> Artifacts {
        self.artifacts.timings.total = self.started.elapsed();
        self.artifacts
    }
}

macro_rules! stage {
    ($run:ident, $stage:expr, $body:expr) => {
        match $run.stage($stage, $body) {
            Ok(v) => v,
            Err(e) => return Err($run.fail($stage, e)),
        }
    };
}

/// Runs the scenario through `opts.until`.
///
/// A free space with no path from `y0` to `yf` stops the run at the check
/// stage with [`Error::A3Violated`]. A run that exhausts `max_steps` fails
/// at the execute stage with [`Error::Timeout`] and keeps the partial plan
/// in `artifacts.plan`.
pub fn run_pipeline(scn: &Scenario, opts: &PipelineOptions) -> Result<Artifacts, PipelineFailure> {
    let mut run = Run {
        artifacts: Artifacts::default(),
        started: Instant::now(),
    };
    let prob = PlanningProblem {
        system: &scn.system,
        cost: &scn.cost,
        input_set: &scn.input_set,
        output_set: &scn.output_set,
    };
    let until = opts.until;

    stage!(run, Stage::Check, |a| {
        let g = graph::build_free_space_graph(&scn.output_set)?;
        let ok = graph::existence_check(&g, &scn.output_set, &scn.y0, &scn.yf)?;
        a.free_space = Some(g);
        a.existence = Some(ok);
        if ok {
            Ok(())
        } else {
            Err(Error::A3Violated)
        }
    });
    if until == Stage::Check {
        return Ok(run.done());
    }

    stage!(run, Stage::Grid, |a| {
        let grid = graph::sample_grid(&scn.output_set, &scn.grid_spacing)?;
        a.samples = graph::with_endpoints(&scn.output_set, &[&scn.y0, &scn.yf], grid)?;
        log::info!("{} samples", a.samples.len());
        Ok(())
    });
    if until == Stage::Grid {
        return Ok(run.done());
    }

    let nodes = stage!(run, Stage::Synthesize, |a| {
        let (nodes, rejected) = graph::synthesize_nodes(&prob, &a.samples, scn.method)?;
        a.rejected = rejected;
        log::info!("{} nodes, {} rejected", nodes.len(), a.rejected.len());
        Ok(nodes)
    });
    if until == Stage::Synthesize {
        run.artifacts.graph = Some(ControllerGraph {
            method: scn.method,
            edges: WeightedDigraph::new(nodes.len()),
            nodes,
        });
        return Ok(run.done());
    }

    stage!(run, Stage::Edges, |a| {
        let edges = graph::connect(&nodes);
        log::info!("{} edges", edges.n_edges());
        a.graph = Some(ControllerGraph {
            method: scn.method,
            nodes,
            edges,
        });
        Ok(())
    });
    if until == Stage::Edges {
        return Ok(run.done());
    }

    if opts.verify {
        stage!(run, Stage::Verify, |a| {
            let g = a.graph.as_ref().expect("graph built");
            let vo = VerifyOptions {
                seed: scn.seed,
                ..opts.verify_options
            };
            a.verification = g.verify_nodes(&scn.system, &scn.output_set, &scn.input_set, &vo)?;
            let failed = a.verification.iter().filter(|r| !r.passed(1e-7)).count();
            if failed > 0 {
                log::warn!("{failed} nodes failed re-verification");
            }
            Ok(())
        });
    }
    if until == Stage::Verify {
        return Ok(run.done());
    }

    let path = stage!(run, Stage::Search, |a| {
        let path = a.graph.as_ref().expect("graph built").plan(&scn.x0, &scn.yf)?;
        a.path = Some(path.clone());
        Ok(path)
    });
    if until == Stage::Search {
        return Ok(run.done());
    }

    stage!(run, Stage::Execute, |a| {
        let eo = ExecuteOptions {
            termination: scn.termination.clone(),
            skip_ahead: scn.skip_ahead,
        };
        let g = a.graph.as_ref().expect("graph built");
        match planner::execute(&prob, g, &path.nodes, &scn.x0, &scn.yf, &eo) {
            Ok(plan) => {
                a.plan = Some(plan);
                Ok(())
            }
            Err(Error::Timeout(partial)) => {
                a.plan = Some((*partial).clone());
                Err(Error::Timeout(partial))
            }
            Err(e) => Err(e),
        }
    });
    if until == Stage::Execute {
        return Ok(run.done());
    }

    stage!(run, Stage::Baseline, |a| {
        a.baseline = Some(planner::baseline_lqr_run(&prob, &scn.x0, &scn.yf, &scn.termination)?);
        Ok(())
    });
    Ok(run.done())
}
