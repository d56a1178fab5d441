//! Path planning for constrained discrete-time linear systems over a graph of
//! local state-feedback controllers with ellipsoidal positive-invariant sets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod geometry;
pub mod graph;
pub mod linalg;
pub mod lp;
pub mod lti;
pub mod maxdet;
pub mod pipeline;
pub mod planner;
pub mod scaling;
pub mod scenario;
pub mod synthesis;

pub use error::{Error, Result};
pub use geometry::{Ellipsoid, Polytope, UnionOfPolytopes};
pub use graph::{ControllerGraph, FreeSpaceGraph, LocalController, Path, PlanningProblem, Sample};
pub use linalg::{Matrix, Vector};
pub use lti::{CostModel, Equilibrium, LtiSystem};
pub use pipeline::{run_pipeline, Artifacts, PipelineFailure, PipelineOptions, Stage, StageTimings};
pub use planner::{ExecuteOptions, PlanResult, TerminationReason};
pub use scenario::{DesignMethod, Scenario, Termination};
pub use synthesis::{SynthesisResult, VerificationReport};
