//! Planning scenarios and their TOML file format.
//!
//! ```toml
//! name = "example"
//! method = "fixed-gain-lqr"      # or "sdp", "sdp-fixed-gain"
//! seed = 0
//!
//! [system]
//! model = "continuous"           # or "discrete"; continuous models are
//! period = 30.0                  # discretized by zero-order hold
//! a = [[0.0, 1.0], [0.0, 0.0]]   # matrices are row-major nested arrays
//! b = [[0.0], [1.0]]
//! c = [[1.0, 0.0]]
//!
//! [input_set]                    # { u : H u <= K }
//! h = [[1.0], [-1.0]]
//! k = [1.0, 1.0]
//!
//! [[output_set]]                 # one table per convex component Y_k
//! h = [[1.0], [-1.0]]
//! k = [10.0, 10.0]
//!
//! [task]
//! y0 = [5.0]
//! yf = [0.0]
//! x0 = [5.0, 0.0]                # optional; defaults to an equilibrium for y0
//!
//! [grid]
//! spacing = [1.0]                # per output coordinate
//!
//! [cost]
//! q = [[1.0, 0.0], [0.0, 1.0]]
//! r = [[1.0]]
//!
//! [termination]
//! output_tol = 0.01
//! max_steps = 2000
//! skip_ahead = false             # optional
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polytope, PolytopeSpec, UnionOfPolytopes, EPS_INTERIOR};
use crate::linalg::{self, Vector};
use crate::lti::{self, CostModel, LtiSystem};

/// How local controllers are designed at each sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMethod {
    /// One LQR gain and Riccati matrix for every node, level scaled per node.
    FixedGainLqr,
    /// Gain and ellipsoid designed jointly per node.
    Sdp,
    /// LQR gain for every node, ellipsoid optimized per node.
    SdpFixedGain,
}

impl DesignMethod {
    pub const ALL: [DesignMethod; 3] = [Self::FixedGainLqr, Self::Sdp, Self::SdpFixedGain];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FixedGainLqr => "fixed-gain-lqr",
            Self::Sdp => "sdp",
            Self::SdpFixedGain => "sdp-fixed-gain",
        }
    }
}

impl fmt::Display for DesignMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown design method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Termination {
    /// Run stops once `‖y - y_f‖ <= output_tol` with the final node active.
    pub output_tol: f64,
    pub max_steps: usize,
}

impl Default for Termination {
    fn default() -> Self {
        Self {
            output_tol: 1.0,
            max_steps: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: LtiSystem,
    pub input_set: Polytope,
    pub output_set: UnionOfPolytopes,
    pub y0: Vector,
    pub x0: Vector,
    /// Whether `x0` was given explicitly (kept for saving).
    pub x0_explicit: bool,
    pub yf: Vector,
    pub grid_spacing: Vec<f64>,
    pub method: DesignMethod,
    pub cost: CostModel,
    pub termination: Termination,
    pub skip_ahead: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    Continuous,
    Discrete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    y0: Vec<f64>,
    yf: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    spacing: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostFile {
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TerminationFile {
    output_tol: f64,
    max_steps: usize,
    #[serde(default)]
    skip_ahead: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    method: DesignMethod,
    #[serde(default)]
    seed: u64,
    system: SystemFile,
    input_set: PolytopeSpec,
    output_set: Vec<PolytopeSpec>,
    task: TaskFile,
    grid: GridFile,
    cost: CostFile,
    termination: TerminationFile,
}

/// Prefixes dimension and argument errors with the offending field.
fn at<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Dimension(m) => Error::Dimension(format!("{field}: {m}")),
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{field}: {m}")),
        Error::NotPositiveDefinite(m) => Error::NotPositiveDefinite(format!("{field}: {m}")),
        Error::EmptySet => Error::InvalidArgument(format!("{field}: set is empty")),
        Error::Unbounded => Error::InvalidArgument(format!("{field}: set is unbounded")),
        other => other,
    })
}

fn vec_len(field: &str, v: &[f64], n: usize) -> Result<Vector> {
    if v.len() != n {
        return Err(Error::Dimension(format!(
            "{field}: has {} entries, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{field}: non-finite entry")));
    }
    Ok(Vector::from_column_slice(v))
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.to_file()).map_err(|e| Error::Parse(e.to_string()))
    }

    fn from_file(f: ScenarioFile) -> Result<Self> {
        let a = at("system.a", linalg::from_rows(&f.system.a))?;
        let b = at("system.b", linalg::from_rows(&f.system.b))?;
        let c = at("system.c", linalg::from_rows(&f.system.c))?;
        if !a.is_square() {
            return Err(Error::Dimension("system.a: must be square".into()));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::Dimension(format!(
                "system.b: has {} rows, expected {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if c.ncols() != a.nrows() {
            return Err(Error::Dimension(format!(
                "system.c: has {} columns, expected {}",
                c.ncols(),
                a.nrows()
            )));
        }
        let system = match f.system.model {
            ModelKind::Continuous => {
                let period = f.system.period.ok_or_else(|| {
                    Error::InvalidArgument("system.period: required for continuous models".into())
                })?;
                at("system", LtiSystem::from_continuous(a, b, c, period))?
            }
            ModelKind::Discrete => at("system", LtiSystem::new(a, b, c))?,
        };
        let (nx, nu, ny) = (system.n_x(), system.n_u(), system.n_y());

        let input_set = at("input_set", Polytope::from_spec(&f.input_set))?;
        if input_set.dim() != nu {
            return Err(Error::Dimension(format!(
                "input_set: dimension {}, expected {nu}",
                input_set.dim()
            )));
        }
        at("input_set", input_set.chebyshev().map(|_| ()))?;
        let comps = f
            .output_set
            .iter()
            .enumerate()
            .map(|(i, s)| at(&format!("output_set[{i}]"), Polytope::from_spec(s)))
            .collect::<Result<Vec<_>>>()?;
        if let Some((i, p)) = comps.iter().enumerate().find(|(_, p)| p.dim() != ny) {
            return Err(Error::Dimension(format!(
                "output_set[{i}]: dimension {}, expected {ny}",
                p.dim()
            )));
        }
        let output_set = at("output_set", UnionOfPolytopes::new(comps))?;

        let y0 = vec_len("task.y0", &f.task.y0, ny)?;
        let yf = vec_len("task.yf", &f.task.yf, ny)?;
        for y in [&y0, &yf] {
            if output_set.containing_components(y, EPS_INTERIOR).is_empty() {
                return Err(Error::OutsideFreeSpace);
            }
        }
        let (x0, x0_explicit) = match &f.task.x0 {
            Some(x) => (vec_len("task.x0", x, nx)?, true),
            None => (
                lti::equilibrium_for_output(&system, &y0)?.particular().x.clone(),
                false,
            ),
        };

        let grid_spacing = f.grid.spacing.clone();
        if grid_spacing.len() != ny {
            return Err(Error::Dimension(format!(
                "grid.spacing: has {} entries, expected {ny}",
                grid_spacing.len()
            )));
        }
        if grid_spacing.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("grid.spacing: entries must be positive".into()));
        }

        let q = at("cost.q", linalg::from_rows(&f.cost.q))?;
        let r = at("cost.r", linalg::from_rows(&f.cost.r))?;
        if q.shape() != (nx, nx) || r.shape() != (nu, nu) {
            return Err(Error::Dimension(format!(
                "cost: expected q {nx}x{nx} and r {nu}x{nu}"
            )));
        }
        let cost = at("cost", CostModel::new(q, r))?;

        let t = &f.termination;
        if !(t.output_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "termination.output_tol: must be positive".into(),
            ));
        }
        Ok(Self {
            name: f.name,
            system,
            input_set,
            output_set,
            y0,
            x0,
            x0_explicit,
            yf,
            grid_spacing,
            method: f.method,
            cost,
            termination: Termination {
                output_tol: t.output_tol,
                max_steps: t.max_steps,
            },
            skip_ahead: t.skip_ahead,
            seed: f.seed,
        })
    }

    fn to_file(&self) -> ScenarioFile {
        let sys = &self.system;
        let system = match sys.continuous() {
            Some(cm) => SystemFile {
                model: ModelKind::Continuous,
                period: Some(cm.period),
                a: linalg::to_rows(&cm.a),
                b: linalg::to_rows(&cm.b),
                c: linalg::to_rows(sys.c()),
            },
            None => SystemFile {
                model: ModelKind::Discrete,
                period: None,
                a: linalg::to_rows(sys.a()),
                b: linalg::to_rows(sys.b()),
                c: linalg::to_rows(sys.c()),
            },
        };
        ScenarioFile {
            name: self.name.clone(),
            method: self.method,
            seed: self.seed,
            system,
            input_set: self.input_set.to_spec(),
            output_set: self
                .output_set
                .components()
                .iter()
                .map(Polytope::to_spec)
                .collect(),
            task: TaskFile {
                y0: self.y0.iter().copied().collect(),
                yf: self.yf.iter().copied().collect(),
                x0: self.x0_explicit.then(|| self.x0.iter().copied().collect()),
            },
            grid: GridFile {
                spacing: self.grid_spacing.clone(),
            },
            cost: CostFile {
                q: linalg::to_rows(self.cost.q()),
                r: linalg::to_rows(self.cost.r()),
            },
            termination: TerminationFile {
                output_tol: self.termination.output_tol,
                max_steps: self.termination.max_steps,
                skip_ahead: self.skip_ahead,
            },
        }
    }

    /// In-plane rendezvous with a square debris field between the chaser and
    /// the target.
    pub fn spacecraft() -> Self {
        Self::from_toml(SPACECRAFT_TOML).expect("bundled scenario is valid")
    }

    pub fn spacecraft_with(method: DesignMethod, spacing: f64) -> Self {
        let mut s = Self::spacecraft();
        s.method = method;
        s.grid_spacing = vec![spacing; s.system.n_y()];
        s
    }

    /// Debris square of the bundled spacecraft scenario, as a polytope.
    pub fn spacecraft_debris() -> Polytope {
        Polytope::from_box(&[250.0, 350.0], &[350.0, 450.0]).expect("box")
    }
}

/// Mean motion used by the bundled spacecraft scenario, in rad/s.
pub const SPACECRAFT_MEAN_MOTION: f64 = 1.1e-3;

/// The bundled spacecraft scenario file.
pub const SPACECRAFT_TOML: &str = include_str!("../scenarios/spacecraft.toml");
