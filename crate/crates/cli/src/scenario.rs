//! Scenario files: plant, controller, initial set, horizon, unsafe sets and
//! budgets.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "model": {"type": "linear", "A": [[1, 1], [0, 1]], "B": [[0.5], [1]]},
//!   "network": "double_integrator_net.json",
//!   "initial_set": {"lo": [2.5, -0.25], "hi": [3.0, 0.25]},
//!   "horizon": 5,
//!   "unsafe_sets": [{"label": "O", "set": {"lo": [0.5, -2.0], "hi": [1.0, -1.6]}}],
//!   "method": "exact",
//!   "seed": 0,
//!   "budgets": {"member_cap": 100000}
//! }
//! ```
//!
//! A set is either a box `{"lo", "hi"}` or a constrained zonotope
//! `{"c", "G", "A", "b"}`. A nonlinear model is
//! `{"type": "nonlinear", "f": ["x1 + 0.3*x2", ...], "B": [[0], [0.3]]}`.
//! The network path is resolved relative to the scenario file.

use std::path::{Path, PathBuf};

use czreach_core::czono::CzJson;
use czreach_core::nnet::RangeMethod;
use czreach_core::reach::ReachOptions;
use czreach_core::{ConstrainedZonotope, FeedforwardNetwork, LinearModel, Method, NonlinearModel, UnsafeSet};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Zonotope(CzJson),
}

impl SetSpec {
    pub fn build(&self) -> Result<ConstrainedZonotope, String> {
        match self {
            SetSpec::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(format!("box bounds have lengths {} and {}", lo.len(), hi.len()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err("box has lo > hi".into());
                }
                Ok(ConstrainedZonotope::from_bounds(lo, hi))
            }
            SetSpec::Zonotope(j) => ConstrainedZonotope::try_from(j.clone()).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    Nonlinear {
        f: Vec<String>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnsafeSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub set: SetSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReduceSpec {
    pub max_generators: usize,
    pub max_constraints: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default)]
    pub member_cap: Option<usize>,
    #[serde(default)]
    pub reduce: Option<ReduceSpec>,
    #[serde(default)]
    pub ranges: Option<RangeMethod>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub network: PathBuf,
    pub initial_set: SetSpec,
    pub horizon: usize,
    #[serde(default)]
    pub unsafe_sets: Vec<UnsafeSpec>,
    pub method: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
}

#[derive(Debug, Clone)]
pub enum Plant {
    Linear(LinearModel),
    Nonlinear(NonlinearModel),
}

impl Plant {
    pub fn dim(&self) -> usize {
        match self {
            Plant::Linear(m) => m.state_dim(),
            Plant::Nonlinear(m) => m.dim(),
        }
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Plant::Linear(m) => m.step(x, u),
            Plant::Nonlinear(m) => m.step(x, u),
        }
    }
}

/// A validated scenario with its network loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub name: String,
    pub plant: Plant,
    pub network: FeedforwardNetwork,
    pub initial_set: ConstrainedZonotope,
    pub horizon: usize,
    pub unsafe_sets: Vec<UnsafeSet>,
    pub method: Method,
    pub seed: u64,
    pub options: ReachOptions,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, |r| r.len());
    czreach_core::linalg::from_rows(rows, ncols).ok_or_else(|| format!("{what}: rows have unequal lengths"))
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| CliError::scenario(path, e.to_string()))?;
        Self::from_file(path, file)
    }

    pub fn from_file(path: &Path, file: ScenarioFile) -> Result<Scenario, CliError> {
        let fail = |msg: String| CliError::scenario(path, msg);
        if file.schema_version != 1 {
            return Err(fail(format!("unsupported schema_version {}", file.schema_version)));
        }
        if file.horizon == 0 {
            return Err(fail("horizon must be at least 1".into()));
        }
        let method = Method::parse(&file.method).ok_or_else(|| fail(format!("unknown method `{}`", file.method)))?;
        let plant = match &file.model {
            ModelSpec::Linear { a, b } => {
                let a = matrix(a, "model.A").map_err(fail)?;
                let b = matrix(b, "model.B").map_err(fail)?;
                Plant::Linear(LinearModel::new(a, b).map_err(|e| fail(format!("model: {e}")))?)
            }
            ModelSpec::Nonlinear { f, b } => {
                let b = matrix(b, "model.B").map_err(fail)?;
                Plant::Nonlinear(NonlinearModel::parse(f, b).map_err(|e| fail(format!("model.f: {e}")))?)
            }
        };
        check_method(&plant, method).map_err(fail)?;

        let net_path = path.parent().unwrap_or(Path::new(".")).join(&file.network);
        let network = FeedforwardNetwork::load(&net_path).map_err(|e| CliError::scenario(&net_path, e.to_string()))?;
        let n = plant.dim();
        let m = match &plant {
            Plant::Linear(l) => l.input_dim(),
            Plant::Nonlinear(nl) => nl.input_dim(),
        };
        if network.input_dim() != n || network.output_dim() != m {
            return Err(fail(format!(
                "network maps R^{} to R^{}, plant needs R^{n} to R^{m}",
                network.input_dim(),
                network.output_dim()
            )));
        }

        let initial_set = file.initial_set.build().map_err(|e| fail(format!("initial_set: {e}")))?;
        if initial_set.dim() != n {
            return Err(fail(format!("initial_set has dimension {}, plant has {n}", initial_set.dim())));
        }
        let mut unsafe_sets = Vec::new();
        for (k, u) in file.unsafe_sets.iter().enumerate() {
            let region = u.set.build().map_err(|e| fail(format!("unsafe_sets[{k}]: {e}")))?;
            if region.dim() != n {
                return Err(fail(format!("unsafe_sets[{k}] has dimension {}, plant has {n}", region.dim())));
            }
            let label = u.label.clone().unwrap_or_else(|| format!("O{}", k + 1));
            unsafe_sets.push(UnsafeSet::new(region, label).map_err(|e| fail(format!("unsafe_sets[{k}]: {e}")))?);
        }

        let mut options = ReachOptions::default();
        if let Some(cap) = file.budgets.member_cap {
            options.member_cap = cap;
            options.network.member_cap = cap;
        }
        if let Some(r) = &file.budgets.reduce {
            options.reduce = Some((r.max_generators, r.max_constraints));
        }
        if let Some(ranges) = file.budgets.ranges {
            options.network.ranges = ranges;
        }
        let name = file
            .name
            .clone()
            .unwrap_or_else(|| path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned()));
        Ok(Scenario {
            path: path.to_path_buf(),
            name,
            plant,
            network,
            initial_set,
            horizon: file.horizon,
            unsafe_sets,
            method,
            seed: file.seed,
            options,
        })
    }

    /// Replaces the method, rechecking it against the plant.
    pub fn set_method(&mut self, method: Method) -> Result<(), CliError> {
        check_method(&self.plant, method).map_err(|e| CliError::scenario(&self.path, e))?;
        self.method = method;
        Ok(())
    }

    pub fn set_member_cap(&mut self, cap: usize) {
        self.options.member_cap = cap;
        self.options.network.member_cap = cap;
    }
}

fn check_method(plant: &Plant, method: Method) -> Result<(), String> {
    match (plant, method.is_nonlinear()) {
        (Plant::Linear(_), true) => Err(format!("method `{}` needs a nonlinear model", method.as_str())),
        (Plant::Nonlinear(_), false) => Err(format!(
            "method `{}` needs a linear model; use nonlinear-exact-controller or nonlinear-over-controller",
            method.as_str()
        )),
        _ => Ok(()),
    }
}
