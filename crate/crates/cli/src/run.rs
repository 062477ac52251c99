//! End-to-end scenario runs and artifact output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use czreach_core::reach;
use czreach_core::verify::{self, Verdict};
use czreach_core::{Method, ReachResult, VerificationReport};

use crate::error::CliError;
use crate::plot;
use crate::sampling::{self, ContainmentReport, Trajectories};
use crate::scenario::{Plant, Scenario};

pub const REACH_FILE: &str = "reach.json";
pub const REPORT_FILE: &str = "report.json";
pub const CONTAINMENT_FILE: &str = "containment.json";
pub const PLOT_FILE: &str = "plot.svg";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// 0-based coordinates to plot.
    pub plot: Option<(usize, usize)>,
    pub samples: usize,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
}

pub struct RunOutcome {
    pub reach: ReachResult,
    pub report: VerificationReport,
    pub containment: Option<ContainmentReport>,
    pub trajectories: Option<Trajectories>,
    pub wall_ms: f64,
}

pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Safe => 0,
        Verdict::UnsafeIntersectionFound | Verdict::Unknown => 2,
    }
}

pub fn compute_reach(s: &Scenario) -> Result<ReachResult, CliError> {
    let ctx = |e| CliError::core(&s.path, e);
    match (&s.plant, s.method) {
        (Plant::Linear(m), Method::Exact) => reach::reach_exact_with(&s.initial_set, m, &s.network, s.horizon, &s.options),
        (Plant::Linear(m), Method::Over) => reach::reach_over_with(&s.initial_set, m, &s.network, s.horizon, &s.options),
        (Plant::Nonlinear(m), Method::NonlinearExactController) => {
            reach::reach_nonlinear_with(&s.initial_set, m, &s.network, s.horizon, false, &s.options)
        }
        (Plant::Nonlinear(m), Method::NonlinearOverController) => {
            reach::reach_nonlinear_with(&s.initial_set, m, &s.network, s.horizon, true, &s.options)
        }
        (_, method) => {
            return Err(CliError::scenario(&s.path, format!("method `{}` does not fit the model", method.as_str())));
        }
    }
    .map_err(ctx)
}

pub fn run(s: &Scenario, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let reach = compute_reach(s)?;
    let report = verify::check_avoid(&reach, &s.unsafe_sets).map_err(|e| CliError::core(&s.path, e))?;
    let (containment, trajectories) = if opts.samples > 0 {
        let tr = sampling::sample_trajectories(s, opts.samples, opts.seed.unwrap_or(s.seed)).map_err(|e| CliError::core(&s.path, e))?;
        let rep = sampling::containment(&reach, &tr).map_err(|e| CliError::core(&s.path, e))?;
        (Some(rep), Some(tr))
    } else {
        (None, None)
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let outcome = RunOutcome { reach, report, containment, trajectories, wall_ms };
    if let Some(dir) = &opts.out_dir {
        write_artifacts(dir, s, &outcome, opts.plot)?;
    }
    Ok(outcome)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().map_or("out".into(), |n| n.to_string_lossy().into_owned());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

fn pretty(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn write_artifacts(dir: &Path, s: &Scenario, outcome: &RunOutcome, plot_dims: Option<(usize, usize)>) -> Result<(), CliError> {
    write_atomic(&dir.join(REACH_FILE), &pretty(&outcome.reach.to_json_value(true)))?;
    let mut report = outcome.report.to_json_value(true);
    if let Some(obj) = report.as_object_mut() {
        obj.insert("scenario".into(), serde_json::Value::String(s.name.clone()));
        obj.insert("method".into(), serde_json::Value::String(s.method.as_str().into()));
        obj.insert("member_counts".into(), serde_json::json!(outcome.reach.member_counts()));
        obj.insert("total_ms".into(), serde_json::json!(outcome.wall_ms));
    }
    write_atomic(&dir.join(REPORT_FILE), &pretty(&report))?;
    if let Some(c) = &outcome.containment {
        write_atomic(&dir.join(CONTAINMENT_FILE), &pretty(&serde_json::to_value(c).expect("json serializes")))?;
    }
    if let Some(dims) = plot_dims {
        let svg = plot::render_svg(&outcome.reach, dims, &s.unsafe_sets, outcome.trajectories.as_ref())?;
        write_atomic(&dir.join(PLOT_FILE), svg.as_bytes())?;
    }
    Ok(())
}

/// Removes run-dependent fields (timings) from a result document.
pub fn strip_timings(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timings_ms");
        obj.remove("wall_ms");
        obj.remove("total_ms");
    }
    v
}
