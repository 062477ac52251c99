//! Avoid-set certification of reachable sets.
//!
//! Each check decides whether `R_t^i ∩ O_j` is empty by solving the emptiness
//! LP of the stacked intersection. For exact reach results the check is a
//! certificate in both directions; for enclosures only `Safe` is conclusive.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::czono::ConstrainedZonotope;
use crate::error::{Error, Result};
use crate::lp;
use crate::reach::{Method, ReachResult};

#[derive(Debug, Clone, PartialEq)]
pub struct UnsafeSet {
    region: ConstrainedZonotope,
    label: String,
}

impl UnsafeSet {
    pub fn new(region: ConstrainedZonotope, label: impl Into<String>) -> Result<Self> {
        if region.is_empty()? {
            return Err(Error::EmptySet);
        }
        Ok(UnsafeSet { region, label: label.into() })
    }

    pub fn region(&self) -> &ConstrainedZonotope {
        &self.region
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Safe,
    UnsafeIntersectionFound,
    Unknown,
}

/// A nonempty intersection of reach member `member` at step `t` with
/// obstacle `obstacle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: usize,
    pub member: usize,
    pub obstacle: usize,
    pub label: String,
    /// Minimum `‖ξ‖∞` of the intersection (`≤ 1` means nonempty).
    pub lp_value: f64,
    /// A state in the intersection.
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    /// Number of `(t, member, obstacle)` emptiness checks.
    pub lp_count: usize,
    /// Checks that needed an LP after the bounding-box filter.
    pub lp_solved: usize,
    pub wall_ms: f64,
}

impl VerificationReport {
    pub fn to_json_value(&self, with_timings: bool) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if !with_timings {
            v.as_object_mut().expect("object").remove("wall_ms");
        }
        v
    }
}

enum Check {
    Filtered,
    Solved(Option<Witness>),
}

fn boxes_disjoint(a: &ConstrainedZonotope, b: &ConstrainedZonotope) -> bool {
    a.outer_box().iter().zip(b.outer_box()).any(|(x, y)| !x.intersects(&y))
}

fn check_pair(z: &ConstrainedZonotope, o: &UnsafeSet, t: usize, member: usize, obstacle: usize) -> Result<Check> {
    if boxes_disjoint(z, &o.region) {
        return Ok(Check::Filtered);
    }
    let both = z.intersect(&o.region)?;
    let min = both.min_norm()?;
    if !lp::norm_within_unit(&min) {
        return Ok(Check::Solved(None));
    }
    let min = min.expect("within unit implies feasible");
    let point: DVector<f64> = both.at(&min.xi);
    Ok(Check::Solved(Some(Witness {
        t,
        member,
        obstacle,
        label: o.label.clone(),
        lp_value: min.value,
        point: point.iter().copied().collect(),
    })))
}

fn run_checks(reach: &ReachResult, obstacles: &[UnsafeSet], hit: Verdict) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut jobs = Vec::new();
    for (t, step) in reach.steps.iter().enumerate().skip(1) {
        for (i, z) in step.members().iter().enumerate() {
            for (j, o) in obstacles.iter().enumerate() {
                if o.region.dim() != z.dim() {
                    return Err(Error::DimensionMismatch { context: "unsafe set", expected: z.dim(), found: o.region.dim() });
                }
                jobs.push((t, i, j, z));
            }
        }
    }
    let results: Vec<Check> = jobs
        .par_iter()
        .map(|&(t, i, j, z)| check_pair(z, &obstacles[j], t, i, j))
        .collect::<Result<_>>()?;
    let lp_solved = results.iter().filter(|r| matches!(r, Check::Solved(_))).count();
    let witnesses: Vec<Witness> = results
        .into_iter()
        .filter_map(|r| match r {
            Check::Solved(w) => w,
            Check::Filtered => None,
        })
        .collect();
    Ok(VerificationReport {
        verdict: if witnesses.is_empty() { Verdict::Safe } else { hit },
        witnesses,
        lp_count: jobs.len(),
        lp_solved,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Certificate for exact reach sets: `Safe` iff no reachable member meets an
/// obstacle at any `t = 1..=T`.
pub fn check_avoid_exact(reach: &ReachResult, obstacles: &[UnsafeSet]) -> Result<VerificationReport> {
    if reach.method != Method::Exact || reach.over_approximate {
        return Err(Error::MethodMismatch(format!(
            "exact check needs exact reach sets, got {}{}",
            reach.method.as_str(),
            if reach.over_approximate { " (over-approximate)" } else { "" }
        )));
    }
    run_checks(reach, obstacles, Verdict::UnsafeIntersectionFound)
}

/// Sufficient check for enclosures: any intersection yields `Unknown`.
pub fn check_avoid_over(reach: &ReachResult, obstacles: &[UnsafeSet]) -> Result<VerificationReport> {
    run_checks(reach, obstacles, Verdict::Unknown)
}

/// Dispatches on whether `reach` is exact.
pub fn check_avoid(reach: &ReachResult, obstacles: &[UnsafeSet]) -> Result<VerificationReport> {
    if reach.method == Method::Exact && !reach.over_approximate {
        check_avoid_exact(reach, obstacles)
    } else {
        check_avoid_over(reach, obstacles)
    }
}
