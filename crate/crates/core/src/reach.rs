//! Closed-loop reachable sets of `x(t+1) = f(x(t)) + B π(x(t))`.
//!
//! For linear plants `f(x) = A x` the exact recursion composes the exact
//! network output set with the plant through the shared input factors, so
//! each reachable set is a union of constrained zonotopes equal to the true
//! set. Polynomial plants are linearized at `γ` with a Lagrange remainder box.
//!
//! Factor layout of a closed-loop set built from a set `Z` with `n_G`
//! generators: the first `n_G` columns are `Z`'s factors, the next columns
//! are the factors introduced by the network, and for polynomial plants the
//! last `n` columns belong to the remainder box.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::czono::{ConstrainedZonotope, CzJson, SetUnion};
use crate::error::{Error, Result};
use crate::expr::NonlinearModel;
use crate::interval::Interval;
use crate::linalg::{hstack, pad_columns};
use crate::nnet::{self, FeedforwardNetwork, NetworkOptions};

/// Absolute widening of the remainder box when the remainder is nonzero.
pub const REMAINDER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    a_d: DMatrix<f64>,
    b_d: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(a_d: DMatrix<f64>, b_d: DMatrix<f64>) -> Result<Self> {
        if !a_d.is_square() {
            return Err(Error::DimensionMismatch { context: "state matrix columns", expected: a_d.nrows(), found: a_d.ncols() });
        }
        if b_d.nrows() != a_d.nrows() {
            return Err(Error::DimensionMismatch { context: "input matrix rows", expected: a_d.nrows(), found: b_d.nrows() });
        }
        Ok(LinearModel { a_d, b_d })
    }

    pub fn state_matrix(&self) -> &DMatrix<f64> {
        &self.a_d
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.b_d
    }

    pub fn state_dim(&self) -> usize {
        self.a_d.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_d.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a_d * x + &self.b_d * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Over,
    NonlinearExactController,
    NonlinearOverController,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Over => "over",
            Method::NonlinearExactController => "nonlinear-exact-controller",
            Method::NonlinearOverController => "nonlinear-over-controller",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        [Method::Exact, Method::Over, Method::NonlinearExactController, Method::NonlinearOverController]
            .into_iter()
            .find(|m| m.as_str() == s)
    }

    /// Family tag written to result files.
    pub fn family(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Over => "over",
            _ => "nonlinear",
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self, Method::NonlinearExactController | Method::NonlinearOverController)
    }
}

/// Reachable sets for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachResult {
    pub method: Method,
    /// `steps[t]` is the reachable set at time `t`; `steps[0]` is `X0`.
    pub steps: Vec<SetUnion>,
    /// Wall time of each step in milliseconds (`timings_ms[0]` is 0).
    pub timings_ms: Vec<f64>,
    /// True when the sets enclose, rather than equal, the reachable sets.
    pub over_approximate: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepJson {
    t: usize,
    sets: Vec<CzJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReachJson {
    schema_version: u32,
    method: String,
    variant: Method,
    over_approximate: bool,
    dim: usize,
    member_counts: Vec<usize>,
    steps: Vec<StepJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timings_ms: Option<Vec<f64>>,
}

impl ReachResult {
    pub fn horizon(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn member_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.len()).collect()
    }

    pub fn dim(&self) -> usize {
        self.steps.first().map_or(0, |s| s.dim())
    }

    /// Result JSON; `with_timings = false` gives a run-independent document.
    pub fn to_json_value(&self, with_timings: bool) -> serde_json::Value {
        let doc = ReachJson {
            schema_version: 1,
            method: self.method.family().to_string(),
            variant: self.method,
            over_approximate: self.over_approximate,
            dim: self.dim(),
            member_counts: self.member_counts(),
            steps: self
                .steps
                .iter()
                .enumerate()
                .map(|(t, s)| StepJson { t, sets: s.members().iter().cloned().map(CzJson::from).collect() })
                .collect(),
            timings_ms: with_timings.then(|| self.timings_ms.clone()),
        };
        serde_json::to_value(doc).expect("reach result serializes")
    }

    pub fn to_json_string(&self, with_timings: bool) -> String {
        serde_json::to_string_pretty(&self.to_json_value(with_timings)).expect("reach result serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ReachJson = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("reach result: {e}")))?;
        if doc.schema_version != 1 {
            return Err(Error::Invalid(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let mut steps = Vec::with_capacity(doc.steps.len());
        for (k, s) in doc.steps.into_iter().enumerate() {
            if s.t != k {
                return Err(Error::Invalid(format!("step {k} is labelled t = {}", s.t)));
            }
            let members = s.sets.into_iter().map(ConstrainedZonotope::try_from).collect::<Result<Vec<_>>>()?;
            steps.push(SetUnion::from_members(doc.dim, members)?);
        }
        let n = steps.len();
        Ok(ReachResult {
            method: doc.variant,
            steps,
            timings_ms: doc.timings_ms.unwrap_or_else(|| vec![0.0; n]),
            over_approximate: doc.over_approximate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachOptions {
    pub network: NetworkOptions,
    /// Total member cap across a step.
    pub member_cap: usize,
    /// Order reduction of every step set as `(max_generators,
    /// max_constraints)`; marks the result over-approximate.
    pub reduce: Option<(usize, usize)>,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions { network: NetworkOptions::default(), member_cap: nnet::DEFAULT_MEMBER_CAP, reduce: None }
    }
}

impl ReachOptions {
    fn network_opts(&self) -> NetworkOptions {
        NetworkOptions { reduce: None, member_cap: self.member_cap.min(self.network.member_cap), ..self.network.clone() }
    }
}

/// Checks that `out` keeps `input`'s factors and constraints as its prefix.
fn check_prefix(input: &ConstrainedZonotope, out: &ConstrainedZonotope) -> Result<()> {
    let (ng, na) = (input.num_generators(), input.num_constraints());
    if out.num_generators() < ng || out.num_constraints() < na {
        return Err(Error::PrefixViolation(format!(
            "output has {}x{} constraints, input has {}x{}",
            out.num_constraints(),
            out.num_generators(),
            na,
            ng
        )));
    }
    let a = out.constraint_lhs();
    let same = a.view((0, 0), (na, ng)) == input.constraint_lhs().view((0, 0), (na, ng))
        && a.view((0, ng), (na, a.ncols() - ng)).iter().all(|v| *v == 0.0)
        && out.constraint_rhs().rows(0, na) == input.constraint_rhs().rows(0, na);
    if !same {
        return Err(Error::PrefixViolation("leading constraint rows differ from the input's".into()));
    }
    Ok(())
}

/// `A_d [G 0] + B_d G_u`, `A_d c + B_d c_u`, keeping `u`'s constraints.
fn compose_linear(model: &LinearModel, z: &ConstrainedZonotope, u: &ConstrainedZonotope) -> Result<ConstrainedZonotope> {
    check_prefix(z, u)?;
    let extra = u.num_generators() - z.num_generators();
    let g = model.state_matrix() * pad_columns(z.generators(), extra) + model.input_matrix() * u.generators();
    let c = model.state_matrix() * z.center() + model.input_matrix() * u.center();
    ConstrainedZonotope::new(c, g, u.constraint_lhs().clone(), u.constraint_rhs().clone())
}

fn check_linear(model: &LinearModel, net: &FeedforwardNetwork, dim: usize) -> Result<()> {
    if dim != model.state_dim() {
        return Err(Error::DimensionMismatch { context: "set vs state dimension", expected: model.state_dim(), found: dim });
    }
    if net.input_dim() != model.state_dim() {
        return Err(Error::DimensionMismatch { context: "network input", expected: model.state_dim(), found: net.input_dim() });
    }
    if net.output_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch { context: "network output", expected: model.input_dim(), found: net.output_dim() });
    }
    Ok(())
}

fn par_map<T: Sync, U: Send>(items: &[T], parallel: bool, f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn exact_member_step(z: &ConstrainedZonotope, model: &LinearModel, net: &FeedforwardNetwork, opts: &NetworkOptions) -> Result<Vec<ConstrainedZonotope>> {
    let outputs = nnet::reach_exact_network_with(net, &SetUnion::single(z.clone()), opts)?;
    outputs.members().iter().map(|u| compose_linear(model, z, u)).collect()
}

/// Exact one-step image of `z` under the closed loop.
pub fn closed_loop_exact_step(z: &SetUnion, model: &LinearModel, net: &FeedforwardNetwork) -> Result<SetUnion> {
    closed_loop_exact_step_with(z, model, net, &ReachOptions::default())
}

pub fn closed_loop_exact_step_with(z: &SetUnion, model: &LinearModel, net: &FeedforwardNetwork, opts: &ReachOptions) -> Result<SetUnion> {
    check_linear(model, net, z.dim())?;
    let nopts = opts.network_opts();
    let parts = par_map(z.members(), nopts.parallel, |m| exact_member_step(m, model, net, &nopts))?;
    collect_step(z.dim(), parts, opts.member_cap)
}

fn collect_step(dim: usize, parts: Vec<Vec<ConstrainedZonotope>>, cap: usize) -> Result<SetUnion> {
    let members: Vec<ConstrainedZonotope> = parts.into_iter().flatten().collect();
    if members.len() > cap {
        return Err(Error::MemberExplosion { count: members.len(), cap });
    }
    SetUnion::from_members(dim, members)
}

/// One-step enclosure using the relaxed network output set.
pub fn closed_loop_over_step(z: &ConstrainedZonotope, model: &LinearModel, net: &FeedforwardNetwork) -> Result<ConstrainedZonotope> {
    closed_loop_over_step_with(z, model, net, &NetworkOptions::default())
}

pub fn closed_loop_over_step_with(
    z: &ConstrainedZonotope,
    model: &LinearModel,
    net: &FeedforwardNetwork,
    opts: &NetworkOptions,
) -> Result<ConstrainedZonotope> {
    check_linear(model, net, z.dim())?;
    let u = nnet::reach_over_network_with(net, z, &NetworkOptions { reduce: None, ..opts.clone() })?;
    compose_linear(model, z, &u)
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    Ok(())
}

fn check_initial(x0: &ConstrainedZonotope) -> Result<()> {
    if x0.is_empty()? {
        return Err(Error::EmptySet);
    }
    Ok(())
}

fn reduce_union(u: SetUnion, budget: Option<(usize, usize)>) -> Result<SetUnion> {
    match budget {
        None => Ok(u),
        Some((ng, na)) => {
            let dim = u.dim();
            let members = u.into_members().iter().map(|m| m.reduce_order(ng, na)).collect::<Result<Vec<_>>>()?;
            SetUnion::from_members(dim, members)
        }
    }
}

/// Runs `step` for `horizon` steps from `x0`, timing each step.
fn iterate(
    method: Method,
    x0: &ConstrainedZonotope,
    horizon: usize,
    over_approximate: bool,
    reduce: Option<(usize, usize)>,
    mut step: impl FnMut(&SetUnion) -> Result<SetUnion>,
) -> Result<ReachResult> {
    check_horizon(horizon)?;
    check_initial(x0)?;
    let mut steps = vec![SetUnion::single(x0.clone())];
    let mut timings_ms = vec![0.0];
    for _ in 0..horizon {
        let start = Instant::now();
        let next = reduce_union(step(steps.last().expect("nonempty"))?, reduce)?;
        timings_ms.push(start.elapsed().as_secs_f64() * 1e3);
        steps.push(next);
    }
    Ok(ReachResult { method, steps, timings_ms, over_approximate: over_approximate || reduce.is_some() })
}

pub fn reach_exact(x0: &ConstrainedZonotope, model: &LinearModel, net: &FeedforwardNetwork, horizon: usize) -> Result<ReachResult> {
    reach_exact_with(x0, model, net, horizon, &ReachOptions::default())
}

pub fn reach_exact_with(
    x0: &ConstrainedZonotope,
    model: &LinearModel,
    net: &FeedforwardNetwork,
    horizon: usize,
    opts: &ReachOptions,
) -> Result<ReachResult> {
    iterate(Method::Exact, x0, horizon, false, opts.reduce, |z| closed_loop_exact_step_with(z, model, net, opts))
}

pub fn reach_over(x0: &ConstrainedZonotope, model: &LinearModel, net: &FeedforwardNetwork, horizon: usize) -> Result<ReachResult> {
    reach_over_with(x0, model, net, horizon, &ReachOptions::default())
}

pub fn reach_over_with(
    x0: &ConstrainedZonotope,
    model: &LinearModel,
    net: &FeedforwardNetwork,
    horizon: usize,
    opts: &ReachOptions,
) -> Result<ReachResult> {
    let nopts = opts.network_opts();
    iterate(Method::Over, x0, horizon, true, opts.reduce, |z| {
        let parts = par_map(z.members(), nopts.parallel, |m| closed_loop_over_step_with(m, model, net, &nopts).map(|s| vec![s]))?;
        collect_step(z.dim(), parts, opts.member_cap)
    })
}

/// Taylor enclosure of a polynomial map over a set, sharing the set's factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    /// Jacobian at `γ`.
    pub jacobian: DMatrix<f64>,
    /// `J (c - γ) + f(γ) + c_R`.
    pub center: DVector<f64>,
    /// Radii of the remainder box `R = c_R ± r`.
    pub remainder_radius: DVector<f64>,
    pub gamma: DVector<f64>,
}

impl Linearization {
    /// `CZ{c_f, [J G, diag(r)], [A 0], b}`.
    pub fn enclosure(&self, z: &ConstrainedZonotope) -> Result<ConstrainedZonotope> {
        let g = hstack(&(&self.jacobian * z.generators()), &DMatrix::from_diagonal(&self.remainder_radius));
        let a = pad_columns(z.constraint_lhs(), self.remainder_radius.len());
        ConstrainedZonotope::new(self.center.clone(), g, a, z.constraint_rhs().clone())
    }
}

/// Remainder interval `Σ_{i≤j} [H_ij](□Z) [d_i][d_j]` of component `q`, with
/// `d = x - γ` over the hull.
fn remainder_interval(model: &NonlinearModel, q: usize, hull: &[Interval], d: &[Interval]) -> Interval {
    let h = model.half_hessian(q);
    let n = hull.len();
    let mut acc = Interval::point(0.0);
    for i in 0..n {
        for j in i..n {
            if h[i][j].constant() == Some(0.0) {
                continue;
            }
            let coeff = h[i][j].eval_interval(hull);
            let prod = if i == j { d[i].powi(2) } else { d[i] * d[j] };
            acc = acc + coeff * prod;
        }
    }
    acc
}

/// Linearizes `f` over `z` at `γ` (default: hull midpoint).
pub fn linearize(model: &NonlinearModel, z: &ConstrainedZonotope, gamma: Option<&DVector<f64>>) -> Result<Linearization> {
    let n = model.dim();
    if z.dim() != n {
        return Err(Error::DimensionMismatch { context: "set vs state dimension", expected: n, found: z.dim() });
    }
    let hull = z.interval_hull()?;
    let gamma = match gamma {
        Some(g) => {
            if g.len() != n {
                return Err(Error::DimensionMismatch { context: "linearization point", expected: n, found: g.len() });
            }
            let tol = 1e-12;
            if hull.iter().zip(g.iter()).any(|(h, v)| *v < h.lo - tol * h.mag().max(1.0) || *v > h.hi + tol * h.mag().max(1.0)) {
                return Err(Error::GammaOutsideHull);
            }
            g.clone()
        }
        None => DVector::from_iterator(n, hull.iter().map(|h| h.mid())),
    };
    let d: Vec<Interval> = hull.iter().zip(gamma.iter()).map(|(h, g)| Interval::new(h.lo - g, h.hi - g)).collect();
    let jacobian = model.jacobian_at(&gamma);
    let mut c_r = DVector::zeros(n);
    let mut r = DVector::zeros(n);
    for q in 0..n {
        let rem = remainder_interval(model, q, &hull, &d);
        if rem.lo != 0.0 || rem.hi != 0.0 {
            c_r[q] = rem.mid();
            r[q] = rem.rad() + REMAINDER_SLACK;
        }
    }
    let center = &jacobian * (z.center() - &gamma) + model.eval(&gamma) + c_r;
    Ok(Linearization { jacobian, center, remainder_radius: r, gamma })
}

/// Enclosure of `f(Z)` as a constrained zonotope.
pub fn nonlinear_enclosure(model: &NonlinearModel, z: &ConstrainedZonotope, gamma: Option<&DVector<f64>>) -> Result<ConstrainedZonotope> {
    linearize(model, z, gamma)?.enclosure(z)
}

/// `[J G, 0, G_R] + B [G_u, 0]`, `c_f + B c_u`, `[A_u 0]`, `b_u`.
fn compose_nonlinear(model: &NonlinearModel, lin: &Linearization, z: &ConstrainedZonotope, u: &ConstrainedZonotope) -> Result<ConstrainedZonotope> {
    check_prefix(z, u)?;
    let n = model.dim();
    let ng = z.num_generators();
    let ngu = u.num_generators();
    let mut g = DMatrix::zeros(n, ngu + n);
    g.view_mut((0, 0), (n, ng)).copy_from(&(&lin.jacobian * z.generators()));
    g.view_mut((0, ngu), (n, n)).copy_from(&DMatrix::from_diagonal(&lin.remainder_radius));
    let bg = model.input_matrix() * u.generators();
    let mut gv = g.view_mut((0, 0), (n, ngu));
    gv += bg;
    let c = &lin.center + model.input_matrix() * u.center();
    let a = pad_columns(u.constraint_lhs(), n);
    ConstrainedZonotope::new(c, g, a, u.constraint_rhs().clone())
}

fn check_nonlinear(model: &NonlinearModel, net: &FeedforwardNetwork, dim: usize) -> Result<()> {
    if dim != model.dim() {
        return Err(Error::DimensionMismatch { context: "set vs state dimension", expected: model.dim(), found: dim });
    }
    if net.input_dim() != model.dim() {
        return Err(Error::DimensionMismatch { context: "network input", expected: model.dim(), found: net.input_dim() });
    }
    if net.output_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch { context: "network output", expected: model.input_dim(), found: net.output_dim() });
    }
    Ok(())
}

fn nonlinear_member_step(
    z: &ConstrainedZonotope,
    model: &NonlinearModel,
    net: &FeedforwardNetwork,
    approx_controller: bool,
    opts: &NetworkOptions,
) -> Result<Vec<ConstrainedZonotope>> {
    let lin = linearize(model, z, None)?;
    let outputs = if approx_controller {
        vec![nnet::reach_over_network_with(net, z, opts)?]
    } else {
        nnet::reach_exact_network_with(net, &SetUnion::single(z.clone()), opts)?.into_members()
    };
    outputs.iter().map(|u| compose_nonlinear(model, &lin, z, u)).collect()
}

/// Enclosure of the one-step closed-loop image of `z` for a polynomial plant.
pub fn closed_loop_nonlinear_step(
    z: &SetUnion,
    model: &NonlinearModel,
    net: &FeedforwardNetwork,
    approx_controller: bool,
) -> Result<SetUnion> {
    closed_loop_nonlinear_step_with(z, model, net, approx_controller, &ReachOptions::default())
}

pub fn closed_loop_nonlinear_step_with(
    z: &SetUnion,
    model: &NonlinearModel,
    net: &FeedforwardNetwork,
    approx_controller: bool,
    opts: &ReachOptions,
) -> Result<SetUnion> {
    check_nonlinear(model, net, z.dim())?;
    let nopts = opts.network_opts();
    let parts = par_map(z.members(), nopts.parallel, |m| nonlinear_member_step(m, model, net, approx_controller, &nopts))?;
    collect_step(z.dim(), parts, opts.member_cap)
}

pub fn reach_nonlinear(
    x0: &ConstrainedZonotope,
    model: &NonlinearModel,
    net: &FeedforwardNetwork,
    horizon: usize,
    approx_controller: bool,
) -> Result<ReachResult> {
    reach_nonlinear_with(x0, model, net, horizon, approx_controller, &ReachOptions::default())
}

pub fn reach_nonlinear_with(
    x0: &ConstrainedZonotope,
    model: &NonlinearModel,
    net: &FeedforwardNetwork,
    horizon: usize,
    approx_controller: bool,
    opts: &ReachOptions,
) -> Result<ReachResult> {
    let method = if approx_controller { Method::NonlinearOverController } else { Method::NonlinearExactController };
    iterate(method, x0, horizon, true, opts.reduce, |z| {
        closed_loop_nonlinear_step_with(z, model, net, approx_controller, opts)
    })
}
