//! ReLU feedforward networks and their output sets.
//!
//! [`reach_exact_network`] splits every neuron whose pre-activation range
//! crosses zero into a nonnegative branch and a projected negative branch,
//! producing a union of constrained zonotopes equal to the true output set.
//! [`reach_over_network`] instead replaces each crossing neuron by its
//! triangle relaxation and returns a single enclosing set.
//!
//! Both keep the input factors `ξ` as the leading generator columns of every
//! output set and the input constraints as the leading rows. The closed-loop
//! constructions in [`crate::reach`] rely on this.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::czono::{ConstrainedZonotope, SetUnion};
use crate::error::{Error, Result};
use crate::linalg::{pad_columns, vconcat, vstack};

pub const DEFAULT_MEMBER_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Hidden layers apply `max(0, W x + v)`; the last layer is affine only.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNetwork {
    layers: Vec<Layer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema_version: Option<u32>,
    layers: Vec<LayerJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerJson {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    v: Vec<f64>,
}

impl FeedforwardNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Schema("network has no layers".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.nrows() {
                return Err(Error::Schema(format!(
                    "layer {k}: bias has {} entries but W has {} rows",
                    l.bias.len(),
                    l.weights.nrows()
                )));
            }
            if k > 0 {
                let prev = layers[k - 1].weights.nrows();
                if l.weights.ncols() != prev {
                    return Err(Error::DimensionChain { layer: k, expected: l.weights.ncols(), found: prev });
                }
            }
        }
        Ok(FeedforwardNetwork { layers })
    }

    /// One affine layer `x ↦ W x + v` (no activation).
    pub fn linear(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        Self::new(vec![Layer { weights, bias }])
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: NetworkJson = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if let Some(v) = raw.schema_version {
            if v != 1 {
                return Err(Error::Schema(format!("unsupported schema_version {v}")));
            }
        }
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (k, l) in raw.layers.into_iter().enumerate() {
            let ncols = l.w.first().map_or(0, |r| r.len());
            let weights = crate::linalg::from_rows(&l.w, ncols)
                .ok_or_else(|| Error::Schema(format!("layer {k}: rows of W have unequal lengths")))?;
            if weights.nrows() == 0 || ncols == 0 {
                return Err(Error::Schema(format!("layer {k}: W is empty")));
            }
            layers.push(Layer { weights, bias: DVector::from_vec(l.v) });
        }
        Self::new(layers)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let raw = NetworkJson {
            schema_version: Some(1),
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson { w: crate::linalg::to_rows(&l.weights), v: l.bias.iter().copied().collect() })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("network serializes")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.nrows()
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (k, l) in self.layers.iter().enumerate() {
            h = &l.weights * h + &l.bias;
            if k < last {
                h.apply(|v| *v = v.max(0.0));
            }
        }
        h
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim() {
            return Err(Error::DimensionMismatch { context: "network input", expected: self.input_dim(), found: dim });
        }
        Ok(())
    }
}

/// How pre-activation ranges are bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeMethod {
    /// Two LPs per coordinate (tight).
    #[default]
    Lp,
    /// `c ± Σ|G|`, ignoring the constraints (cheap, looser).
    Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOptions {
    pub ranges: RangeMethod,
    pub member_cap: usize,
    pub parallel: bool,
    /// Order reduction after each hidden layer as `(max_generators,
    /// max_constraints)`. Destroys the input-factor prefix, so the result can
    /// no longer be composed with the plant exactly.
    pub reduce: Option<(usize, usize)>,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions { ranges: RangeMethod::Lp, member_cap: DEFAULT_MEMBER_CAP, parallel: true, reduce: None }
    }
}

/// Lower and upper bounds of every coordinate over `z`.
pub fn neuron_ranges(z: &ConstrainedZonotope, method: RangeMethod) -> Result<(DVector<f64>, DVector<f64>)> {
    let hull = match method {
        RangeMethod::Lp => z.interval_hull()?,
        RangeMethod::Interval => {
            if z.is_empty()? {
                return Err(Error::EmptySet);
            }
            z.outer_box()
        }
    };
    Ok((
        DVector::from_iterator(hull.len(), hull.iter().map(|h| h.lo)),
        DVector::from_iterator(hull.len(), hull.iter().map(|h| h.hi)),
    ))
}

fn unit(n: usize, i: usize, s: f64) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = s;
    e
}

/// Exact ReLU on coordinate `i` of a single set, dropping empty branches.
fn split_member(z: &ConstrainedZonotope, i: usize, ub: f64, out: &mut Vec<ConstrainedZonotope>) -> Result<()> {
    if ub <= 0.0 {
        out.push(z.project_out(i)?);
        return Ok(());
    }
    let n = z.dim();
    let pos = z.intersect_halfspace(&unit(n, i, -1.0), 0.0)?;
    if !pos.is_empty()? {
        out.push(pos);
    }
    let neg = z.intersect_halfspace(&unit(n, i, 1.0), 0.0)?;
    if !neg.is_empty()? {
        out.push(neg.project_out(i)?);
    }
    Ok(())
}

/// Image of `u` under `x_i ↦ max(0, x_i)`, given bounds of coordinate `i`
/// over `u` with `lb_i < 0`.
pub fn step_relu_exact(u: &SetUnion, i: usize, lb_i: f64, ub_i: f64) -> Result<SetUnion> {
    if i >= u.dim() {
        return Err(Error::IndexOutOfRange { index: i, dim: u.dim() });
    }
    debug_assert!(lb_i < 0.0, "neurons with lb >= 0 are identity and should be skipped");
    let _ = lb_i;
    let mut out = Vec::with_capacity(2 * u.len());
    for m in u.members() {
        split_member(m, i, ub_i, &mut out)?;
    }
    SetUnion::from_members(u.dim(), out)
}

/// Pushes one set through hidden layer `layer`, returning the exact image.
fn exact_hidden_layer(z: &ConstrainedZonotope, layer: &Layer, opts: &NetworkOptions) -> Result<Vec<ConstrainedZonotope>> {
    let pre = z.affine_map(&layer.weights, &layer.bias)?;
    let (lb, ub) = neuron_ranges(&pre, opts.ranges)?;
    let mut current = vec![pre];
    for i in (0..lb.len()).filter(|&i| lb[i] < 0.0) {
        let mut next = Vec::with_capacity(2 * current.len());
        for m in &current {
            split_member(m, i, ub[i], &mut next)?;
        }
        if next.len() > opts.member_cap {
            return Err(Error::MemberExplosion { count: next.len(), cap: opts.member_cap });
        }
        current = next;
    }
    if let Some((ng, na)) = opts.reduce {
        current = current.iter().map(|m| m.reduce_order(ng, na)).collect::<Result<_>>()?;
    }
    Ok(current)
}

/// Exact output set of `net` over `z`, keeping members in construction order.
pub fn reach_exact_network(net: &FeedforwardNetwork, z: &SetUnion) -> Result<SetUnion> {
    reach_exact_network_with(net, z, &NetworkOptions::default())
}

pub fn reach_exact_network_with(net: &FeedforwardNetwork, z: &SetUnion, opts: &NetworkOptions) -> Result<SetUnion> {
    net.check_input(z.dim())?;
    let (hidden, last) = net.layers.split_at(net.layers.len() - 1);
    let mut current: Vec<ConstrainedZonotope> = z.members().to_vec();
    for layer in hidden {
        let step = |m: &ConstrainedZonotope| exact_hidden_layer(m, layer, opts);
        let parts: Vec<Vec<ConstrainedZonotope>> = if opts.parallel {
            current.par_iter().map(step).collect::<Result<_>>()?
        } else {
            current.iter().map(step).collect::<Result<_>>()?
        };
        current = parts.into_iter().flatten().collect();
        if current.len() > opts.member_cap {
            return Err(Error::MemberExplosion { count: current.len(), cap: opts.member_cap });
        }
    }
    let out = current
        .iter()
        .map(|m| m.affine_map(&last[0].weights, &last[0].bias))
        .collect::<Result<Vec<_>>>()?;
    SetUnion::from_members(net.output_dim(), out)
}

/// Triangle relaxation of `x_i ↦ max(0, x_i)` over `z`, given `l_i < 0` and
/// an upper bound `u_i`.
///
/// For `l < 0 < u` four factors `(ξ_a, ξ_b, ξ_c, ξ_d)` and three rows are
/// appended. The new coordinate is `y = u ξ_a`, and the rows enforce
/// `ξ_a + ξ_b = 1` (so `y ≥ 0`), `y - x = (u - l)(1 - ξ_c)` (so `y ≥ x`) and
/// `(u - l) ξ_a - x + u = -(u - l) ξ_d` (so `y ≤ u (x - l) / (u - l)`).
pub fn step_relu_over(z: &ConstrainedZonotope, i: usize, l_i: f64, u_i: f64) -> Result<ConstrainedZonotope> {
    if i >= z.dim() {
        return Err(Error::IndexOutOfRange { index: i, dim: z.dim() });
    }
    if l_i >= 0.0 {
        return Ok(z.clone());
    }
    if u_i <= 0.0 {
        return z.project_out(i);
    }
    let (l, u) = (l_i, u_i);
    let n = z.dim();
    let ng = z.num_generators();
    let gi = z.generators().row(i).into_owned();
    let ci = z.center()[i];

    let mut g = pad_columns(z.generators(), 4);
    g.row_mut(i).fill(0.0);
    g[(i, ng)] = u;
    let mut c = z.center().clone();
    c[i] = 0.0;

    let mut rows = DMatrix::zeros(3, ng + 4);
    rows[(0, ng)] = 1.0;
    rows[(0, ng + 1)] = 1.0;
    for k in 0..ng {
        rows[(1, k)] = -gi[k];
        rows[(2, k)] = -gi[k];
    }
    rows[(1, ng)] = u;
    rows[(1, ng + 2)] = u - l;
    rows[(2, ng)] = u - l;
    rows[(2, ng + 3)] = u - l;
    let rhs = DVector::from_vec(vec![1.0, ci + u - l, ci - u]);

    let a = vstack(&pad_columns(z.constraint_lhs(), 4), &rows);
    let b = vconcat(z.constraint_rhs(), &rhs);
    debug_assert_eq!(g.nrows(), n);
    ConstrainedZonotope::new(c, g, a, b)
}

/// Single-set enclosure of the output of `net` over `z`.
pub fn reach_over_network(net: &FeedforwardNetwork, z: &ConstrainedZonotope) -> Result<ConstrainedZonotope> {
    reach_over_network_with(net, z, &NetworkOptions::default())
}

pub fn reach_over_network_with(
    net: &FeedforwardNetwork,
    z: &ConstrainedZonotope,
    opts: &NetworkOptions,
) -> Result<ConstrainedZonotope> {
    net.check_input(z.dim())?;
    let (hidden, last) = net.layers.split_at(net.layers.len() - 1);
    let mut current = z.clone();
    for layer in hidden {
        current = current.affine_map(&layer.weights, &layer.bias)?;
        let (lb, ub) = neuron_ranges(&current, opts.ranges)?;
        for i in (0..lb.len()).filter(|&i| lb[i] < 0.0) {
            current = step_relu_over(&current, i, lb[i], ub[i])?;
        }
        if let Some((ng, na)) = opts.reduce {
            current = current.reduce_order(ng, na)?;
        }
    }
    current.affine_map(&last[0].weights, &last[0].bias)
}
