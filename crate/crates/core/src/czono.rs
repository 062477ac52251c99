//! Constrained zonotopes `CZ{c, G, A, b} = {G ξ + c : ‖ξ‖∞ ≤ 1, A ξ = b}` and
//! their set algebra: linear maps, Minkowski sums, intersections, halfspace
//! cuts, LP-based emptiness, support bounds and order reduction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::linalg::{block_diag, hstack, pad_columns, vconcat, vstack};
use crate::lp::{self, LinearProgram, LpStatus, NormMinimum};

/// Absolute slack (scaled by the point magnitude) used by
/// [`ConstrainedZonotope::contains_point`].
pub const MEMBERSHIP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CzJson", into = "CzJson")]
pub struct ConstrainedZonotope {
    c: DVector<f64>,
    g: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl ConstrainedZonotope {
    pub fn new(c: DVector<f64>, g: DMatrix<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if g.nrows() != c.len() {
            return Err(Error::DimensionMismatch { context: "generator rows", expected: c.len(), found: g.nrows() });
        }
        if a.ncols() != g.ncols() {
            return Err(Error::DimensionMismatch { context: "constraint columns", expected: g.ncols(), found: a.ncols() });
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch { context: "constraint rhs", expected: a.nrows(), found: b.len() });
        }
        Ok(ConstrainedZonotope { c, g, a, b })
    }

    /// Unconstrained zonotope `{G ξ + c : ‖ξ‖∞ ≤ 1}`.
    pub fn zonotope(c: DVector<f64>, g: DMatrix<f64>) -> Result<Self> {
        let ng = g.ncols();
        Self::new(c, g, DMatrix::zeros(0, ng), DVector::zeros(0))
    }

    /// The single point `{c}` (no generators).
    pub fn point(c: DVector<f64>) -> Self {
        let n = c.len();
        ConstrainedZonotope { c, g: DMatrix::zeros(n, 0), a: DMatrix::zeros(0, 0), b: DVector::zeros(0) }
    }

    /// Axis-aligned box `c ± r` with one generator per coordinate.
    pub fn from_center_radius(c: DVector<f64>, r: DVector<f64>) -> Self {
        let n = c.len();
        ConstrainedZonotope { c, g: DMatrix::from_diagonal(&r), a: DMatrix::zeros(0, n), b: DVector::zeros(0) }
    }

    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let c = DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)));
        let r = DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)));
        Self::from_center_radius(c, r)
    }

    pub fn from_box(bounds: &[Interval]) -> Self {
        let lo: Vec<f64> = bounds.iter().map(|b| b.lo).collect();
        let hi: Vec<f64> = bounds.iter().map(|b| b.hi).collect();
        Self::from_bounds(&lo, &hi)
    }

    /// Canonical empty set of dimension `n`: one generator, `ξ = 2`.
    pub fn empty(n: usize) -> Self {
        ConstrainedZonotope {
            c: DVector::zeros(n),
            g: DMatrix::zeros(n, 1),
            a: DMatrix::from_element(1, 1, 1.0),
            b: DVector::from_element(1, 2.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn num_generators(&self) -> usize {
        self.g.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn constraint_lhs(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn constraint_rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        (self.c, self.g, self.a, self.b)
    }

    /// `c + G ξ` for a given factor vector.
    pub fn at(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.c + &self.g * xi
    }

    fn check_dim(&self, context: &'static str, found: usize) -> Result<()> {
        if found == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { context, expected: self.dim(), found })
        }
    }

    /// `R Z = CZ{R c, R G, A, b}`.
    pub fn linear_map(&self, r: &DMatrix<f64>) -> Result<Self> {
        self.check_dim("linear map columns", r.ncols())?;
        Ok(ConstrainedZonotope { c: r * &self.c, g: r * &self.g, a: self.a.clone(), b: self.b.clone() })
    }

    /// `R Z + t`.
    pub fn affine_map(&self, r: &DMatrix<f64>, t: &DVector<f64>) -> Result<Self> {
        let mut out = self.linear_map(r)?;
        if t.len() != out.dim() {
            return Err(Error::DimensionMismatch { context: "affine offset", expected: out.dim(), found: t.len() });
        }
        out.c += t;
        Ok(out)
    }

    pub fn translate(&self, t: &DVector<f64>) -> Result<Self> {
        self.check_dim("translation", t.len())?;
        let mut out = self.clone();
        out.c += t;
        Ok(out)
    }

    /// `Z ⊕ W`: stacked generators, block-diagonal constraints.
    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        self.check_dim("minkowski sum", other.dim())?;
        Ok(ConstrainedZonotope {
            c: &self.c + &other.c,
            g: hstack(&self.g, &other.g),
            a: block_diag(&self.a, &other.a),
            b: vconcat(&self.b, &other.b),
        })
    }

    /// `Z ∩ W`, adding the coupling constraint `G_z ξ_z - G_w ξ_w = c_w - c_z`.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.check_dim("intersection", other.dim())?;
        let coupling = hstack(&self.g, &(-&other.g));
        Ok(ConstrainedZonotope {
            c: self.c.clone(),
            g: pad_columns(&self.g, other.num_generators()),
            a: vstack(&block_diag(&self.a, &other.a), &coupling),
            b: vconcat(&vconcat(&self.b, &other.b), &(&other.c - &self.c)),
        })
    }

    /// `Z ∩ {x : hᵀx ≤ f}` with one extra generator and one extra constraint.
    ///
    /// With `d_m = f - hᵀc + Σᵢ |hᵀGᵢ|`, the new row is `[hᵀG, d_m/2]` with
    /// right-hand side `f - hᵀc - d_m/2`. When `d_m < 0` the unconstrained hull
    /// already lies strictly outside the halfspace; that row would then pin
    /// `hᵀx` to the hull boundary instead of cutting everything away, so an
    /// infeasible row of the same shape is appended instead.
    pub fn intersect_halfspace(&self, h: &DVector<f64>, f: f64) -> Result<Self> {
        self.check_dim("halfspace normal", h.len())?;
        let hg = h.transpose() * &self.g;
        let hc = h.dot(&self.c);
        let dm = f - hc + hg.iter().map(|v| v.abs()).sum::<f64>();
        let ng = self.num_generators();
        let mut row = DMatrix::zeros(1, ng + 1);
        let rhs;
        if dm >= 0.0 {
            row.view_mut((0, 0), (1, ng)).copy_from(&hg);
            row[(0, ng)] = 0.5 * dm;
            rhs = f - hc - 0.5 * dm;
        } else {
            row[(0, ng)] = 1.0;
            rhs = 2.0;
        }
        Ok(ConstrainedZonotope {
            c: self.c.clone(),
            g: pad_columns(&self.g, 1),
            a: vstack(&pad_columns(&self.a, 1), &row),
            b: vconcat(&self.b, &DVector::from_element(1, rhs)),
        })
    }

    /// Zeroes coordinate `i` (the map `E_i`).
    pub fn project_out(&self, i: usize) -> Result<Self> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange { index: i, dim: self.dim() });
        }
        let mut out = self.clone();
        out.c[i] = 0.0;
        out.g.row_mut(i).fill(0.0);
        Ok(out)
    }

    /// `min ‖ξ‖∞` subject to `A ξ = b`.
    pub fn min_norm(&self) -> Result<Option<NormMinimum>> {
        lp::min_inf_norm(&self.a, &self.b)
    }

    /// Emptiness via the ∞-norm LP; ties within tolerance count as nonempty.
    pub fn is_empty(&self) -> Result<bool> {
        if self.num_constraints() == 0 {
            return Ok(false);
        }
        Ok(!lp::norm_within_unit(&self.min_norm()?))
    }

    /// Support interval of `dᵀx` over the set.
    pub fn support(&self, d: &DVector<f64>) -> Result<Interval> {
        lp::bound_along(d, &self.c, &self.g, &self.a, &self.b)
    }

    /// Tightest axis-aligned box, one LP pair per coordinate.
    pub fn interval_hull(&self) -> Result<Vec<Interval>> {
        let n = self.dim();
        if self.num_constraints() > 0 && self.is_empty()? {
            return Err(Error::EmptySet);
        }
        (0..n)
            .map(|i| {
                let mut d = DVector::zeros(n);
                d[i] = 1.0;
                self.support(&d)
            })
            .collect()
    }

    /// Box `c ± Σ|G|` of the zonotope obtained by dropping the constraints.
    /// Always contains the set; needs no LP.
    pub fn outer_box(&self) -> Vec<Interval> {
        (0..self.dim())
            .map(|i| {
                let r: f64 = self.g.row(i).iter().map(|v| v.abs()).sum();
                Interval::new(self.c[i] - r, self.c[i] + r)
            })
            .collect()
    }

    /// Membership of `x` up to [`MEMBERSHIP_TOL`]: feasibility of
    /// `|G ξ - (x - c)| ≤ τ`, `A ξ = b`, `‖ξ‖∞ ≤ 1 + τ`.
    pub fn contains_point(&self, x: &DVector<f64>) -> Result<bool> {
        self.check_dim("membership point", x.len())?;
        let tau = MEMBERSHIP_TOL * 1.0_f64.max(crate::linalg::max_abs(x));
        let diff = x - &self.c;
        if self.outer_box().iter().zip(x.iter()).any(|(b, xi)| *xi < b.lo - tau || *xi > b.hi + tau) {
            return Ok(false);
        }
        let ng = self.num_generators();
        if ng == 0 {
            return Ok(crate::linalg::max_abs(&diff) <= tau && (self.num_constraints() == 0 || !self.is_empty()?));
        }
        let ineq = vstack(&self.g, &(-&self.g));
        let rhs = vconcat(&diff.add_scalar(tau), &(-&diff).add_scalar(tau));
        let lp = LinearProgram::new(
            DVector::zeros(ng),
            DVector::from_element(ng, -1.0 - MEMBERSHIP_TOL),
            DVector::from_element(ng, 1.0 + MEMBERSHIP_TOL),
        )
        .with_equalities(self.a.clone(), self.b.clone())
        .with_inequalities(ineq, rhs);
        Ok(lp::solve_lp(&lp)?.status == LpStatus::Optimal)
    }

    /// Returns `Z' ⊇ Z` with at most `max_generators` generators and
    /// `max_constraints` constraints.
    ///
    /// Constraints are eliminated by solving one for its largest-magnitude
    /// coefficient variable and substituting (this drops that variable's box
    /// bound). Excess generators are then boxed in the lifted space
    /// `[G; A]`, smallest norms first. A result that ends up being a pure box
    /// is replaced by the exact interval hull of `Z`.
    pub fn reduce_order(&self, max_generators: usize, max_constraints: usize) -> Result<Self> {
        let n = self.dim();
        if max_generators < n {
            return Err(Error::Invalid(format!(
                "generator budget {max_generators} is below the dimension {n}"
            )));
        }
        if self.num_generators() <= max_generators && self.num_constraints() <= max_constraints {
            return Ok(self.clone());
        }
        if self.is_empty()? {
            return Err(Error::EmptySet);
        }

        let mut z = self.clone();
        while z.num_constraints() > max_constraints {
            z = z.eliminate_constraint();
        }
        if z.num_generators() <= max_generators {
            return Ok(z);
        }
        // Boxing adds n + n_A generators; make room for them first.
        while n + z.num_constraints() > max_generators {
            z = z.eliminate_constraint();
        }
        if z.num_generators() <= max_generators {
            return Ok(z);
        }
        let keep = max_generators - n - z.num_constraints();
        if keep == 0 && z.num_constraints() == 0 {
            return Ok(Self::from_box(&self.interval_hull()?));
        }
        Ok(z.box_smallest_generators(keep))
    }

    fn eliminate_constraint(&self) -> Self {
        let (na, ng) = self.a.shape();
        let mut best = (0, 0, 0.0_f64);
        for r in 0..na {
            for j in 0..ng {
                let v = self.a[(r, j)].abs();
                if v > best.2 {
                    best = (r, j, v);
                }
            }
        }
        let (r, j, mag) = best;
        if mag == 0.0 {
            // All rows read 0 = b; the set is nonempty so b ≈ 0.
            return ConstrainedZonotope {
                c: self.c.clone(),
                g: self.g.clone(),
                a: DMatrix::zeros(0, ng),
                b: DVector::zeros(0),
            };
        }
        let pivot = self.a[(r, j)];
        let arow = self.a.row(r).into_owned();
        let br = self.b[r];
        let gcol = self.g.column(j).into_owned();
        let keep_cols: Vec<usize> = (0..ng).filter(|&k| k != j).collect();
        let keep_rows: Vec<usize> = (0..na).filter(|&s| s != r).collect();

        let c = &self.c + &gcol * (br / pivot);
        let g = DMatrix::from_fn(self.dim(), ng - 1, |i, kk| {
            let k = keep_cols[kk];
            self.g[(i, k)] - gcol[i] * arow[k] / pivot
        });
        let a = DMatrix::from_fn(na - 1, ng - 1, |ss, kk| {
            let (s, k) = (keep_rows[ss], keep_cols[kk]);
            self.a[(s, k)] - self.a[(s, j)] * arow[k] / pivot
        });
        let b = DVector::from_fn(na - 1, |ss, _| {
            let s = keep_rows[ss];
            self.b[s] - self.a[(s, j)] * br / pivot
        });
        ConstrainedZonotope { c, g, a, b }
    }

    fn box_smallest_generators(&self, keep: usize) -> Self {
        let n = self.dim();
        let na = self.num_constraints();
        let lifted = vstack(&self.g, &self.a);
        let mut order: Vec<usize> = (0..lifted.ncols()).collect();
        let norms: Vec<f64> = (0..lifted.ncols()).map(|k| lifted.column(k).norm()).collect();
        order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
        let mut kept: Vec<usize> = order[..keep].to_vec();
        kept.sort_unstable();
        let boxed = &order[keep..];

        let mut cols: Vec<DVector<f64>> = kept.iter().map(|&k| lifted.column(k).into_owned()).collect();
        for row in 0..n + na {
            let s: f64 = boxed.iter().map(|&k| lifted[(row, k)].abs()).sum();
            if s > 0.0 {
                let mut col = DVector::zeros(n + na);
                col[row] = s;
                cols.push(col);
            }
        }
        let lifted_new = if cols.is_empty() {
            DMatrix::zeros(n + na, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        ConstrainedZonotope {
            c: self.c.clone(),
            g: lifted_new.rows(0, n).into_owned(),
            a: lifted_new.rows(n, na).into_owned(),
            b: self.b.clone(),
        }
    }
}

/// JSON shape: row-major matrices, empty arrays when there are no
/// constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CzJson {
    pub c: Vec<f64>,
    pub G: Vec<Vec<f64>>,
    #[serde(default)]
    pub A: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
}

impl From<ConstrainedZonotope> for CzJson {
    fn from(z: ConstrainedZonotope) -> Self {
        CzJson {
            c: z.c.iter().copied().collect(),
            G: crate::linalg::to_rows(&z.g),
            A: crate::linalg::to_rows(&z.a),
            b: z.b.iter().copied().collect(),
        }
    }
}

impl TryFrom<CzJson> for ConstrainedZonotope {
    type Error = Error;

    fn try_from(j: CzJson) -> Result<Self> {
        let n = j.c.len();
        if j.G.len() != n {
            return Err(Error::DimensionMismatch { context: "G rows", expected: n, found: j.G.len() });
        }
        let ng = j.G.first().map(|r| r.len()).or_else(|| j.A.first().map(|r| r.len())).unwrap_or(0);
        let g = crate::linalg::from_rows(&j.G, ng)
            .ok_or_else(|| Error::Invalid("ragged G matrix".into()))?;
        let a = crate::linalg::from_rows(&j.A, ng)
            .ok_or_else(|| Error::Invalid("A column count differs from generator count".into()))?;
        ConstrainedZonotope::new(DVector::from_vec(j.c), g, a, DVector::from_vec(j.b))
    }
}

/// Finite union of constrained zonotopes of a common dimension. An empty
/// member list is the empty set.
#[derive(Debug, Clone, PartialEq)]
pub struct SetUnion {
    dim: usize,
    members: Vec<ConstrainedZonotope>,
}

impl SetUnion {
    pub fn empty(dim: usize) -> Self {
        SetUnion { dim, members: Vec::new() }
    }

    pub fn single(z: ConstrainedZonotope) -> Self {
        SetUnion { dim: z.dim(), members: vec![z] }
    }

    pub fn from_members(dim: usize, members: Vec<ConstrainedZonotope>) -> Result<Self> {
        if let Some(bad) = members.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch { context: "union member", expected: dim, found: bad.dim() });
        }
        Ok(SetUnion { dim, members })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn members(&self) -> &[ConstrainedZonotope] {
        &self.members
    }

    pub fn into_members(self) -> Vec<ConstrainedZonotope> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn push(&mut self, z: ConstrainedZonotope) -> Result<()> {
        if z.dim() != self.dim {
            return Err(Error::DimensionMismatch { context: "union member", expected: self.dim, found: z.dim() });
        }
        self.members.push(z);
        Ok(())
    }

    pub fn contains_point(&self, x: &DVector<f64>) -> Result<bool> {
        for m in &self.members {
            if m.contains_point(x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Coordinatewise hull of the members' interval hulls.
    pub fn interval_hull(&self) -> Result<Vec<Interval>> {
        let mut acc: Option<Vec<Interval>> = None;
        for m in &self.members {
            let h = m.interval_hull()?;
            acc = Some(match acc {
                None => h,
                Some(prev) => prev.iter().zip(h.iter()).map(|(a, b)| a.hull(b)).collect(),
            });
        }
        acc.ok_or(Error::EmptySet)
    }

    /// Precomputes member hulls for repeated membership queries.
    pub fn indexed(&self) -> Result<IndexedUnion<'_>> {
        let hulls = self.members.iter().map(|m| m.interval_hull()).collect::<Result<Vec<_>>>()?;
        Ok(IndexedUnion { union: self, hulls })
    }
}

/// A [`SetUnion`] with cached member hulls, used to reject members cheaply
/// before solving a membership LP.
pub struct IndexedUnion<'a> {
    union: &'a SetUnion,
    hulls: Vec<Vec<Interval>>,
}

impl IndexedUnion<'_> {
    /// Index of the first member containing `x`, if any.
    pub fn find_member(&self, x: &DVector<f64>) -> Result<Option<usize>> {
        let tau = MEMBERSHIP_TOL * 1.0_f64.max(crate::linalg::max_abs(x));
        for (k, (m, hull)) in self.union.members.iter().zip(&self.hulls).enumerate() {
            if hull.iter().zip(x.iter()).any(|(h, v)| *v < h.lo - tau || *v > h.hi + tau) {
                continue;
            }
            if m.contains_point(x)? {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    pub fn contains(&self, x: &DVector<f64>) -> Result<bool> {
        Ok(self.find_member(x)?.is_some())
    }
}
