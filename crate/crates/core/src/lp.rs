//! Linear-program contract used by every set operation.
//!
//! The solver itself is `microlp` (bounded primal/dual simplex). This module
//! owns the problem shapes the rest of the crate needs: plain bounded LPs,
//! the ∞-norm minimization `min ‖ξ‖∞ s.t. A ξ = b` that decides emptiness,
//! and directional support bounds over `B∞(A, b)`. Every optimum returned by
//! [`solve_lp`] has been re-checked against the original constraints.

use std::sync::atomic::{AtomicU64, Ordering};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Residual allowed on constraints of a returned optimum.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Default slack on the `‖ξ‖∞ ≤ 1` emptiness test.
pub const DEFAULT_EMPTINESS_TOL: f64 = 1e-9;

static EMPTINESS_TOL_BITS: AtomicU64 = AtomicU64::new(DEFAULT_EMPTINESS_TOL.to_bits());

/// Tolerance used when comparing a minimal ∞-norm against 1.
///
/// Values in `(1, 1 + tol]` are classified as nonempty.
pub fn emptiness_tolerance() -> f64 {
    f64::from_bits(EMPTINESS_TOL_BITS.load(Ordering::Relaxed))
}

/// Overrides the emptiness tolerance process-wide. Non-finite or negative
/// values are ignored.
pub fn set_emptiness_tolerance(tol: f64) {
    if tol.is_finite() && tol >= 0.0 {
        EMPTINESS_TOL_BITS.store(tol.to_bits(), Ordering::Relaxed);
    }
}

/// `min objectiveᵀx` subject to equalities, `≤` inequalities and variable
/// bounds. Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub equality_lhs: DMatrix<f64>,
    pub equality_rhs: DVector<f64>,
    pub inequality_lhs: DMatrix<f64>,
    pub inequality_rhs: DVector<f64>,
    pub lower_bounds: DVector<f64>,
    pub upper_bounds: DVector<f64>,
}

impl LinearProgram {
    pub fn new(objective: DVector<f64>, lower_bounds: DVector<f64>, upper_bounds: DVector<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            equality_lhs: DMatrix::zeros(0, n),
            equality_rhs: DVector::zeros(0),
            inequality_lhs: DMatrix::zeros(0, n),
            inequality_rhs: DVector::zeros(0),
            lower_bounds,
            upper_bounds,
        }
    }

    pub fn with_equalities(mut self, lhs: DMatrix<f64>, rhs: DVector<f64>) -> Self {
        self.equality_lhs = lhs;
        self.equality_rhs = rhs;
        self
    }

    pub fn with_inequalities(mut self, lhs: DMatrix<f64>, rhs: DVector<f64>) -> Self {
        self.inequality_lhs = lhs;
        self.inequality_rhs = rhs;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let check = |context: &'static str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { context, expected, found })
            }
        };
        check("equality_lhs columns", n, self.equality_lhs.ncols())?;
        check("equality_rhs length", self.equality_lhs.nrows(), self.equality_rhs.len())?;
        check("inequality_lhs columns", n, self.inequality_lhs.ncols())?;
        check("inequality_rhs length", self.inequality_lhs.nrows(), self.inequality_rhs.len())?;
        check("lower_bounds length", n, self.lower_bounds.len())?;
        check("upper_bounds length", n, self.upper_bounds.len())?;
        for (i, (lo, hi)) in self.lower_bounds.iter().zip(self.upper_bounds.iter()).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidProgram(format!(
                    "variable {i} has bounds [{lo}, {hi}]"
                )));
            }
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|x| x.is_finite());
        let finite_v = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        if !finite(&self.equality_lhs)
            || !finite(&self.inequality_lhs)
            || !finite_v(&self.equality_rhs)
            || !finite_v(&self.inequality_rhs)
            || !finite_v(&self.objective)
        {
            return Err(Error::InvalidProgram("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Largest scaled violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let scale = 1.0 + x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut worst = 0.0_f64;
        if self.equality_lhs.nrows() > 0 {
            let r = &self.equality_lhs * x - &self.equality_rhs;
            for (i, ri) in r.iter().enumerate() {
                let row_scale = row_scale(&self.equality_lhs, i, self.equality_rhs[i], scale);
                worst = worst.max(ri.abs() / row_scale);
            }
        }
        if self.inequality_lhs.nrows() > 0 {
            let r = &self.inequality_lhs * x - &self.inequality_rhs;
            for (i, ri) in r.iter().enumerate() {
                let row_scale = row_scale(&self.inequality_lhs, i, self.inequality_rhs[i], scale);
                worst = worst.max(ri.max(0.0) / row_scale);
            }
        }
        for i in 0..x.len() {
            worst = worst.max(self.lower_bounds[i] - x[i]).max(x[i] - self.upper_bounds[i]);
        }
        worst
    }
}

fn row_scale(m: &DMatrix<f64>, i: usize, rhs: f64, x_scale: f64) -> f64 {
    let row_norm = m.row(i).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    1.0_f64.max(row_norm * x_scale).max(rhs.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    /// Present iff `status == Optimal`.
    pub point: Option<DVector<f64>>,
}

impl LpSolution {
    fn infeasible() -> Self {
        LpSolution { status: LpStatus::Infeasible, value: f64::INFINITY, point: None }
    }
}

fn zero_row(m: &DMatrix<f64>, i: usize) -> bool {
    m.row(i).iter().all(|v| *v == 0.0)
}

/// Solves `lp`. Deterministic for a fixed input.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();

    // Rows without coefficients never reach the solver.
    for i in 0..lp.equality_lhs.nrows() {
        if zero_row(&lp.equality_lhs, i) && lp.equality_rhs[i].abs() > FEASIBILITY_TOL {
            return Ok(LpSolution::infeasible());
        }
    }
    for i in 0..lp.inequality_lhs.nrows() {
        if zero_row(&lp.inequality_lhs, i) && lp.inequality_rhs[i] < -FEASIBILITY_TOL {
            return Ok(LpSolution::infeasible());
        }
    }
    if n == 0 {
        return Ok(LpSolution { status: LpStatus::Optimal, value: 0.0, point: Some(DVector::zeros(0)) });
    }

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..n)
        .map(|j| problem.add_var(lp.objective[j], (lp.lower_bounds[j], lp.upper_bounds[j])))
        .collect();
    let mut add_rows = |m: &DMatrix<f64>, rhs: &DVector<f64>, op: ComparisonOp| {
        for i in 0..m.nrows() {
            let terms: Vec<_> = (0..n)
                .filter(|&j| m[(i, j)] != 0.0)
                .map(|j| (vars[j], m[(i, j)]))
                .collect();
            if !terms.is_empty() {
                problem.add_constraint(terms.as_slice(), op, rhs[i]);
            }
        }
    };
    add_rows(&lp.equality_lhs, &lp.equality_rhs, ComparisonOp::Eq);
    add_rows(&lp.inequality_lhs, &lp.inequality_rhs, ComparisonOp::Le);

    let solution = match problem.solve() {
        Ok(outcome) => outcome
            .into_solution()
            .map_err(|_| Error::NumericalFailure("solve interrupted".into()))?,
        Err(microlp::Error::Infeasible) => return Ok(LpSolution::infeasible()),
        Err(microlp::Error::Unbounded) => {
            return Ok(LpSolution { status: LpStatus::Unbounded, value: f64::NEG_INFINITY, point: None })
        }
        Err(e) => return Err(Error::NumericalFailure(e.to_string())),
    };
    let point = DVector::from_iterator(n, vars.iter().map(|v| solution.var_value(*v)));
    let violation = lp.max_violation(&point);
    if violation > FEASIBILITY_TOL {
        return Err(Error::NumericalFailure(format!(
            "optimum violates constraints by {violation:e}"
        )));
    }
    let value = lp.objective.dot(&point);
    Ok(LpSolution { status: LpStatus::Optimal, value, point: Some(point) })
}

/// Minimizer of `‖ξ‖∞` over `{ξ : A ξ = b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormMinimum {
    pub value: f64,
    pub xi: DVector<f64>,
}

/// `inf { ‖ξ‖∞ : A ξ = b }`, or `None` when the affine system is
/// inconsistent. Solved as the epigraph LP `min t` with `-t ≤ ξᵢ ≤ t`.
pub fn min_inf_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Option<NormMinimum>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "min_inf_norm rhs",
            expected: a.nrows(),
            found: b.len(),
        });
    }
    let ng = a.ncols();
    if a.nrows() == 0 {
        return Ok(Some(NormMinimum { value: 0.0, xi: DVector::zeros(ng) }));
    }
    if ng == 0 {
        return Ok(if b.iter().all(|v| v.abs() <= FEASIBILITY_TOL) {
            Some(NormMinimum { value: 0.0, xi: DVector::zeros(0) })
        } else {
            None
        });
    }

    // Variables: ξ (free) followed by t ≥ 0.
    let nv = ng + 1;
    let mut objective = DVector::zeros(nv);
    objective[ng] = 1.0;
    let mut lower = DVector::from_element(nv, f64::NEG_INFINITY);
    lower[ng] = 0.0;
    let upper = DVector::from_element(nv, f64::INFINITY);
    let mut eq = DMatrix::zeros(a.nrows(), nv);
    eq.view_mut((0, 0), a.shape()).copy_from(a);
    let mut ineq = DMatrix::zeros(2 * ng, nv);
    for i in 0..ng {
        ineq[(2 * i, i)] = 1.0;
        ineq[(2 * i, ng)] = -1.0;
        ineq[(2 * i + 1, i)] = -1.0;
        ineq[(2 * i + 1, ng)] = -1.0;
    }
    let lp = LinearProgram::new(objective, lower, upper)
        .with_equalities(eq, b.clone())
        .with_inequalities(ineq, DVector::zeros(2 * ng));
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let point = sol.point.expect("optimal solutions carry a point");
            let xi = point.rows(0, ng).into_owned();
            // Report the norm of the witness itself; the epigraph variable
            // may sit slightly above it.
            let value = crate::linalg::max_abs(&xi);
            Ok(Some(NormMinimum { value, xi }))
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::NumericalFailure("∞-norm LP reported unbounded".into())),
    }
}

/// `true` when `min ‖ξ‖∞` over `A ξ = b` is at most `1 + tol`.
pub fn norm_within_unit(min: &Option<NormMinimum>) -> bool {
    matches!(min, Some(m) if m.value <= 1.0 + emptiness_tolerance())
}

/// `min wᵀξ` over `ξ ∈ B∞(A, b)`.
///
/// When the box-bounded LP is infeasible but the ∞-norm minimum lies within
/// the emptiness tolerance of 1, the box is inflated to that norm so that
/// borderline sets classified as nonempty still get finite bounds.
pub fn min_over_feasible_cube(w: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<f64> {
    let ng = w.len();
    if a.ncols() != ng {
        return Err(Error::DimensionMismatch { context: "support direction", expected: a.ncols(), found: ng });
    }
    if a.nrows() == 0 {
        return Ok(-w.iter().map(|v| v.abs()).sum::<f64>());
    }
    let solve_with_radius = |radius: f64| -> Result<LpSolution> {
        let lp = LinearProgram::new(
            w.clone(),
            DVector::from_element(ng, -radius),
            DVector::from_element(ng, radius),
        )
        .with_equalities(a.clone(), b.clone());
        solve_lp(&lp)
    };
    let sol = solve_with_radius(1.0)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.value),
        LpStatus::Unbounded => Err(Error::NumericalFailure("bounded LP reported unbounded".into())),
        LpStatus::Infeasible => {
            let min = min_inf_norm(a, b)?;
            if !norm_within_unit(&min) {
                return Err(Error::EmptySet);
            }
            let radius = min.map(|m| m.value).unwrap_or(1.0).max(1.0) * (1.0 + 1e-12) + 1e-12;
            let retry = solve_with_radius(radius)?;
            match retry.status {
                LpStatus::Optimal => Ok(retry.value),
                _ => Err(Error::NumericalFailure("borderline set has no feasible ξ".into())),
            }
        }
    }
}

/// Exact support interval `[min, max]` of `dᵀx` over `CZ{c, G, A, b}`.
///
/// The maximum is computed as the negated minimum along `-d`, so
/// `bound_along(-d)` is the exact mirror of `bound_along(d)`.
pub fn bound_along(
    d: &DVector<f64>,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<Interval> {
    if d.len() != c.len() {
        return Err(Error::DimensionMismatch { context: "support direction", expected: c.len(), found: d.len() });
    }
    if g.ncols() == 0 {
        if a.nrows() > 0 && !norm_within_unit(&min_inf_norm(a, b)?) {
            return Err(Error::EmptySet);
        }
        let v = d.dot(c);
        return Ok(Interval::point(v));
    }
    let offset = d.dot(c);
    let w = g.transpose() * d;
    let neg_w = -&w;
    let lo = offset + min_over_feasible_cube(&w, a, b)?;
    let hi = offset - min_over_feasible_cube(&neg_w, a, b)?;
    Ok(Interval::new(lo.min(hi), hi.max(lo)))
}
