//! Random points of a constrained zonotope, drawn in factor space.
//!
//! Without constraints, `ξ` is uniform on the unit cube. With constraints,
//! `ξ = ξ₀ + N η` where `N` spans the null space of `A`; `η` is drawn
//! uniformly from an LP-computed bounding box and rejected unless
//! `‖ξ‖∞ ≤ 1`. If the acceptance rate falls below [`MIN_ACCEPTANCE`], the
//! sampler switches to random convex combinations of LP vertices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::czono::ConstrainedZonotope;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus};

pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Equality residual accepted for sampled factors.
pub const SAMPLE_EQ_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Uniform,
    Rejection,
    /// Acceptance was too low; samples are convex combinations of LP
    /// vertices (not uniform).
    VertexFallback,
}

pub struct FactorSampler {
    ng: usize,
    kind: Kind,
}

enum Kind {
    Cube,
    Point(DVector<f64>),
    Null {
        base: DVector<f64>,
        basis: DMatrix<f64>,
        lo: DVector<f64>,
        hi: DVector<f64>,
        vertices: Vec<DVector<f64>>,
        fallback: bool,
    },
}

impl FactorSampler {
    pub fn new(z: &ConstrainedZonotope) -> Result<Self> {
        let ng = z.num_generators();
        let a = z.constraint_lhs();
        if z.num_constraints() == 0 {
            return Ok(FactorSampler { ng, kind: Kind::Cube });
        }
        let base = z.min_norm()?.filter(|m| m.value <= 1.0 + lp::emptiness_tolerance()).ok_or(Error::EmptySet)?;
        let base = base.xi.map(|v| v.clamp(-1.0, 1.0));

        let ata = a.transpose() * a;
        let eig = SymmetricEigen::new(ata);
        let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let null_cols: Vec<DVector<f64>> = (0..ng)
            .filter(|&k| eig.eigenvalues[k].abs() <= 1e-12 * scale)
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        if null_cols.is_empty() {
            return Ok(FactorSampler { ng, kind: Kind::Point(base) });
        }
        let basis = DMatrix::from_columns(&null_cols);
        let k = basis.ncols();

        // Bounding box of the feasible η polytope {η : -1 ≤ ξ₀ + N η ≤ 1}.
        let ineq = crate::linalg::vstack(&basis, &(-&basis));
        let rhs = crate::linalg::vconcat(&(-&base).add_scalar(1.0), &base.add_scalar(1.0));
        let mut lo = DVector::zeros(k);
        let mut hi = DVector::zeros(k);
        for j in 0..k {
            for sign in [1.0, -1.0] {
                let mut obj = DVector::zeros(k);
                obj[j] = sign;
                let prog = LinearProgram::new(
                    obj,
                    DVector::from_element(k, f64::NEG_INFINITY),
                    DVector::from_element(k, f64::INFINITY),
                )
                .with_inequalities(ineq.clone(), rhs.clone());
                let sol = lp::solve_lp(&prog)?;
                if sol.status != LpStatus::Optimal {
                    return Err(Error::NumericalFailure("null-space bounding LP failed".into()));
                }
                if sign > 0.0 {
                    lo[j] = sol.value;
                } else {
                    hi[j] = -sol.value;
                }
            }
        }
        Ok(FactorSampler {
            ng,
            kind: Kind::Null { base, basis, lo, hi, vertices: Vec::new(), fallback: false },
        })
    }

    pub fn mode(&self) -> SamplingMode {
        match &self.kind {
            Kind::Cube => SamplingMode::Uniform,
            Kind::Point(_) => SamplingMode::Uniform,
            Kind::Null { fallback: false, .. } => SamplingMode::Rejection,
            Kind::Null { fallback: true, .. } => SamplingMode::VertexFallback,
        }
    }

    /// Draws one feasible factor vector.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<DVector<f64>> {
        let ng = self.ng;
        match &mut self.kind {
            Kind::Cube => Ok(DVector::from_fn(ng, |_, _| rng.gen_range(-1.0..=1.0))),
            Kind::Point(p) => Ok(p.clone()),
            Kind::Null { base, basis, lo, hi, vertices, fallback } => {
                if !*fallback {
                    let budget = (1.0 / MIN_ACCEPTANCE) as usize;
                    for _ in 0..budget {
                        let eta = DVector::from_fn(lo.len(), |j, _| {
                            if hi[j] > lo[j] {
                                rng.gen_range(lo[j]..=hi[j])
                            } else {
                                lo[j]
                            }
                        });
                        let xi = &*base + &*basis * eta;
                        if xi.iter().all(|v| v.abs() <= 1.0) {
                            return Ok(xi);
                        }
                    }
                    *fallback = true;
                }
                if vertices.is_empty() {
                    *vertices = vertex_pool(base, basis, 2 * ng + 4, rng)?;
                }
                let weights: Vec<f64> = (0..vertices.len()).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
                let total: f64 = weights.iter().sum();
                let mut xi = DVector::zeros(ng);
                for (w, v) in weights.iter().zip(vertices.iter()) {
                    xi += v * (w / total);
                }
                Ok(xi)
            }
        }
    }
}

fn vertex_pool<R: Rng + ?Sized>(base: &DVector<f64>, basis: &DMatrix<f64>, count: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    let k = basis.ncols();
    let ineq = crate::linalg::vstack(basis, &(-basis));
    let rhs = crate::linalg::vconcat(&(-base).add_scalar(1.0), &base.add_scalar(1.0));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let obj = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..=1.0));
        let prog = LinearProgram::new(obj, DVector::from_element(k, f64::NEG_INFINITY), DVector::from_element(k, f64::INFINITY))
            .with_inequalities(ineq.clone(), rhs.clone());
        let sol = lp::solve_lp(&prog)?;
        if let Some(eta) = sol.point {
            let xi = (base + basis * eta).map(|v| v.clamp(-1.0, 1.0));
            out.push(xi);
        }
    }
    if out.is_empty() {
        out.push(base.clone());
    }
    Ok(out)
}

/// `count` points of `z` (as `c + G ξ`).
pub fn sample_points<R: Rng + ?Sized>(z: &ConstrainedZonotope, count: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    let mut sampler = FactorSampler::new(z)?;
    (0..count).map(|_| sampler.sample(rng).map(|xi| z.at(&xi))).collect()
}
