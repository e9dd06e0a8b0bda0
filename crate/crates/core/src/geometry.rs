//! Divergences, dual coordinates and projection diagnostics on PD(n).
//!
//! The η-coordinate of a matrix is the matrix itself. The θ-coordinate for
//! a potential `V` is the gradient of `φ(P) = V(det P)`,
//! `θ_V(P) = −ν(det P)·P⁻¹`, a negative-definite matrix. The residual
//! functions here turn the projection identities between the two coordinate
//! systems into numbers that tests and diagnostics can bound.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_inner, PDMatrix, SymMatrix};
use crate::potentials::Potential;
use crate::roots::solve_increasing;
use crate::updates::SecantPair;

/// `KL(P,Q) = tr(PQ⁻¹) − log det(PQ⁻¹) − n`.
pub fn kl_divergence(p: &PDMatrix, q: &PDMatrix) -> Result<f64> {
    p.check_same_dim(q)?;
    let n = p.n() as f64;
    let q_inv = q.inverse();
    Ok(frobenius_inner(&q_inv, p.matrix()) - (p.log_det() - q.log_det()) - n)
}

/// `D_V(P,Q) = V(det P) − V(det Q) + ν(det Q)·⟨Q⁻¹,P⟩ − n·ν(det Q)`.
pub fn v_bregman_divergence(p: &PDMatrix, q: &PDMatrix, pot: &Potential) -> Result<f64> {
    p.check_same_dim(q)?;
    pot.ensure_admissible(p.n())?;
    let n = p.n() as f64;
    let nu_q = pot.nu_at_log(q.log_det());
    let q_inv = q.inverse();
    Ok(
        pot.value_at_log(p.log_det()) - pot.value_at_log(q.log_det())
            + nu_q * (frobenius_inner(&q_inv, p.matrix()) - n),
    )
}

/// `D_φ(P,Q) = φ(P) − φ(Q) − ⟨∇φ(Q), P − Q⟩` for a caller-supplied convex
/// `φ` and its gradient.
pub fn generic_bregman<F, G>(p: &PDMatrix, q: &PDMatrix, phi: F, grad_phi: G) -> Result<f64>
where
    F: Fn(&PDMatrix) -> f64,
    G: Fn(&PDMatrix) -> DMatrix<f64>,
{
    p.check_same_dim(q)?;
    let grad = grad_phi(q);
    let diff = p.matrix() - q.matrix();
    Ok(phi(p) - phi(q) - frobenius_inner(&grad, &diff))
}

/// A point of PD(n) in θ_V coordinates.
#[derive(Debug, Clone)]
pub struct ThetaPoint {
    pub matrix: DMatrix<f64>,
    pub potential: Potential,
}

/// `θ_V(P) = −ν(det P)·P⁻¹`.
pub fn theta_coordinate(p: &PDMatrix, pot: &Potential) -> ThetaPoint {
    let nu = pot.nu_at_log(p.log_det());
    ThetaPoint {
        matrix: p.inverse() * (-nu),
        potential: pot.clone(),
    }
}

/// Solves `n·log ν(z) − log z = log_det_target` for `log z`.
///
/// The left side is strictly decreasing in `z` whenever `β < 1/n`, so the
/// root is unique.
pub(crate) fn solve_theta_determinant(pot: &Potential, n: usize, log_det_target: f64) -> Result<f64> {
    let nf = n as f64;
    // g(u) = u − n·log ν(e^u) + target is increasing with slope 1 − n·β.
    solve_increasing(
        |u| {
            (
                u - nf * pot.log_nu_at_log(u) + log_det_target,
                1.0 - nf * pot.beta_at_log(u),
            )
        },
        -log_det_target,
    )
}

/// Inverse of [`theta_coordinate`]: the unique `P` with `θ_V(P) = T`.
pub fn invert_theta(t: &ThetaPoint) -> Result<PDMatrix> {
    let neg = PDMatrix::new(-&t.matrix)?;
    let n = neg.n();
    let u = solve_theta_determinant(&t.potential, n, neg.log_det())?;
    let nu = t.potential.nu_at_log(u);
    PDMatrix::new(neg.inverse() * nu)
}

/// Signed defect of the three-divergence identity
/// `D(P,Q) − D(P,P*) − D(P*,Q) = ⟨θ(Q) − θ(P*), P* − P⟩`.
///
/// The identity holds for every triple, so the returned value measures only
/// floating-point error.
pub fn pythagorean_residual(p: &PDMatrix, pstar: &PDMatrix, q: &PDMatrix, pot: &Potential) -> Result<f64> {
    let lhs =
        v_bregman_divergence(p, q, pot)? - v_bregman_divergence(p, pstar, pot)? - v_bregman_divergence(pstar, q, pot)?;
    let tq = theta_coordinate(q, pot).matrix;
    let tp = theta_coordinate(pstar, pot).matrix;
    let rhs = frobenius_inner(&(tq - tp), &(pstar.matrix() - p.matrix()));
    Ok(lhs - rhs)
}

/// `|D(P,Q) − D(P,P*) − D(P*,Q)| / (1 + |D(P,Q)|)`.
///
/// Vanishes (up to rounding) exactly when `P*` is the θ_V-projection of `Q`
/// onto an η-flat set containing `P`.
pub fn pythagorean_gap(p: &PDMatrix, pstar: &PDMatrix, q: &PDMatrix, pot: &Potential) -> Result<f64> {
    let d_pq = v_bregman_divergence(p, q, pot)?;
    let gap = d_pq - v_bregman_divergence(p, pstar, pot)? - v_bregman_divergence(pstar, q, pot)?;
    Ok(gap.abs() / (1.0 + d_pq.abs()))
}

/// `max_d |⟨θ_V(Q) − θ_V(P*), d⟩| / (1 + ‖θ_V(Q)‖_F)` over the given tangent
/// directions `d`.
pub fn projection_orthogonality_residual(
    pstar: &PDMatrix,
    q: &PDMatrix,
    directions: &[SymMatrix],
    pot: &Potential,
) -> Result<f64> {
    pstar.check_same_dim(q)?;
    let tq = theta_coordinate(q, pot).matrix;
    let tp = theta_coordinate(pstar, pot).matrix;
    let diff = &tq - tp;
    let scale = 1.0 + tq.norm();
    let mut worst: f64 = 0.0;
    for d in directions {
        if d.n() != q.n() {
            return Err(Error::DimensionMismatch {
                expected: q.n(),
                found: d.n(),
            });
        }
        worst = worst.max(frobenius_inner(&diff, d.as_matrix()).abs() / scale);
    }
    Ok(worst)
}

/// The secant manifold `M = {B ∈ PD(n) | Bs = y}`.
#[derive(Debug, Clone)]
pub struct SecantManifold {
    pair: SecantPair,
}

impl SecantManifold {
    pub fn new(pair: SecantPair) -> Self {
        Self { pair }
    }

    pub fn pair(&self) -> &SecantPair {
        &self.pair
    }

    pub fn n(&self) -> usize {
        self.pair.s().len()
    }

    /// `‖Bs − y‖ / ‖y‖`.
    pub fn secant_defect(&self, b: &PDMatrix) -> Result<f64> {
        let bs = b.mul_vec(self.pair.s())?;
        Ok((bs - self.pair.y()).norm() / self.pair.y().norm())
    }

    /// `‖θ(B)y + s‖ / ‖s‖` for the log potential, where `θ(B) = −B⁻¹`.
    /// Zero exactly on `M`: the manifold is affine in θ coordinates as well.
    pub fn log_theta_defect(&self, b: &PDMatrix) -> Result<f64> {
        let theta_y = -b.solve(self.pair.y())?;
        Ok((theta_y + self.pair.s()).norm() / self.pair.s().norm())
    }

    /// Frobenius-orthonormal basis of the tangent space `{Δ ∈ Sym(n) | Δs = 0}`.
    pub fn tangent_basis(&self) -> Vec<SymMatrix> {
        let u = orthogonal_complement(self.pair.s());
        let k = u.len();
        let mut out = Vec::with_capacity(k * (k + 1) / 2);
        for a in 0..k {
            for b in a..k {
                let m = if a == b {
                    &u[a] * u[a].transpose()
                } else {
                    (&u[a] * u[b].transpose() + &u[b] * u[a].transpose()) / std::f64::consts::SQRT_2
                };
                out.push(SymMatrix::new(m).expect("square"));
            }
        }
        out
    }
}

/// Orthonormal basis of `v⊥` by Gram–Schmidt over the coordinate axes.
pub(crate) fn orthogonal_complement(v: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = v.len();
    let mut basis: Vec<DVector<f64>> = vec![v.normalize()];
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = DVector::<f64>::zeros(n);
        e[i] = 1.0;
        // two passes for orthogonality at working precision
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&e);
                e -= b * c;
            }
        }
        let norm = e.norm();
        if norm > 1e-8 {
            basis.push(e / norm);
        }
    }
    basis.remove(0);
    basis
}
