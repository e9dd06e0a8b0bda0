//! Reference minimizers for small problems.
//!
//! Every closed-form update and projection in this crate is the minimizer of
//! `X ↦ D_V(X, Q)` over an affine set of symmetric matrices. The functions
//! here compute that minimizer directly by damped Newton iteration over
//! coordinates of the affine set, using nalgebra's own factorizations, so
//! they share no numerical code with the fast paths they are used to check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::SecantManifold;
use crate::linalg::{frobenius_inner, PDMatrix, SymMatrix};
use crate::potentials::Potential;
use crate::sparse::SparsityPattern;
use crate::updates::SecantPair;

pub const MAX_NEWTON_ITERATIONS: usize = 200;
pub const GRADIENT_TOLERANCE: f64 = 1e-9;

/// Minimizes `D_V(X, Q)` over `X = start + Σ w_i E_i`, `X ≻ 0`.
///
/// `start` must be positive definite. The stopping rule is
/// `‖g‖ ≤ 1e-9·(1 + ‖θ_V(Q)‖_F)` on the coordinate gradient, which for an
/// orthonormal basis is the norm of the projected matrix gradient.
pub fn minimize_on_affine(
    q: &PDMatrix,
    start: &DMatrix<f64>,
    basis: &[SymMatrix],
    pot: &Potential,
) -> Result<PDMatrix> {
    let n = q.n();
    if start.nrows() != n || start.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: start.nrows(),
        });
    }
    let q_chol = nalgebra::Cholesky::new(q.matrix().clone()).ok_or(Error::NotPositiveDefinite {
        column: 0,
        pivot: f64::NAN,
    })?;
    let q_log_det = 2.0 * q_chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let theta_q = q_chol.inverse() * pot.nu_at_log(q_log_det);
    let tol = GRADIENT_TOLERANCE * (1.0 + theta_q.norm());

    // f(X) = V(det X) + ν(det Q)·⟨Q⁻¹, X⟩ up to a constant.
    let objective = |x: &DMatrix<f64>| -> Option<(f64, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
        let c = nalgebra::Cholesky::new(x.clone())?;
        let ld = 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Some((pot.value_at_log(ld) + frobenius_inner(&theta_q, x), c))
    };

    let mut x = start.clone();
    let (mut f, mut chol) = objective(&x).ok_or(Error::NotPositiveDefinite {
        column: 0,
        pivot: f64::NAN,
    })?;
    let m = basis.len();
    if m == 0 {
        return PDMatrix::new(x);
    }
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let x_inv = chol.inverse();
        let ld = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let nu = pot.nu_at_log(ld);
        let beta = pot.beta_at_log(ld);
        let grad_x = &theta_q - &x_inv * nu;
        let g = DVector::from_iterator(m, basis.iter().map(|e| frobenius_inner(&grad_x, e.as_matrix())));
        grad_norm = g.norm();
        if grad_norm <= tol {
            return PDMatrix::new(x);
        }
        let mats: Vec<DMatrix<f64>> = basis.iter().map(|e| &x_inv * e.as_matrix()).collect();
        let traces: Vec<f64> = mats.iter().map(|a| a.trace()).collect();
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let tr = frobenius_inner(&mats[i], &mats[j].transpose());
                let v = nu * (tr - beta * traces[i] * traces[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let p = match nalgebra::Cholesky::new(h.clone()) {
            Some(c) => c.solve(&(-&g)),
            None => h.lu().solve(&(-&g)).ok_or(Error::OracleNoConvergence(grad_norm))?,
        };
        let slope = g.dot(&p);
        let dir = basis
            .iter()
            .zip(p.iter())
            .fold(DMatrix::zeros(n, n), |acc, (e, w)| acc + e.as_matrix() * *w);

        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-20 {
            let trial = &x + &dir * step;
            if let Some((ft, ct)) = objective(&trial) {
                // Near the minimizer the decrease drops below rounding in f;
                // the Newton decrement then certifies the full step.
                let tiny = -slope <= 1e-14 * (1.0 + f.abs());
                if ft <= f + 1e-4 * step * slope || (tiny && step == 1.0) {
                    x = trial;
                    f = ft;
                    chol = ct;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::OracleNoConvergence(grad_norm));
        }
    }
    Err(Error::OracleNoConvergence(grad_norm))
}

/// A point of the secant manifold: `yyᵀ/(sᵀy) + (I − ssᵀ/sᵀs)`.
pub fn secant_start(pair: &SecantPair) -> DMatrix<f64> {
    let n = pair.n();
    let s = pair.s();
    let y = pair.y();
    y * y.transpose() / pair.curvature() + DMatrix::identity(n, n) - s * s.transpose() / s.norm_squared()
}

/// `argmin { D_V(X, B) | X ≻ 0, Xs = y }`.
pub fn secant_projection(b: &PDMatrix, pair: &SecantPair, pot: &Potential) -> Result<PDMatrix> {
    let basis = SecantManifold::new(pair.clone()).tangent_basis();
    minimize_on_affine(b, &secant_start(pair), &basis, pot)
}

/// `argmin { D_V(X, Q) | X ≻ 0, X_ij = 0 off the pattern }`.
pub fn sparse_projection(q: &PDMatrix, pattern: &SparsityPattern, pot: &Potential) -> Result<PDMatrix> {
    let n = q.n();
    minimize_on_affine(q, &DMatrix::identity(n, n), &pattern.basis(), pot)
}

/// Orthonormal basis of `{Δ ∈ Sym(n) | Δ sparse on the pattern, Δs = 0}`.
pub fn sparse_secant_basis(pattern: &SparsityPattern, s: &DVector<f64>) -> Vec<SymMatrix> {
    let pb = pattern.basis();
    let m = pb.len();
    if m == 0 {
        return Vec::new();
    }
    let a = constraint_matrix(&pb, s);
    let gram = a.transpose() * &a;
    let eig = gram.symmetric_eigen();
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    let mut out = Vec::new();
    for k in 0..m {
        if eig.eigenvalues[k].abs() <= 1e-12 * scale {
            let w = eig.eigenvectors.column(k);
            let mat = pb
                .iter()
                .zip(w.iter())
                .fold(DMatrix::zeros(s.len(), s.len()), |acc, (e, c)| acc + e.as_matrix() * *c);
            out.push(SymMatrix::new(mat).expect("square"));
        }
    }
    out
}

/// Columns `E_k s` for each basis element.
fn constraint_matrix(basis: &[SymMatrix], s: &DVector<f64>) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(s.len(), basis.len());
    for (k, e) in basis.iter().enumerate() {
        a.set_column(k, &(e.as_matrix() * s));
    }
    a
}

/// `argmin { D_V(X, B) | X ≻ 0, Xs = y, X sparse on the pattern }`.
///
/// The search starts from `start` when given (it must be sparse, PD and
/// satisfy the secant equation), otherwise from the least-norm sparse
/// correction of `B` that satisfies the secant equation; if that is not
/// positive definite, or the equation has no sparse solution, an error is
/// reported.
pub fn sparse_secant_projection(
    b: &PDMatrix,
    pair: &SecantPair,
    pattern: &SparsityPattern,
    pot: &Potential,
    start: Option<&DMatrix<f64>>,
) -> Result<PDMatrix> {
    let basis = sparse_secant_basis(pattern, pair.s());
    if let Some(x0) = start {
        return minimize_on_affine(b, x0, &basis, pot);
    }
    let n = b.n();
    let pb = pattern.basis();
    let mut b_sparse = b.matrix().clone();
    for i in 0..n {
        for j in 0..n {
            if !pattern.contains(i, j) {
                b_sparse[(i, j)] = 0.0;
            }
        }
    }
    let a = constraint_matrix(&pb, pair.s());
    let rhs = pair.y() - &b_sparse * pair.s();
    let w = a
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    if (&a * &w - &rhs).norm() > 1e-10 * (1.0 + pair.y().norm()) {
        return Err(Error::InvalidParameter(
            "secant equation has no solution with this sparsity pattern".into(),
        ));
    }
    let x0 = pb
        .iter()
        .zip(w.iter())
        .fold(b_sparse, |acc, (e, c)| acc + e.as_matrix() * *c);
    minimize_on_affine(b, &x0, &basis, pot)
}
