//! Dense symmetric positive-definite matrices carried with their Cholesky
//! factor.
//!
//! Every determinant and linear-solve query on a [`PDMatrix`] goes through
//! the lower-triangular factor, so the factor is the primary representation
//! and the dense matrix is only materialized on request.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a factorization or downdate is
/// treated as having left the positive-definite cone.
pub const PIVOT_TOL: f64 = 1e-13;

/// A real symmetric matrix. Construction symmetrizes its input.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    /// Takes the symmetric part `(A + Aᵀ)/2` of a square matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let mut data = m;
        symmetrize_in_place(&mut data);
        Ok(Self { data })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            data: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }
}

pub(crate) fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Direction of a rank-one modification `LLᵀ ± vvᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Lower-triangular `L` with strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
}

impl CholeskyFactor {
    /// Column-oriented Cholesky factorization `A = LLᵀ`.
    ///
    /// Fails with [`Error::NotPositiveDefinite`] as soon as a pivot drops to
    /// `PIVOT_TOL` times the largest diagonal entry of `A`.
    pub fn factorize(a: &SymMatrix) -> Result<Self> {
        let a = a.as_matrix();
        let n = a.nrows();
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
        let threshold = PIVOT_TOL * scale;
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !d.is_finite() || d <= threshold || d <= 0.0 {
                return Err(Error::NotPositiveDefinite { column: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / ljj;
            }
        }
        Ok(Self { l })
    }

    /// Wraps an existing lower-triangular factor. The strict upper triangle
    /// is ignored.
    pub fn from_lower(mut l: DMatrix<f64>) -> Result<Self> {
        if l.nrows() != l.ncols() {
            return Err(Error::DimensionMismatch {
                expected: l.nrows(),
                found: l.ncols(),
            });
        }
        let n = l.nrows();
        for j in 0..n {
            let d = l[(j, j)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { column: j, pivot: d });
            }
            for i in 0..j {
                l[(i, j)] = 0.0;
            }
        }
        Ok(Self { l })
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `2·Σ log Lᵢᵢ`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut m = &self.l * self.l.transpose();
        symmetrize_in_place(&mut m);
        m
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: len,
            });
        }
        Ok(())
    }

    /// Solves `Lz = b`.
    pub fn forward_solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(b.len())?;
        let n = self.n();
        let mut z = b.clone();
        for i in 0..n {
            let mut v = z[i];
            for k in 0..i {
                v -= self.l[(i, k)] * z[k];
            }
            z[i] = v / self.l[(i, i)];
        }
        Ok(z)
    }

    /// Solves `Lᵀx = z`.
    pub fn backward_solve(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(z.len())?;
        let n = self.n();
        let mut x = z.clone();
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.l[(k, i)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
        Ok(x)
    }

    /// Solves `LLᵀx = b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let z = self.forward_solve(b)?;
        self.backward_solve(&z)
    }

    /// `LLᵀv` without forming the product matrix.
    pub fn mul_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v.len())?;
        let w = self.l.tr_mul(v);
        Ok(&self.l * w)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut inv = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::<f64>::zeros(n);
            e[j] = 1.0;
            let col = self.solve(&e).expect("dimension checked");
            inv.set_column(j, &col);
        }
        symmetrize_in_place(&mut inv);
        inv
    }

    /// Factor of `alpha·LLᵀ` for `alpha > 0`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "factor scale must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            l: &self.l * alpha.sqrt(),
        })
    }

    /// Factor `G` with `GGᵀ = LLᵀ ± vvᵀ`, computed column by column with
    /// plane (update) or hyperbolic (downdate) rotations in O(n²).
    pub fn rank_one_update(&self, v: &DVector<f64>, sign: Sign) -> Result<Self> {
        let mut out = self.clone();
        out.rank_one_update_mut(v, sign)?;
        Ok(out)
    }

    pub fn rank_one_update_mut(&mut self, v: &DVector<f64>, sign: Sign) -> Result<()> {
        self.check_len(v.len())?;
        let n = self.n();
        let sgn = match sign {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        };
        let mut w = v.clone();
        for j in 0..n {
            let ljj = self.l[(j, j)];
            let wj = w[j];
            if wj == 0.0 {
                continue;
            }
            let arg = ljj * ljj + sgn * wj * wj;
            if sign == Sign::Minus && (arg <= PIVOT_TOL * ljj * ljj || !arg.is_finite()) {
                return Err(Error::DowndateBreaksPD { column: j });
            }
            let r = arg.sqrt();
            let c = r / ljj;
            let s = wj / ljj;
            self.l[(j, j)] = r;
            for i in (j + 1)..n {
                let lij = (self.l[(i, j)] + sgn * s * w[i]) / c;
                self.l[(i, j)] = lij;
                w[i] = c * w[i] - s * lij;
            }
        }
        Ok(())
    }
}

/// A symmetric positive-definite matrix, stored through its Cholesky factor
/// together with the cached log-determinant.
#[derive(Debug, Clone)]
pub struct PDMatrix {
    factor: CholeskyFactor,
    log_det: f64,
    dense: OnceLock<DMatrix<f64>>,
}

impl PDMatrix {
    /// Symmetrizes and factorizes `m`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let sym = SymMatrix::new(m)?;
        Self::from_sym(sym)
    }

    pub fn from_sym(sym: SymMatrix) -> Result<Self> {
        let factor = CholeskyFactor::factorize(&sym)?;
        let out = Self::from_factor(factor);
        let _ = out.dense.set(sym.into_inner());
        Ok(out)
    }

    pub fn from_factor(factor: CholeskyFactor) -> Self {
        let log_det = factor.log_det();
        Self {
            factor,
            log_det,
            dense: OnceLock::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_sym(SymMatrix::identity(n)).expect("identity is positive definite")
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::from_sym(SymMatrix::from_diagonal(d))
    }

    pub fn n(&self) -> usize {
        self.factor.n()
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn det(&self) -> f64 {
        self.log_det.exp()
    }

    /// Dense matrix, reconstructed from the factor on first use.
    pub fn matrix(&self) -> &DMatrix<f64> {
        self.dense.get_or_init(|| self.factor.reconstruct())
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.factor.solve(b)
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.factor.mul_vec(v)
    }

    /// `vᵀAv` computed as `‖Lᵀv‖²`.
    pub fn quad_form(&self, v: &DVector<f64>) -> Result<f64> {
        self.factor.check_len(v.len())?;
        Ok(self.factor.lower().tr_mul(v).norm_squared())
    }

    pub fn check_same_dim(&self, other: &PDMatrix) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(())
    }
}

/// Frobenius inner product `tr(AᵀB)`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `‖A − B‖_F / ‖B‖_F` with the convention `‖A‖_F` when `B = 0`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let nb = b.norm();
    let d = (a - b).norm();
    if nb > 0.0 {
        d / nb
    } else {
        d
    }
}
