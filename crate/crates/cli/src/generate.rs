//! Seeded random transforms and sparse secant instances.

use bregman_qn::{PDMatrix, SecantPair, SparsityPattern};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::CliError;

fn orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = g.qr().q();
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// `Q₁·diag(e^{a})·Q₂ᵀ` with `Σa = 0`, `|a_i| ≤ 1`: determinant one and
/// condition number at most `e²`.
pub fn random_sl<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mean = a.iter().sum::<f64>() / n as f64;
    a.iter_mut().for_each(|v| *v -= mean);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(n, a.iter().map(|v| v.exp())));
    orthogonal(rng, n) * d * orthogonal(rng, n).transpose()
}

/// Parses a transform name for dimension `n`:
/// `shear` (`I + e₁e₂ᵀ`), `scale:<det>` (`det^{1/n}·I`), `random-sl` or
/// `random-gl:<det>`.
pub fn parse_transform<R: Rng>(spec: &str, n: usize, rng: &mut R) -> Result<DMatrix<f64>, CliError> {
    let bad = |what: &str| CliError::Usage(format!("transform `{spec}`: {what}"));
    let det_arg = |v: &str| -> Result<f64, CliError> {
        let d: f64 = v.parse().map_err(|_| bad("invalid determinant"))?;
        if d > 0.0 && d.is_finite() {
            Ok(d)
        } else {
            Err(bad("determinant must be positive"))
        }
    };
    let scale = |d: f64| d.powf(1.0 / n as f64);
    match spec.split_once(':') {
        None if spec == "shear" => {
            if n < 2 {
                return Err(bad("needs n >= 2"));
            }
            let mut t = DMatrix::identity(n, n);
            t[(0, 1)] = 1.0;
            Ok(t)
        }
        None if spec == "random-sl" => Ok(random_sl(rng, n)),
        Some(("scale", d)) => Ok(DMatrix::identity(n, n) * scale(det_arg(d)?)),
        Some(("random-gl", d)) => Ok(random_sl(rng, n) * scale(det_arg(d)?)),
        _ => Err(bad("expected shear, scale:<det>, random-sl or random-gl:<det>")),
    }
}

/// Symmetric matrix supported on the pattern with off-diagonal entries in
/// `[-0.5, 0.5]` and a dominant diagonal.
pub fn dominant_sparse_pd<R: Rng>(rng: &mut R, pattern: &SparsityPattern) -> PDMatrix {
    let n = pattern.n();
    let mut m = DMatrix::zeros(n, n);
    for (i, j) in pattern.edges() {
        let v = rng.random_range(-0.5..0.5);
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    for i in 0..n {
        let row: f64 = m.row(i).iter().map(|v: &f64| v.abs()).sum();
        m[(i, i)] = rng.random_range(1.0..2.0) + row;
    }
    PDMatrix::new(m).expect("diagonally dominant")
}

/// Components `±U[0.5, 1.5]`.
pub fn spread_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let m = rng.random_range(0.5..1.5);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// A sparse secant problem with a known feasible point.
#[derive(Debug, Clone)]
pub struct SparseInstance {
    /// Sparse, positive definite and satisfying `B s = y`.
    pub feasible: PDMatrix,
    /// Sparse starting matrix.
    pub start: PDMatrix,
    pub pair: SecantPair,
}

pub fn sparse_instance<R: Rng>(rng: &mut R, pattern: &SparsityPattern) -> SparseInstance {
    let feasible = dominant_sparse_pd(rng, pattern);
    let s = spread_vector(rng, pattern.n());
    let y = feasible.matrix() * &s;
    let start = dominant_sparse_pd(rng, pattern);
    let pair = SecantPair::new(s, y).expect("y = Bs with B positive definite");
    SparseInstance { feasible, start, pair }
}
