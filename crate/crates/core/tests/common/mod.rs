#![allow(dead_code)]

use bregman_qn::{PDMatrix, SecantPair, SparsityPattern};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// `Q·diag(λ)·Qᵀ` with `log λ` uniform on `[−½ log cond, ½ log cond]`.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, cond: f64) -> PDMatrix {
    let q = random_orthogonal(rng, n);
    let half = 0.5 * cond.ln();
    let lam = DVector::from_fn(n, |_, _| rng.random_range(-half..=half).exp());
    let m = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    PDMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

/// `s` Gaussian and `y = A·s` for a random PD `A`, so `sᵀy > 0`.
pub fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> SecantPair {
    let s = gaussian_vector(rng, n);
    let a = random_pd(rng, n, 100.0);
    let y = a.matrix() * &s;
    SecantPair::new(s, y).unwrap()
}

/// Random chordal pattern: vertices are added in reverse elimination order,
/// each joined to a random parent and a random subset of the parent's
/// later neighbours, then relabelled by a random permutation.
pub fn random_chordal(rng: &mut ChaCha8Rng, n: usize) -> SparsityPattern {
    let mut later: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in (0..n.saturating_sub(1)).rev() {
        let p = rng.random_range(v + 1..n);
        let mut l = vec![p];
        for &w in &later[p] {
            if rng.random_bool(0.5) {
                l.push(w);
            }
        }
        later[v] = l;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut pairs = Vec::new();
    for (v, l) in later.iter().enumerate() {
        for &w in l {
            pairs.push((perm[v], perm[w]));
        }
    }
    SparsityPattern::new(n, pairs).unwrap()
}

/// A PD matrix supported on the pattern: `c·I` plus random symmetric
/// entries on the edges, with `c` raised until the matrix is PD.
pub fn random_sparse_pd(rng: &mut ChaCha8Rng, pattern: &SparsityPattern) -> PDMatrix {
    let n = pattern.n();
    let mut m = DMatrix::zeros(n, n);
    for (i, j) in pattern.edges() {
        let v: f64 = rng.sample(StandardNormal);
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    for i in 0..n {
        m[(i, i)] = rng.random_range(0.5..2.0);
    }
    let mut shift = 0.0;
    loop {
        let trial = &m + DMatrix::identity(n, n) * shift;
        if let Ok(p) = PDMatrix::new(trial) {
            if p.log_det() > -10.0 {
                return p;
            }
        }
        shift = if shift == 0.0 { 0.25 } else { shift * 2.0 };
    }
}

/// Diagonally dominant matrix on the pattern: diagonal uniform on `[1, 2]`
/// plus the absolute row sum of the off-diagonal part, off-diagonal entries
/// uniform on `[−½, ½]`.
pub fn dominant_sparse_pd(rng: &mut ChaCha8Rng, pattern: &SparsityPattern) -> PDMatrix {
    let n = pattern.n();
    let mut m = DMatrix::zeros(n, n);
    for (i, j) in pattern.edges() {
        let v = rng.random_range(-0.5..0.5);
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = m.row(i).iter().map(|v: &f64| v.abs()).sum();
        m[(i, i)] = rng.random_range(1.0..2.0) + off;
    }
    PDMatrix::new(m).unwrap()
}

/// Components `±U[½, 3/2]` with random signs: bounded away from zero.
pub fn spread_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let m = rng.random_range(0.5..1.5);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}
