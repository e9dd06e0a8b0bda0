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

/// `Q·diag(λ)·Qᵀ` with `log λ` uniform on `[−½ log cond, ½ log cond]`.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, cond: f64) -> PDMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let half = 0.5 * cond.ln();
    let lam = DVector::from_fn(n, |_, _| rng.random_range(-half..=half).exp());
    let m = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    PDMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

/// `s` Gaussian and `y = A·s` for a random PD `A`.
pub fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> SecantPair {
    let s = gaussian_vector(rng, n);
    let a = random_pd(rng, n, 100.0);
    let y = a.matrix() * &s;
    SecantPair::new(s, y).unwrap()
}

/// Random chordal pattern built in reverse elimination order: each vertex
/// joins a random later parent and a random subset of the parent's later
/// neighbours. Vertices are then relabelled by a random permutation.
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
    let pairs = later
        .iter()
        .enumerate()
        .flat_map(|(v, l)| l.iter().map(move |&w| (v, w)))
        .map(|(v, w)| (perm[v], perm[w]))
        .collect::<Vec<_>>();
    SparsityPattern::new(n, pairs).unwrap()
}

/// Smooth strictly convex test function in three variables:
/// a sum of softplus terms plus `½‖x‖²`.
pub fn logistic() -> bregman_qn::Objective {
    let a = nalgebra::dmatrix![1.0, -2.0, 0.5; 0.3, 1.0, -1.0; -1.5, 0.2, 2.0; 0.7, 0.7, 0.7];
    let a2 = a.clone();
    bregman_qn::Objective::new(
        "logistic",
        3,
        move |x| {
            let z = &a * x;
            z.iter().map(|t| t.exp().ln_1p()).sum::<f64>() + 0.5 * x.norm_squared()
        },
        move |x| {
            let z = &a2 * x;
            let sig = z.map(|t| 1.0 / (1.0 + (-t).exp()));
            a2.transpose() * sig + x
        },
    )
}
