//! Benchmark problem catalog.

use bregman_qn::{Objective, SparsityPattern};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::CliError;

pub struct CatalogEntry {
    pub syntax: &'static str,
    pub description: &'static str,
}

pub const CATALOG: [CatalogEntry; 4] = [
    CatalogEntry {
        syntax: "rosenbrock",
        description: "Rosenbrock function, n = 2, start (-1.2, 1), minimizer (1, 1)",
    },
    CatalogEntry {
        syntax: "quadratic:<cond>[:n]",
        description: "seeded random SPD quadratic with condition number <cond>, default n = 3, minimizer 0",
    },
    CatalogEntry {
        syntax: "extended-powell[:n]",
        description: "extended Powell singular function, n a multiple of 4 (default 8), minimizer 0",
    },
    CatalogEntry {
        syntax: "broyden-tridiagonal[:n]",
        description: "Broyden tridiagonal least squares, default n = 8, banded Hessian pattern",
    },
];

/// A catalog problem instantiated for one run.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub objective: Objective,
    pub start: DVector<f64>,
    pub minimum: Option<f64>,
    pub minimizer: Option<DVector<f64>>,
    /// Sparsity pattern of the Hessian, for sparse runs.
    pub pattern: Option<SparsityPattern>,
}

impl ProblemSpec {
    pub fn n(&self) -> usize {
        self.start.len()
    }
}

fn parse_arg<T: std::str::FromStr>(name: &str, field: &str, what: &str) -> Result<T, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Usage(format!("problem `{name}`: invalid {what} `{field}`")))
}

/// Builds a problem from its catalog name. `seed` drives random problems.
pub fn build(name: &str, seed: u64) -> Result<ProblemSpec, CliError> {
    let parts: Vec<&str> = name.split(':').collect();
    match parts.as_slice() {
        ["rosenbrock"] => Ok(rosenbrock()),
        ["quadratic", cond] => quadratic(name, parse_arg(name, cond, "condition number")?, 3, seed),
        ["quadratic", cond, n] => quadratic(
            name,
            parse_arg(name, cond, "condition number")?,
            parse_arg(name, n, "dimension")?,
            seed,
        ),
        ["extended-powell"] => extended_powell(name, 8),
        ["extended-powell", n] => extended_powell(name, parse_arg(name, n, "dimension")?),
        ["broyden-tridiagonal"] => broyden_tridiagonal(name, 8),
        ["broyden-tridiagonal", n] => broyden_tridiagonal(name, parse_arg(name, n, "dimension")?),
        _ => Err(CliError::Usage(format!(
            "unknown problem `{name}` (see `bqn list-problems`)"
        ))),
    }
}

pub fn rosenbrock() -> ProblemSpec {
    let objective = Objective::new(
        "rosenbrock",
        2,
        |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
        |x| {
            DVector::from_vec(vec![
                -400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ])
        },
    )
    .with_minimizer(DVector::from_element(2, 1.0));
    ProblemSpec {
        name: "rosenbrock".into(),
        objective,
        start: DVector::from_vec(vec![-1.2, 1.0]),
        minimum: Some(0.0),
        minimizer: Some(DVector::from_element(2, 1.0)),
        pattern: None,
    }
}

/// `½xᵀAx` with `A = Q·diag(λ)·Qᵀ`, `λ` log-spaced on `[1, cond]` and `Q`
/// the orthogonal factor of a seeded Gaussian matrix.
pub fn quadratic(name: &str, cond: f64, n: usize, seed: u64) -> Result<ProblemSpec, CliError> {
    if !(cond >= 1.0) || !cond.is_finite() {
        return Err(CliError::Usage(format!(
            "problem `{name}`: condition number must be >= 1"
        )));
    }
    if n == 0 {
        return Err(CliError::Usage(format!("problem `{name}`: dimension must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let lam = DVector::from_fn(n, |i, _| {
        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        cond.powf(t)
    });
    let a = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let a2 = a.clone();
    let objective =
        Objective::new(name, n, move |x| 0.5 * x.dot(&(&a * x)), move |x| &a2 * x).with_minimizer(DVector::zeros(n));
    Ok(ProblemSpec {
        name: name.into(),
        objective,
        start: DVector::from_element(n, 1.0),
        minimum: Some(0.0),
        minimizer: Some(DVector::zeros(n)),
        pattern: None,
    })
}

pub fn extended_powell(name: &str, n: usize) -> Result<ProblemSpec, CliError> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(CliError::Usage(format!(
            "problem `{name}`: dimension must be a positive multiple of 4"
        )));
    }
    let value = |x: &DVector<f64>| {
        x.as_slice()
            .chunks(4)
            .map(|b| {
                let (a, bb, c, d) = (b[0], b[1], b[2], b[3]);
                (a + 10.0 * bb).powi(2) + 5.0 * (c - d).powi(2) + (bb - 2.0 * c).powi(4) + 10.0 * (a - d).powi(4)
            })
            .sum()
    };
    let gradient = |x: &DVector<f64>| {
        let mut g = DVector::zeros(x.len());
        for (k, b) in x.as_slice().chunks(4).enumerate() {
            let t1 = b[0] + 10.0 * b[1];
            let t2 = b[2] - b[3];
            let t3 = b[1] - 2.0 * b[2];
            let t4 = b[0] - b[3];
            g[4 * k] = 2.0 * t1 + 40.0 * t4.powi(3);
            g[4 * k + 1] = 20.0 * t1 + 4.0 * t3.powi(3);
            g[4 * k + 2] = 10.0 * t2 - 8.0 * t3.powi(3);
            g[4 * k + 3] = -10.0 * t2 - 40.0 * t4.powi(3);
        }
        g
    };
    let start = DVector::from_fn(n, |i, _| [3.0, -1.0, 0.0, 1.0][i % 4]);
    Ok(ProblemSpec {
        name: name.into(),
        objective: Objective::new(name, n, value, gradient).with_minimizer(DVector::zeros(n)),
        start,
        minimum: Some(0.0),
        minimizer: Some(DVector::zeros(n)),
        pattern: None,
    })
}

/// `Σ r_i²` with `r_i = (3 − 2x_i)x_i − x_{i−1} − 2x_{i+1} + 1` and
/// `x_0 = x_{n+1} = 0`. Each residual couples three neighbours, so the
/// Hessian has bandwidth 2.
pub fn broyden_tridiagonal(name: &str, n: usize) -> Result<ProblemSpec, CliError> {
    if n == 0 {
        return Err(CliError::Usage(format!("problem `{name}`: dimension must be positive")));
    }
    fn residuals(x: &DVector<f64>) -> Vec<f64> {
        let n = x.len();
        let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { x[i as usize] };
        (0..n as isize)
            .map(|i| (3.0 - 2.0 * at(i)) * at(i) - at(i - 1) - 2.0 * at(i + 1) + 1.0)
            .collect()
    }
    let value = |x: &DVector<f64>| residuals(x).iter().map(|r| r * r).sum();
    let gradient = |x: &DVector<f64>| {
        let r = residuals(x);
        let n = x.len();
        DVector::from_fn(n, |j, _| {
            let mut g = r[j] * (3.0 - 4.0 * x[j]);
            if j + 1 < n {
                g -= r[j + 1];
            }
            if j >= 1 {
                g -= 2.0 * r[j - 1];
            }
            2.0 * g
        })
    };
    Ok(ProblemSpec {
        name: name.into(),
        objective: Objective::new(name, n, value, gradient),
        start: DVector::from_element(n, -1.0),
        minimum: Some(0.0),
        minimizer: None,
        pattern: Some(SparsityPattern::banded(n, 2)),
    })
}
