//! Scalar potentials `V(z)` on the positive reals.
//!
//! A potential generates the matrix potential `φ(P) = V(det P)` and with it a
//! Bregman divergence on the positive-definite cone. Two derived functions
//! drive everything downstream:
//!
//! * `ν(z) = −z·V′(z)`, always positive for an admissible `V`;
//! * `β(z) = z·ν′(z)/ν(z)`, which must stay below `1/n` in dimension `n`.
//!
//! The builtins carry exact closed forms. A custom potential is supplied as
//! three closures and is checked numerically on a fixed grid.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Grid used for the `β(z) < 1/n` check: 256 log-spaced points on `[1e-8, 1e8]`.
pub const BETA_GRID: (f64, f64, usize) = (1e-8, 1e8, 256);
/// Grid used for the `z/ν(z)^{n-1} → 0` check: 256 log-spaced points on `[1e-12, 1]`.
pub const LIMIT_GRID: (f64, f64, usize) = (1e-12, 1.0, 256);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// `V(z) = −log z`; generates the KL divergence.
    Log,
    /// `V(z) = (1 − z^γ)/γ`, `γ ≠ 0`.
    Power {
        gamma: f64,
    },
    /// `V(z) = c·log(cz + 1) − log z`, `0 ≤ c < 1`.
    Bounded {
        c: f64,
    },
    Custom,
}

struct CustomFns {
    name: String,
    value: Box<ScalarFn>,
    derivative: Box<ScalarFn>,
    second_derivative: Box<ScalarFn>,
}

/// Values of a potential and its derived functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub v: f64,
    pub v_prime: f64,
    pub nu: f64,
    pub beta: f64,
}

/// Outcome of checking a potential's admissibility conditions in dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialReport {
    pub n: usize,
    /// `β(z) < 1/n` at every point of [`PotentialReport::grid`].
    pub beta_bound_ok: bool,
    /// `z/ν(z)^{n-1}` strictly decreases as `z` falls along [`PotentialReport::limit_grid`].
    pub limit_ok: bool,
    /// `ν(z) > 0` on the grid.
    pub nu_positive: bool,
    pub max_beta: f64,
    pub grid: Vec<f64>,
    pub limit_grid: Vec<f64>,
}

impl PotentialReport {
    pub fn accepted(&self) -> bool {
        self.beta_bound_ok && self.limit_ok && self.nu_positive
    }
}

#[derive(Clone)]
pub struct Potential {
    kind: PotentialKind,
    custom: Option<Arc<CustomFns>>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Potential").field(&self.name()).finish()
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

impl Potential {
    pub fn log() -> Self {
        Self {
            kind: PotentialKind::Log,
            custom: None,
        }
    }

    /// Power potential. `γ = 0` is rejected: use [`Potential::log`], which is
    /// its limit.
    pub fn power(gamma: f64) -> Result<Self> {
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power potential needs a finite gamma != 0 (got {gamma}); use `log` for the limit"
            )));
        }
        Ok(Self {
            kind: PotentialKind::Power { gamma },
            custom: None,
        })
    }

    pub fn bounded(c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!(
                "bounded potential needs 0 <= c < 1 (got {c})"
            )));
        }
        Ok(Self {
            kind: PotentialKind::Bounded { c },
            custom: None,
        })
    }

    pub fn make_builtin(kind: PotentialKind) -> Result<Self> {
        match kind {
            PotentialKind::Log => Ok(Self::log()),
            PotentialKind::Power { gamma } => Self::power(gamma),
            PotentialKind::Bounded { c } => Self::bounded(c),
            PotentialKind::Custom => Err(Error::InvalidParameter(
                "custom potentials are built with Potential::custom".into(),
            )),
        }
    }

    /// A potential given by `V`, `V′` and `V″` as closures on `z > 0`.
    pub fn custom<F, G, H>(name: impl Into<String>, value: F, derivative: G, second: H) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::Custom,
            custom: Some(Arc::new(CustomFns {
                name: name.into(),
                value: Box::new(value),
                derivative: Box::new(derivative),
                second_derivative: Box::new(second),
            })),
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn name(&self) -> String {
        match self.kind {
            PotentialKind::Log => "log".to_string(),
            PotentialKind::Power { gamma } => format!("power:gamma={gamma}"),
            PotentialKind::Bounded { c } => format!("bounded:c={c}"),
            PotentialKind::Custom => self.custom_fns().name.clone(),
        }
    }

    /// `Some(γ)` for the power potential, whose update coefficient has a
    /// closed form.
    pub fn closed_form_power(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Power { gamma } => Some(gamma),
            _ => None,
        }
    }

    fn custom_fns(&self) -> &CustomFns {
        self.custom.as_deref().expect("custom potential carries its closures")
    }

    pub fn value(&self, z: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => -z.ln(),
            PotentialKind::Power { gamma } => (1.0 - z.powf(gamma)) / gamma,
            PotentialKind::Bounded { c } => c * (c * z).ln_1p() - z.ln(),
            PotentialKind::Custom => (self.custom_fns().value)(z),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => -1.0 / z,
            PotentialKind::Power { gamma } => -z.powf(gamma - 1.0),
            PotentialKind::Bounded { c } => c * c / (c * z + 1.0) - 1.0 / z,
            PotentialKind::Custom => (self.custom_fns().derivative)(z),
        }
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => 1.0 / (z * z),
            PotentialKind::Power { gamma } => (1.0 - gamma) * z.powf(gamma - 2.0),
            PotentialKind::Bounded { c } => {
                let w = c * z + 1.0;
                1.0 / (z * z) - c * c * c / (w * w)
            }
            PotentialKind::Custom => (self.custom_fns().second_derivative)(z),
        }
    }

    /// `ν(z) = −z·V′(z)`.
    pub fn nu(&self, z: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => 1.0,
            PotentialKind::Power { gamma } => z.powf(gamma),
            PotentialKind::Bounded { c } => 1.0 - c + c / (c * z + 1.0),
            PotentialKind::Custom => -z * self.derivative(z),
        }
    }

    /// `β(z) = z·ν′(z)/ν(z)`.
    pub fn beta(&self, z: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => 0.0,
            PotentialKind::Power { gamma } => gamma,
            PotentialKind::Bounded { c } => -c * c * z / ((c * z + 1.0) * (c * (1.0 - c) * z + 1.0)),
            PotentialKind::Custom => {
                let nu_prime = -self.derivative(z) - z * self.second_derivative(z);
                z * nu_prime / self.nu(z)
            }
        }
    }

    /// `V(e^u)`, accurate for determinants far outside the range of `f64`.
    pub fn value_at_log(&self, u: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => -u,
            PotentialKind::Power { gamma } => -(gamma * u).exp_m1() / gamma,
            PotentialKind::Bounded { c } => {
                let cz = c * u.exp();
                // log(cz + 1) ~ log(cz) once cz overflows
                let l = if cz.is_finite() { cz.ln_1p() } else { c.ln() + u };
                c * l - u
            }
            PotentialKind::Custom => self.value(u.exp()),
        }
    }

    /// `log ν(e^u)`.
    pub fn log_nu_at_log(&self, u: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => 0.0,
            PotentialKind::Power { gamma } => gamma * u,
            PotentialKind::Bounded { c } => (1.0 - c + c / (c * u.exp() + 1.0)).ln(),
            PotentialKind::Custom => self.nu(u.exp()).ln(),
        }
    }

    /// `ν(e^u)`.
    pub fn nu_at_log(&self, u: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => 1.0,
            _ => self.log_nu_at_log(u).exp(),
        }
    }

    /// `β(e^u)`.
    pub fn beta_at_log(&self, u: f64) -> f64 {
        match self.kind {
            PotentialKind::Log => 0.0,
            PotentialKind::Power { gamma } => gamma,
            PotentialKind::Bounded { .. } => {
                let z = u.exp();
                // β(z) ~ -1/((1-c)z) -> 0 as z -> ∞
                if !z.is_finite() {
                    return 0.0;
                }
                self.beta(z)
            }
            PotentialKind::Custom => self.beta(u.exp()),
        }
    }

    pub fn evaluate(&self, z: f64) -> Result<Evaluation> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::DomainError(z));
        }
        Ok(Evaluation {
            v: self.value(z),
            v_prime: self.derivative(z),
            nu: self.nu(z),
            beta: self.beta(z),
        })
    }

    /// Checks `β(z) < 1/n` and the decay of `z/ν(z)^{n-1}` toward zero on the
    /// fixed grids [`BETA_GRID`] and [`LIMIT_GRID`].
    pub fn validate(&self, n: usize) -> PotentialReport {
        let n = n.max(1);
        let bound = 1.0 / n as f64;
        let grid = log_grid(BETA_GRID.0, BETA_GRID.1, BETA_GRID.2);
        let mut max_beta = f64::NEG_INFINITY;
        let mut beta_bound_ok = true;
        let mut nu_positive = true;
        for &z in &grid {
            let b = self.beta(z);
            let nu = self.nu(z);
            if !(nu > 0.0) || !nu.is_finite() {
                nu_positive = false;
            }
            if !(b < bound) || !b.is_finite() {
                beta_bound_ok = false;
            }
            if b > max_beta || b.is_nan() {
                max_beta = b;
            }
        }

        let limit_grid = log_grid(LIMIT_GRID.0, LIMIT_GRID.1, LIMIT_GRID.2);
        // log(z / ν(z)^{n-1}) must increase with z, i.e. decay as z -> 0.
        let zeta: Vec<f64> = limit_grid
            .iter()
            .map(|&z| z.ln() - (n as f64 - 1.0) * self.nu(z).ln())
            .collect();
        let limit_ok = zeta.iter().all(|v| v.is_finite())
            && zeta.windows(2).all(|w| w[0] < w[1])
            && zeta[0] < zeta[zeta.len() - 1];

        PotentialReport {
            n,
            beta_bound_ok,
            limit_ok,
            nu_positive,
            max_beta,
            grid,
            limit_grid,
        }
    }

    /// Admissibility in dimension `n`. Builtins are decided analytically;
    /// custom potentials go through [`Potential::validate`].
    pub fn ensure_admissible(&self, n: usize) -> Result<()> {
        let ok = match self.kind {
            PotentialKind::Log | PotentialKind::Bounded { .. } => true,
            PotentialKind::Power { gamma } => gamma < 1.0 / n.max(1) as f64,
            PotentialKind::Custom => self.validate(n).accepted(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InadmissiblePotential { name: self.name(), n })
        }
    }
}

impl FromStr for Potential {
    type Err = Error;

    /// Parses `log`, `power:gamma=<float>` or `bounded:c=<float>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let param = |key: &str| -> Result<f64> {
            let rest =
                rest.ok_or_else(|| Error::InvalidParameter(format!("potential `{s}` is missing `{key}=<value>`")))?;
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("potential `{s}`: expected `{key}=<value>`")))?;
            if k.trim() != key {
                return Err(Error::InvalidParameter(format!(
                    "potential `{s}`: unknown parameter `{}`",
                    k.trim()
                )));
            }
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("potential `{s}`: `{}` is not a number", v.trim())))
        };
        match head {
            "log" if rest.is_none() => Ok(Self::log()),
            "power" => Self::power(param("gamma")?),
            "bounded" => Self::bounded(param("c")?),
            _ => Err(Error::InvalidParameter(format!("unknown potential `{s}`"))),
        }
    }
}
