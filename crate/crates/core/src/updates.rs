//! Hessian-approximation updates: BFGS, DFP, the potential-driven V-BFGS and
//! V-DFP families, and the self-scaling update.
//!
//! All updates work on the Cholesky factor of the current approximation.
//! The BFGS factor is produced by one rank-one update followed by one
//! downdate; every other family is a rescaling of that step plus at most one
//! more rank-one modification.
//!
//! The V-BFGS update with potential `V` is
//!
//! ```text
//! B' = r·B_bfgs + (1 − r)·yyᵀ/(sᵀy),   r = ν(det B') / ν(det B),
//! ```
//!
//! which is implicit in `det B'`. Taking determinants gives the scalar
//! equation `z = C·ν(z)^{n-1}` with `C = det(B_bfgs)/ν(det B)^{n-1}`; its
//! unique root is `det B'`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{CholeskyFactor, PDMatrix, Sign};
use crate::potentials::Potential;
use crate::roots::solve_increasing;

/// A step `s = x_{k+1} − x_k` and gradient change `y` with `sᵀy > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantPair {
    s: DVector<f64>,
    y: DVector<f64>,
    curvature: f64,
}

impl SecantPair {
    pub fn new(s: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        if s.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                found: y.len(),
            });
        }
        let curvature = s.dot(&y);
        if !(curvature > 0.0) || !curvature.is_finite() || s.norm() == 0.0 {
            return Err(Error::CurvatureViolation(curvature));
        }
        Ok(Self { s, y, curvature })
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `sᵀy`.
    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// The pair `(y, s)`, i.e. the secant condition for the inverse `Hy = s`.
    pub fn swapped(&self) -> Self {
        Self {
            s: self.y.clone(),
            y: self.s.clone(),
            curvature: self.curvature,
        }
    }
}

fn check_dims(b: &PDMatrix, pair: &SecantPair) -> Result<()> {
    if b.n() != pair.n() {
        return Err(Error::DimensionMismatch {
            expected: b.n(),
            found: pair.n(),
        });
    }
    Ok(())
}

/// Factor of `B + yyᵀ/(sᵀy) − (Bs)(Bs)ᵀ/(sᵀBs)`, together with `Bs` and
/// `sᵀBs`. The update runs before the downdate so every intermediate
/// matrix stays positive definite.
fn bfgs_factor(f: &CholeskyFactor, pair: &SecantPair) -> Result<(CholeskyFactor, DVector<f64>, f64)> {
    let bs = f.mul_vec(pair.s())?;
    let sbs = f.lower().tr_mul(pair.s()).norm_squared();
    let mut g = f.rank_one_update(&(pair.y() / pair.curvature().sqrt()), Sign::Plus)?;
    g.rank_one_update_mut(&(&bs / sbs.sqrt()), Sign::Minus)?;
    Ok((g, bs, sbs))
}

/// `B + yyᵀ/(sᵀy) − BssᵀB/(sᵀBs)`.
pub fn bfgs_update(b: &PDMatrix, pair: &SecantPair) -> Result<PDMatrix> {
    check_dims(b, pair)?;
    let (g, _, _) = bfgs_factor(b.factor(), pair)?;
    Ok(PDMatrix::from_factor(g))
}

/// `(I − ysᵀ/sᵀy) B (I − syᵀ/sᵀy) + yyᵀ/sᵀy`, computed as the BFGS factor
/// plus the rank-one term `(sᵀBs)·wwᵀ`, `w = y/sᵀy − Bs/sᵀBs`.
pub fn dfp_update(b: &PDMatrix, pair: &SecantPair) -> Result<PDMatrix> {
    check_dims(b, pair)?;
    Ok(PDMatrix::from_factor(dfp_factor(b.factor(), pair)?))
}

fn dfp_factor(f: &CholeskyFactor, pair: &SecantPair) -> Result<CholeskyFactor> {
    let (mut g, bs, sbs) = bfgs_factor(f, pair)?;
    let w = pair.y() / pair.curvature() - &bs / sbs;
    g.rank_one_update_mut(&(w * sbs.sqrt()), Sign::Plus)?;
    Ok(g)
}

/// Root of `z = C·ν(z)^{n-1}`, `z > 0`.
pub fn solve_scaling_equation(c: f64, pot: &Potential, n: usize) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scaling constant must be positive and finite, got {c}"
        )));
    }
    pot.ensure_admissible(n)?;
    Ok(solve_scaling_equation_log(c.ln(), pot, n, None)?.exp())
}

/// Log-space form of [`solve_scaling_equation`]: returns `log z*` given
/// `log C`. Solves `ζ(u) = u − (n−1)·log ν(e^u) = log C`, whose slope
/// `1 − (n−1)β` is at least `1/n` for an admissible potential.
pub fn solve_scaling_equation_log(log_c: f64, pot: &Potential, n: usize, hint: Option<f64>) -> Result<f64> {
    if n <= 1 {
        return Ok(log_c);
    }
    let m = (n - 1) as f64;
    let u0 = hint.unwrap_or(log_c + m * pot.log_nu_at_log(log_c));
    solve_increasing(
        |u| (u - m * pot.log_nu_at_log(u) - log_c, 1.0 - m * pot.beta_at_log(u)),
        u0,
    )
}

/// How [`v_bfgs_update_with`] finds the coefficient `ν(det B')/ν(det B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientPath {
    /// Closed form `(sᵀy/sᵀBs)^ρ`, `ρ = γ/(1 − (n−1)γ)`, for power
    /// potentials; the scalar solve otherwise.
    Auto,
    /// Always solve the determinant equation.
    ScalarSolve,
}

/// Step 5 of the V-BFGS loop: the factor of
/// `r·B_bfgs + (1 − r)·yyᵀ/(sᵀy)`.
///
/// For `r ≤ 1` this is one rank-one update of the scaled BFGS factor. For
/// `r > 1` the same matrix equals the BFGS update of `r·B`, which avoids
/// downdating by the large multiple of `yyᵀ`.
fn combine(b: &CholeskyFactor, bar: CholeskyFactor, r: f64, pair: &SecantPair) -> Result<CholeskyFactor> {
    if r == 1.0 {
        return Ok(bar);
    }
    if r < 1.0 {
        let mut g = bar.scaled(r)?;
        let v = pair.y() * ((1.0 - r) / pair.curvature()).sqrt();
        g.rank_one_update_mut(&v, Sign::Plus)?;
        Ok(g)
    } else {
        let (g, _, _) = bfgs_factor(&b.scaled(r)?, pair)?;
        Ok(g)
    }
}

/// The V-BFGS update: the minimizer of `D_V(B', B)` over `{B' ≻ 0 | B's = y}`.
pub fn v_bfgs_update(b: &PDMatrix, pair: &SecantPair, pot: &Potential) -> Result<PDMatrix> {
    v_bfgs_update_with(b, pair, pot, CoefficientPath::Auto)
}

pub fn v_bfgs_update_with(b: &PDMatrix, pair: &SecantPair, pot: &Potential, path: CoefficientPath) -> Result<PDMatrix> {
    check_dims(b, pair)?;
    let n = b.n();
    pot.ensure_admissible(n)?;
    let (bar, _, sbs) = bfgs_factor(b.factor(), pair)?;
    let r = match (path, pot.closed_form_power()) {
        (CoefficientPath::Auto, Some(gamma)) => power_coefficient(gamma, n, pair.curvature() / sbs),
        _ => scalar_coefficient(pot, n, bar.log_det(), b.log_det())?,
    };
    Ok(PDMatrix::from_factor(combine(b.factor(), bar, r, pair)?))
}

/// `(sᵀy/sᵀBs)^ρ` with `ρ = γ/(1 − (n−1)γ)`.
fn power_coefficient(gamma: f64, n: usize, ratio: f64) -> f64 {
    let rho = gamma / (1.0 - (n as f64 - 1.0) * gamma);
    ratio.powf(rho)
}

/// `ν(z*)/ν(det B)` where `z*` solves `z = C·ν(z)^{n-1}` with
/// `log C = log det B_bfgs − (n−1)·log ν(det B)`.
fn scalar_coefficient(pot: &Potential, n: usize, log_det_bfgs: f64, log_det_b: f64) -> Result<f64> {
    let log_nu_b = pot.log_nu_at_log(log_det_b);
    let log_c = log_det_bfgs - (n as f64 - 1.0) * log_nu_b;
    let u = solve_scaling_equation_log(log_c, pot, n, Some(log_det_bfgs))?;
    Ok((pot.log_nu_at_log(u) - log_nu_b).exp())
}

/// The V-BFGS coefficient `r = ν(det B')/ν(det B)` for one step.
pub fn v_bfgs_coefficient(b: &PDMatrix, pair: &SecantPair, pot: &Potential, path: CoefficientPath) -> Result<f64> {
    check_dims(b, pair)?;
    let n = b.n();
    pot.ensure_admissible(n)?;
    let (bar, _, sbs) = bfgs_factor(b.factor(), pair)?;
    match (path, pot.closed_form_power()) {
        (CoefficientPath::Auto, Some(gamma)) => Ok(power_coefficient(gamma, n, pair.curvature() / sbs)),
        _ => scalar_coefficient(pot, n, bar.log_det(), b.log_det()),
    }
}

/// The V-DFP update in inverse form.
///
/// `h` is the current inverse-Hessian approximation. The result `H'`
/// minimizes `D_V(H', H)` subject to `H'y = s`, i.e. it is the V-BFGS
/// update of `H` with the roles of `s` and `y` exchanged:
/// `H' = r·BFGS[H; y, s] + (1 − r)·ssᵀ/(sᵀy)`, `r = ν(det H')/ν(det H)`.
pub fn v_dfp_update(h: &PDMatrix, pair: &SecantPair, pot: &Potential) -> Result<PDMatrix> {
    v_bfgs_update(h, &pair.swapped(), pot)
}

/// The V-DFP update carried out on the Hessian approximation `B = H⁻¹`.
///
/// Since `BFGS[rH; y, s]⁻¹ = DFP[B/r; s, y]`, the inverse of the V-DFP
/// update is the DFP update of `B/r`. Only `yᵀB⁻¹y` is needed to find `r`.
pub fn v_dfp_update_hessian(b: &PDMatrix, pair: &SecantPair, pot: &Potential) -> Result<PDMatrix> {
    check_dims(b, pair)?;
    let n = b.n();
    pot.ensure_admissible(n)?;
    let h_y = b.solve(pair.y())?;
    let yhy = pair.y().dot(&h_y);
    let log_det_h = -b.log_det();
    let r = match pot.closed_form_power() {
        Some(gamma) => power_coefficient(gamma, n, pair.curvature() / yhy),
        None => {
            let log_det_bar = log_det_h + pair.curvature().ln() - yhy.ln();
            scalar_coefficient(pot, n, log_det_bar, log_det_h)?
        }
    };
    let scaled = if r == 1.0 {
        b.factor().clone()
    } else {
        b.factor().scaled(1.0 / r)?
    };
    Ok(PDMatrix::from_factor(dfp_factor(&scaled, pair)?))
}

/// `θ·B_bfgs + (1 − θ)·yyᵀ/(sᵀy)` for a caller-chosen `θ > 0`.
///
/// The common choice `θ = sᵀy/sᵀBs` (see [`UpdateFamily::SelfScaling`])
/// corresponds to exponent `ρ = 1` in the power-potential coefficient, which
/// no strictly convex potential produces, and is known to behave poorly on
/// some problems.
pub fn self_scaling_update(b: &PDMatrix, pair: &SecantPair, theta: f64) -> Result<PDMatrix> {
    check_dims(b, pair)?;
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "self-scaling parameter must be positive, got {theta}"
        )));
    }
    let (bar, _, _) = bfgs_factor(b.factor(), pair)?;
    Ok(PDMatrix::from_factor(combine(b.factor(), bar, theta, pair)?))
}

/// Reference solution of the V-BFGS variational problem by damped Newton on
/// `{X | Xs = y}`. Independent of the closed-form update; meant for small
/// `n` (at most 4) in tests and diagnostics.
pub fn variational_oracle(b: &PDMatrix, pair: &SecantPair, pot: &Potential) -> Result<PDMatrix> {
    check_dims(b, pair)?;
    if b.n() > 4 {
        return Err(Error::InvalidParameter(format!(
            "variational oracle is limited to n <= 4 (got {})",
            b.n()
        )));
    }
    pot.ensure_admissible(b.n())?;
    crate::oracle::secant_projection(b, pair, pot)
}

/// The Hessian-update rule used by the solver.
#[derive(Debug, Clone)]
pub enum UpdateFamily {
    Bfgs,
    Dfp,
    VBfgs(Potential),
    /// V-DFP; the solver applies it to the Hessian approximation through
    /// [`v_dfp_update_hessian`].
    VDfp(Potential),
    /// Self-scaling BFGS with `θ_k = sᵀy / sᵀBs`.
    SelfScaling,
}

impl UpdateFamily {
    pub fn apply(&self, b: &PDMatrix, pair: &SecantPair) -> Result<PDMatrix> {
        match self {
            Self::Bfgs => bfgs_update(b, pair),
            Self::Dfp => dfp_update(b, pair),
            Self::VBfgs(pot) => v_bfgs_update(b, pair, pot),
            Self::VDfp(pot) => v_dfp_update_hessian(b, pair, pot),
            Self::SelfScaling => {
                let theta = pair.curvature() / b.quad_form(pair.s())?;
                self_scaling_update(b, pair, theta)
            }
        }
    }

    /// Potential defining the divergence behind the family, where there is one.
    pub fn potential(&self) -> Option<Potential> {
        match self {
            Self::Bfgs | Self::Dfp => Some(Potential::log()),
            Self::VBfgs(p) | Self::VDfp(p) => Some(p.clone()),
            Self::SelfScaling => None,
        }
    }

    pub fn ensure_admissible(&self, n: usize) -> Result<()> {
        match self {
            Self::VBfgs(p) | Self::VDfp(p) => p.ensure_admissible(n),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for UpdateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bfgs => f.write_str("bfgs"),
            Self::Dfp => f.write_str("dfp"),
            Self::VBfgs(p) => write!(f, "vbfgs:{p}"),
            Self::VDfp(p) => write!(f, "vdfp:{p}"),
            Self::SelfScaling => f.write_str("selfscale"),
        }
    }
}

impl FromStr for UpdateFamily {
    type Err = Error;

    /// Parses `bfgs`, `dfp`, `selfscale`, `vbfgs:<potential>` or
    /// `vdfp:<potential>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "bfgs" => return Ok(Self::Bfgs),
            "dfp" => return Ok(Self::Dfp),
            "selfscale" => return Ok(Self::SelfScaling),
            _ => {}
        }
        match s.split_once(':') {
            Some(("vbfgs", pot)) => Ok(Self::VBfgs(pot.parse()?)),
            Some(("vdfp", pot)) => Ok(Self::VDfp(pot.parse()?)),
            _ => Err(Error::InvalidParameter(format!("unknown update family `{s}`"))),
        }
    }
}
