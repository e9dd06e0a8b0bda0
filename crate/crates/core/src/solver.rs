//! Line-search quasi-Newton driver.
//!
//! Each iteration takes `d_k = −B_k⁻¹∇f(x_k)`, finds a step satisfying the
//! strong Wolfe conditions, and replaces `B_k` by the configured update of
//! the secant pair `(s_k, y_k)`. With a sparsity configuration the update is
//! the alternating-projection scheme of [`crate::sparse::sparse_update`]
//! instead.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::PDMatrix;
use crate::sparse::{is_chordal, sparse_update, CliqueTree, SparseAlgorithm, SparsityPattern, TraceReference};
use crate::updates::{SecantPair, UpdateFamily};

type ValueFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// A smooth function `f: ℝⁿ → ℝ` with its gradient.
#[derive(Clone)]
pub struct Objective {
    n: usize,
    name: String,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
    minimizer: Option<DVector<f64>>,
}

impl Objective {
    pub fn new<F, G>(name: impl Into<String>, n: usize, value: F, gradient: G) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            n,
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            minimizer: None,
        }
    }

    pub fn with_minimizer(mut self, x: DVector<f64>) -> Self {
        self.minimizer = Some(x);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn minimizer(&self) -> Option<&DVector<f64>> {
        self.minimizer.as_ref()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    /// Relative error between the gradient and central differences of the
    /// value with step `h`.
    pub fn gradient_check(&self, x: &DVector<f64>, h: f64) -> f64 {
        let g = self.gradient(x);
        let mut fd = DVector::zeros(self.n);
        for i in 0..self.n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (self.value(&xp) - self.value(&xm)) / (2.0 * h);
        }
        (g - &fd).norm() / (1.0 + fd.norm())
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("minimizer", &self.minimizer)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub c1: f64,
    pub c2: f64,
    pub alpha_init: f64,
    pub max_trials: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            alpha_init: 1.0,
            max_trials: 50,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "line search needs 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.alpha_init > 0.0) || self.max_trials == 0 {
            return Err(Error::InvalidParameter(
                "line search needs alpha_init > 0 and max_trials >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Accepted step of [`wolfe_line_search`].
#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub x: DVector<f64>,
    pub f: f64,
    pub gradient: DVector<f64>,
    pub evaluations: usize,
}

struct Probe {
    alpha: f64,
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
    slope: f64,
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, kept
/// inside the middle 80% of the interval.
fn safeguarded_cubic(a: &Probe, b: &Probe) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha {
        (a.alpha, b.alpha)
    } else {
        (b.alpha, a.alpha)
    };
    let width = hi - lo;
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    let mut t = f64::NAN;
    if disc >= 0.0 {
        let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
        t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    }
    if !t.is_finite() {
        t = 0.5 * (lo + hi);
    }
    t.clamp(lo + 0.1 * width, hi - 0.1 * width)
}

/// Strong-Wolfe line search by bracketing and zoom.
///
/// The returned step satisfies `f(x+αd) ≤ f(x) + c1·α·∇f(x)ᵀd` and
/// `|∇f(x+αd)ᵀd| ≤ c2·|∇f(x)ᵀd|`.
pub fn wolfe_line_search(
    obj: &Objective,
    x: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    d: &DVector<f64>,
    params: &LineSearchParams,
) -> Result<LineSearchResult> {
    params.validate()?;
    let slope0 = g0.dot(d);
    if !(slope0 < 0.0) {
        return Err(Error::NotDescent(slope0));
    }
    let mut evaluations = 0usize;
    let mut probe = |alpha: f64| -> Probe {
        evaluations += 1;
        let xa = x + d * alpha;
        let f = obj.value(&xa);
        let g = obj.gradient(&xa);
        let slope = g.dot(d);
        Probe {
            alpha,
            x: xa,
            f,
            g,
            slope,
        }
    };
    let armijo = |p: &Probe| p.f.is_finite() && p.f <= f0 + params.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -params.c2 * slope0;

    let mut prev = Probe {
        alpha: 0.0,
        x: x.clone(),
        f: f0,
        g: g0.clone(),
        slope: slope0,
    };
    let mut alpha = params.alpha_init;
    let mut trials = 0usize;
    let (mut lo, mut hi) = loop {
        if trials >= params.max_trials {
            return Err(Error::LineSearchFail { trials });
        }
        trials += 1;
        let p = probe(alpha);
        if !armijo(&p) || (trials > 1 && p.f >= prev.f) {
            break (prev, p);
        }
        if curvature(&p) {
            return Ok(LineSearchResult {
                alpha: p.alpha,
                x: p.x,
                f: p.f,
                gradient: p.g,
                evaluations,
            });
        }
        if p.slope >= 0.0 {
            break (p, prev);
        }
        prev = p;
        alpha *= 2.0;
    };

    // Zoom: `lo` satisfies the sufficient-decrease condition with the lowest
    // value seen; the minimizer lies between `lo` and `hi`.
    loop {
        if trials >= params.max_trials {
            return Err(Error::LineSearchFail { trials });
        }
        trials += 1;
        let a = if hi.f.is_finite() && hi.slope.is_finite() {
            safeguarded_cubic(&lo, &hi)
        } else {
            0.5 * (lo.alpha + hi.alpha)
        };
        if (a - lo.alpha).abs() <= f64::EPSILON * lo.alpha.abs().max(1.0) {
            return Err(Error::LineSearchFail { trials });
        }
        let p = probe(a);
        if !armijo(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(LineSearchResult {
                    alpha: p.alpha,
                    x: p.x,
                    f: p.f,
                    gradient: p.g,
                    evaluations,
                });
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
}

/// Response to a step with `sᵀy ≤ 1e-12·‖s‖‖y‖`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkipPolicy {
    /// Keep `B_k` and continue.
    #[default]
    SkipUpdate,
    /// Abort with [`Error::CurvatureViolation`].
    Error,
}

/// Relative threshold below which `sᵀy` is treated as non-positive.
pub const CURVATURE_TOLERANCE: f64 = 1e-12;

/// Sparse Hessian approximation: each update runs `iterations` rounds of the
/// chosen alternating-projection scheme.
#[derive(Debug, Clone)]
pub struct SparsityConfig {
    pub pattern: SparsityPattern,
    pub tree: CliqueTree,
    pub algorithm: SparseAlgorithm,
    pub iterations: usize,
}

impl SparsityConfig {
    pub fn new(pattern: SparsityPattern, algorithm: SparseAlgorithm, iterations: usize) -> Result<Self> {
        let tree = is_chordal(&pattern)?;
        Ok(Self {
            pattern,
            tree,
            algorithm,
            iterations,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub family: UpdateFamily,
    pub line_search: LineSearchParams,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub skip_policy: SkipPolicy,
    pub sparsity: Option<SparsityConfig>,
    /// Store `B_k` in every record.
    pub record_hessians: bool,
}

impl SolverConfig {
    pub fn new(family: UpdateFamily) -> Self {
        Self {
            family,
            line_search: LineSearchParams::default(),
            grad_tol: 1e-8,
            max_iter: 500,
            skip_policy: SkipPolicy::default(),
            sparsity: None,
            record_hessians: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        self.line_search.validate()?;
        self.family.ensure_admissible(n)?;
        if let Some(sp) = &self.sparsity {
            if sp.pattern.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: sp.pattern.n(),
                });
            }
            if self.family.potential().is_none() {
                return Err(Error::InvalidParameter(format!(
                    "update family `{}` has no potential and cannot drive sparse updates",
                    self.family
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIter,
    LineSearchFail,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::MaxIter => "max_iter",
            Self::LineSearchFail => "line_search_fail",
        })
    }
}

/// State at iterate `k` and the step taken from it. The final record has
/// no step: `alpha` and `s_ty` are `None`.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub alpha: Option<f64>,
    /// `det B_k`.
    pub det_b: f64,
    pub s_ty: Option<f64>,
    pub skipped: bool,
    pub hessian: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub status: SolverStatus,
    pub hessian: PDMatrix,
}

impl SolverTrace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("trace has at least one record")
    }

    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn converged(&self) -> bool {
        self.status == SolverStatus::Converged
    }
}

fn next_hessian(b: &PDMatrix, pair: &SecantPair, config: &SolverConfig) -> Result<PDMatrix> {
    match &config.sparsity {
        None => config.family.apply(b, pair),
        Some(sp) => {
            let pot = config
                .family
                .potential()
                .ok_or_else(|| Error::InvalidParameter("sparse updates need a potential".into()))?;
            let out = sparse_update(
                b,
                pair,
                &sp.pattern,
                &sp.tree,
                &pot,
                sp.algorithm,
                sp.iterations,
                TraceReference::Successive,
            )?;
            Ok(out.matrix)
        }
    }
}

/// Runs the quasi-Newton iteration from `x0` with initial approximation `b0`.
pub fn minimize(obj: &Objective, x0: &DVector<f64>, b0: &PDMatrix, config: &SolverConfig) -> Result<SolverTrace> {
    let n = obj.n();
    if x0.len() != n || b0.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if x0.len() != n { x0.len() } else { b0.n() },
        });
    }
    config.validate(n)?;

    let mut x = x0.clone();
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut b = b0.clone();
    let mut records = Vec::new();
    let record = |k: usize, x: &DVector<f64>, f: f64, g: &DVector<f64>, b: &PDMatrix| IterationRecord {
        iter: k,
        x: x.clone(),
        f,
        grad_norm: g.norm(),
        alpha: None,
        det_b: b.det(),
        s_ty: None,
        skipped: false,
        hessian: config.record_hessians.then(|| b.matrix().clone()),
    };

    let mut k = 0;
    let status = loop {
        let mut rec = record(k, &x, f, &g, &b);
        if rec.grad_norm <= config.grad_tol {
            records.push(rec);
            break SolverStatus::Converged;
        }
        if k == config.max_iter {
            records.push(rec);
            break SolverStatus::MaxIter;
        }
        let d = -b.solve(&g)?;
        let step = match wolfe_line_search(obj, &x, f, &g, &d, &config.line_search) {
            Ok(step) => step,
            Err(Error::LineSearchFail { .. }) => {
                records.push(rec);
                break SolverStatus::LineSearchFail;
            }
            Err(e) => return Err(e),
        };
        let s = &step.x - &x;
        let y = &step.gradient - &g;
        let s_ty = s.dot(&y);
        rec.alpha = Some(step.alpha);
        rec.s_ty = Some(s_ty);
        if s_ty <= CURVATURE_TOLERANCE * s.norm() * y.norm() {
            match config.skip_policy {
                SkipPolicy::SkipUpdate => rec.skipped = true,
                SkipPolicy::Error => return Err(Error::CurvatureViolation(s_ty)),
            }
        } else {
            let pair = SecantPair::new(s, y)?;
            b = next_hessian(&b, &pair, config)?;
        }
        records.push(rec);
        x = step.x;
        f = step.f;
        g = step.gradient;
        k += 1;
    };
    Ok(SolverTrace {
        records,
        status,
        hessian: b,
    })
}

/// `f̃(x̃) = f(T⁻¹x̃)`, `∇f̃(x̃) = T⁻ᵀ∇f(T⁻¹x̃)`.
///
/// Rejects `T` with condition number at or above `1e12`.
pub fn transform_problem(obj: &Objective, t: &DMatrix<f64>) -> Result<Objective> {
    let n = obj.n();
    if t.nrows() != n || t.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: t.nrows(),
        });
    }
    let sv = t.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond < 1e12) {
        return Err(Error::SingularTransform(cond));
    }
    let t_inv = t.clone().try_inverse().ok_or(Error::SingularTransform(cond))?;
    let t_inv_t = t_inv.transpose();
    let inner_f = obj.clone();
    let inner_g = obj.clone();
    let ti_f = t_inv.clone();
    let ti_g = t_inv;
    let mut out = Objective::new(
        format!("{}@T", obj.name()),
        n,
        move |xt| inner_f.value(&(&ti_f * xt)),
        move |xt| &t_inv_t * inner_g.gradient(&(&ti_g * xt)),
    );
    if let Some(m) = obj.minimizer() {
        out = out.with_minimizer(t * m);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// `max_k ‖x̃_k − T·x_k‖ / (1 + ‖x_k‖)`.
    pub x_deviation: f64,
    /// `max_k ‖TᵀB̃_kT − B_k‖_F / (1 + ‖B_k‖_F)`.
    pub hessian_deviation: f64,
    /// Number of iterates compared.
    pub compared: usize,
    pub tol: f64,
    pub invariant: bool,
}

/// Runs the solver on `obj` from `(x0, B0)` and on the transformed problem
/// from `(T·x0, T⁻ᵀB0T⁻¹)` for at most `k_max` steps each, and compares the
/// iterates over their common prefix.
pub fn invariance_check(
    obj: &Objective,
    x0: &DVector<f64>,
    b0: &PDMatrix,
    t: &DMatrix<f64>,
    config: &SolverConfig,
    k_max: usize,
    tol: f64,
) -> Result<InvarianceReport> {
    let transformed = transform_problem(obj, t)?;
    let t_inv = t.clone().try_inverse().ok_or(Error::SingularTransform(f64::INFINITY))?;
    let b0t = PDMatrix::new(t_inv.transpose() * b0.matrix() * &t_inv)?;
    let x0t = t * x0;
    let mut cfg = config.clone();
    cfg.max_iter = k_max.max(1);
    cfg.record_hessians = true;
    let a = minimize(obj, x0, b0, &cfg)?;
    let b = minimize(&transformed, &x0t, &b0t, &cfg)?;
    let compared = a.records.len().min(b.records.len());
    let mut x_dev: f64 = 0.0;
    let mut h_dev: f64 = 0.0;
    for (ra, rb) in a.records.iter().zip(&b.records).take(compared) {
        x_dev = x_dev.max((&rb.x - t * &ra.x).norm() / (1.0 + ra.x.norm()));
        if let (Some(ha), Some(hb)) = (&ra.hessian, &rb.hessian) {
            h_dev = h_dev.max((t.transpose() * hb * t - ha).norm() / (1.0 + ha.norm()));
        }
    }
    Ok(InvarianceReport {
        x_deviation: x_dev,
        hessian_deviation: h_dev,
        compared,
        tol,
        invariant: x_dev <= tol && h_dev <= tol,
    })
}
