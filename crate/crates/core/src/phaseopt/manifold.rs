//! Complex circle manifold `{x : |x_m| = 1}` and Armijo descent on it.

use crate::error::{Error, Result};
use crate::matrixkit::CVec;

/// Entries smaller than this cannot be normalized.
pub const RETRACTION_FLOOR: f64 = 1e-300;

/// Projects `g` onto the tangent space at `x`: `g - Re{g ∘ x*} ∘ x`.
pub fn tangent_project(g: &CVec, x: &CVec) -> Result<CVec> {
    if g.len() != x.len() {
        return Err(Error::ShapeMismatch(format!("gradient {} vs point {}", g.len(), x.len())));
    }
    Ok(CVec::from_iterator(
        g.len(),
        g.iter().zip(x.iter()).map(|(gm, xm)| gm - xm * (gm * xm.conj()).re),
    ))
}

/// Element-wise normalization back onto the manifold.
///
/// Entries already unit modulus to within a few ulps are kept bit-for-bit,
/// which makes the map exactly idempotent.
pub fn retract(x: &CVec) -> Result<CVec> {
    if let Some(m) = x.iter().position(|z| !(z.norm() >= RETRACTION_FLOOR)) {
        return Err(Error::RetractionSingularity(m));
    }
    Ok(x.map(|z| {
        let n = z.norm();
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            z
        } else {
            z / n
        }
    }))
}

/// Armijo line-search parameters and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    /// Stop once `|f_old - f_new| / max(|f_old|, tiny)` drops below this.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Riemannian gradient norm regarded as stationary.
    pub grad_tol: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            armijo_c: 1e-4,
            max_backtracks: 30,
            rel_tol: 1e-6,
            max_iters: 500,
            grad_tol: 1e-12,
        }
    }
}

/// One accepted (or initial) iterate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f_value: f64,
    pub step_size: f64,
    pub grad_norm: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub x: CVec,
    pub f: f64,
    /// Row 0 is the starting point; one row per accepted step after that.
    pub trace: Vec<TraceRow>,
}

impl DescentResult {
    pub fn accepted_steps(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Riemannian gradient descent with Armijo backtracking from `x0`.
///
/// `f` evaluates the objective, `grad` its Euclidean gradient (conjugate
/// convention: `d/dRe + j d/dIm`). Every accepted step satisfies the Armijo
/// condition, so the trace is non-increasing.
pub fn descend(
    x0: CVec,
    f: impl Fn(&CVec) -> f64,
    grad: impl Fn(&CVec) -> CVec,
    opts: &DescentOptions,
) -> Result<DescentResult> {
    let mut x = retract(&x0)?;
    let mut fx = f(&x);
    let mut rg = tangent_project(&grad(&x), &x)?;
    let mut trace = vec![TraceRow { iter: 0, f_value: fx, step_size: 0.0, grad_norm: rg.norm(), backtracks: 0 }];
    for iter in 1..=opts.max_iters {
        let gn2 = rg.norm_squared();
        if gn2.sqrt() <= opts.grad_tol {
            break;
        }
        let mut step = opts.initial_step;
        let mut accepted = None;
        for bt in 0..=opts.max_backtracks {
            if let Ok(cand) = retract(&(&x - &rg * num_complex::Complex64::new(step, 0.0))) {
                let fc = f(&cand);
                if fc <= fx - opts.armijo_c * step * gn2 {
                    accepted = Some((cand, fc, bt));
                    break;
                }
            }
            step *= opts.shrink;
        }
        let Some((cand, fc, bt)) = accepted else { break };
        let rel = (fx - fc).abs() / fx.abs().max(f64::MIN_POSITIVE);
        x = cand;
        fx = fc;
        rg = tangent_project(&grad(&x), &x)?;
        trace.push(TraceRow { iter, f_value: fx, step_size: step, grad_norm: rg.norm(), backtracks: bt });
        if rel < opts.rel_tol {
            break;
        }
    }
    Ok(DescentResult { x, f: fx, trace })
}
