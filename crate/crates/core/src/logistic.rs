//! Targeted ridge logistic regression fitted by iteratively re-weighted
//! least squares.
//!
//! The estimate solves `X⊤(y − μ(β)) − λ(β − β₀) = 0`, i.e. it maximises
//! `ℓ(β) − ½λ‖β − β₀‖²`. Note the ½: the penalty is scaled so that its
//! gradient is exactly `λ(β − β₀)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{validation, Error, Result};
use crate::linalg::{all_finite, max_abs, spd_factor};
use crate::model::{
    align_batch, assemble_target, Batch, CoefficientVector, EstimatorState, Family, HistoryRecord,
};
use crate::tuning::SelectionReport;

/// Lower clamp for IRLS working weights.
pub const WEIGHT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsConfig {
    /// Relative tolerance on the estimating-equation residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximum step halvings per iteration.
    pub step_halving: usize,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            step_halving: 20,
        }
    }
}

impl IrlsConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return validation("IRLS needs tol > 0 and max_iter >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: DVector<f64>,
    pub lambda: f64,
    pub target_used: DVector<f64>,
    /// Accepted IRLS iterations.
    pub iterations: usize,
    /// Max-abs estimating-equation residual divided by its natural scale.
    pub final_gradient_norm: f64,
    /// Unscaled max-abs estimating-equation residual.
    pub raw_gradient_norm: f64,
    /// Penalised log-likelihood at the solution.
    pub loglik: f64,
    /// Penalised log-likelihood of the start and of every accepted iterate.
    pub objective_trace: Vec<f64>,
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^η) without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn check(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() || x.ncols() != beta.len() {
        return validation("inconsistent dimensions");
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return validation("logistic response must be 0 or 1");
    }
    if !all_finite(x.iter().chain(beta.iter())) {
        return validation("non-finite input");
    }
    Ok(())
}

/// `Σ yᵢxᵢ⊤β − log(1 + exp(xᵢ⊤β))`
pub fn logistic_loglik(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> Result<f64> {
    check(x, y, beta)?;
    Ok(loglik_unchecked(x, y, beta))
}

fn loglik_unchecked(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(&e, &yi)| yi * e - softplus(e)).sum()
}

fn penalized(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64, target: &DVector<f64>) -> f64 {
    loglik_unchecked(x, y, beta) - 0.5 * lambda * (beta - target).norm_squared()
}

/// Penalised log-likelihood `ℓ(β) − ½λ‖β − β₀‖²`.
pub fn penalized_loglik(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
) -> Result<f64> {
    check(x, y, beta)?;
    if target.len() != beta.len() {
        return validation("target length differs from column count");
    }
    Ok(penalized(x, y, beta, lambda, target))
}

/// `X⊤(y − μ(β)) − λ(β − β₀)`
pub fn estimating_equation(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
) -> Result<DVector<f64>> {
    check(x, y, beta)?;
    if target.len() != beta.len() || !(lambda >= 0.0) {
        return validation("bad target length or negative penalty");
    }
    Ok(ee_unchecked(x, y, beta, lambda, target))
}

fn ee_unchecked(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64, target: &DVector<f64>) -> DVector<f64> {
    let mu = (x * beta).map(sigmoid);
    x.tr_mul(&(y - mu)) - (beta - target) * lambda
}

/// Scale against which the estimating-equation residual is judged.
fn residual_scale(x: &DMatrix<f64>, beta: &DVector<f64>, lambda: f64, target: &DVector<f64>) -> f64 {
    let col_mass = x
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    1.0f64
        .max(col_mass)
        .max(lambda * max_abs(beta).max(max_abs(target)))
}

/// One application of the IRLS map
/// `(X⊤WX + λI)⁻¹(X⊤WZ + λβ₀)` with `W`, `Z` evaluated at `beta`.
pub fn irls_map(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
) -> Result<DVector<f64>> {
    check(x, y, beta)?;
    let eta = x * beta;
    let mu = eta.map(sigmoid);
    let w = mu.map(|m| (m * (1.0 - m)).max(WEIGHT_FLOOR));
    let z = DVector::from_fn(y.len(), |i, _| eta[i] + (y[i] - mu[i]) / w[i]);
    let a = weighted_system(x, &w, lambda);
    let wz = z.component_mul(&w);
    spd_factor(&a, "X'WX + lambda I").map(|c| c.solve(&(x.tr_mul(&wz) + target * lambda)))
}

fn weighted_system(x: &DMatrix<f64>, w: &DVector<f64>, lambda: f64) -> DMatrix<f64> {
    let mut wx = x.clone();
    for (i, mut row) in wx.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let mut a = x.tr_mul(&wx);
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    a
}

/// Fits the targeted ridge logistic model, starting from the target.
///
/// Each iteration takes the IRLS step in its Newton form and halves it
/// until the penalised log-likelihood does not decrease. Convergence is
/// declared on the estimating equation itself.
pub fn irls_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
    config: &IrlsConfig,
) -> Result<LogisticFit> {
    config.validate()?;
    check(x, y, target)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return validation("IRLS needs a positive finite penalty");
    }
    let mut beta = target.clone();
    let mut obj = penalized(x, y, &beta, lambda, target);
    let mut trace = vec![obj];
    let mut iterations = 0;
    loop {
        let grad = ee_unchecked(x, y, &beta, lambda, target);
        let raw = max_abs(&grad);
        let scaled = raw / residual_scale(x, &beta, lambda, target);
        if scaled <= config.tol {
            return Ok(LogisticFit {
                coefficients: beta,
                lambda,
                target_used: target.clone(),
                iterations,
                final_gradient_norm: scaled,
                raw_gradient_norm: raw,
                loglik: obj,
                objective_trace: trace,
            });
        }
        if iterations >= config.max_iter {
            return Err(Error::Convergence {
                iterations,
                gradient_norm: scaled,
                last_iterate: beta.iter().copied().collect(),
            });
        }
        let mu = (x * &beta).map(sigmoid);
        let w = mu.map(|m| (m * (1.0 - m)).max(WEIGHT_FLOOR));
        let step = spd_factor(&weighted_system(x, &w, lambda), "X'WX + lambda I")?.solve(&grad);

        let slack = 4.0 * f64::EPSILON * (obj.abs() + 1.0);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=config.step_halving {
            let cand = &beta + &step * scale;
            let cand_obj = penalized(x, y, &cand, lambda, target);
            if cand_obj.is_finite() && cand_obj >= obj - slack {
                accepted = Some((cand, cand_obj));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((cand, cand_obj)) => {
                beta = cand;
                obj = cand_obj;
                trace.push(obj);
                iterations += 1;
            }
            None => {
                return Err(Error::Convergence {
                    iterations,
                    gradient_norm: scaled,
                    last_iterate: beta.iter().copied().collect(),
                })
            }
        }
    }
}

/// One logistic update step at a fixed penalty with the element-wise target.
pub fn update_logistic(
    state: &EstimatorState,
    batch: &Batch,
    lambda: f64,
    config: &IrlsConfig,
) -> Result<EstimatorState> {
    let registry = state.registry.register(batch.covariates());
    let mut widened = state.clone();
    widened.registry = registry.clone();
    let target = assemble_target(&widened, registry.names(), &widened.fallback())?;
    update_logistic_with_target(state, batch, lambda, &target, config, None, None)
}

pub fn update_logistic_with_target(
    state: &EstimatorState,
    batch: &Batch,
    lambda: f64,
    target: &CoefficientVector,
    config: &IrlsConfig,
    weights: Option<Vec<f64>>,
    diagnostics: Option<SelectionReport>,
) -> Result<EstimatorState> {
    if batch.family() != Family::Logistic || state.family != Family::Logistic {
        return validation("logistic update needs a logistic state and batch");
    }
    let registry = state.registry.register(batch.covariates());
    let x = align_batch(batch, &registry)?;
    let beta0 = target.to_dense_strict(&registry)?;
    let fit = irls_fit(&x, batch.y(), lambda, &beta0, config)?;
    let record = HistoryRecord {
        t: batch.t(),
        lambda,
        weights,
        estimate: CoefficientVector::from_dense(&registry, &fit.coefficients)?,
        diagnostics,
    };
    state.advance(batch.clone(), record)
}
