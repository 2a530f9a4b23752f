//! Targeted ridge regression for the linear model.
//!
//! The estimator minimises `‖y − Xβ‖² + λ‖β − β₀‖²`, which has the closed
//! form `β̂ = (X⊤X + λI)⁻¹(X⊤y + λβ₀)`. Sequential updating feeds the previous
//! estimate back in as `β₀`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::linalg::{all_finite, penalized_gram, spd_factor};
use crate::model::{
    align_batch, assemble_target, check_simplex, Batch, CoefficientVector, EstimatorState, Family,
    HistoryRecord,
};
use crate::tuning::SelectionReport;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: DVector<f64>,
    pub lambda: f64,
    pub target_used: DVector<f64>,
    /// Sum of squared residuals on the fitting data.
    pub residual_sse: f64,
}

/// Mean and covariance of an estimator under the Gaussian linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub sigma_sq: f64,
}

fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, target: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return validation("design rows and response length differ");
    }
    if target.len() != x.ncols() {
        return validation("target length differs from column count");
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return validation("penalty must be finite and non-negative");
    }
    if !all_finite(x.iter().chain(y.iter()).chain(target.iter())) {
        return validation("non-finite input");
    }
    Ok(())
}

/// Closed-form targeted ridge estimate. `lambda = 0` requires a nonsingular
/// Gram matrix.
pub fn fit_targeted_ridge(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
) -> Result<LinearFit> {
    check_inputs(x, y, lambda, target)?;
    let a = penalized_gram(x, lambda);
    let rhs = x.tr_mul(y) + target * lambda;
    let coefficients = spd_factor(&a, "X'X + lambda I")?.solve(&rhs);
    let residual_sse = (y - x * &coefficients).norm_squared();
    Ok(LinearFit {
        coefficients,
        lambda,
        target_used: target.clone(),
        residual_sse,
    })
}

/// Targeted ridge with the weighted average of several targets.
pub fn fit_targeted_ridge_mixture(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    targets: &[DVector<f64>],
    weights: &[f64],
) -> Result<LinearFit> {
    if targets.is_empty() || targets.len() != weights.len() {
        return validation("one weight per target required");
    }
    check_simplex(weights)?;
    let mut combined = DVector::zeros(x.ncols());
    for (t, &w) in targets.iter().zip(weights) {
        if t.len() != x.ncols() {
            return validation("target length differs from column count");
        }
        combined.axpy(w, t, 1.0);
    }
    fit_targeted_ridge(x, y, lambda, &combined)
}

/// Gradient of the targeted ridge loss at `beta`.
pub fn loss_gradient(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
    beta: &DVector<f64>,
) -> DVector<f64> {
    (penalized_gram(x, lambda) * beta - x.tr_mul(y) - target * lambda) * 2.0
}

/// Residual variance estimate `SSE / (n − df)` with `df = tr(hat matrix)`.
pub fn residual_variance(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
) -> Result<f64> {
    let fit = fit_targeted_ridge(x, y, lambda, target)?;
    let a = penalized_gram(x, lambda);
    let gram = x.tr_mul(x);
    let df = spd_factor(&a, "X'X + lambda I")?.solve(&gram).trace();
    let dof = x.nrows() as f64 - df;
    if dof <= 0.0 {
        return validation("no residual degrees of freedom");
    }
    Ok(fit.residual_sse / dof)
}

/// One linear update step at a fixed penalty. The target is assembled
/// element-wise from the state's history.
pub fn update(state: &EstimatorState, batch: &Batch, lambda: f64) -> Result<EstimatorState> {
    let registry = state.registry.register(batch.covariates());
    let mut widened = state.clone();
    widened.registry = registry.clone();
    let target = assemble_target(&widened, registry.names(), &widened.fallback())?;
    update_with_target(state, batch, lambda, &target, None, None)
}

/// Update step with an explicit target, recording optional weights and
/// selection diagnostics.
pub fn update_with_target(
    state: &EstimatorState,
    batch: &Batch,
    lambda: f64,
    target: &CoefficientVector,
    weights: Option<Vec<f64>>,
    diagnostics: Option<SelectionReport>,
) -> Result<EstimatorState> {
    if batch.family() != Family::Linear || state.family != Family::Linear {
        return validation("linear update needs a linear state and batch");
    }
    if !(lambda > 0.0) {
        return validation("update penalty must be positive");
    }
    let registry = state.registry.register(batch.covariates());
    let x = align_batch(batch, &registry)?;
    let beta0 = target.to_dense_strict(&registry)?;
    let fit = fit_targeted_ridge(&x, batch.y(), lambda, &beta0)?;
    let record = HistoryRecord {
        t: batch.t(),
        lambda,
        weights,
        estimate: CoefficientVector::from_dense(&registry, &fit.coefficients)?,
        diagnostics,
    };
    state.advance(batch.clone(), record)
}

/// Moments after `t` updates with a common orthonormal design and penalty.
///
/// With `a = λ/(1+λ)` the mean is `β + aᵗ(β₀ − β)` and the covariance is
/// `σ²(1 − a²ᵗ)/(1 + 2λ)·I`, the solution of `V_t = a²V_{t−1} + σ²/(1+λ)²`.
/// The covariance tends to `σ²/(1 + 2λ)·I`, below the OLS variance.
pub fn exact_moments_orthonormal(
    beta: &DVector<f64>,
    beta0: &DVector<f64>,
    lambda: f64,
    t: u32,
    sigma_sq: f64,
) -> Result<MomentReport> {
    if beta.len() != beta0.len() {
        return validation("beta and beta0 differ in length");
    }
    if !(lambda > 0.0) || t == 0 || !(sigma_sq >= 0.0) {
        return validation("need lambda > 0, t >= 1, sigma_sq >= 0");
    }
    let shrink = (lambda / (1.0 + lambda)).powi(t as i32);
    let mean = beta + (beta0 - beta) * shrink;
    let p = beta.len();
    let covariance =
        DMatrix::identity(p, p) * (sigma_sq * (1.0 - shrink * shrink) / (1.0 + 2.0 * lambda));
    Ok(MomentReport {
        mean,
        covariance,
        sigma_sq,
    })
}

/// Exact moments of the `t`-step update chain for arbitrary designs and
/// nonrandom penalties.
///
/// With `M_τ = (X_τ⊤X_τ + λ_τI)⁻¹` and `A_τ = λ_τ M_τ`, the chain is
/// `β̂_τ = A_τ β̂_{τ−1} + M_τ X_τ⊤Y_τ`. Writing `P_h = A_t ⋯ A_{h+1}`
/// (identity when `h = t`):
///
/// ```text
/// E  = P_0 β₀ + Σ_h (P_h − P_{h−1}) β
/// Var = σ² Σ_h P_h M_h X_h⊤X_h M_h P_h⊤
/// ```
pub fn exact_moments_general(
    designs: &[DMatrix<f64>],
    lambdas: &[f64],
    beta: &DVector<f64>,
    beta0: &DVector<f64>,
    sigma_sq: f64,
) -> Result<MomentReport> {
    if designs.is_empty() || designs.len() != lambdas.len() {
        return validation("need one penalty per design and at least one design");
    }
    let p = beta.len();
    if beta0.len() != p || designs.iter().any(|x| x.ncols() != p) {
        return validation("designs, beta and beta0 must share the covariate count");
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) || !(sigma_sq >= 0.0) {
        return validation("penalties must be positive and sigma_sq non-negative");
    }
    let t = designs.len();
    let grams: Vec<DMatrix<f64>> = designs.iter().map(|x| x.tr_mul(x)).collect();
    let inverses = grams
        .iter()
        .zip(lambdas)
        .map(|(g, &l)| {
            let mut a = g.clone();
            for i in 0..p {
                a[(i, i)] += l;
            }
            Ok(spd_factor(&a, "X'X + lambda I")?.inverse())
        })
        .collect::<Result<Vec<_>>>()?;

    // suffix[h] = A_t ⋯ A_{h+1} for h = 0..=t (1-based time, h = t gives I)
    let mut suffix = vec![DMatrix::identity(p, p); t + 1];
    for h in (0..t).rev() {
        suffix[h] = &suffix[h + 1] * (&inverses[h] * lambdas[h]);
    }

    let mut mean = &suffix[0] * beta0;
    let mut covariance = DMatrix::zeros(p, p);
    for h in 1..=t {
        mean += (&suffix[h] - &suffix[h - 1]) * beta;
        let m = &inverses[h - 1];
        let core = m * &grams[h - 1] * m;
        covariance += &suffix[h] * core * suffix[h].transpose() * sigma_sq;
    }
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(MomentReport {
        mean,
        covariance,
        sigma_sq,
    })
}
