//! Comparator estimators: the maximum-likelihood fixed effects of a stacked
//! mixed model with batch-specific random slopes, plain ridge and OLS.
//!
//! The mixed model pools all batches up to `t`:
//! `𝕐 = 𝕏β + ℤ𝔾 + 𝕖` with `ℤ` block-diagonal in the batch designs,
//! `γ_τ ~ N(0, σ_γ²I)` and `ε ~ N(0, σ_ε²I)`. Given `ξ = σ_γ²/σ_ε²` the fixed
//! effects are the GLS estimate
//! `[𝕏⊤(ξℤℤ⊤ + I)⁻¹𝕏]⁻¹ 𝕏⊤(ξℤℤ⊤ + I)⁻¹𝕐`.
//!
//! A linear Gaussian state-space model with a random-walk-free state
//! `β_t = β + δ_t` has the same ML estimator of `β`, so it needs no separate
//! implementation.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{validation, Error, Result};
use crate::linalg::{penalized_gram, spd_factor};
use crate::linear::{fit_targeted_ridge, LinearFit, MomentReport};
use crate::model::{align_batch, Batch, CovariateRegistry};
use crate::tuning::log_grid;

/// Batches stacked row-wise. The random-effect design `ℤ` is implied by the
/// batch boundaries and only materialised on request.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub boundaries: Vec<Range<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    /// Woodbury when `t·p < ñ_t`, else direct.
    Auto,
    /// `(I + ξXX⊤)⁻¹ = I − ξX(I + ξX⊤X)⁻¹X⊤` per block.
    Woodbury,
    /// Dense Cholesky of each `n_τ × n_τ` block.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedFit {
    pub fixed_effects: DVector<f64>,
    pub xi: f64,
    pub sigma_eps_sq: f64,
    pub sigma_gamma_sq: f64,
    pub profile_loglik: f64,
}

impl StackedData {
    pub fn new(blocks: &[(DMatrix<f64>, DVector<f64>)]) -> Result<Self> {
        let Some(p) = blocks.first().map(|(x, _)| x.ncols()) else {
            return validation("no batches to stack");
        };
        if blocks.iter().any(|(x, y)| x.ncols() != p || x.nrows() != y.len()) {
            return validation("stacked blocks must share columns and match responses");
        }
        let total: usize = blocks.iter().map(|(_, y)| y.len()).sum();
        let mut x = DMatrix::zeros(total, p);
        let mut y = DVector::zeros(total);
        let mut boundaries = Vec::with_capacity(blocks.len());
        let mut start = 0;
        for (xb, yb) in blocks {
            let n = yb.len();
            x.rows_mut(start, n).copy_from(xb);
            y.rows_mut(start, n).copy_from(yb);
            boundaries.push(start..start + n);
            start += n;
        }
        Ok(Self { y, x, boundaries })
    }

    /// Stacks batches after aligning them onto `registry`.
    pub fn from_batches(batches: &[Batch], registry: &CovariateRegistry) -> Result<Self> {
        let blocks = batches
            .iter()
            .map(|b| Ok((align_batch(b, registry)?, b.y().clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&blocks)
    }

    pub fn n_total(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_batches(&self) -> usize {
        self.boundaries.len()
    }

    fn block(&self, i: usize) -> (DMatrix<f64>, DVector<f64>) {
        let r = &self.boundaries[i];
        (
            self.x.rows(r.start, r.len()).into_owned(),
            self.y.rows(r.start, r.len()).into_owned(),
        )
    }

    /// The dense `ñ × tp` block-diagonal random-effect design.
    pub fn z_block(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut z = DMatrix::zeros(self.n_total(), p * self.n_batches());
        for (i, r) in self.boundaries.iter().enumerate() {
            z.view_mut((r.start, i * p), (r.len(), p))
                .copy_from(&self.x.rows(r.start, r.len()));
        }
        z
    }

    fn use_woodbury(&self, path: SolvePath) -> bool {
        match path {
            SolvePath::Woodbury => true,
            SolvePath::Direct => false,
            SolvePath::Auto => self.n_batches() * self.p() < self.n_total(),
        }
    }

    /// `V_τ⁻¹ M` for block `τ`, `V_τ = I + ξX_τX_τ⊤`.
    fn apply_inverse(&self, x: &DMatrix<f64>, xi: f64, m: &DMatrix<f64>, woodbury: bool) -> Result<DMatrix<f64>> {
        if woodbury {
            let inner = penalized_gram(&(x * xi.sqrt()), 1.0);
            let s = spd_factor(&inner, "I + xi X'X")?;
            let xtm = x.tr_mul(m);
            Ok(m - x * s.solve(&xtm) * xi)
        } else {
            let mut v = x * x.transpose() * xi;
            for i in 0..v.nrows() {
                v[(i, i)] += 1.0;
            }
            Ok(spd_factor(&v, "I + xi X X'")?.solve(m))
        }
    }
}

struct GlsParts {
    /// `𝕏⊤V⁻¹𝕏`
    info: DMatrix<f64>,
    /// `𝕏⊤V⁻¹𝕐`
    score: DVector<f64>,
}

fn gls_parts(data: &StackedData, xi: f64, path: SolvePath) -> Result<GlsParts> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return validation("xi must be finite and non-negative");
    }
    let p = data.p();
    let woodbury = data.use_woodbury(path);
    let mut info = DMatrix::zeros(p, p);
    let mut score = DVector::zeros(p);
    for i in 0..data.n_batches() {
        let (x, y) = data.block(i);
        let mut rhs = DMatrix::zeros(y.len(), p + 1);
        rhs.columns_mut(0, p).copy_from(&x);
        rhs.set_column(p, &y);
        let solved = data.apply_inverse(&x, xi, &rhs, woodbury)?;
        info += x.tr_mul(&solved.columns(0, p));
        score += x.tr_mul(&solved.column(p));
    }
    info = (&info + info.transpose()) * 0.5;
    Ok(GlsParts { info, score })
}

/// ML fixed effects of the stacked mixed model for a given variance ratio.
pub fn mixed_fixed_effects(data: &StackedData, xi: f64) -> Result<DVector<f64>> {
    mixed_fixed_effects_with(data, xi, SolvePath::Auto)
}

pub fn mixed_fixed_effects_with(data: &StackedData, xi: f64, path: SolvePath) -> Result<DVector<f64>> {
    let parts = gls_parts(data, xi, path)?;
    Ok(spd_factor(&parts.info, "X'V^-1 X")?.solve(&parts.score))
}

/// Mean and covariance of the mixed-model fixed-effects estimator when the
/// data follow the mixed model with fixed effects `beta`.
pub fn mixed_moments(
    data: &StackedData,
    beta: &DVector<f64>,
    xi: f64,
    sigma_eps_sq: f64,
    sigma_gamma_sq: f64,
) -> Result<MomentReport> {
    if beta.len() != data.p() {
        return validation("beta length differs from column count");
    }
    if !(sigma_eps_sq >= 0.0) || !(sigma_gamma_sq >= 0.0) {
        return validation("variances must be non-negative");
    }
    let p = data.p();
    let woodbury = data.use_woodbury(SolvePath::Auto);
    let mut info = DMatrix::zeros(p, p);
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..data.n_batches() {
        let (x, _) = data.block(i);
        // Q = V⁻¹X
        let q = data.apply_inverse(&x, xi, &x, woodbury)?;
        info += x.tr_mul(&q);
        let xtq = x.tr_mul(&q);
        meat += q.tr_mul(&q) * sigma_eps_sq + xtq.transpose() * &xtq * sigma_gamma_sq;
    }
    let chol = spd_factor(&((&info + info.transpose()) * 0.5), "X'V^-1 X")?;
    let mean = chol.solve(&(&info * beta));
    let left = chol.solve(&meat);
    let covariance = chol.solve(&left.transpose());
    let covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(MomentReport {
        mean,
        covariance,
        sigma_sq: sigma_eps_sq,
    })
}

/// Profiled Gaussian log-likelihood at `xi`, up to an additive constant,
/// together with the fixed effects and `σ̂_ε²`.
fn profile(data: &StackedData, xi: f64) -> Result<(f64, DVector<f64>, f64)> {
    let beta = mixed_fixed_effects(data, xi)?;
    let resid = &data.y - &data.x * &beta;
    let woodbury = data.use_woodbury(SolvePath::Auto);
    let mut quad = 0.0;
    let mut logdet = 0.0;
    for (i, r) in data.boundaries.iter().enumerate() {
        let (x, _) = data.block(i);
        let rb = DMatrix::from_column_slice(r.len(), 1, resid.rows(r.start, r.len()).as_slice());
        let solved = data.apply_inverse(&x, xi, &rb, woodbury)?;
        quad += rb.column(0).dot(&solved.column(0));
        // |I_n + ξXX⊤| = |I_p + ξX⊤X|
        let inner = penalized_gram(&(&x * xi.sqrt()), 1.0);
        let l = spd_factor(&inner, "I + xi X'X")?;
        logdet += 2.0 * l.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    }
    let n = data.n_total() as f64;
    let sigma_sq = quad / n;
    if !(sigma_sq > 0.0) {
        return Err(Error::Estimation("zero residual variance".into()));
    }
    let ll = -0.5 * (n * sigma_sq.ln() + logdet + n);
    Ok((ll, beta, sigma_sq))
}

/// Default ξ search grid: 25 log-spaced points from 1e−4 to 1e4.
pub fn default_xi_grid() -> Vec<f64> {
    log_grid(1e-4, 1e4, 25)
}

/// Variance ratio by grid maximisation of the profiled likelihood.
pub fn estimate_xi(data: &StackedData, grid: &[f64]) -> Result<MixedFit> {
    if data.n_total() <= data.p() {
        return Err(Error::Estimation(
            "accumulated sample size must exceed the covariate count".into(),
        ));
    }
    if grid.is_empty() {
        return validation("empty xi grid");
    }
    let mut best: Option<MixedFit> = None;
    for &xi in grid {
        let (ll, beta, s2) = match profile(data, xi) {
            Ok(v) => v,
            Err(Error::Singular(_)) | Err(Error::Estimation(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().map_or(true, |b| ll > b.profile_loglik) {
            best = Some(MixedFit {
                fixed_effects: beta,
                xi,
                sigma_eps_sq: s2,
                sigma_gamma_sq: xi * s2,
                profile_loglik: ll,
            });
        }
    }
    best.ok_or_else(|| Error::Estimation("mixed model singular at every grid point".into()))
}

/// Zero-target ridge.
pub fn plain_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<LinearFit> {
    fit_targeted_ridge(x, y, lambda, &DVector::zeros(x.ncols()))
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearFit> {
    plain_ridge(x, y, 0.0)
}

/// Penalties `σ_ε(σ_ε² + σ_γ²)^{−1/2} 2^{t/2} T^{1/2} · factor`, `t = 1..=T`.
pub fn mse_bound_lambdas(horizon: usize, sigma_eps_sq: f64, sigma_gamma_sq: f64, factor: f64) -> Vec<f64> {
    let base = (sigma_eps_sq / (sigma_eps_sq + sigma_gamma_sq)).sqrt() * (horizon as f64).sqrt();
    (1..=horizon)
        .map(|t| base * 2f64.powf(t as f64 / 2.0) * factor)
        .collect()
}

/// Exact MSEs at `T` for orthonormal designs under the mixed model, with
/// the update chain started at the mixed estimate of the first batch and
/// run with `lambdas[1..]`.
///
/// Both estimators are weighted averages `Σ w_t b_t` of the per-batch OLS
/// estimates `b_t`, each unbiased with covariance `(σ_ε² + σ_γ²)I`. The
/// mixed estimator uses equal weights; the chain uses
/// `w_t = (1+λ_t)⁻¹ Π_{s>t} λ_s(1+λ_s)⁻¹` (and `w_1 = Π_{s>1} λ_s(1+λ_s)⁻¹`).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalMse {
    pub updated: f64,
    pub mixed: f64,
    pub weights: Vec<f64>,
}

pub fn orthonormal_mse_comparison(
    lambdas: &[f64],
    p: usize,
    sigma_eps_sq: f64,
    sigma_gamma_sq: f64,
) -> OrthonormalMse {
    let horizon = lambdas.len();
    let mut weights = vec![0.0; horizon];
    let mut carry = 1.0;
    for t in (0..horizon).rev() {
        if t == 0 {
            weights[0] = carry;
        } else {
            weights[t] = carry / (1.0 + lambdas[t]);
            carry *= lambdas[t] / (1.0 + lambdas[t]);
        }
    }
    let per = p as f64 * (sigma_eps_sq + sigma_gamma_sq);
    OrthonormalMse {
        updated: per * weights.iter().map(|w| w * w).sum::<f64>(),
        mixed: per / horizon as f64,
        weights,
    }
}
