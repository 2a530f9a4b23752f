//! Penalty selection by K-fold cross-validation, optionally restricted to
//! penalties that keep the fit on earlier batches from deteriorating.
//!
//! A candidate `(λ, α)` is feasible when
//!
//! ```text
//! (1 − f_t) · K⁻¹ Σ_k Σ_{τ<t} L(Y_τ, X_τ β̂_t^(−k)) ≤ Σ_{τ<t} L(Y_τ, X_τ β̂_{t−1})
//! ```
//!
//! where `L` is the squared error (linear) or the negative log-likelihood
//! (logistic) and `f_t = n_t / Σ_{τ≤t} n_τ`. Because the fold estimators tend
//! to the target as `λ → ∞` and `1 − f_t < 1`, large penalties are always
//! feasible. The search runs over a finite grid; a barrier method is not used.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::linalg::{penalized_gram, select_rows, spd_factor};
use crate::linear::{fit_targeted_ridge, update_with_target};
use crate::logistic::{irls_fit, logistic_loglik, update_logistic_with_target, IrlsConfig};
use crate::model::{
    align_batch, assemble_target, mixture_target, Batch, CoefficientVector, CovariateRegistry,
    EstimatorState, Family, TargetSpec, TargetWeights,
};

/// Relative slack within which two CV scores count as tied.
const TIE_RTOL: f64 = 1e-12;

/// Fold label per sample, `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    assignments: Vec<usize>,
    k: usize,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Shuffled fold assignment; with `strata`, each stratum is dealt across the
/// folds in turn so every fold receives an even share of each label.
pub fn make_folds(n: usize, k: usize, seed: u64, strata: Option<&[u32]>) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return validation(format!("need 2 <= K <= n, got K = {k}, n = {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match strata {
        None => vec![(0..n).collect()],
        Some(labels) => {
            if labels.len() != n {
                return validation("one stratum label per sample required");
            }
            let mut distinct: Vec<u32> = labels.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            distinct
                .iter()
                .map(|&l| (0..n).filter(|&i| labels[i] == l).collect())
                .collect()
        }
    };
    let mut assignments = vec![0; n];
    let mut dealt = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            assignments[i] = dealt % k;
            dealt += 1;
        }
    }
    Ok(FoldPlan { assignments, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldCount {
    K(usize),
    LeaveOneOut,
}

impl FoldCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            FoldCount::K(k) => k,
            FoldCount::LeaveOneOut => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySearchConfig {
    /// Strictly increasing positive candidates.
    pub grid: Vec<f64>,
    pub folds: FoldCount,
    pub constrained: bool,
    /// Lattice step for tuned mixture weights.
    pub weight_step: f64,
    pub seed: u64,
    pub irls: IrlsConfig,
}

impl Default for PenaltySearchConfig {
    fn default() -> Self {
        Self {
            grid: log_grid(1e-4, 1e6, 50),
            folds: FoldCount::K(5),
            constrained: true,
            weight_step: 0.1,
            seed: 0,
            irls: IrlsConfig::default(),
        }
    }
}

impl PenaltySearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return validation("penalty grid is empty");
        }
        if self.grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return validation("penalty grid must be positive and finite");
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return validation("penalty grid must be strictly increasing");
        }
        if let FoldCount::K(k) = self.folds {
            if k < 2 {
                return validation("need at least two folds");
            }
        }
        let steps = 1.0 / self.weight_step;
        if !(self.weight_step > 0.0 && self.weight_step <= 1.0) || (steps - steps.round()).abs() > 1e-9 {
            return validation("weight step must divide 1");
        }
        Ok(())
    }
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (points - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// All weight vectors on the simplex lattice with the given step, in
/// lexicographic order of their integer compositions.
pub fn simplex_lattice(groups: usize, step: f64) -> Vec<Vec<f64>> {
    let total = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    let mut current = vec![0usize; groups];
    fn rec(pos: usize, left: usize, current: &mut Vec<usize>, total: usize, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == current.len() {
            current[pos] = left;
            out.push(current.iter().map(|&c| c as f64 / total as f64).collect());
            return;
        }
        for c in (0..=left).rev() {
            current[pos] = c;
            rec(pos + 1, left - c, current, total, out);
        }
    }
    if groups > 0 {
        rec(0, total, &mut current, total, &mut out);
    }
    out
}

mod nonfinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One evaluated grid candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    pub weights: Option<Vec<f64>>,
    /// Cross-validated loss; `+∞` (serialised as null) when a fold failed.
    #[serde(with = "nonfinite_as_null")]
    pub score: f64,
    pub feasible: bool,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub failed_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub chosen_lambda: f64,
    pub chosen_weights: Option<Vec<f64>>,
    pub constrained: bool,
    /// Sample-size fraction of the new batch, when the constraint applies.
    pub f_t: Option<f64>,
    pub cv_curve: Vec<CvPoint>,
    pub fallback_used: bool,
}

impl SelectionReport {
    pub fn chosen_point(&self) -> Option<&CvPoint> {
        self.cv_curve
            .iter()
            .find(|p| p.lambda == self.chosen_lambda && p.weights == self.chosen_weights)
    }
}

/// Held-out loss of a coefficient vector: squared error or minus log-likelihood.
pub fn heldout_loss(family: Family, x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> Result<f64> {
    match family {
        Family::Linear => Ok((y - x * beta).norm_squared()),
        Family::Logistic => logistic_loglik(x, y, beta).map(|l| -l),
    }
}

fn fit_dense(
    family: Family,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
    irls: &IrlsConfig,
) -> Result<DVector<f64>> {
    match family {
        Family::Linear => fit_targeted_ridge(x, y, lambda, target).map(|f| f.coefficients),
        Family::Logistic => irls_fit(x, y, lambda, target, irls).map(|f| f.coefficients),
    }
}

/// Fold-wise estimators; `None` where the fit failed to converge.
fn fold_estimates(
    family: Family,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
    folds: &FoldPlan,
    irls: &IrlsConfig,
) -> Result<Vec<Option<DVector<f64>>>> {
    if family == Family::Linear {
        if let Some(est) = linear_fold_estimates(x, y, lambda, target, folds)? {
            return Ok(est.into_iter().map(Some).collect());
        }
    }
    (0..folds.k())
        .map(|k| {
            let (xt, yt) = select_rows(x, y, &folds.train_indices(k));
            match fit_dense(family, &xt, &yt, lambda, target, irls) {
                Ok(b) => Ok(Some(b)),
                Err(Error::Convergence { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Ridge fold estimates from one full fit by the block downdate
/// `β̂^(−k) = β̂ − M X_k⊤ (I − X_k M X_k⊤)⁻¹ (y_k − X_k β̂)`, `M = (X⊤X + λI)⁻¹`.
/// `None` when a downdate system is numerically singular.
fn linear_fold_estimates(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
    folds: &FoldPlan,
) -> Result<Option<Vec<DVector<f64>>>> {
    let chol = spd_factor(&penalized_gram(x, lambda), "X'X + lambda I")?;
    let full = chol.solve(&(x.tr_mul(y) + target * lambda));
    let mut out = Vec::with_capacity(folds.k());
    for k in 0..folds.k() {
        let (xs, ys) = select_rows(x, y, &folds.test_indices(k));
        let mxt = chol.solve(&xs.transpose());
        let mut inner = -(&xs * &mxt);
        for i in 0..inner.nrows() {
            inner[(i, i)] += 1.0;
        }
        let Ok(f) = spd_factor(&inner, "I - H") else {
            return Ok(None);
        };
        out.push(&full - mxt * f.solve(&(ys - &xs * &full)));
    }
    Ok(Some(out))
}

fn score_from_estimates(
    family: Family,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: &FoldPlan,
    estimates: &[Option<DVector<f64>>],
) -> Result<f64> {
    let mut total = 0.0;
    for (k, est) in estimates.iter().enumerate() {
        let Some(beta) = est else {
            return Ok(f64::INFINITY);
        };
        let (xs, ys) = select_rows(x, y, &folds.test_indices(k));
        total += heldout_loss(family, &xs, &ys, beta)?;
    }
    Ok(total / folds.k() as f64)
}

/// Mean held-out loss over folds. A fold whose fit does not converge makes
/// the score `+∞`.
pub fn cv_score(
    family: Family,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    target: &DVector<f64>,
    folds: &FoldPlan,
    irls: &IrlsConfig,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return validation("CV penalty must be positive");
    }
    if folds.n() != y.len() {
        return validation("fold plan size differs from sample count");
    }
    let est = fold_estimates(family, x, y, lambda, target, folds, irls)?;
    score_from_estimates(family, x, y, folds, &est)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintTerms {
    pub lhs: f64,
    pub rhs: f64,
    pub f_t: f64,
}

impl ConstraintTerms {
    pub fn feasible(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Everything needed to evaluate candidates for one incoming batch.
struct SelectionContext {
    family: Family,
    registry: CovariateRegistry,
    x: DMatrix<f64>,
    y: DVector<f64>,
    folds: FoldPlan,
    historic: Vec<(DMatrix<f64>, DVector<f64>)>,
    /// `(Σ X⊤X, Σ X⊤y, Σ y⊤y)` over the historic batches, for linear losses.
    historic_moments: (DMatrix<f64>, DVector<f64>, f64),
    rhs: f64,
    f_t: f64,
    irls: IrlsConfig,
}

impl SelectionContext {
    fn new(state: &EstimatorState, batch: &Batch, folds: FoldPlan, irls: IrlsConfig) -> Result<Self> {
        if batch.family() != state.family {
            return validation("batch family differs from state family");
        }
        if folds.n() != batch.n() {
            return validation("fold plan size differs from batch size");
        }
        let registry = state.registry.register(batch.covariates());
        let x = align_batch(batch, &registry)?;
        let historic = state
            .retained
            .iter()
            .map(|b| Ok((align_batch(b, &registry)?, b.y().clone())))
            .collect::<Result<Vec<_>>>()?;
        let previous = state.current.to_dense(&registry, state.new_covariate_value);
        let rhs = historic
            .iter()
            .map(|(xh, yh)| heldout_loss(state.family, xh, yh, &previous))
            .sum::<Result<f64>>()?;
        let p = registry.len();
        let historic_moments = historic.iter().fold(
            (DMatrix::zeros(p, p), DVector::zeros(p), 0.0),
            |(g, b, c), (xh, yh)| (g + xh.tr_mul(xh), b + xh.tr_mul(yh), c + yh.norm_squared()),
        );
        let accumulated = state.retained_samples() + batch.n();
        Ok(Self {
            family: state.family,
            registry,
            x,
            y: batch.y().clone(),
            folds,
            historic,
            historic_moments,
            rhs,
            f_t: batch.n() as f64 / accumulated as f64,
            irls,
        })
    }

    fn constrained(&self) -> bool {
        !self.historic.is_empty()
    }

    fn evaluate(&self, lambda: f64, target: &DVector<f64>, weights: Option<Vec<f64>>) -> Result<CvPoint> {
        let est = fold_estimates(self.family, &self.x, &self.y, lambda, target, &self.folds, &self.irls)?;
        let score = score_from_estimates(self.family, &self.x, &self.y, &self.folds, &est)?;
        let failed_folds = est.iter().filter(|e| e.is_none()).count();
        let (lhs, feasible) = if self.constrained() && failed_folds == 0 {
            let lhs = self.lhs_from(&est)?;
            (Some(lhs), lhs <= self.rhs)
        } else {
            (None, !self.constrained())
        };
        Ok(CvPoint {
            lambda,
            weights,
            score,
            feasible,
            lhs,
            rhs: self.constrained().then_some(self.rhs),
            failed_folds,
        })
    }

    fn lhs_from(&self, est: &[Option<DVector<f64>>]) -> Result<f64> {
        let mut total = 0.0;
        let (g, b, c) = &self.historic_moments;
        for beta in est.iter().flatten() {
            match self.family {
                // ‖y − Xβ‖² summed over batches, without touching the rows
                Family::Linear => total += (c - 2.0 * beta.dot(b) + beta.dot(&(g * beta))).max(0.0),
                Family::Logistic => {
                    for (xh, yh) in &self.historic {
                        total += heldout_loss(self.family, xh, yh, beta)?;
                    }
                }
            }
        }
        Ok((1.0 - self.f_t) * total / self.folds.k() as f64)
    }
}

/// Left- and right-hand side of the historic-fit constraint. `None` when
/// there is no earlier batch, in which case the constraint is vacuous.
pub fn constraint_terms(
    state: &EstimatorState,
    batch: &Batch,
    lambda: f64,
    target: &CoefficientVector,
    folds: &FoldPlan,
    irls: &IrlsConfig,
) -> Result<Option<ConstraintTerms>> {
    let ctx = SelectionContext::new(state, batch, folds.clone(), *irls)?;
    if !ctx.constrained() {
        return Ok(None);
    }
    let target = target.to_dense_strict(&ctx.registry)?;
    let est = fold_estimates(ctx.family, &ctx.x, &ctx.y, lambda, &target, &ctx.folds, irls)?;
    if est.iter().any(Option::is_none) {
        return Err(Error::Selection(format!("fold fit failed at lambda = {lambda}")));
    }
    Ok(Some(ConstraintTerms {
        lhs: ctx.lhs_from(&est)?,
        rhs: ctx.rhs,
        f_t: ctx.f_t,
    }))
}

/// Single-target spec holding the element-wise assembled target.
pub fn default_target_spec(state: &EstimatorState, batch: &Batch) -> Result<TargetSpec> {
    let registry = state.registry.register(batch.covariates());
    let mut widened = state.clone();
    widened.registry = registry.clone();
    let target = assemble_target(&widened, registry.names(), &widened.fallback())?;
    Ok(TargetSpec::single(target))
}

/// Fold plan for a batch; logistic batches are stratified on the label.
pub fn folds_for(batch: &Batch, config: &PenaltySearchConfig) -> Result<FoldPlan> {
    let k = config.folds.resolve(batch.n());
    match batch.family() {
        Family::Linear => make_folds(batch.n(), k, config.seed, None),
        Family::Logistic => {
            let labels: Vec<u32> = batch.y().iter().map(|&v| v as u32).collect();
            make_folds(batch.n(), k, config.seed, Some(&labels))
        }
    }
}

/// Grid search over the penalty (and the mixture weights when they are to
/// be tuned). Candidates are evaluated in parallel and merged in grid order.
pub fn select_penalty(
    state: &EstimatorState,
    batch: &Batch,
    config: &PenaltySearchConfig,
    targets: &TargetSpec,
) -> Result<SelectionReport> {
    config.validate()?;
    let folds = folds_for(batch, config)?;
    let ctx = SelectionContext::new(state, batch, folds, config.irls)?;

    let candidates: Vec<(Option<Vec<f64>>, DVector<f64>)> = match &targets.weights {
        TargetWeights::Fixed(w) => {
            let t = mixture_target(targets, w)?;
            let w = (targets.len() > 1).then(|| w.clone());
            vec![(w, t.to_dense_strict(&ctx.registry)?)]
        }
        TargetWeights::Tuned => {
            if targets.len() < 2 {
                return validation("tuned weights need at least two targets");
            }
            simplex_lattice(targets.len(), config.weight_step)
                .into_iter()
                .map(|w| {
                    let t = mixture_target(targets, &w)?.to_dense_strict(&ctx.registry)?;
                    Ok((Some(w), t))
                })
                .collect::<Result<_>>()?
        }
    };

    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..config.grid.len()).map(move |l| (c, l)))
        .collect();
    let cv_curve = jobs
        .par_iter()
        .map(|&(c, l)| ctx.evaluate(config.grid[l], &candidates[c].1, candidates[c].0.clone()))
        .collect::<Result<Vec<_>>>()?;

    if cv_curve.iter().all(|p| !p.score.is_finite()) {
        return Err(Error::Selection("every candidate was disqualified".into()));
    }
    let use_constraint = config.constrained && ctx.constrained();
    let admissible = |p: &CvPoint| p.score.is_finite() && (!use_constraint || p.feasible);

    let (chosen, fallback_used) = match pick(&cv_curve, admissible) {
        Some(i) => (i, false),
        None => {
            let top = *config.grid.last().unwrap();
            let i = pick(&cv_curve, |p| p.lambda == top && p.score.is_finite())
                .ok_or_else(|| Error::Selection("largest penalty disqualified".into()))?;
            (i, true)
        }
    };
    Ok(SelectionReport {
        chosen_lambda: cv_curve[chosen].lambda,
        chosen_weights: cv_curve[chosen].weights.clone(),
        constrained: use_constraint,
        f_t: ctx.constrained().then_some(ctx.f_t),
        cv_curve,
        fallback_used,
    })
}

/// Lowest score among admissible points; near-ties go to the larger λ, then
/// to the earlier weight vector.
fn pick(curve: &[CvPoint], admissible: impl Fn(&CvPoint) -> bool) -> Option<usize> {
    let best = curve
        .iter()
        .filter(|p| admissible(p))
        .map(|p| p.score)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let cutoff = best + TIE_RTOL * best.abs().max(f64::MIN_POSITIVE);
    let mut chosen: Option<usize> = None;
    for (i, p) in curve.iter().enumerate() {
        if admissible(p) && p.score <= cutoff {
            match chosen {
                Some(c) if curve[c].lambda >= p.lambda => {}
                _ => chosen = Some(i),
            }
        }
    }
    chosen
}

/// Selects the penalty for `batch` and applies the update with it.
pub fn select_and_update(
    state: &EstimatorState,
    batch: &Batch,
    config: &PenaltySearchConfig,
    targets: Option<&TargetSpec>,
) -> Result<(EstimatorState, SelectionReport)> {
    let owned;
    let targets = match targets {
        Some(t) => t,
        None => {
            owned = default_target_spec(state, batch)?;
            &owned
        }
    };
    let report = select_penalty(state, batch, config, targets)?;
    let target = match &report.chosen_weights {
        Some(w) => mixture_target(targets, w)?,
        None => match &targets.weights {
            TargetWeights::Fixed(w) => mixture_target(targets, w)?,
            TargetWeights::Tuned => unreachable!("tuned selection always reports weights"),
        },
    };
    let next = match state.family {
        Family::Linear => update_with_target(
            state,
            batch,
            report.chosen_lambda,
            &target,
            report.chosen_weights.clone(),
            Some(report.clone()),
        )?,
        Family::Logistic => update_logistic_with_target(
            state,
            batch,
            report.chosen_lambda,
            &target,
            &config.irls,
            report.chosen_weights.clone(),
            Some(report.clone()),
        )?,
    };
    Ok((next, report))
}
