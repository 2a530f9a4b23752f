//! Simulation harness: scenario generation, replicated comparison studies,
//! quantile trajectories and trend checks.
//!
//! Randomness is ChaCha8. Each replicate gets a seed derived from the master
//! seed with SplitMix64; within a replicate the batch at time `t` is drawn
//! from stream `t` and the initial batch (when the scenario needs one) from
//! stream 0. Replicates therefore run in any order, or in parallel, and
//! still produce identical numbers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{default_xi_grid, estimate_xi, mse_bound_lambdas, StackedData};
use crate::error::{validation, Error, Result};
use crate::linalg::largest_singular_value;
use crate::linear::{exact_moments_general, fit_targeted_ridge, update, MomentReport};
use crate::logistic::{sigmoid, update_logistic, IrlsConfig};
use crate::model::{Batch, CoefficientVector, CovariateRegistry, EstimatorState, Family};
use crate::tuning::{log_grid, select_and_update, FoldCount, PenaltySearchConfig};

/// True coefficient vector of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRule {
    /// Evenly spaced from −2.5 to 2.5 across the `p` coordinates; at
    /// `p = 101` this is `β_j = (j − 50)/20`, `j = 0, …, 100`.
    Symmetric,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    ZeroTarget,
    TruthTarget,
    RidgeOnFirstBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    /// Fresh plain ridge against the updated ridge chain.
    RegularVsUpdated,
    /// Stacked mixed model against zero- and truth-initiated chains.
    MixedVsUpdated,
}

/// Penalty search used inside the studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSettings {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub folds: FoldCount,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            grid_min: 1e-4,
            grid_max: 1e6,
            grid_points: 50,
            folds: FoldCount::LeaveOneOut,
        }
    }
}

impl SearchSettings {
    pub fn to_config(&self, constrained: bool, seed: u64) -> PenaltySearchConfig {
        PenaltySearchConfig {
            grid: log_grid(self.grid_min, self.grid_max, self.grid_points),
            folds: self.folds,
            constrained,
            seed,
            ..PenaltySearchConfig::default()
        }
    }
}

fn default_p() -> usize {
    101
}
fn default_n() -> usize {
    25
}
fn default_batches() -> usize {
    25
}
fn default_replicates() -> usize {
    100
}
fn default_beta_rule() -> BetaRule {
    BetaRule::Symmetric
}
fn default_family() -> Family {
    Family::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub study: StudyKind,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_beta_rule")]
    pub beta_rule: BetaRule,
    pub noise_var: f64,
    #[serde(default = "default_batches")]
    pub n_batches: usize,
    /// Batches with `t mod m = 0` come from the empty model.
    #[serde(default)]
    pub empty_every: Option<u64>,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_family")]
    pub family: Family,
    pub init_mode: InitMode,
    #[serde(default)]
    pub search: SearchSettings,
}

impl ScenarioConfig {
    /// Regular versus updated ridge at full size.
    pub fn full_study1() -> Self {
        Self {
            study: StudyKind::RegularVsUpdated,
            p: 101,
            n: 25,
            beta_rule: BetaRule::Symmetric,
            noise_var: 0.04,
            n_batches: 25,
            empty_every: None,
            n_replicates: 100,
            seed: 0,
            family: Family::Linear,
            init_mode: InitMode::RidgeOnFirstBatch,
            search: SearchSettings::default(),
        }
    }

    /// Same structure as [`full_study1`](Self::full_study1) at desk scale.
    pub fn reduced_study1() -> Self {
        Self {
            p: 11,
            n: 10,
            n_batches: 10,
            n_replicates: 20,
            search: SearchSettings {
                grid_points: 30,
                ..SearchSettings::default()
            },
            ..Self::full_study1()
        }
    }

    /// Mixed model versus updated ridge at full size.
    pub fn full_study2(empty_every: Option<u64>) -> Self {
        Self {
            study: StudyKind::MixedVsUpdated,
            noise_var: 1.0,
            empty_every,
            init_mode: InitMode::ZeroTarget,
            ..Self::full_study1()
        }
    }

    /// [`full_study2`](Self::full_study2) with a fifth of the replicates.
    /// Shrinking `p` and `n` as well weakens the empty-batch effect on the
    /// mixed model until it is lost in replicate noise.
    pub fn reduced_study2(empty_every: Option<u64>) -> Self {
        Self {
            n_replicates: 20,
            ..Self::full_study2(empty_every)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 || self.n_batches == 0 || self.n_replicates == 0 {
            return validation("p, n, n_batches and n_replicates must be at least 1");
        }
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return validation("noise_var must be positive");
        }
        if self.empty_every == Some(0) {
            return validation("empty_every must be at least 1");
        }
        if let BetaRule::Explicit(b) = &self.beta_rule {
            if b.len() != self.p || b.iter().any(|v| !v.is_finite()) {
                return validation("explicit beta must have p finite entries");
            }
        }
        let s = &self.search;
        if !(s.grid_min > 0.0 && s.grid_max >= s.grid_min && s.grid_points >= 1) || !s.grid_max.is_finite() {
            return validation("search grid must satisfy 0 < grid_min <= grid_max, points >= 1");
        }
        if let FoldCount::K(k) = s.folds {
            if k < 2 || k > self.n {
                return validation("fold count must lie in [2, n]");
            }
        }
        Ok(())
    }

    pub fn beta(&self) -> DVector<f64> {
        match &self.beta_rule {
            BetaRule::Explicit(b) => DVector::from_column_slice(b),
            BetaRule::Symmetric => {
                if self.p == 1 {
                    return DVector::zeros(1);
                }
                let c = (self.p - 1) as f64 / 2.0;
                DVector::from_fn(self.p, |j, _| (j as f64 - c) / (c / 2.5))
            }
        }
    }

    pub fn covariate_names(&self) -> Vec<String> {
        covariate_names(self.p)
    }

    /// 1-based positions `{1, 21, 51, 71, 101}` scaled to `p`.
    pub fn tracked_coordinates(&self) -> Vec<usize> {
        let mut out: Vec<usize> = [1usize, 21, 51, 71, 101]
            .iter()
            .map(|&k| 1 + (((k - 1) * (self.p - 1)) as f64 / 100.0).round() as usize)
            .collect();
        out.dedup();
        out
    }

    fn is_empty_batch(&self, t: u64) -> bool {
        self.empty_every.is_some_and(|m| t % m == 0)
    }
}

pub fn covariate_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r` under `master`.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(master) ^ replicate)
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_batch(config: &ScenarioConfig, beta: &DVector<f64>, rng: &mut ChaCha8Rng, t: u64, empty: bool) -> Result<Batch> {
    let (n, p) = (config.n, config.p);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let eta = if empty { DVector::zeros(n) } else { &x * beta };
    let y = match config.family {
        Family::Linear => {
            let sd = config.noise_var.sqrt();
            DVector::from_fn(n, |i, _| eta[i] + sd * rng.sample::<f64, _>(StandardNormal))
        }
        Family::Logistic => DVector::from_fn(n, |i, _| {
            let u: f64 = rng.random();
            if u < sigmoid(eta[i]) {
                1.0
            } else {
                0.0
            }
        }),
    };
    Batch::new(t, x, y, config.covariate_names(), config.family)
}

/// Batches `t = 1, …, n_batches` of one replicate.
pub fn generate_batches(config: &ScenarioConfig, replicate_seed: u64) -> Result<Vec<Batch>> {
    config.validate()?;
    let beta = config.beta();
    (1..=config.n_batches as u64)
        .map(|t| draw_batch(config, &beta, &mut stream(replicate_seed, t), t, config.is_empty_batch(t)))
        .collect()
}

/// The extra batch sacrificed to form an initial target. It carries time
/// index 1 because it is fitted on its own.
pub fn generate_initial_batch(config: &ScenarioConfig, replicate_seed: u64) -> Result<Batch> {
    config.validate()?;
    draw_batch(config, &config.beta(), &mut stream(replicate_seed, 0), 1, false)
}

/// One estimator's value at one time point in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// Estimate at the tracked coordinates.
    pub snapshot: Vec<f64>,
    pub loss: f64,
    /// Chosen penalty, or the variance ratio for the mixed model.
    pub tuning: f64,
}

/// Cross-replicate summary at one time point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub t: u64,
    /// Replicates where the estimator was defined.
    pub available: usize,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub label: String,
    /// 1-based coordinate positions.
    pub tracked: Vec<usize>,
    pub truth: Vec<f64>,
    /// `replicates[r][t − 1]`; `None` where the estimator was undefined.
    pub replicates: Vec<Vec<Option<StepRecord>>>,
    pub summary: Vec<StepSummary>,
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (N − 1)q`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

impl TrajectoryResult {
    fn assemble(label: &str, tracked: Vec<usize>, truth: Vec<f64>, replicates: Vec<Vec<Option<StepRecord>>>, horizon: usize) -> Self {
        let summary = (0..horizon)
            .map(|i| {
                let present: Vec<&StepRecord> = replicates.iter().filter_map(|r| r[i].as_ref()).collect();
                let t = i as u64 + 1;
                if present.is_empty() {
                    return StepSummary {
                        t,
                        available: 0,
                        q05: Vec::new(),
                        q50: Vec::new(),
                        q95: Vec::new(),
                        mean_loss: None,
                    };
                }
                let column = |c: usize| present.iter().map(|s| s.snapshot[c]).collect::<Vec<_>>();
                let per = |q: f64| (0..tracked.len()).map(|c| quantile(&column(c), q)).collect();
                StepSummary {
                    t,
                    available: present.len(),
                    q05: per(0.05),
                    q50: per(0.50),
                    q95: per(0.95),
                    mean_loss: Some(present.iter().map(|s| s.loss).sum::<f64>() / present.len() as f64),
                }
            })
            .collect();
        Self {
            label: label.to_owned(),
            tracked,
            truth,
            replicates,
            summary,
        }
    }

    /// `q95 − q05` per tracked coordinate at time `t`.
    pub fn band_width(&self, t: u64) -> Option<Vec<f64>> {
        let s = self.summary.iter().find(|s| s.t == t && s.available > 0)?;
        Some(s.q95.iter().zip(&s.q05).map(|(a, b)| a - b).collect())
    }

    pub fn mean_loss(&self, t: u64) -> Option<f64> {
        self.summary.iter().find(|s| s.t == t)?.mean_loss
    }
}

fn record(t: u64, est: &DVector<f64>, beta: &DVector<f64>, tracked: &[usize], tuning: f64) -> StepRecord {
    StepRecord {
        t,
        snapshot: tracked.iter().map(|&j| est[j - 1]).collect(),
        loss: (est - beta).norm_squared(),
        tuning,
    }
}

fn dense_current(state: &EstimatorState) -> Result<DVector<f64>> {
    state.current.to_dense_strict(&state.registry)
}

fn fold_seed(rep_seed: u64, t: u64) -> u64 {
    splitmix64(rep_seed ^ t.rotate_left(32))
}

/// Penalty-tuned ridge with zero target on a single batch.
fn plain_ridge_cv(batch: &Batch, search: &PenaltySearchConfig) -> Result<(DVector<f64>, f64)> {
    let fresh = EstimatorState::zero_init(batch.family(), batch.covariates())?;
    let (next, report) = select_and_update(&fresh, &batch.clone().with_t(1)?, search, None)?;
    Ok((dense_current(&next)?, report.chosen_lambda))
}

fn initial_state(config: &ScenarioConfig, mode: InitMode, rep_seed: u64) -> Result<EstimatorState> {
    let names = config.covariate_names();
    let registry = CovariateRegistry::new(names.iter().cloned())?;
    let (target, note) = match mode {
        InitMode::ZeroTarget => (CoefficientVector::zeros(&names), "zero target"),
        InitMode::TruthTarget => (CoefficientVector::from_dense(&registry, &config.beta())?, "true coefficients"),
        InitMode::RidgeOnFirstBatch => {
            let first = generate_initial_batch(config, rep_seed)?;
            let search = config.search.to_config(false, fold_seed(rep_seed, 0));
            let (est, _) = plain_ridge_cv(&first, &search)?;
            (CoefficientVector::from_dense(&registry, &est)?, "ridge on first batch")
        }
    };
    EstimatorState::new(config.family, registry, target, note)
}

fn linear_study(config: &ScenarioConfig) -> Result<()> {
    config.validate()?;
    if config.family != Family::Linear {
        return validation("the comparison studies are linear only");
    }
    Ok(())
}

fn run_replicates<T: Send>(config: &ScenarioConfig, job: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..config.n_replicates as u64)
        .into_par_iter()
        .map(|r| job(replicate_seed(config.seed, r)))
        .collect()
}

/// Plain ridge refitted on each batch against the updated ridge chain, both
/// tuned by unconstrained cross-validation. Returns `(regular, updated)`.
pub fn run_study_regular_vs_updated(config: &ScenarioConfig) -> Result<(TrajectoryResult, TrajectoryResult)> {
    linear_study(config)?;
    let beta = config.beta();
    let tracked = config.tracked_coordinates();
    let per_rep = run_replicates(config, |seed| {
        let batches = generate_batches(config, seed)?;
        let mut state = initial_state(config, config.init_mode, seed)?;
        let mut regular = Vec::with_capacity(batches.len());
        let mut updated = Vec::with_capacity(batches.len());
        for batch in &batches {
            let search = config.search.to_config(false, fold_seed(seed, batch.t()));
            let (fresh, lam) = plain_ridge_cv(batch, &search)?;
            regular.push(Some(record(batch.t(), &fresh, &beta, &tracked, lam)));
            let (next, report) = select_and_update(&state, batch, &search, None)?;
            state = next;
            updated.push(Some(record(batch.t(), &dense_current(&state)?, &beta, &tracked, report.chosen_lambda)));
        }
        Ok((regular, updated))
    })?;
    let (regular, updated): (Vec<_>, Vec<_>) = per_rep.into_iter().unzip();
    let truth: Vec<f64> = tracked.iter().map(|&j| beta[j - 1]).collect();
    Ok((
        TrajectoryResult::assemble("regular", tracked.clone(), truth.clone(), regular, config.n_batches),
        TrajectoryResult::assemble("updated", tracked, truth, updated, config.n_batches),
    ))
}

/// Mixed-model fixed effects on the accumulated data against the updated
/// ridge chain started at zero and at the truth, the chains tuned by
/// constrained cross-validation. Returns `(mixed, updated_zero, updated_truth)`.
pub fn run_study_mixed_vs_updated(
    config: &ScenarioConfig,
) -> Result<(TrajectoryResult, TrajectoryResult, TrajectoryResult)> {
    linear_study(config)?;
    let beta = config.beta();
    let tracked = config.tracked_coordinates();
    let xi_grid = default_xi_grid();
    let registry = CovariateRegistry::new(config.covariate_names())?;
    let per_rep = run_replicates(config, |seed| {
        let batches = generate_batches(config, seed)?;
        let mut zero = initial_state(config, InitMode::ZeroTarget, seed)?;
        let mut truth = initial_state(config, InitMode::TruthTarget, seed)?;
        let (mut mixed, mut rz, mut rt) = (Vec::new(), Vec::new(), Vec::new());
        for (i, batch) in batches.iter().enumerate() {
            let t = batch.t();
            let seen = &batches[..=i];
            let total: usize = seen.iter().map(Batch::n).sum();
            mixed.push(if total > config.p {
                let data = StackedData::from_batches(seen, &registry)?;
                match estimate_xi(&data, &xi_grid) {
                    Ok(fit) => Some(record(t, &fit.fixed_effects, &beta, &tracked, fit.xi)),
                    Err(Error::Estimation(_)) | Err(Error::Singular(_)) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            });
            let search = config.search.to_config(true, fold_seed(seed, t));
            let (next, report) = select_and_update(&zero, batch, &search, None)?;
            zero = next;
            rz.push(Some(record(t, &dense_current(&zero)?, &beta, &tracked, report.chosen_lambda)));
            let (next, report) = select_and_update(&truth, batch, &search, None)?;
            truth = next;
            rt.push(Some(record(t, &dense_current(&truth)?, &beta, &tracked, report.chosen_lambda)));
        }
        Ok((mixed, rz, rt))
    })?;
    let truth_vals: Vec<f64> = tracked.iter().map(|&j| beta[j - 1]).collect();
    let mut mixed = Vec::new();
    let mut zero = Vec::new();
    let mut truth = Vec::new();
    for (m, z, t) in per_rep {
        mixed.push(m);
        zero.push(z);
        truth.push(t);
    }
    let h = config.n_batches;
    Ok((
        TrajectoryResult::assemble("mixed", tracked.clone(), truth_vals.clone(), mixed, h),
        TrajectoryResult::assemble("updated_zero", tracked.clone(), truth_vals.clone(), zero, h),
        TrajectoryResult::assemble("updated_truth", tracked, truth_vals, truth, h),
    ))
}

/// Penalty schedule for the consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `λ_t = c · d₁(X_t)²`.
    SingularValueMultiple(f64),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub family: Family,
    /// `‖β̂_t − β‖₂²` for `t = 1, …`.
    pub losses: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Whether every `λ_t > 2 d₁(X_t)²`.
    pub growth_condition: bool,
    pub ratio: f64,
    /// `ratio < 0.2`; `None` when the growth condition fails.
    pub passed: Option<bool>,
}

/// Runs one long chain at fixed penalties from the scenario's initial state
/// (replicate 0) and reports the loss trajectory.
pub fn check_consistency_trajectory(config: &ScenarioConfig, rule: LambdaRule) -> Result<ConsistencyReport> {
    config.validate()?;
    let seed = replicate_seed(config.seed, 0);
    let beta = config.beta();
    let irls = IrlsConfig::default();
    let mut state = initial_state(config, config.init_mode, seed)?;
    let mut losses = Vec::with_capacity(config.n_batches);
    let mut lambdas = Vec::with_capacity(config.n_batches);
    let mut growth_condition = true;
    for batch in generate_batches(config, seed)? {
        let d1 = largest_singular_value(batch.x());
        let lambda = match rule {
            LambdaRule::SingularValueMultiple(c) => c * d1 * d1,
            LambdaRule::Constant(l) => l,
        };
        growth_condition &= lambda > 2.0 * d1 * d1;
        state = match config.family {
            Family::Linear => update(&state, &batch, lambda)?,
            Family::Logistic => update_logistic(&state, &batch, lambda, &irls)?,
        };
        losses.push((dense_current(&state)? - &beta).norm_squared());
        lambdas.push(lambda);
    }
    let ratio = losses[losses.len() - 1] / losses[0];
    Ok(ConsistencyReport {
        family: config.family,
        losses,
        lambdas,
        growth_condition,
        ratio,
        passed: growth_condition.then_some(ratio < 0.2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheckReport {
    pub exact: MomentReport,
    pub mc_mean: DVector<f64>,
    pub mc_covariance: DMatrix<f64>,
    pub n_mc: usize,
    /// Largest `|estimate − exact| / standard error` over the mean entries.
    pub max_mean_discrepancy: f64,
    /// The same over the covariance entries.
    pub max_cov_discrepancy: f64,
    pub max_standardized: f64,
    pub passed: bool,
}

/// Monte Carlo mean and covariance of the update chain against the exact
/// moments, with responses `Y_τ = X_τβ + ε_τ`.
pub fn check_moment_formulas(
    designs: &[DMatrix<f64>],
    lambdas: &[f64],
    beta: &DVector<f64>,
    beta0: &DVector<f64>,
    sigma_sq: f64,
    n_mc: usize,
    seed: u64,
) -> Result<MomentCheckReport> {
    if n_mc < 2 {
        return validation("need at least two Monte Carlo replicates");
    }
    let exact = exact_moments_general(designs, lambdas, beta, beta0, sigma_sq)?;
    let sd = sigma_sq.sqrt();
    let draws = (0..n_mc as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(replicate_seed(seed, r), 0);
            let mut est = beta0.clone();
            for (x, &l) in designs.iter().zip(lambdas) {
                let y = x * beta + DVector::from_fn(x.nrows(), |_, _| sd * rng.sample::<f64, _>(StandardNormal));
                est = fit_targeted_ridge(x, &y, l, &est)?.coefficients;
            }
            Ok(est)
        })
        .collect::<Result<Vec<_>>>()?;
    let p = beta.len();
    let n = n_mc as f64;
    let mc_mean = draws.iter().fold(DVector::zeros(p), |a, d| a + d) / n;
    let mut mc_covariance = DMatrix::zeros(p, p);
    for d in &draws {
        let c = d - &mc_mean;
        mc_covariance += &c * c.transpose();
    }
    mc_covariance /= n - 1.0;

    let c = &exact.covariance;
    let mut max_mean_discrepancy: f64 = 0.0;
    let mut max_cov_discrepancy: f64 = 0.0;
    for i in 0..p {
        let se = (c[(i, i)] / n).sqrt();
        max_mean_discrepancy = max_mean_discrepancy.max(standardized(mc_mean[i] - exact.mean[i], se));
        for j in 0..p {
            let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / n).sqrt();
            max_cov_discrepancy = max_cov_discrepancy.max(standardized(mc_covariance[(i, j)] - c[(i, j)], se));
        }
    }
    let max_standardized = max_mean_discrepancy.max(max_cov_discrepancy);
    Ok(MomentCheckReport {
        exact,
        mc_mean,
        mc_covariance,
        n_mc,
        max_mean_discrepancy,
        max_cov_discrepancy,
        max_standardized,
        passed: max_standardized < 4.0,
    })
}

fn standardized(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Monte Carlo comparison of the updated chain and the mixed-model estimator
/// at `T` under the mixed model with orthonormal designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseComparison {
    pub lambdas: Vec<f64>,
    pub mse_updated: f64,
    pub mse_mixed: f64,
    /// Standard error of the mean paired difference.
    pub se_difference: f64,
    pub n_replicates: usize,
    /// `mse_updated + 3·se < mse_mixed`.
    pub updated_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseBoundConfig {
    pub p: usize,
    pub n: usize,
    pub horizon: usize,
    pub sigma_eps_sq: f64,
    pub sigma_gamma_sq: f64,
    /// Multiplier on the penalty bound.
    pub factor: f64,
    pub n_replicates: usize,
    pub seed: u64,
}

/// Random `n × p` matrix with orthonormal columns.
pub fn orthonormal_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// The chain starts at the mixed estimate of batch 1 and is updated with
/// penalties `λ_2, …, λ_T` from [`mse_bound_lambdas`]; the mixed estimator
/// pools all `T` batches at the true variance ratio.
pub fn compare_mse_orthonormal(cfg: &MseBoundConfig) -> Result<MseComparison> {
    if cfg.n < cfg.p || cfg.horizon < 2 || cfg.n_replicates < 2 {
        return validation("need n >= p, horizon >= 2 and at least two replicates");
    }
    let lambdas = mse_bound_lambdas(cfg.horizon, cfg.sigma_eps_sq, cfg.sigma_gamma_sq, cfg.factor);
    let xi = cfg.sigma_gamma_sq / cfg.sigma_eps_sq;
    let beta = DVector::from_fn(cfg.p, |j, _| 1.0 - j as f64 / cfg.p as f64);
    let (se, sg) = (cfg.sigma_eps_sq.sqrt(), cfg.sigma_gamma_sq.sqrt());
    let diffs = (0..cfg.n_replicates as u64)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(cfg.seed, r);
            let blocks: Vec<(DMatrix<f64>, DVector<f64>)> = (1..=cfg.horizon as u64)
                .map(|t| {
                    let mut rng = stream(seed, t);
                    let x = orthonormal_design(&mut rng, cfg.n, cfg.p);
                    let g = DVector::from_fn(cfg.p, |_, _| sg * rng.sample::<f64, _>(StandardNormal));
                    let e = DVector::from_fn(cfg.n, |_, _| se * rng.sample::<f64, _>(StandardNormal));
                    let y = &x * (&beta + g) + e;
                    (x, y)
                })
                .collect();
            let first = StackedData::new(&blocks[..1])?;
            let mut est = crate::baselines::mixed_fixed_effects(&first, xi)?;
            for (t, (x, y)) in blocks.iter().enumerate().skip(1) {
                est = fit_targeted_ridge(x, y, lambdas[t], &est)?.coefficients;
            }
            let mixed = crate::baselines::mixed_fixed_effects(&StackedData::new(&blocks)?, xi)?;
            Ok(((est - &beta).norm_squared(), (mixed - &beta).norm_squared()))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = diffs.len() as f64;
    let mse_updated = diffs.iter().map(|d| d.0).sum::<f64>() / n;
    let mse_mixed = diffs.iter().map(|d| d.1).sum::<f64>() / n;
    let mean_diff = mse_updated - mse_mixed;
    let var = diffs.iter().map(|d| (d.0 - d.1 - mean_diff).powi(2)).sum::<f64>() / (n - 1.0);
    let se_difference = (var / n).sqrt();
    Ok(MseComparison {
        lambdas,
        mse_updated,
        mse_mixed,
        se_difference,
        n_replicates: diffs.len(),
        updated_better: mean_diff + 3.0 * se_difference < 0.0,
    })
}
