//! Batches arrive one at a time, each with a slightly different set of
//! covariates. Each update shrinks toward the latest estimate of every
//! coordinate, and the penalty is picked by constrained cross-validation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ridge_relay::tuning::{select_and_update, PenaltySearchConfig};
use ridge_relay::{Batch, EstimatorState, Family};

fn batch(rng: &mut ChaCha8Rng, t: u64, names: &[&str]) -> ridge_relay::Result<Batch> {
    let truth = |name: &str| match name {
        "age" => 0.8,
        "income" => -0.4,
        "smoker" => 1.2,
        _ => 0.3,
    };
    let n = 30;
    let x = DMatrix::from_fn(n, names.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta = DVector::from_iterator(names.len(), names.iter().map(|n| truth(n)));
    let y = &x * beta + DVector::from_fn(n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    Batch::new(t, x, y, names.iter().map(|s| s.to_string()).collect(), Family::Linear)
}

fn main() -> ridge_relay::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = EstimatorState::zero_init(Family::Linear, ["age", "income"])?;
    let schedule: [&[&str]; 5] = [
        &["age", "income"],
        &["age", "income", "smoker"],
        &["age", "smoker"],
        &["age", "income", "smoker", "bmi"],
        &["age", "income", "smoker", "bmi"],
    ];
    let config = PenaltySearchConfig::default();
    for (i, names) in schedule.iter().enumerate() {
        let b = batch(&mut rng, i as u64 + 1, names)?;
        let (next, report) = select_and_update(&state, &b, &config, None)?;
        state = next;
        let est: Vec<String> = state.current.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
        println!(
            "t={} lambda={:.3e} fallback={} {}",
            state.t,
            report.chosen_lambda,
            report.fallback_used,
            est.join(" ")
        );
    }
    Ok(())
}
