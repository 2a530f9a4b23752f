//! A batch drawn from the wrong model arrives after a run of good ones.
//! Unconstrained cross-validation follows it; the constraint on the fit of
//! earlier batches forces a larger penalty.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ridge_relay::tuning::{select_and_update, select_penalty, default_target_spec, PenaltySearchConfig};
use ridge_relay::{Batch, EstimatorState, Family};

fn draw(rng: &mut ChaCha8Rng, t: u64, beta: &DVector<f64>) -> ridge_relay::Result<Batch> {
    let x = DMatrix::from_fn(25, beta.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + DVector::from_fn(25, |_, _| rng.sample::<f64, _>(StandardNormal));
    Batch::new(t, x, y, (1..=beta.len()).map(|j| format!("x{j}")).collect(), Family::Linear)
}

fn main() -> ridge_relay::Result<()> {
    let beta = DVector::from_column_slice(&[2.0, -1.0, 1.5, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut state = EstimatorState::zero_init(Family::Linear, (1..=4).map(|j| format!("x{j}")))?;
    let config = PenaltySearchConfig::default();
    for t in 1..=5 {
        state = select_and_update(&state, &draw(&mut rng, t, &beta)?, &config, None)?.0;
    }
    let odd = draw(&mut rng, 6, &DVector::zeros(4))?;
    let targets = default_target_spec(&state, &odd)?;
    let free = select_penalty(&state, &odd, &PenaltySearchConfig { constrained: false, ..config.clone() }, &targets)?;
    let held = select_penalty(&state, &odd, &config, &targets)?;
    println!("f_t = {:.3}", held.f_t.unwrap());
    println!("unconstrained lambda = {:.3e}", free.chosen_lambda);
    println!("constrained   lambda = {:.3e} (fallback: {})", held.chosen_lambda, held.fallback_used);
    let smallest = held.cv_curve.iter().filter(|p| p.feasible).map(|p| p.lambda).fold(f64::INFINITY, f64::min);
    println!("smallest feasible lambda = {smallest:.3e}");
    Ok(())
}
