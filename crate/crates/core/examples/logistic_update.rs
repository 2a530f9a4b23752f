//! Targeted ridge logistic regression by IRLS, applied sequentially.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ridge_relay::logistic::{estimating_equation, sigmoid, update_logistic, IrlsConfig};
use ridge_relay::{Batch, EstimatorState, Family};

fn main() -> ridge_relay::Result<()> {
    let beta = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = EstimatorState::zero_init(Family::Logistic, &names)?;
    let config = IrlsConfig::default();

    for t in 1..=8u64 {
        let x = DMatrix::from_fn(200, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eta = &x * &beta;
        let y = eta.map(|e| if rng.random::<f64>() < sigmoid(e) { 1.0 } else { 0.0 });
        let b = Batch::new(t, x.clone(), y.clone(), names.clone(), Family::Logistic)?;
        let target = state.current.to_dense_strict(&state.registry)?;
        state = update_logistic(&state, &b, 20.0, &config)?;
        let est = state.current.to_dense_strict(&state.registry)?;
        let residual = estimating_equation(&x, &y, &est, 20.0, &target)?.amax();
        println!(
            "t={t} estimate=[{:.3}, {:.3}, {:.3}] loss={:.4} |EE|={residual:.1e}",
            est[0],
            est[1],
            est[2],
            (&est - &beta).norm_squared()
        );
    }
    Ok(())
}
