//! Mixed-model fixed effects over stacked batches with random slopes, with
//! the variance ratio chosen by profiled likelihood.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ridge_relay::baselines::{default_xi_grid, estimate_xi, mixed_moments, ols, StackedData};

fn main() -> ridge_relay::Result<()> {
    let beta = DVector::from_column_slice(&[1.0, -1.0, 0.5]);
    let (sigma_eps, sigma_gamma) = (1.0, 0.8);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let blocks: Vec<_> = (0..8)
        .map(|_| {
            let x = DMatrix::from_fn(20, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let gamma = DVector::from_fn(3, |_, _| sigma_gamma * rng.sample::<f64, _>(StandardNormal));
            let e = DVector::from_fn(20, |_, _| sigma_eps * rng.sample::<f64, _>(StandardNormal));
            let y = &x * (&beta + gamma) + e;
            (x, y)
        })
        .collect();
    let data = StackedData::new(&blocks)?;
    let fit = estimate_xi(&data, &default_xi_grid())?;
    let pooled = ols(&data.x, &data.y)?;
    println!("true xi = {:.3}, estimated xi = {:.3}", sigma_gamma * sigma_gamma / sigma_eps, fit.xi);
    println!("mixed  {:?}", fit.fixed_effects.as_slice());
    println!("pooled {:?}", pooled.coefficients.as_slice());
    let m = mixed_moments(&data, &beta, fit.xi, fit.sigma_eps_sq, fit.sigma_gamma_sq)?;
    println!("standard errors {:?}", m.covariance.diagonal().map(f64::sqrt).as_slice());
    Ok(())
}
