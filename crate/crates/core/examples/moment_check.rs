//! Exact mean and covariance of a three-step update chain against Monte
//! Carlo, plus the orthonormal closed form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ridge_relay::linear::exact_moments_orthonormal;
use ridge_relay::sim::check_moment_formulas;

fn main() -> ridge_relay::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let designs: Vec<DMatrix<f64>> = (0..3).map(|_| DMatrix::from_fn(6, 2, |_, _| rng.sample(StandardNormal))).collect();
    let beta = DVector::from_column_slice(&[1.0, -0.5]);
    let beta0 = DVector::zeros(2);
    let report = check_moment_formulas(&designs, &[2.0, 1.0, 0.5], &beta, &beta0, 0.5, 20_000, 7)?;
    println!("exact mean {:?}", report.exact.mean.as_slice());
    println!("mc mean    {:?}", report.mc_mean.as_slice());
    println!("max standardized discrepancy {:.2} (pass: {})", report.max_standardized, report.passed);

    for t in 1..=4 {
        let m = exact_moments_orthonormal(&beta, &beta0, 1.0, t, 1.0)?;
        println!("orthonormal, lambda = 1, t = {t}: mean {:?}, variance {:.4}", m.mean.as_slice(), m.covariance[(0, 0)]);
    }
    Ok(())
}
