//! Closed-form targeted ridge on one batch: the estimate moves from the OLS
//! solution toward the target as the penalty grows.

use nalgebra::{DMatrix, DVector};
use ridge_relay::linear::fit_targeted_ridge;

fn main() -> ridge_relay::Result<()> {
    let x = DMatrix::from_row_slice(6, 2, &[1.0, 0.2, 0.5, -1.0, -0.3, 0.8, 2.0, 0.1, -1.2, -0.4, 0.7, 1.5]);
    let beta = DVector::from_column_slice(&[1.5, -0.5]);
    let noise = DVector::from_column_slice(&[0.1, -0.2, 0.05, 0.0, 0.15, -0.1]);
    let y = &x * &beta + noise;
    let target = DVector::from_column_slice(&[1.0, 1.0]);

    println!("{:>10} {:>10} {:>10}", "lambda", "beta_1", "beta_2");
    for lambda in [0.0, 0.1, 1.0, 10.0, 100.0, 1e6] {
        let fit = fit_targeted_ridge(&x, &y, lambda, &target)?;
        println!("{lambda:>10} {:>10.5} {:>10.5}", fit.coefficients[0], fit.coefficients[1]);
    }
    Ok(())
}
