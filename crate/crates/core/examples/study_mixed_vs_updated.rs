//! Mixed-model fixed effects against zero- and truth-initiated update
//! chains, with and without empty-model batches.

use ridge_relay::sim::{run_study_mixed_vs_updated, ScenarioConfig};

fn main() -> ridge_relay::Result<()> {
    for empty_every in [None, Some(10)] {
        let config = ScenarioConfig::reduced_study2(empty_every);
        let (mixed, zero, truth) = run_study_mixed_vs_updated(&config)?;
        println!("empty_every = {empty_every:?}");
        println!("{:>4} {:>10} {:>10} {:>10}", "t", "mixed", "zero", "truth");
        for t in 1..=config.n_batches as u64 {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!(
                "{t:>4} {:>10} {:>10} {:>10}",
                fmt(mixed.mean_loss(t)),
                fmt(zero.mean_loss(t)),
                fmt(truth.mean_loss(t))
            );
        }
    }
    Ok(())
}
