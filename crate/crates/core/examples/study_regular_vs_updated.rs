//! Plain ridge refitted per batch against the updated ridge chain, at desk
//! scale. Prints the 5–95% band width and median per tracked coordinate.

use ridge_relay::sim::{run_study_regular_vs_updated, ScenarioConfig};

fn main() -> ridge_relay::Result<()> {
    let config = ScenarioConfig::reduced_study1();
    let (regular, updated) = run_study_regular_vs_updated(&config)?;
    let last = config.n_batches as u64;
    for tr in [&regular, &updated] {
        println!("{}", tr.label);
        let first = tr.band_width(1).unwrap();
        let final_ = tr.band_width(last).unwrap();
        let s1 = &tr.summary[0];
        let sn = &tr.summary[last as usize - 1];
        for (c, j) in tr.tracked.iter().enumerate() {
            println!(
                "  beta_{j:<3} truth {:>6.2}  band {:>7.4} -> {:>7.4}  median {:>7.4} -> {:>7.4}",
                tr.truth[c], first[c], final_[c], s1.q50[c], sn.q50[c]
            );
        }
    }
    Ok(())
}
