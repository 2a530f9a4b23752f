#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ridge-relay"));
    c.env_remove("RIDGE_RELAY_FAULT");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Linear batch CSV with columns `names` plus `y`.
pub fn write_batch(dir: &Path, file: &str, names: &[&str], beta: &[f64], n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, names.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * DVector::from_column_slice(beta) + DVector::from_fn(n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
    let mut text = names.join(",") + ",y\n";
    for i in 0..n {
        let row: Vec<String> = (0..names.len()).map(|j| x[(i, j)].to_string()).collect();
        text += &format!("{},{}\n", row.join(","), y[i]);
    }
    let p = dir.join(file);
    fs::write(&p, text).unwrap();
    p
}
