//! Measured attack success against (1 - 2^-N)^n for n = 7, N = 0..20,
//! printed as CSV.
//!
//! Usage: cargo run --release --example formula_sweep [trials]

use upad::harness::{self, ExperimentConfig, RecoveryMode};

fn main() -> upad::Result<()> {
    let trials = std::env::args().nth(1).map_or(10_000, |t| t.parse().expect("trial count"));
    let mut configs: Vec<_> = (0..=20).map(|leaks| ExperimentConfig::new(7, leaks, trials, 0)).collect();
    print!("{}", harness::sweep(&configs)?);

    println!();
    println!("# random-guess scoring");
    for c in &mut configs {
        c.mode = RecoveryMode::RandomGuess;
    }
    print!("{}", harness::sweep(&configs)?);
    Ok(())
}
