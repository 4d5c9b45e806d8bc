//! Exact full-recovery probability by enumeration, next to a Monte Carlo
//! estimate and the independence formula.

use upad::adversary;
use upad::harness::{self, ExperimentConfig};

fn main() -> upad::Result<()> {
    println!("n,N,exact,measured,ci_low,ci_high,formula");
    for (n, leaks) in [(1, 1), (1, 2), (1, 4), (2, 1), (2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (3, 4), (4, 3)] {
        let exact = harness::exact_attack_probability(n, leaks)?;
        let report = harness::run_attack_experiment(&ExperimentConfig::new(n, leaks, 20_000, 9))?;
        println!(
            "{n},{leaks},{exact:.6},{:.6},{:.6},{:.6},{:.6}",
            report.measured_rate,
            report.ci_low,
            report.ci_high,
            adversary::attack_success_formula(n as u32, leaks)
        );
    }
    Ok(())
}
