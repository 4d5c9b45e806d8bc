//! Monte Carlo experiments for the correlation attack on System-I, an exact
//! enumeration oracle for tiny instances, and CSV sweeps.
//!
//! Trial `t` of an experiment draws all of its randomness from stream `t` of
//! a ChaCha generator keyed by the experiment seed, so results do not depend
//! on how trials are scheduled across threads.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adversary::{self, EveView};
use crate::bits;
use crate::error::{Error, Result};
use crate::protocol::{run_system_one, KeyUse, RecordKind};

/// Two-sided 99% standard normal quantile, `Phi^-1(0.995)`.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Default cap on `2n * N`, the number of sequence bits the exact oracle
/// enumerates over.
pub const DEFAULT_ENUMERATION_BUDGET: u32 = 24;

pub const DEFAULT_TRIALS: u64 = 10_000;

pub const CSV_HEADER: &str =
    "n,N,trials,measured_rate,ci_low,ci_high,formula_rate,per_position_rate,exact_rate";

/// How a trial decides whether Eve recovered the position key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecoveryMode {
    /// Every candidate set must be the singleton true position.
    StrictSingleton,
    /// Eve picks uniformly from each candidate set.
    RandomGuess,
}

impl FromStr for RecoveryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" | "strict-singleton" => Ok(Self::StrictSingleton),
            "guess" | "random-guess" => Ok(Self::RandomGuess),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExperimentConfig {
    /// Key half-length.
    pub n: usize,
    /// Number of leaked keys extracted with the same position key.
    pub leaks: u32,
    pub trials: u64,
    pub seed: u64,
    pub mode: RecoveryMode,
}

impl ExperimentConfig {
    pub fn new(n: usize, leaks: u32, trials: u64, seed: u64) -> Self {
        Self { n, leaks, trials, seed, mode: RecoveryMode::StrictSingleton }
    }

    pub fn with_mode(mut self, mode: RecoveryMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub successes: u64,
    pub measured_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub formula_rate: f64,
    pub per_position_rate: f64,
    pub exact_rate: Option<f64>,
}

impl ExperimentReport {
    /// One CSV row in [`CSV_HEADER`] order.
    pub fn csv_row(&self) -> String {
        let exact = self.exact_rate.map(|p| format!("{p:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.config.n,
            self.config.leaks,
            self.config.trials,
            self.measured_rate,
            self.ci_low,
            self.ci_high,
            self.formula_rate,
            self.per_position_rate,
            exact
        )
    }
}

/// The generator for one trial: stream `trial` of the experiment seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

struct TrialOutcome {
    full: bool,
    recovered_positions: usize,
}

fn attack_trial(config: &ExperimentConfig, trial: u64) -> Result<TrialOutcome> {
    let mut rng = trial_rng(config.seed, trial);
    let key = bits::random_balanced_bits(config.n, &mut rng)?;
    let run = run_system_one(&key, config.leaks, KeyUse::Authenticate, &mut rng)?;
    if config.leaks == 0 {
        return Ok(TrialOutcome { full: false, recovered_positions: 0 });
    }
    let view = EveView::from_transcript(&run.transcript, RecordKind::Seq)?;
    let result = adversary::correlation_attack(&view)?;
    let recovery = match config.mode {
        RecoveryMode::StrictSingleton => result.score(run.a.r_key()),
        RecoveryMode::RandomGuess => result.guess(run.a.r_key(), &mut rng),
    };
    Ok(TrialOutcome { full: recovery.full_recovery, recovered_positions: recovery.recovered_count() })
}

/// Runs the correlation attack on fresh System-I sessions: every trial draws
/// a balanced key, leaks the `N` r-keys of `N` steps, and scores recovery.
pub fn run_attack_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (successes, positions) = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            attack_trial(config, t).map(|o| (u64::from(o.full), o.recovered_positions as u64))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;

    let measured_rate = successes as f64 / config.trials as f64;
    let (ci_low, ci_high) = wilson_interval(successes, config.trials, Z_99);
    let exact_rate = match config.mode {
        RecoveryMode::StrictSingleton => exact_attack_probability(config.n, config.leaks).ok(),
        RecoveryMode::RandomGuess => None,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        successes,
        measured_rate,
        ci_low,
        ci_high,
        formula_rate: adversary::attack_success_formula(config.n as u32, config.leaks),
        per_position_rate: positions as f64 / (config.trials as f64 * config.n as f64),
        exact_rate,
    })
}

/// Exact strict-singleton recovery probability with the default budget.
pub fn exact_attack_probability(n: usize, leaks: u32) -> Result<f64> {
    exact_attack_probability_with_budget(n, leaks, DEFAULT_ENUMERATION_BUDGET)
}

/// Enumerates every tuple of `N` sequences of `2n` bits for the fixed key
/// `1^n 0^n` and counts the tuples in which each true column is unique.
///
/// Fixing the key loses nothing: sequences are uniform and independent of
/// the key, so which positions are true only relabels columns. Index `j`
/// is recovered exactly when the column of its true position differs from
/// every other column, including the other true ones.
pub fn exact_attack_probability_with_budget(n: usize, leaks: u32, budget: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let width = 2 * n;
    let needed = (width as u64).saturating_mul(u64::from(leaks));
    if needed > u64::from(budget) || needed > 40 {
        return Err(Error::BudgetExceeded { needed: needed.min(u64::from(u32::MAX)) as u32, budget });
    }
    let total: u64 = 1 << needed;
    let mut columns = vec![0u64; width];
    let mut hits: u64 = 0;
    for tuple in 0..total {
        columns.iter_mut().for_each(|c| *c = 0);
        for t in 0..leaks as usize {
            for (i, column) in columns.iter_mut().enumerate() {
                let bit = (tuple >> (t * width + i)) & 1;
                *column |= bit << t;
            }
        }
        let all_unique = (0..n).all(|j| {
            columns
                .iter()
                .enumerate()
                .all(|(i, &c)| i == j || c != columns[j])
        });
        if all_unique {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchReport {
    pub leaks: u32,
    pub trials: u64,
    pub matches: u64,
    pub rate: f64,
    pub expected: f64,
    /// Binomial standard error of `rate` under `expected`.
    pub sigma: f64,
}

impl MatchReport {
    pub fn within_sigmas(&self, k: f64) -> bool {
        (self.rate - self.expected).abs() <= k * self.sigma
    }
}

/// Measures how often a designated wrong column (the first zero of the key)
/// matches the column of the first leaked bit across all `N` leaks.
pub fn accidental_match_experiment(n: usize, leaks: u32, trials: u64, seed: u64) -> Result<MatchReport> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidParameter("n and trials must be at least 1".into()));
    }
    let matches = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let mut rng = trial_rng(seed, t);
            let key = bits::random_balanced_bits(n, &mut rng)?;
            let run = run_system_one(&key, leaks, KeyUse::Authenticate, &mut rng)?;
            let wrong = run.a.p_key().positions()[0];
            let hit = run
                .transcript
                .of_kind(RecordKind::Seq)
                .zip(run.a.r_set())
                .all(|(seq, k)| seq.payload.get(wrong) == k.bits.get(1));
            Ok(u64::from(hit))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let expected = adversary::accidental_match_probability(leaks);
    Ok(MatchReport {
        leaks,
        trials,
        matches,
        rate: matches as f64 / trials as f64,
        expected,
        sigma: (expected * (1.0 - expected) / trials as f64).sqrt(),
    })
}

/// Runs every config and renders a CSV table with one row per config.
pub fn sweep(configs: &[ExperimentConfig]) -> Result<String> {
    if configs.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one config".into()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    for config in configs {
        let report = run_attack_experiment(config)?;
        let _ = writeln!(out, "{}", report.csv_row());
    }
    Ok(out)
}

/// Parses `7`, `1,2,3` or the inclusive range `1..20`.
pub fn parse_range(value: &str) -> Result<Vec<u32>> {
    let one = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|e| Error::Parse(format!("bad value {s:?}: {e}")))
    };
    if let Some((lo, hi)) = value.split_once("..") {
        let (lo, hi) = (one(lo)?, one(hi.trim_start_matches('='))?);
        if lo > hi {
            return Err(Error::Parse(format!("empty range {value}")));
        }
        return Ok((lo..=hi).collect());
    }
    value.split(',').map(one).collect()
}

/// Parses a `key=value` experiment file. Keys are `n`, `N`, `trials`,
/// `seed` and `mode`; `n` and `N` accept inclusive ranges (`1..20`) or
/// comma lists, and the result is their cross product. Lines starting with
/// `#` are comments.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>> {
    let mut ns: Vec<u32> = vec![7];
    let mut leaks: Vec<u32> = vec![1];
    let mut trials = DEFAULT_TRIALS;
    let mut seed = 0u64;
    let mut mode = RecoveryMode::StrictSingleton;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "n" => ns = parse_range(value)?,
            "N" => leaks = parse_range(value)?,
            "trials" => {
                trials = value
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad trials {value:?}: {e}")))?
            }
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad seed {value:?}: {e}")))?
            }
            "mode" => mode = value.parse()?,
            other => return Err(Error::Parse(format!("line {}: unknown key {other:?}", i + 1))),
        }
    }
    let configs: Vec<ExperimentConfig> = ns
        .iter()
        .flat_map(|&n| {
            leaks
                .iter()
                .map(move |&l| ExperimentConfig::new(n as usize, l, trials, seed).with_mode(mode))
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent closed form for strict recovery: with M = 2^N possible
    // columns, the n true columns must be distinct (falling factorial) and
    // the n wrong columns must avoid all of them.
    fn counted(n: u32, leaks: u32) -> f64 {
        let m = 2f64.powi(leaks as i32);
        let distinct: f64 = (0..n).map(|i| m - i as f64).product();
        let avoid = (m - n as f64).max(0.0).powi(n as i32);
        distinct * avoid / m.powi(2 * n as i32)
    }

    #[test]
    fn exact_small_cases() {
        assert_eq!(exact_attack_probability(1, 1).unwrap(), 0.5);
        assert_eq!(exact_attack_probability(1, 0).unwrap(), 0.0);
        assert_eq!(exact_attack_probability(1, 2).unwrap(), 0.75);
        assert_eq!(exact_attack_probability(2, 1).unwrap(), 0.0);
        assert_eq!(exact_attack_probability(2, 2).unwrap(), 48.0 / 256.0);
        assert_eq!(exact_attack_probability(2, 3).unwrap(), 2016.0 / 4096.0);
    }

    #[test]
    fn exact_matches_counting_formula() {
        for (n, leaks) in [(1, 1), (1, 5), (2, 2), (2, 4), (3, 2), (3, 3), (4, 2)] {
            let exact = exact_attack_probability(n as usize, leaks).unwrap();
            assert!((exact - counted(n, leaks)).abs() < 1e-12, "({n},{leaks})");
        }
    }

    #[test]
    fn exact_n2_n1_by_hand() {
        // All 16 four-bit sequences: the two true columns take values in {0,1}
        // alongside two wrong ones, so one of them always repeats.
        let mut recovered = 0;
        for s in 0u32..16 {
            let col = |i: u32| (s >> i) & 1;
            let unique = |j: u32| (0..4).all(|i| i == j || col(i) != col(j));
            if unique(0) && unique(1) {
                recovered += 1;
            }
        }
        assert_eq!(recovered, 0);
        assert_eq!(exact_attack_probability(2, 1).unwrap(), 0.0);
    }

    #[test]
    fn exact_budget() {
        assert!(matches!(
            exact_attack_probability(7, 2),
            Err(Error::BudgetExceeded { needed: 28, budget: 24 })
        ));
        assert!(exact_attack_probability_with_budget(2, 3, 12).is_ok());
        assert!(exact_attack_probability_with_budget(2, 3, 8).is_err());
    }

    #[test]
    fn wilson_brackets_rate() {
        let (lo, hi) = wilson_interval(0, 100, Z_99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.07);
        let (lo, hi) = wilson_interval(100, 100, Z_99);
        assert!(lo > 0.93 && hi == 1.0);
        let (lo, hi) = wilson_interval(500, 1000, Z_99);
        assert!(lo < 0.5 && hi > 0.5);
        // Symmetric around 1/2.
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn no_leaks_means_no_recovery() {
        let r = run_attack_experiment(&ExperimentConfig::new(7, 0, 200, 1)).unwrap();
        assert_eq!(r.measured_rate, 0.0);
        assert_eq!(r.successes, 0);
        assert_eq!(r.formula_rate, 0.0);
    }

    #[test]
    fn experiment_is_deterministic() {
        let c = ExperimentConfig::new(3, 4, 500, 9);
        assert_eq!(run_attack_experiment(&c).unwrap(), run_attack_experiment(&c).unwrap());
        let g = c.clone().with_mode(RecoveryMode::RandomGuess);
        let rg = run_attack_experiment(&g).unwrap();
        assert_eq!(rg, run_attack_experiment(&g).unwrap());
        assert_eq!(rg.exact_rate, None);
        // Guessing can only do at least as well as requiring singletons.
        assert!(rg.measured_rate >= run_attack_experiment(&c).unwrap().measured_rate);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_attack_experiment(&ExperimentConfig::new(0, 1, 10, 0)).is_err());
        assert!(run_attack_experiment(&ExperimentConfig::new(1, 1, 0, 0)).is_err());
        assert!(sweep(&[]).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = sweep(&[ExperimentConfig::new(1, 1, 1000, 3)]).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        let fields: Vec<_> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(&fields[..3], &["1", "1", "1000"]);
        assert_eq!(fields[6], "0.500000");
        assert_eq!(fields[8], "0.500000");
        assert!(fields[3..8].iter().all(|f| f.split('.').nth(1).map(str::len) == Some(6)));

        let blank = sweep(&[ExperimentConfig::new(7, 5, 10, 3)]).unwrap();
        assert!(blank.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn duplicate_configs_give_identical_rows() {
        let c = ExperimentConfig::new(4, 3, 300, 77);
        let csv = sweep(&[c.clone(), c]).unwrap();
        let rows: Vec<_> = csv.lines().skip(1).collect();
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn config_file() {
        let configs = parse_config("# sweep\nn=7\nN=1..3\ntrials=100\nseed=5\nmode=guess\n").unwrap();
        assert_eq!(configs.len(), 3);
        assert_eq!(configs[2], ExperimentConfig::new(7, 3, 100, 5).with_mode(RecoveryMode::RandomGuess));
        let configs = parse_config("n=1,2\nN=0\n").unwrap();
        assert_eq!(configs.iter().map(|c| c.n).collect::<Vec<_>>(), vec![1, 2]);
        assert!(parse_config("n=0").is_err());
        assert!(parse_config("bogus=1").is_err());
        assert!(parse_config("N=3..1").is_err());
        assert!(parse_config("trials").is_err());
    }

    #[test]
    fn accidental_match_small() {
        let r = accidental_match_experiment(4, 2, 20_000, 8).unwrap();
        assert_eq!(r.expected, 0.25);
        assert!(r.within_sigmas(3.0), "{r:?}");
    }
}
