//! Command-line front end. The `upad` binary is a thin wrapper around
//! [`execute`].

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::adversary::{self, EveView};
use crate::bits::{self, parse_positions, BitString, PositionKey, SharedKey};
use crate::error::Error;
use crate::harness::{self, ExperimentConfig, RecoveryMode};
use crate::protocol::{
    replay_system_one, replay_system_two, run_system_one, run_system_two, KeyUse, RecordKind,
    Transcript,
};
use crate::transport::{
    broadcast_transcript, collect_transcript, Broadcast, FrameSource, MemoryChannel, TcpBroadcaster,
    TcpSubscriber,
};
use crate::SimRng;

/// Exit status for invalid flags or arguments.
pub const USAGE_EXIT: i32 = 2;
/// Exit status for failures reported by the library.
pub const ERROR_EXIT: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "upad", version, about = "Position-key extraction cryptosystems and the correlation attack")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a balanced shared key of 2n bits.
    Keygen {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        rng: RngArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive the r and p position keys from a shared key file.
    Derive {
        #[arg(long = "in")]
        input: PathBuf,
        /// Writes PREFIX.r and PREFIX.p; prints both lines when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a position-key file to a sequence file.
    Extract {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// XOR two equal-length bit files (encrypt or decrypt).
    Xor {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded System-I session and write its public transcript.
    RunS1 {
        #[command(flatten)]
        session: SessionArgs,
        /// What A does with each extracted r-key.
        #[arg(long = "use", value_enum, default_value_t = UseArg::Keep)]
        key_use: UseArg,
    },
    /// Run a seeded System-II session and write its public transcript.
    RunS2 {
        #[command(flatten)]
        session: SessionArgs,
        /// Spend each final r-key as authentication data, publishing it.
        #[arg(long)]
        leak: bool,
    },
    /// Run the correlation attack on a transcript.
    Attack {
        #[arg(long = "in")]
        input: PathBuf,
        /// Which sequences the leaked keys were extracted from.
        #[arg(long, value_enum, default_value_t = AgainstArg::Seq)]
        against: AgainstArg,
        /// Restrict the attack to one step.
        #[arg(long)]
        step: Option<u32>,
        /// True position-key file, to score recovery.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo attack experiments, written as CSV.
    Experiment {
        /// Key half-length; a value, a comma list or an inclusive range a..b.
        #[arg(long)]
        n: Option<String>,
        /// Leak count; a value, a comma list or an inclusive range a..b.
        #[arg(long = "N")]
        leaks: Option<String>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// key=value experiment file; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Broadcast a transcript to TCP subscribers.
    Serve {
        #[arg(long)]
        listen: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        subscribers: usize,
    },
    /// Feed a stored or broadcast transcript through party B's session.
    Replay {
        #[arg(long = "in", conflicts_with = "connect", required_unless_present = "connect")]
        input: Option<PathBuf>,
        #[arg(long)]
        connect: Option<String>,
        /// Shared key file.
        #[arg(long)]
        key: PathBuf,
        #[arg(long, value_enum)]
        system: SystemArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RngArgs {
    #[arg(long, default_value_t = 0, conflicts_with = "os_entropy")]
    pub seed: u64,
    /// Seed from the operating system instead of --seed.
    #[arg(long)]
    pub os_entropy: bool,
}

impl RngArgs {
    fn rng(&self) -> SimRng {
        let seed = if self.os_entropy { rand::rng().random() } else { self.seed };
        crate::seeded_rng(seed)
    }
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    /// Shared key file; generated from the seed when absent.
    #[arg(long, required_unless_present = "n")]
    pub key: Option<PathBuf>,
    /// Half-length of a generated shared key.
    #[arg(long, conflicts_with = "key")]
    pub n: Option<usize>,
    #[arg(long, alias = "N")]
    pub steps: u32,
    #[command(flatten)]
    pub rng: RngArgs,
    #[arg(long, value_enum, default_value_t = BackendArg::Memory)]
    pub backend: BackendArg,
    /// Address for the socket backend.
    #[arg(long, default_value = "127.0.0.1:0")]
    pub listen: String,
    /// Transcript output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the parties' keys, one step per line.
    #[arg(long)]
    pub keys_out: Option<PathBuf>,
    /// Where to write a generated shared key.
    #[arg(long)]
    pub key_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum UseArg {
    Keep,
    Encrypt,
    Authenticate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AgainstArg {
    Seq,
    Seqstar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Strict,
    Guess,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Memory,
    Socket,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    One,
    Two,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => USAGE_EXIT,
            CliError::Failed(_) => ERROR_EXIT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Failed(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failed(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Failed(Error::Io(e))
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| {
        CliError::Failed(Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    })
}

fn read_bits(path: &Path) -> CliResult<BitString> {
    Ok(read_text(path)?.parse()?)
}

fn read_key(path: &Path) -> CliResult<SharedKey> {
    Ok(read_text(path)?.parse()?)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs one command.
pub fn execute(cli: Cli) -> CliResult {
    match cli.command {
        Command::Keygen { n, rng, out } => {
            let key = bits::random_balanced_bits(n, &mut rng.rng())?;
            emit(out.as_deref(), &format!("{key}\n"))
        }
        Command::Derive { input, out } => {
            let (r, p) = read_key(&input)?.position_keys();
            match out {
                Some(prefix) => {
                    fs::write(with_suffix(&prefix, "r"), format!("{r}\n"))?;
                    fs::write(with_suffix(&prefix, "p"), format!("{p}\n"))?;
                    Ok(())
                }
                None => emit(None, &format!("{r}\n{p}\n")),
            }
        }
        Command::Extract { key, input, out } => {
            let sequence = read_bits(&input)?;
            let positions = PositionKey::new(parse_positions(&read_text(&key)?)?, sequence.len())?;
            let extracted = bits::extract(&positions, &sequence)?;
            emit(out.as_deref(), &format!("{extracted}\n"))
        }
        Command::Xor { input, key, out } => {
            let result = bits::xor(&read_bits(&input)?, &read_bits(&key)?)?;
            emit(out.as_deref(), &format!("{result}\n"))
        }
        Command::RunS1 { session, key_use } => run_s1(&session, key_use),
        Command::RunS2 { session, leak } => run_s2(&session, leak),
        Command::Attack { input, against, step, truth, out } => {
            attack(&input, against, step, truth.as_deref(), out.as_deref())
        }
        Command::Experiment { n, leaks, trials, seed, mode, config, out } => {
            experiment(n, leaks, trials, seed, mode, config.as_deref(), out.as_deref())
        }
        Command::Serve { listen, input, subscribers } => {
            let transcript: Transcript = read_text(&input)?.parse()?;
            let mut server = TcpBroadcaster::bind(listen.as_str())?;
            eprintln!("listening on {}", server.local_addr()?);
            server.accept_subscribers(subscribers)?;
            broadcast_transcript(&mut server, &transcript)?;
            server.close()?;
            Ok(())
        }
        Command::Replay { input, connect, key, system, out } => {
            let shared = read_key(&key)?;
            let transcript = match (input, connect) {
                (Some(path), _) => read_text(&path)?.parse()?,
                (None, Some(addr)) => collect_transcript(&mut TcpSubscriber::connect(addr.as_str())?)?,
                (None, None) => return Err(CliError::Usage("replay needs --in or --connect".into())),
            };
            let lines = match system {
                SystemArg::One => {
                    let b = replay_system_one(&shared, &transcript)?;
                    key_lines(b.r_set().iter().zip(b.p_set()).map(|(r, p)| (r.id.step, &r.bits, &p.bits)))
                }
                SystemArg::Two => {
                    let b = replay_system_two(&shared, &transcript)?;
                    key_lines(b.final_keys().iter().map(|f| (f.step, &f.r.bits, &f.p.bits)))
                }
            };
            emit(out.as_deref(), &lines)
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn key_lines<'a>(keys: impl Iterator<Item = (u32, &'a BitString, &'a BitString)>) -> String {
    let mut out = String::new();
    for (step, r, p) in keys {
        let _ = writeln!(out, "{step},{r},{p}");
    }
    out
}

fn session_key(args: &SessionArgs, rng: &mut SimRng) -> CliResult<SharedKey> {
    let key = match (&args.key, args.n) {
        (Some(path), _) => read_key(path)?,
        (None, Some(n)) => bits::random_balanced_bits(n, rng)?,
        (None, None) => return Err(CliError::Usage("give --key or --n".into())),
    };
    if let Some(path) = &args.key_out {
        fs::write(path, format!("{key}\n"))?;
    }
    Ok(key)
}

/// Sends the transcript through the chosen backend to two subscribers
/// (party B and Eve). Returns B's copy and Eve's copy.
fn deliver(args: &SessionArgs, transcript: &Transcript) -> CliResult<(Transcript, Transcript)> {
    match args.backend {
        BackendArg::Memory => {
            let mut channel = MemoryChannel::new();
            let mut b = channel.subscribe();
            let mut eve = channel.subscribe();
            broadcast_transcript(&mut channel, transcript)?;
            channel.close()?;
            Ok((collect_transcript(&mut b)?, collect_transcript(&mut eve)?))
        }
        BackendArg::Socket => {
            let mut server = TcpBroadcaster::bind(args.listen.as_str())?;
            let addr = server.local_addr()?;
            let spawn = || {
                thread::spawn(move || -> crate::Result<Transcript> {
                    let mut sub = TcpSubscriber::connect(addr)?;
                    collect_transcript(&mut sub as &mut dyn FrameSource)
                })
            };
            let (b, eve) = (spawn(), spawn());
            server.accept_subscribers(2)?;
            broadcast_transcript(&mut server, transcript)?;
            server.close()?;
            let join = |h: thread::JoinHandle<crate::Result<Transcript>>| {
                h.join()
                    .map_err(|_| CliError::Failed(Error::Delivery("subscriber thread panicked".into())))?
                    .map_err(CliError::from)
            };
            Ok((join(b)?, join(eve)?))
        }
    }
}

fn run_s1(args: &SessionArgs, key_use: UseArg) -> CliResult {
    let mut rng = args.rng.rng();
    let shared = session_key(args, &mut rng)?;
    let key_use = match key_use {
        UseArg::Keep => KeyUse::Keep,
        UseArg::Encrypt => KeyUse::Encrypt,
        UseArg::Authenticate => KeyUse::Authenticate,
    };
    let run = run_system_one(&shared, args.steps, key_use, &mut rng)?;
    let (b_copy, eve_copy) = deliver(args, &run.transcript)?;
    let b = replay_system_one(&shared, &b_copy)?;
    if b.r_set() != run.a.r_set() || b.p_set() != run.a.p_set() {
        return Err(Error::ProtocolCorruption("B's replayed keys differ from A's".into()).into());
    }
    if let Some(path) = &args.keys_out {
        let lines = key_lines(run.a.r_set().iter().zip(run.a.p_set()).map(|(r, p)| (r.id.step, &r.bits, &p.bits)));
        fs::write(path, lines)?;
    }
    emit(args.out.as_deref(), &eve_copy.to_string())
}

fn run_s2(args: &SessionArgs, leak: bool) -> CliResult {
    let mut rng = args.rng.rng();
    let shared = session_key(args, &mut rng)?;
    let run = run_system_two(&shared, args.steps, leak, &mut rng)?;
    let (b_copy, eve_copy) = deliver(args, &run.transcript)?;
    let b = replay_system_two(&shared, &b_copy)?;
    if b.final_keys() != run.a.final_keys() {
        return Err(Error::ProtocolCorruption("B's final keys differ from A's".into()).into());
    }
    if let Some(path) = &args.keys_out {
        fs::write(path, key_lines(run.a.final_keys().iter().map(|f| (f.step, &f.r.bits, &f.p.bits))))?;
    }
    emit(args.out.as_deref(), &eve_copy.to_string())
}

fn attack(
    input: &Path,
    against: AgainstArg,
    step: Option<u32>,
    truth: Option<&Path>,
    out: Option<&Path>,
) -> CliResult {
    let transcript: Transcript = read_text(input)?.parse()?;
    let source = match against {
        AgainstArg::Seq => RecordKind::Seq,
        AgainstArg::Seqstar => RecordKind::SeqStar,
    };
    let mut view = EveView::from_transcript(&transcript, source)?;
    if let Some(step) = step {
        view = view.for_step(step);
    }
    let result = adversary::correlation_attack(&view)?;
    let truth = truth
        .map(|p| -> CliResult<PositionKey> {
            Ok(PositionKey::new(parse_positions(&read_text(p)?)?, 2 * view.n())?)
        })
        .transpose()?;
    emit(out, &result.report(truth.as_ref()))
}

fn parse_list(flag: &str, value: &str) -> CliResult<Vec<u32>> {
    harness::parse_range(value).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn distinct<T: PartialEq + Copy>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn experiment(
    n: Option<String>,
    leaks: Option<String>,
    trials: Option<u64>,
    seed: Option<u64>,
    mode: Option<ModeArg>,
    config: Option<&Path>,
    out: Option<&Path>,
) -> CliResult {
    let from_file = match config {
        Some(path) => harness::parse_config(&read_text(path)?)?,
        None => Vec::new(),
    };
    let ns = match (n, from_file.is_empty()) {
        (Some(v), _) => parse_list("n", &v)?,
        (None, false) => distinct(from_file.iter().map(|c| c.n as u32)),
        (None, true) => return Err(CliError::Usage("experiment needs --n or --config".into())),
    };
    let ls = match (leaks, from_file.is_empty()) {
        (Some(v), _) => parse_list("N", &v)?,
        (None, false) => distinct(from_file.iter().map(|c| c.leaks)),
        (None, true) => return Err(CliError::Usage("experiment needs --N or --config".into())),
    };
    let mut template = from_file
        .first()
        .cloned()
        .unwrap_or_else(|| ExperimentConfig::new(7, 1, harness::DEFAULT_TRIALS, 0));
    if let Some(t) = trials {
        template.trials = t;
    }
    if let Some(s) = seed {
        template.seed = s;
    }
    if let Some(m) = mode {
        template.mode = match m {
            ModeArg::Strict => RecoveryMode::StrictSingleton,
            ModeArg::Guess => RecoveryMode::RandomGuess,
        };
    }
    let configs: Vec<ExperimentConfig> = ns
        .iter()
        .flat_map(|&n| {
            let template = &template;
            ls.iter()
                .map(move |&l| ExperimentConfig { n: n as usize, leaks: l, ..template.clone() })
        })
        .collect();
    for c in &configs {
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    emit(out, &harness::sweep(&configs)?)
}
