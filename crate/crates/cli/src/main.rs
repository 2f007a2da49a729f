//! fsqkd: command line front end for the b92 simulation crate.
//!
//! Five subcommands: `session` runs the photon-level protocol, `attack`
//! runs it against an eavesdropper and reports the observable
//! signatures, `reconcile` repairs a noisy key pair from bit files,
//! `linkbudget` evaluates satellite scenarios, and `otp` spends
//! reconciled key as a Vernam pad.
//!
//! Exit codes: 0 on success, 1 for configuration or input problems,
//! 2 for runtime failures such as a reconciliation that did not
//! converge. Reports go to --out (written atomically) or stdout.

mod bits;
mod config;
mod report;

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fsqkd_core::adversary::run_attacked_session;
use fsqkd_core::linkbudget::evaluate;
use fsqkd_core::protocol::{measure_ber, run_session, run_session_traced, SessionConfig};
use fsqkd_core::reconciliation::{reconcile_2d, OneTimePad};
use fsqkd_core::validate::ValidationErrors;

use report::{RunManifest, VERSION};

#[derive(Parser)]
#[command(name = "fsqkd", version, about = "Free-space B92 key distribution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a full key exchange session.
    Session(SessionArgs),
    /// Rerun a session with an eavesdropper on the line and compare.
    Attack(AttackArgs),
    /// Correct the errors between two raw key files.
    Reconcile(ReconcileArgs),
    /// Evaluate a ground-to-satellite link budget.
    Linkbudget(LinkbudgetArgs),
    /// Encrypt or decrypt a bit file against a one-time pad (XOR is
    /// its own inverse, so one command serves both directions).
    Otp(OtpArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SessionFormat {
    /// Full report with raw keys and statistics.
    Json,
    /// Per-pulse trace, one row per transmitted pulse.
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BudgetFormat {
    /// Aligned table on stdout.
    Text,
    /// The same numbers as a machine-readable report.
    Json,
}

#[derive(Args)]
struct SessionArgs {
    /// JSON config; omitted fields take the built-in 950 m defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed; identical config and seed give
    /// byte-identical output.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: SessionFormat,
    /// Parallel workers; worker w runs with seed + w and results are
    /// concatenated in worker order.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

#[derive(Args)]
struct ReconcileArgs {
    /// Alice's raw key as a '0'/'1' text file.
    #[arg(long)]
    alice: PathBuf,
    /// Bob's raw key, same length.
    #[arg(long)]
    bob: PathBuf,
    /// JSON block config; defaults to 8x8 blocks, 2 passes.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the shuffle seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the corrected, privacy-trimmed key bits.
    #[arg(long)]
    key_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LinkbudgetArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report target; the table still prints to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: BudgetFormat,
}

#[derive(Args)]
struct OtpArgs {
    /// Pad bits, e.g. the --key-out file of a reconcile run.
    #[arg(long)]
    key: PathBuf,
    /// Message or ciphertext bits.
    #[arg(long)]
    input: PathBuf,
    /// First pad bit to spend; must not step back over spent key.
    #[arg(long, default_value_t = 0)]
    offset: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    /// Bad config, bad input files, impossible parameters. Exit 1.
    Config(String),
    /// The run itself failed, e.g. reconciliation did not converge.
    /// Exit 2.
    Runtime(String),
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ValidationErrors> for CliError {
    fn from(e: ValidationErrors) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    };
    process::exit(code);
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Session(args) => run_session_cmd(args),
        Command::Attack(args) => run_attack_cmd(args),
        Command::Reconcile(args) => run_reconcile_cmd(args),
        Command::Linkbudget(args) => run_linkbudget_cmd(args),
        Command::Otp(args) => run_otp_cmd(args),
    }
}

fn read_config_text(path: &Option<PathBuf>) -> Result<Option<String>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => fs::read_to_string(p)
            .map(Some)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display()))),
    }
}

fn read_bits_file(path: &Path) -> Result<Vec<bool>, CliError> {
    bits::read_bits(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn path_string(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref().map(|p| p.display().to_string())
}

/// Report to --out via temp-and-rename, or to stdout.
fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => report::write_atomic(path, bytes)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}"))),
    }
}

/// Runs `work` once per worker seed on its own thread and returns the
/// outcomes in worker order.
fn fan_out<T, F>(config: &SessionConfig, jobs: u32, work: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(SessionConfig) -> Result<T, CliError> + Sync,
{
    let results: Vec<Result<T, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                let work = &work;
                let mut worker_config = *config;
                worker_config.seed = config.seed.wrapping_add(u64::from(w));
                scope.spawn(move || work(worker_config))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    });
    results.into_iter().collect()
}

fn run_session_cmd(args: SessionArgs) -> Result<(), CliError> {
    let text = read_config_text(&args.config)?;
    let session = config::session_config(text.as_deref(), args.seed)?;

    if args.format == SessionFormat::Csv {
        if args.jobs != 1 {
            return Err(CliError::Config(
                "the per-pulse csv trace is single-job; drop --jobs or use --format json"
                    .to_string(),
            ));
        }
        let (_, trace) = run_session_traced(&session)?;
        return emit(&args.out, report::trace_csv(&trace).as_bytes());
    }

    let outcomes = fan_out(&session, args.jobs, |worker| {
        let result = run_session(&worker)?;
        Ok(report::SessionOutcome::new(worker.seed, &result))
    })?;

    let full = report::SessionReport {
        version: VERSION,
        invocation: RunManifest {
            command: "session",
            config_path: path_string(&args.config),
            output_path: path_string(&args.out),
            seed_override: args.seed,
            format: "json",
        },
        config: (&session).into(),
        results: outcomes,
    };
    emit(&args.out, &report::to_json_bytes(&full))
}

fn run_attack_cmd(args: AttackArgs) -> Result<(), CliError> {
    let text = read_config_text(&args.config)?;
    let (session, attack) = config::attack_config(text.as_deref(), args.seed)?;

    let outcomes = fan_out(&session, args.jobs, |worker| {
        let baseline = run_session(&worker)?;
        let attacked = run_attacked_session(&worker, &attack)?;
        Ok(report::AttackWorkerOutcome::new(worker.seed, &baseline, &attacked))
    })?;

    let full = report::AttackReport {
        version: VERSION,
        invocation: RunManifest {
            command: "attack",
            config_path: path_string(&args.config),
            output_path: path_string(&args.out),
            seed_override: args.seed,
            format: "json",
        },
        config: (&session).into(),
        attack: (&attack).into(),
        results: outcomes,
    };
    emit(&args.out, &report::to_json_bytes(&full))
}

fn run_reconcile_cmd(args: ReconcileArgs) -> Result<(), CliError> {
    let text = read_config_text(&args.config)?;
    let block = config::block_config(text.as_deref(), args.seed)?;
    let alice = read_bits_file(&args.alice)?;
    let bob = read_bits_file(&args.bob)?;

    let raw_ber = measure_ber(&alice, &bob).map_err(|e| CliError::Config(e.to_string()))?;
    let mut transcript = Vec::new();
    let result = reconcile_2d(&alice, &bob, &block, &mut transcript)
        .map_err(|e| CliError::Config(e.to_string()))?;

    if let Some(key_out) = &args.key_out {
        report::write_atomic(key_out, bits::format_bits(&result.corrected_key).as_bytes())
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", key_out.display())))?;
    }

    let full = report::ReconcileReport::new(
        RunManifest {
            command: "reconcile",
            config_path: path_string(&args.config),
            output_path: path_string(&args.out),
            seed_override: args.seed,
            format: "json",
        },
        &block,
        &args.alice,
        &args.bob,
        alice.len(),
        raw_ber,
        &result,
        transcript.len(),
    );
    emit(&args.out, &report::to_json_bytes(&full))?;

    if result.converged {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "reconciliation did not converge after {} passes; residual error estimate {}",
            block.passes, result.residual_error_estimate
        )))
    }
}

fn run_linkbudget_cmd(args: LinkbudgetArgs) -> Result<(), CliError> {
    let text = read_config_text(&args.config)?;
    let (scenario, background) = config::link_budget_config(text.as_deref())?;
    let budget = evaluate(&scenario, &background)?;

    let full = report::LinkBudgetRunReport {
        version: VERSION,
        invocation: RunManifest {
            command: "linkbudget",
            config_path: path_string(&args.config),
            output_path: path_string(&args.out),
            seed_override: None,
            format: match args.format {
                BudgetFormat::Text => "text",
                BudgetFormat::Json => "json",
            },
        },
        scenario: (&scenario).into(),
        background: (&background).into(),
        report: (&budget).into(),
    };

    match (&args.out, args.format) {
        (Some(path), _) => {
            // The file gets the machine-readable report either way;
            // the table stays on stdout for the person running it.
            report::write_atomic(path, &report::to_json_bytes(&full))
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            print!("{}", report::budget_table(&budget));
            Ok(())
        }
        (None, BudgetFormat::Json) => emit(&None, &report::to_json_bytes(&full)),
        (None, BudgetFormat::Text) => {
            print!("{}", report::budget_table(&budget));
            Ok(())
        }
    }
}

fn run_otp_cmd(args: OtpArgs) -> Result<(), CliError> {
    let key = read_bits_file(&args.key)?;
    let input = read_bits_file(&args.input)?;

    let mut pad = OneTimePad::new(key);
    pad.skip_to(args.offset).map_err(|e| CliError::Config(e.to_string()))?;
    let output = pad.vernam_encrypt(&input).map_err(|e| CliError::Config(e.to_string()))?;

    emit(&args.out, bits::format_bits(&output).as_bytes())
}
