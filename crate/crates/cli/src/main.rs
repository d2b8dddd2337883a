//! Command line front end: each subcommand loads a JSON config, checks that
//! the config's mode matches the subcommand, runs the study, and writes the
//! report tables next to a plain-text summary.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid config or arguments,
//! 3 resource limit exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use thermcap::experiments::{emit_report, parse_config, run_experiment, ExperimentConfig, Mode};
use thermcap::Error;

#[derive(Parser)]
#[command(
    name = "thermcap",
    version,
    about = "Thermal capacity, anisotropic dimension, and hitting studies for sheet-type random fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize discrete thermal energy over a refinement ladder.
    Capacity(StudyArgs),
    /// Box-counting dimensions of the factors and their anisotropic product.
    Dimension(StudyArgs),
    /// Exponent calculus: hitting dichotomy and the critical order bracket.
    GammaStar(StudyArgs),
    /// Monte Carlo hitting rates over a shrinking target schedule.
    Hit(StudyArgs),
    /// Field probe of a capacity zero/positive transition.
    Codimension(StudyArgs),
    /// Run a named list of studies from one config.
    FullBattery(StudyArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the seed everywhere in the config (including sub-studies).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Defaults to $THERMCAP_OUT, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the global pool. Defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn expected_mode(command: &Command) -> (Mode, &StudyArgs) {
    match command {
        Command::Capacity(a) => (Mode::Capacity, a),
        Command::Dimension(a) => (Mode::Dimension, a),
        Command::GammaStar(a) => (Mode::GammaStar, a),
        Command::Hit(a) => (Mode::Hit, a),
        Command::Codimension(a) => (Mode::Codimension, a),
        Command::FullBattery(a) => (Mode::FullBattery, a),
    }
}

fn override_seed(cfg: &mut ExperimentConfig, seed: u64) {
    cfg.seed = seed;
    for (_, sub) in &mut cfg.studies {
        override_seed(sub, seed);
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (mode, args) = expected_mode(&cli.command);

    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot size thread pool: {e}")))?;
    }

    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text)?;
    if cfg.mode != mode {
        return Err(Error::InvalidInput(format!(
            "config mode is {} but the {} subcommand was invoked",
            cfg.mode.as_str(),
            mode.as_str()
        )));
    }
    if let Some(seed) = args.seed {
        override_seed(&mut cfg, seed);
    }

    let out_dir = args
        .out
        .clone()
        .or_else(|| std::env::var_os("THERMCAP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let run = run_experiment(&cfg)?;
    let written = emit_report(&run.bundle, &out_dir)?;
    for line in &run.bundle.summary {
        println!("{line}");
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                Error::Validation(msgs) => {
                    eprintln!("error: config failed validation with {} problem(s):", msgs.len());
                    for msg in msgs {
                        eprintln!("  - {msg}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(err.exit_code())
        }
    }
}
