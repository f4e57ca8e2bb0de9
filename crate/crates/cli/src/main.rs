//! `cmjlab`: configuration-driven simulations and verification reports.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cmj_core::report::Verdict;

const EXIT_CONFIG: u8 = 64;

#[derive(Parser)]
#[command(name = "cmjlab", version, about = "Monte Carlo checks for CMJ chronological forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(short, long, global = true, default_value = "cmjlab.toml")]
    config: PathBuf,
    /// Worker threads; overrides CMJ_WORKERS and the config file.
    #[arg(short, long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides the config file.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Dump the Lukasiewicz, height and contour paths of one forest.
    Simulate,
    /// Estimate the regularity assumptions on the birth process.
    CheckAssumptions,
    /// Tail of the offspring count.
    Tail,
    /// Laplace transform of the rescaled walk at time 1.
    Laplace,
    /// Law of the data at the first weak ladder epoch.
    LadderLaw,
    /// Joint tail of the first ladder age and height.
    JointTail,
    /// Heights and reflected walk against the composed ladder processes.
    Identity,
    /// Finite-dimensional laws of heights and contour against the stable limit.
    Fdd,
    /// Growth of the rescaled walk for the counterexample.
    Counterexample,
    /// Dump paths of the reflected stable limit.
    LimitSample,
    /// Every test listed in the configuration.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::CheckAssumptions => "check-assumptions",
            Command::Tail => "tail",
            Command::Laplace => "laplace",
            Command::LadderLaw => "ladder-law",
            Command::JointTail => "joint-tail",
            Command::Identity => "identity",
            Command::Fdd => "fdd",
            Command::Counterexample => "counterexample",
            Command::LimitSample => "limit-sample",
            Command::All => "all",
        }
    }
}

fn env_u64(name: &str) -> Result<Option<u64>, String> {
    match std::env::var(name) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{name}={v} is not an integer")),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut loaded = match config::load(&cli.config) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let (seed, env_workers) = match (env_u64("CMJ_SEED"), env_u64("CMJ_WORKERS")) {
        (Ok(s), Ok(w)) => (s, w),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(s) = seed {
        loaded.config.seed = s;
    }
    let workers = cli
        .workers
        .or(env_workers.map(|w| w as usize))
        .or(loaded.config.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        eprintln!("configuration error: workers must be positive");
        return ExitCode::from(EXIT_CONFIG);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .expect("thread pool is built once");

    let dir = cli.output.clone().unwrap_or_else(|| loaded.config.output_dir.clone());
    let started = run::started();
    let mut out = match run::Output::new(&dir, &loaded.sha256, loaded.config.seed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let tests = match cli.command {
        Command::All => run::suite(&loaded),
        c => vec![c.name().to_string()],
    };
    for t in &tests {
        match run::run_test(t, &loaded, &mut out) {
            Ok(()) => {}
            Err(e @ run::RunError::Setup { .. }) => {
                eprintln!("configuration error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
        }
    }
    match out.finish(cli.command.name(), workers, started) {
        Ok(v) => ExitCode::from(match v {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
