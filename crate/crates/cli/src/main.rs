use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lanfl::harness::{
    compare_runs, format_comparison, load_config, run_experiment, run_sweep, RunLog, OUTPUT_ROOT_ENV,
};
use lanfl::Error;

/// Simulate WAN and LAN-aware federated learning runs.
#[derive(Debug, Parser)]
#[command(name = "lanfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write config.json, rounds.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (takes precedence over the config and the
        /// environment).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cartesian product of a parameter grid, one directory per run.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// JSON object mapping dotted config paths to lists of values.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare finished runs at a target accuracy; the first is the baseline.
    Compare {
        /// Target accuracy, as a fraction (0.8) or a percentage (80).
        #[arg(long = "target-acc")]
        target_acc: f64,
        #[arg(required = true, num_args = 1..)]
        dirs: Vec<PathBuf>,
    },
    /// Parse and validate a config without running it.
    ValidateConfig { path: PathBuf },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        Failure::Config(Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    })
}

fn load(path: &Path) -> Result<lanfl::harness::RunConfig, Failure> {
    load_config(path).map_err(|e| match e {
        e @ Error::Io { .. } => Failure::Config(e),
        e => e.into(),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = load(&config)?;
            if let Some(seed) = seed {
                cfg = cfg.with_seed(seed);
            }
            let (log, dir) = run_experiment(&cfg, out.as_deref())?;
            let s = &log.summary;
            println!(
                "{}: {} rounds, {:.2} h, {:.2} GiB WAN, ${:.2}{} -> {}",
                s.name,
                s.rounds,
                s.clock_hours,
                s.wan_traffic_gb,
                s.cost_usd,
                s.accuracy.map_or_else(String::new, |a| format!(", accuracy {:.2}%", 100.0 * a)),
                dir.display()
            );
        }
        Command::Sweep { config, grid, out } => {
            let cfg = load(&config)?;
            let grid = read(&grid)?;
            let root = out.unwrap_or_else(|| {
                std::env::var_os(OUTPUT_ROOT_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("runs"))
                    .join(&cfg.name)
            });
            for (log, dir) in run_sweep(&cfg, &grid, &root)? {
                println!("{}: {} rounds -> {}", log.summary.name, log.summary.rounds, dir.display());
            }
        }
        Command::Compare { target_acc, dirs } => {
            let target = if target_acc > 1.0 { target_acc / 100.0 } else { target_acc };
            let logs = dirs
                .iter()
                .map(|d| RunLog::read_from(d))
                .collect::<lanfl::Result<Vec<_>>>()?;
            let rows = compare_runs(&logs, target)?;
            print!("{}", format_comparison(&rows, target));
        }
        Command::ValidateConfig { path } => {
            let cfg = load(&path)?;
            println!("{}: ok ({:?}, {} cloud rounds)", path.display(), cfg.protocol, cfg.params.cloud_rounds);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
