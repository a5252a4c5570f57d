use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nfv_sched::error::{ConfigError, SimError};
use nfv_sched::experiment::{execute, execute_sweep, resolve_config, SweepSpec};
use nfv_sched::golden::run_golden;

#[derive(Parser)]
#[command(
    name = "nfv-sched",
    version,
    about = "NFV service-chaining scheduler simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment (all replications).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set V=100` or `--set scheduler.kind=p-bf`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every point of a parameter sweep.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Defaults to the sweep file's `out`, else `sweep-out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the three-server motivating example against its known outcomes.
    Golden,
}

enum Failure {
    Config(ConfigError),
    Run(SimError),
    Mismatch,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c),
            other => Failure::Run(other),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            set,
            out,
            seed,
        } => {
            let cfg = resolve_config(&config, &set, seed)?;
            let report = execute(cfg, &out)?;
            let s = &report.summary;
            println!(
                "{} replications, utilization {:.2}: time-avg cost {:.3} (±{:.3}), time-avg h {:.1}, mean response {:.2} ms",
                s.replications,
                report.scenario.utilization,
                s.time_avg_cost.mean,
                s.time_avg_cost.std,
                s.time_avg_h.mean,
                s.response_mean_ms.mean
            );
            println!("wrote {}", out.display());
        }
        Command::Sweep { spec, out } => {
            let spec = SweepSpec::load(&spec)?;
            let out = out
                .or_else(|| spec.out.clone())
                .unwrap_or_else(|| PathBuf::from("sweep-out"));
            let points = execute_sweep(&spec, &out)?;
            for p in &points {
                match &p.result {
                    Ok(s) => println!(
                        "{}={}: cost {:.3}, h {:.1}, response {:.2} ms",
                        spec.axis.name(),
                        p.value,
                        s.time_avg_cost.mean,
                        s.time_avg_h.mean,
                        s.response_mean_ms.mean
                    ),
                    Err(e) => println!("{}={}: error: {e}", spec.axis.name(), p.value),
                }
            }
            println!("wrote {}", out.join("sweep.csv").display());
        }
        Command::Golden => {
            let checks = run_golden()?;
            for c in &checks {
                println!("{c}");
            }
            if !checks.iter().all(|c| c.passed()) {
                return Err(Failure::Mismatch);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Mismatch) => {
            eprintln!("golden example mismatch");
            ExitCode::from(1)
        }
    }
}
