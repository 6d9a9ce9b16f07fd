use std::path::PathBuf;
use std::process::ExitCode;

use byzcode_cli::{cmd_check, cmd_run, RunArgs};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "byzcode",
    version,
    about = "Coded Byzantine-resilient gradient aggregation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on the configured task and write metrics.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides task.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Size of the worker thread pool (results do not depend on it).
        #[arg(long)]
        threads: Option<usize>,
        /// Record wall-clock phase timings instead of zeros.
        #[arg(long)]
        timings: bool,
    },
    /// Report whether (P, s, r_c) is a feasible mechanism.
    Check {
        #[arg(short = 'P', long = "workers")]
        workers: usize,
        #[arg(short = 's', long = "adversaries")]
        s: usize,
        #[arg(long = "r-c", alias = "r_c", visible_alias = "compression")]
        r_c: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            threads,
            timings,
        } => {
            let args = RunArgs {
                config,
                out,
                seed,
                threads,
                timings,
            };
            match cmd_run(&args) {
                Ok(summary) => {
                    println!(
                        "{} iterations, final loss {:e}, located correctly in {}/{} rounds",
                        summary.iterations,
                        summary.final_loss,
                        summary.rounds_located_correct,
                        summary.iterations
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
        Command::Check { workers, s, r_c } => {
            let report = cmd_check(workers, s, r_c);
            println!("{}", report.text);
            if report.feasible {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
