//! `run`: executes one experiment and writes `metrics.csv` and
//! `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use byzcode::sim::{run_training, RoundRecord, RunMetrics, SimError, SimOptions};
use byzcode::{DecoderOptions, Exec};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Experiment, ExperimentConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation failed: {0}")]
    Simulation(#[source] SimError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

impl RunError {
    /// Process exit code: 2 for decode and attack failures during the run,
    /// 1 for everything detected before it starts or while writing output.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Simulation(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub timings: bool,
}

/// One line of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub loss: f64,
    pub recovery_error: f64,
    pub n_located: usize,
    pub located_correct: u8,
    pub t_encode_us: u64,
    pub t_decode_us: u64,
}

impl From<&RoundRecord> for MetricsRow {
    fn from(r: &RoundRecord) -> Self {
        Self {
            iteration: r.iteration,
            loss: r.loss,
            recovery_error: r.recovery_error,
            n_located: r.located.len(),
            located_correct: u8::from(r.located_correct),
            t_encode_us: r.t_encode_us,
            t_decode_us: r.t_decode_us,
        }
    }
}

/// Worker-by-iteration detection counts: a worker is positive when its
/// column was altered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub encode_us: f64,
    pub inject_us: f64,
    pub decode_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub iterations: usize,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub max_recovery_error: f64,
    pub rounds_located_correct: usize,
    pub mean_phase_times: PhaseTimes,
    pub detection: Confusion,
}

impl Summary {
    pub fn from_metrics(metrics: &RunMetrics, workers: usize, seed: u64) -> Self {
        let rounds = &metrics.rounds;
        let mut detection = Confusion::default();
        for r in rounds {
            for k in 0..workers {
                match (r.corrupted.contains(&k), r.located.contains(&k)) {
                    (true, true) => detection.true_positive += 1,
                    (false, true) => detection.false_positive += 1,
                    (true, false) => detection.false_negative += 1,
                    (false, false) => detection.true_negative += 1,
                }
            }
        }
        let mean = |f: fn(&RoundRecord) -> u64| {
            if rounds.is_empty() {
                0.0
            } else {
                rounds.iter().map(|r| f(r) as f64).sum::<f64>() / rounds.len() as f64
            }
        };
        Self {
            iterations: rounds.len(),
            seed,
            initial_loss: metrics.initial_loss,
            final_loss: metrics.final_loss(),
            max_recovery_error: rounds.iter().map(|r| r.recovery_error).fold(0.0, f64::max),
            rounds_located_correct: rounds.iter().filter(|r| r.located_correct).count(),
            mean_phase_times: PhaseTimes {
                encode_us: mean(|r| r.t_encode_us),
                inject_us: mean(|r| r.t_inject_us),
                decode_us: mean(|r| r.t_decode_us),
            },
            detection,
        }
    }
}

/// Loads the config and applies the seed override.
pub fn prepare(args: &RunArgs) -> Result<Experiment, RunError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.task.seed = seed;
    }
    Ok(config.build()?)
}

/// Runs the training loop, inside a dedicated pool when `threads` is given.
pub fn simulate(
    exp: &Experiment,
    threads: Option<usize>,
    timings: bool,
) -> Result<RunMetrics, RunError> {
    let opts = SimOptions {
        decoder: DecoderOptions::default(),
        record_timings: timings,
        exec: Exec::default(),
    };
    let go = || {
        run_training(&exp.task, &exp.cfg, &exp.weights, &exp.attack, &opts)
            .map_err(RunError::Simulation)
    };
    match threads {
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunError::ThreadPool(e.to_string()))?
            .install(go),
        #[cfg(not(feature = "parallel"))]
        Some(_) => go(),
        None => go(),
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_metrics(path: &Path, metrics: &RunMetrics) -> Result<(), RunError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    for r in &metrics.rounds {
        writer
            .serialize(MetricsRow::from(r))
            .map_err(|e| output_error(path, e))?;
    }
    writer.flush().map_err(|e| output_error(path, e))
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| output_error(path, e))?;
    fs::write(path, text + "\n").map_err(|e| output_error(path, e))
}

pub fn cmd_run(args: &RunArgs) -> Result<Summary, RunError> {
    let exp = prepare(args)?;
    log::info!("running {} for {} iterations", exp.cfg, exp.task.iterations);
    let metrics = simulate(&exp, args.threads, args.timings)?;
    fs::create_dir_all(&args.out).map_err(|e| output_error(&args.out, e))?;
    write_metrics(&args.out.join("metrics.csv"), &metrics)?;
    let summary = Summary::from_metrics(&metrics, exp.cfg.workers(), exp.task.seed);
    write_summary(&args.out.join("summary.json"), &summary)?;
    Ok(summary)
}
