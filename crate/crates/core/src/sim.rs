//! Deterministic parameter-server simulation on a synthetic least-squares
//! problem.
//!
//! Each round: draw a batch of `P` samples (one per worker slot), compute the
//! per-sample gradients, encode, let the adversaries corrupt their columns,
//! decode, and step `w <- w - (gamma / P) u`. Because the decoder returns the
//! exact gradient sum, an attacked run follows the attack-free trajectory.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::adversary::{corrupted_columns, inject, AttackError, AttackSpec, InjectContext};
use crate::codec::{
    build_allocation, encode_all_with, CodecError, GradientMatrix, MechanismConfig, WeightSet,
};
use crate::decoder::{decode_with, derive_probes, DecodeError, DecoderOptions};
use crate::exec::Exec;
use crate::rng;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("iteration {iteration}: {source}")]
    Attack {
        iteration: usize,
        #[source]
        source: AttackError,
    },
    #[error("iteration {iteration}: {source}")]
    Decode {
        iteration: usize,
        #[source]
        source: DecodeError,
    },
}

/// `y = X w* + noise` with standard normal `X` and `w*`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub targets: Vec<f64>,
    pub planted: Vec<f64>,
    pub noise_sigma: f64,
}

pub fn gen_dataset(seed: u64, n: usize, m: usize, noise_sigma: f64) -> Result<Dataset, SimError> {
    if n == 0 || m == 0 {
        return Err(SimError::InvalidTask(format!(
            "need n, m >= 1 (got n={n}, m={m})"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(SimError::InvalidTask(format!(
            "noise_sigma = {noise_sigma} must be finite and >= 0"
        )));
    }
    let mut rng = rng::stream(seed, rng::DOMAIN_DATASET, 0);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let planted: Vec<f64> = (0..m).map(|_| normal()).collect();
    let features = DMatrix::from_fn(n, m, |_, _| normal());
    let clean = &features * DVector::from_column_slice(&planted);
    let targets = clean.iter().map(|v| v + noise_sigma * normal()).collect();
    Ok(Dataset {
        features,
        targets,
        planted,
        noise_sigma,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn residual(&self, w: &[f64], i: usize) -> f64 {
        let row = self.features.row(i);
        row.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() - self.targets[i]
    }

    /// Mean of `0.5 (x_i . w - y_i)^2` over the whole dataset.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| 0.5 * self.residual(w, i).powi(2))
            .sum::<f64>()
            / n as f64
    }

    /// Gradient of `0.5 (x_i . w - y_i)^2` in `w`.
    pub fn sample_gradient(&self, w: &[f64], i: usize) -> Vec<f64> {
        let e = self.residual(w, i);
        self.features.row(i).iter().map(|x| e * x).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTask {
    pub dataset: Dataset,
    pub gamma: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl TrainTask {
    /// Sample indices for each worker slot in `iteration`; without
    /// replacement when the dataset has at least `workers` rows.
    pub fn batch(&self, workers: usize, iteration: usize) -> Vec<usize> {
        let n = self.dataset.len();
        let mut rng = rng::stream(self.seed, rng::DOMAIN_BATCH, iteration as u64);
        if n >= workers {
            index::sample(&mut rng, n, workers).into_vec()
        } else {
            (0..workers).map(|_| rng.random_range(0..n)).collect()
        }
    }
}

/// Column `k` is the gradient at `w` of the sample assigned to slot `k`.
pub fn worker_gradients(
    task: &TrainTask,
    cfg: &MechanismConfig,
    w: &[f64],
    iteration: usize,
    exec: Exec,
) -> Result<GradientMatrix, SimError> {
    if task.dataset.dim() != cfg.dim() {
        return Err(SimError::InvalidTask(format!(
            "model dimension {} does not match mechanism d = {}",
            task.dataset.dim(),
            cfg.dim()
        )));
    }
    let batch = task.batch(cfg.workers(), iteration);
    let cols = exec.map(batch.len(), |k| task.dataset.sample_gradient(w, batch[k]));
    Ok(GradientMatrix::from_columns(cfg, &cols)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SimOptions {
    pub decoder: DecoderOptions,
    /// Wall-clock timings are reported as zero unless set, keeping metrics
    /// reproducible byte for byte.
    pub record_timings: bool,
    pub exec: Exec,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based.
    pub iteration: usize,
    /// Loss after this round's update.
    pub loss: f64,
    /// `||u - G 1_P||`.
    pub recovery_error: f64,
    pub located: Vec<usize>,
    /// Workers whose column was actually altered.
    pub corrupted: Vec<usize>,
    pub located_correct: bool,
    pub t_encode_us: u64,
    pub t_inject_us: u64,
    pub t_decode_us: u64,
}

fn micros(start: Option<Instant>) -> u64 {
    start.map_or(0, |s| s.elapsed().as_micros() as u64)
}

/// One encode/inject/decode/update cycle for zero-based `iteration`.
pub fn run_round(
    task: &TrainTask,
    cfg: &MechanismConfig,
    weights: &WeightSet,
    attack: &AttackSpec,
    w: &[f64],
    iteration: usize,
    opts: &SimOptions,
) -> Result<(Vec<f64>, RoundRecord), SimError> {
    let clock = || opts.record_timings.then(Instant::now);
    let gradients = worker_gradients(task, cfg, w, iteration, opts.exec)?;

    let t0 = clock();
    let z = encode_all_with(&gradients, &build_allocation(cfg), weights, cfg, opts.exec)?;
    let t_encode_us = micros(t0);

    let t0 = clock();
    let ctx = InjectContext {
        cfg,
        seed: task.seed,
        iteration: iteration as u64,
    };
    let (received, _) =
        inject(&z, attack, ctx).map_err(|source| SimError::Attack { iteration, source })?;
    let corrupted = corrupted_columns(&z, &received);
    let t_inject_us = micros(t0);

    let t0 = clock();
    let probes = derive_probes(cfg, task.seed, iteration as u64);
    let decoder = DecoderOptions {
        exec: opts.exec,
        ..opts.decoder
    };
    let report = decode_with(cfg, weights, &received, &probes, &decoder)
        .map_err(|source| SimError::Decode { iteration, source })?;
    let t_decode_us = micros(t0);

    let truth = gradients.total();
    let recovery_error = report
        .sum
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let step = task.gamma / cfg.workers() as f64;
    let next: Vec<f64> = w
        .iter()
        .zip(&report.sum)
        .map(|(wi, ui)| wi - step * ui)
        .collect();
    let located = report.located();
    let record = RoundRecord {
        iteration: iteration + 1,
        loss: task.dataset.loss(&next),
        recovery_error,
        located_correct: located == corrupted,
        located,
        corrupted,
        t_encode_us,
        t_inject_us,
        t_decode_us,
    };
    Ok((next, record))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    pub initial_loss: f64,
    pub rounds: Vec<RoundRecord>,
    /// `w_0 .. w_T`.
    pub trajectory: Vec<Vec<f64>>,
}

impl RunMetrics {
    pub fn final_loss(&self) -> f64 {
        self.rounds.last().map_or(self.initial_loss, |r| r.loss)
    }

    pub fn final_weights(&self) -> &[f64] {
        self.trajectory.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Runs `task.iterations` rounds from `w_0 = 0`.
pub fn run_training(
    task: &TrainTask,
    cfg: &MechanismConfig,
    weights: &WeightSet,
    attack: &AttackSpec,
    opts: &SimOptions,
) -> Result<RunMetrics, SimError> {
    if !task.gamma.is_finite() {
        return Err(SimError::InvalidTask(format!(
            "gamma = {} is not finite",
            task.gamma
        )));
    }
    let mut w = vec![0.0; cfg.dim()];
    let initial_loss = task.dataset.loss(&w);
    let mut rounds = Vec::with_capacity(task.iterations);
    let mut trajectory = Vec::with_capacity(task.iterations + 1);
    trajectory.push(w.clone());
    for t in 0..task.iterations {
        let (next, record) = run_round(task, cfg, weights, attack, &w, t, opts)?;
        w = next;
        trajectory.push(w.clone());
        rounds.push(record);
    }
    Ok(RunMetrics {
        initial_loss,
        rounds,
        trajectory,
    })
}
