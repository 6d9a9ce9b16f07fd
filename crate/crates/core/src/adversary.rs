//! Byzantine attack models applied in encoded space.
//!
//! An adversarial worker replaces its honest `d_c`-vector with the attack
//! output, so the noise column is `attack - z`. Attacks never see the probe.

use std::collections::BTreeSet;

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{EncodedMatrix, MechanismConfig};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("attack names {count} adversaries but the mechanism tolerates s = {max}")]
    TooManyInSpec { count: usize, max: usize },
    #[error("adversary index {index} out of range for P = {workers}")]
    IndexOutOfRange { index: usize, workers: usize },
    #[error("invalid attack parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum AttackKind {
    /// Send `kappa` times the honest encoding.
    ReverseGradient(f64),
    /// Send `c * 1`.
    Constant(f64),
    /// "A little is enough": mean plus `z` standard deviations of the honest
    /// columns in the adversary's group.
    Alie(f64),
    /// Add `N(0, sigma^2)` noise to every coordinate.
    GaussianNoise(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarySelection {
    /// Zero-based worker indices, the same every iteration.
    Fixed(Vec<usize>),
    /// `count` workers drawn uniformly without replacement each iteration.
    Resampled(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub selection: AdversarySelection,
}

impl AttackSpec {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::Constant(0.0),
            selection: AdversarySelection::Fixed(Vec::new()),
        }
    }

    pub fn fixed(kind: AttackKind, adversaries: Vec<usize>) -> Self {
        Self {
            kind,
            selection: AdversarySelection::Fixed(adversaries),
        }
    }

    pub fn resampled(kind: AttackKind, count: usize) -> Self {
        Self {
            kind,
            selection: AdversarySelection::Resampled(count),
        }
    }

    pub fn count(&self) -> usize {
        match &self.selection {
            AdversarySelection::Fixed(v) => v.iter().collect::<BTreeSet<_>>().len(),
            AdversarySelection::Resampled(n) => *n,
        }
    }

    pub fn validate(&self, cfg: &MechanismConfig) -> Result<(), AttackError> {
        if self.count() > cfg.max_adversaries() {
            return Err(AttackError::TooManyInSpec {
                count: self.count(),
                max: cfg.max_adversaries(),
            });
        }
        if let AdversarySelection::Fixed(v) = &self.selection {
            if let Some(&index) = v.iter().find(|&&i| i >= cfg.workers()) {
                return Err(AttackError::IndexOutOfRange {
                    index,
                    workers: cfg.workers(),
                });
            }
        }
        let param = match self.kind {
            AttackKind::ReverseGradient(x) | AttackKind::Constant(x) | AttackKind::Alie(x) => x,
            AttackKind::GaussianNoise(sigma) => {
                if sigma < 0.0 {
                    return Err(AttackError::InvalidParameter(format!(
                        "sigma = {sigma} is negative"
                    )));
                }
                sigma
            }
        };
        if !param.is_finite() {
            return Err(AttackError::InvalidParameter(format!(
                "{param} is not finite"
            )));
        }
        Ok(())
    }

    /// Sorted adversary set for `iteration`.
    pub fn adversaries(&self, cfg: &MechanismConfig, seed: u64, iteration: u64) -> Vec<usize> {
        match &self.selection {
            AdversarySelection::Fixed(v) => {
                let set: BTreeSet<usize> = v.iter().copied().collect();
                set.into_iter().collect()
            }
            AdversarySelection::Resampled(n) => {
                let mut rng = rng::stream(
                    seed,
                    rng::DOMAIN_ATTACK,
                    rng::pair_id(iteration, u32::MAX as u64),
                );
                let mut picked = index::sample(&mut rng, cfg.workers(), *n).into_vec();
                picked.sort_unstable();
                picked
            }
        }
    }
}

/// Seed and iteration used for adversary resampling and random noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InjectContext<'a> {
    pub cfg: &'a MechanismConfig,
    pub seed: u64,
    pub iteration: u64,
}

pub fn reverse_gradient(z_honest: &[f64], kappa: f64) -> Vec<f64> {
    z_honest.iter().map(|z| kappa * z).collect()
}

pub fn constant_attack(compressed_dim: usize, c: f64) -> Vec<f64> {
    vec![c; compressed_dim]
}

/// Coordinatewise `mean + z * std` of `columns`, with the population
/// standard deviation (divisor `m`).
pub fn alie(columns: &[&[f64]], z: f64) -> Vec<f64> {
    assert!(!columns.is_empty(), "ALIE needs at least one honest column");
    let m = columns.len() as f64;
    let dim = columns[0].len();
    (0..dim)
        .map(|i| {
            let mean = columns.iter().map(|c| c[i]).sum::<f64>() / m;
            let var = columns.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / m;
            mean + z * var.sqrt()
        })
        .collect()
}

/// Replaces adversarial columns of `z` with attack outputs. Returns the
/// received matrix and the adversary set.
pub fn inject(
    z: &EncodedMatrix,
    spec: &AttackSpec,
    ctx: InjectContext<'_>,
) -> Result<(EncodedMatrix, Vec<usize>), AttackError> {
    let cfg = ctx.cfg;
    spec.validate(cfg)?;
    let adversaries = spec.adversaries(cfg, ctx.seed, ctx.iteration);
    let mut received = z.clone();
    for &k in &adversaries {
        let honest = z.column(k);
        let out = match spec.kind {
            AttackKind::ReverseGradient(kappa) => reverse_gradient(honest, kappa),
            AttackKind::Constant(c) => constant_attack(z.compressed_dim(), c),
            AttackKind::Alie(zs) => {
                let group = cfg.group_of(k);
                let peers: Vec<&[f64]> = cfg
                    .group_members(group)
                    .filter(|i| adversaries.binary_search(i).is_err())
                    .map(|i| z.column(i))
                    .collect();
                alie(&peers, zs)
            }
            AttackKind::GaussianNoise(sigma) => {
                let mut rng = rng::stream(
                    ctx.seed,
                    rng::DOMAIN_ATTACK,
                    rng::pair_id(ctx.iteration, k as u64),
                );
                let normal = Normal::new(0.0, sigma).expect("sigma validated");
                honest.iter().map(|v| v + normal.sample(&mut rng)).collect()
            }
        };
        received.column_mut(k).copy_from_slice(&out);
    }
    Ok((received, adversaries))
}

/// Relative size below which a column change counts as rounding.
pub const ROUNDING_TOLERANCE: f64 = 1e-12;

/// Workers whose received column differs from the honest one by more than
/// rounding: `max |r_k - z_k| > ROUNDING_TOLERANCE * max |Z|`.
///
/// Some attacks land on the honest value up to rounding (for example ALIE on
/// symmetric weights, where `mean + std` of the peers can equal an honest
/// entry); those workers carry no noise and are not counted.
pub fn corrupted_columns(honest: &EncodedMatrix, received: &EncodedMatrix) -> Vec<usize> {
    let scale = honest.matrix().amax();
    let floor = ROUNDING_TOLERANCE * scale;
    (0..honest.workers())
        .filter(|&k| {
            honest
                .column(k)
                .iter()
                .zip(received.column(k))
                .any(|(z, r)| !((z - r).abs() <= floor))
        })
        .collect()
}
