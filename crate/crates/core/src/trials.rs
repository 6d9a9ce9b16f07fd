//! Seeded Monte Carlo trials of the full encode/inject/decode path.
//!
//! Each trial draws a configuration from a plan, random gradients at a random
//! scale, an attack model and up to `s` adversaries at random positions, then
//! checks the recovered sum and the located set against ground truth.
//! Trials are independent and run through [`Exec`].

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::adversary::{corrupted_columns, inject, AttackKind, AttackSpec, InjectContext};
use crate::codec::{
    build_allocation, encode_all_with, GradientMatrix, MechanismConfig, WeightScheme, WeightSet,
};
use crate::decoder::{decode_with, derive_probes, DecoderOptions};
use crate::exec::Exec;
use crate::rng;

const DOMAIN_TRIAL: u64 = 0x7472_6961_6c00_0005;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialCase {
    pub cfg: MechanismConfig,
    pub scheme: WeightScheme,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialPlan {
    pub cases: Vec<TrialCase>,
    pub attacks: Vec<AttackKind>,
    /// When false every trial is attack-free.
    pub inject_noise: bool,
    pub decoder: DecoderOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub cfg: MechanismConfig,
    pub scheme: WeightScheme,
    pub attack: Option<AttackKind>,
    pub corrupted: Vec<usize>,
    pub located: Vec<usize>,
    /// `||u - G 1|| / ||G 1||`, infinite on decode failure.
    pub relative_error: f64,
    pub error: Option<String>,
    pub worst_block_condition: f64,
}

impl TrialOutcome {
    pub fn detection_correct(&self) -> bool {
        self.error.is_none() && self.located == self.corrupted
    }

    pub fn recovered(&self, tolerance: f64) -> bool {
        self.relative_error <= tolerance
    }
}

pub fn run_trial(plan: &TrialPlan, seed: u64) -> TrialOutcome {
    let mut rng = rng::stream(seed, DOMAIN_TRIAL, 0);
    let case = plan.cases.choose(&mut rng).expect("plan has cases").clone();
    let cfg = case.cfg;
    let weights = WeightSet::generate(&cfg, case.scheme);
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let mut gradients = GradientMatrix::zeros(&cfg);
    for k in 0..cfg.workers() {
        let col: Vec<f64> = (0..cfg.dim())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        gradients.set_column(k, &col).expect("length matches");
    }
    let z = encode_all_with(
        &gradients,
        &build_allocation(&cfg),
        &weights,
        &cfg,
        Exec::Sequential,
    )
    .expect("shapes match");

    let (received, attack) = if plan.inject_noise && !plan.attacks.is_empty() {
        let kind = match *plan.attacks.choose(&mut rng).expect("non-empty") {
            // noise is relative to the gradient scale so it stays far above
            // the floating-point floor
            AttackKind::GaussianNoise(sigma) => AttackKind::GaussianNoise(sigma * scale),
            other => other,
        };
        let count = rng.random_range(0..=cfg.max_adversaries());
        let mut adversaries = index::sample(&mut rng, cfg.workers(), count).into_vec();
        adversaries.sort_unstable();
        let spec = AttackSpec::fixed(kind, adversaries);
        let ctx = InjectContext {
            cfg: &cfg,
            seed,
            iteration: 0,
        };
        let (r, _) = inject(&z, &spec, ctx).expect("spec within budget");
        (r, Some(kind))
    } else {
        (z.clone(), None)
    };
    let corrupted = corrupted_columns(&z, &received);
    let probes = derive_probes(&cfg, seed, 0);
    let opts = DecoderOptions {
        exec: Exec::Sequential,
        ..plan.decoder
    };
    let truth = gradients.total();
    match decode_with(&cfg, &weights, &received, &probes, &opts) {
        Ok(report) => {
            let err: f64 = report
                .sum
                .iter()
                .zip(&truth)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
            TrialOutcome {
                seed,
                cfg,
                scheme: case.scheme,
                attack,
                corrupted,
                located: report.located(),
                relative_error: if norm > 0.0 { err / norm } else { err },
                error: None,
                worst_block_condition: report
                    .groups
                    .iter()
                    .map(|g| g.block_condition)
                    .fold(0.0, f64::max),
            }
        }
        Err(e) => TrialOutcome {
            seed,
            cfg,
            scheme: case.scheme,
            attack,
            corrupted,
            located: Vec::new(),
            relative_error: f64::INFINITY,
            error: Some(e.to_string()),
            worst_block_condition: f64::NAN,
        },
    }
}

/// Runs trials with seeds `first_seed .. first_seed + count`.
pub fn run_trials(
    plan: &TrialPlan,
    first_seed: u64,
    count: usize,
    exec: Exec,
) -> Vec<TrialOutcome> {
    exec.map(count, |i| run_trial(plan, first_seed + i as u64))
}
