//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "mechanism": {"P": 12, "s": 2, "r_c": 2, "d": 8},
//!   "task": {"n": 200, "m": 8, "noise_sigma": 0.1, "gamma": 0.3,
//!            "iterations": 200, "seed": 7},
//!   "attack": {"kind": "reverse_gradient", "param": -100.0,
//!              "adversaries": [1, 7]},
//!   "weights": {"scheme": "equispaced"}
//! }
//! ```
//!
//! Adversaries are listed with 1-based worker indices. Instead of a list,
//! `count` draws that many workers at random: once for the whole run, or
//! afresh every iteration with `"resample": true`.

use std::fmt;
use std::path::Path;

use byzcode::codec::{max_tolerable_adversaries, nearest_feasible_workers};
use byzcode::sim::{gen_dataset, SimError, TrainTask};
use byzcode::{
    validate_config, AttackKind, AttackSpec, CodecError, MechanismConfig, WeightScheme, WeightSet,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    #[error("{source}{hint}")]
    Mechanism {
        #[source]
        source: CodecError,
        hint: Hint,
    },
}

/// Remediation text appended to feasibility errors.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Hint(pub Option<String>);

impl fmt::Display for Hint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Some(text) => write!(f, " ({text})"),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mechanism: MechanismSection,
    pub task: TaskSection,
    pub attack: AttackSection,
    #[serde(default)]
    pub weights: WeightsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    #[serde(rename = "P")]
    pub workers: usize,
    pub s: usize,
    pub r_c: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub n: usize,
    pub m: usize,
    pub noise_sigma: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackName {
    None,
    ReverseGradient,
    Constant,
    Alie,
    GaussianNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub kind: AttackName,
    #[serde(default)]
    pub param: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversaries: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub resample: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub scheme: WeightScheme,
}

/// Everything a run needs, fully validated.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub cfg: MechanismConfig,
    pub task: TrainTask,
    pub attack: AttackSpec,
    pub weights: WeightSet,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.to_string();
            // serde reports a missing key at its parent; name the key itself
            let field = match missing_field(&message) {
                Some(name) if path == "." => name.to_string(),
                Some(name) => format!("{path}.{name}"),
                None => path,
            };
            ConfigError::Parse { field, message }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every section and generates the dataset.
    pub fn build(&self) -> Result<Experiment, ConfigError> {
        let mech = &self.mechanism;
        let cfg = validate_config(mech.workers, mech.s, mech.r_c, mech.d).map_err(|source| {
            let hint = feasibility_hint(&source, mech.workers, mech.s, mech.r_c);
            ConfigError::Mechanism { source, hint }
        })?;
        if self.task.m != mech.d {
            return Err(ConfigError::Invalid {
                field: "task.m",
                message: format!(
                    "model dimension {} must equal mechanism.d = {}",
                    self.task.m, mech.d
                ),
            });
        }
        if !self.task.gamma.is_finite() {
            return Err(ConfigError::Invalid {
                field: "task.gamma",
                message: format!("{} is not finite", self.task.gamma),
            });
        }
        let dataset = gen_dataset(
            self.task.seed,
            self.task.n,
            self.task.m,
            self.task.noise_sigma,
        )
        .map_err(|e| ConfigError::Invalid {
            field: "task",
            message: match e {
                SimError::InvalidTask(m) => m,
                other => other.to_string(),
            },
        })?;
        let task = TrainTask {
            dataset,
            gamma: self.task.gamma,
            iterations: self.task.iterations,
            seed: self.task.seed,
        };
        let attack = self.attack.to_spec(&cfg, self.task.seed)?;
        let weights = WeightSet::generate(&cfg, self.weights.scheme);
        Ok(Experiment {
            cfg,
            task,
            attack,
            weights,
        })
    }
}

impl AttackSection {
    fn to_spec(&self, cfg: &MechanismConfig, seed: u64) -> Result<AttackSpec, ConfigError> {
        let kind = match self.kind {
            AttackName::None => return Ok(AttackSpec::none()),
            AttackName::ReverseGradient => AttackKind::ReverseGradient(self.param),
            AttackName::Constant => AttackKind::Constant(self.param),
            AttackName::Alie => AttackKind::Alie(self.param),
            AttackName::GaussianNoise => AttackKind::GaussianNoise(self.param),
        };
        let spec = match (&self.adversaries, self.count) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid {
                    field: "attack",
                    message: "give either `adversaries` or `count`, not both".into(),
                })
            }
            (None, None) => {
                return Err(ConfigError::Invalid {
                    field: "attack",
                    message: "one of `adversaries` or `count` is required".into(),
                })
            }
            (Some(list), None) => {
                if self.resample {
                    return Err(ConfigError::Invalid {
                        field: "attack.resample",
                        message: "resampling needs `count` instead of a fixed list".into(),
                    });
                }
                let mut zero_based = Vec::with_capacity(list.len());
                for &k in list {
                    if k == 0 || k > cfg.workers() {
                        return Err(ConfigError::Invalid {
                            field: "attack.adversaries",
                            message: format!(
                                "worker {k} out of range 1..={} (indices are 1-based)",
                                cfg.workers()
                            ),
                        });
                    }
                    zero_based.push(k - 1);
                }
                AttackSpec::fixed(kind, zero_based)
            }
            (None, Some(count)) => {
                let resampled = AttackSpec::resampled(kind, count);
                if self.resample {
                    resampled
                } else {
                    resampled.validate(cfg).map_err(|e| ConfigError::Invalid {
                        field: "attack.count",
                        message: e.to_string(),
                    })?;
                    AttackSpec::fixed(kind, resampled.adversaries(cfg, seed, 0))
                }
            }
        };
        spec.validate(cfg).map_err(|e| ConfigError::Invalid {
            field: "attack",
            message: e.to_string(),
        })?;
        Ok(spec)
    }
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

/// Suggests a worker count that makes `(s, r_c)` feasible.
pub fn feasibility_hint(err: &CodecError, workers: usize, s: usize, rc: usize) -> Hint {
    match err {
        CodecError::Infeasible { .. } | CodecError::NotDivisible { .. } => {
            let p = nearest_feasible_workers(workers, s, rc);
            let mut text = format!("nearest feasible P = {p} for s = {s}, r_c = {rc}");
            let max_s = max_tolerable_adversaries(workers, rc);
            if max_s >= 0 && s as i64 > max_s {
                text.push_str(&format!("; with P = {workers} at most s = {max_s}"));
            }
            Hint(Some(text))
        }
        _ => Hint(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "mechanism": {"P": 12, "s": 2, "r_c": 2, "d": 4},
        "task": {"n": 50, "m": 4, "noise_sigma": 0.1, "gamma": 0.2, "iterations": 5, "seed": 3},
        "attack": {"kind": "constant", "param": -100.0, "adversaries": [1, 12]}
    }"#;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.weights.scheme, WeightScheme::Equispaced);
        let e = c.build().unwrap();
        assert_eq!(e.cfg.redundancy(), 6);
        assert_eq!(
            e.attack,
            AttackSpec::fixed(AttackKind::Constant(-100.0), vec![0, 11])
        );
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace(r#""gamma": 0.2, "#, "");
        match ExperimentConfig::from_json(&text) {
            Err(ConfigError::Parse { field, .. }) => assert_eq!(field, "task.gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_is_located() {
        let text = MINIMAL.replace(r#""r_c": 2"#, r#""r_c": "two""#);
        match ExperimentConfig::from_json(&text) {
            Err(ConfigError::Parse { field, .. }) => assert_eq!(field, "mechanism.r_c"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_many_adversaries_cites_bound_and_hint() {
        let text = MINIMAL.replace(r#""s": 2"#, r#""s": 6"#);
        let err = ExperimentConfig::from_json(&text)
            .unwrap()
            .build()
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(P - r_c)/2"), "{msg}");
        assert!(msg.contains("nearest feasible P = 14"), "{msg}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = MINIMAL.replace(r#""m": 4"#, r#""m": 5"#);
        let err = ExperimentConfig::from_json(&text)
            .unwrap()
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("task.m"));
    }

    #[test]
    fn adversary_indices_are_one_based() {
        let text = MINIMAL.replace("[1, 12]", "[0]");
        assert!(ExperimentConfig::from_json(&text).unwrap().build().is_err());
        let text = MINIMAL.replace("[1, 12]", "[13]");
        assert!(ExperimentConfig::from_json(&text).unwrap().build().is_err());
    }

    #[test]
    fn count_without_resample_is_fixed() {
        let text = MINIMAL.replace(r#""adversaries": [1, 12]"#, r#""count": 2"#);
        let e = ExperimentConfig::from_json(&text).unwrap().build().unwrap();
        match e.attack.selection {
            byzcode::AdversarySelection::Fixed(v) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace(
            r#""adversaries": [1, 12]"#,
            r#""count": 2, "resample": true"#,
        );
        let e = ExperimentConfig::from_json(&text).unwrap().build().unwrap();
        assert_eq!(
            e.attack.selection,
            byzcode::AdversarySelection::Resampled(2)
        );
    }
}
