//! Run configuration file: one JSON document with `network`, `reward`, `dqn`,
//! `eval` and `bench` sections. Every key is optional; omitted keys take the
//! preset's value, unknown keys are rejected with their line number.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::env::{Env, RewardMode, RewardWeights, StateEncoding, StateVariant};
use crate::error::EnvError;
use crate::netmodel::NetworkConfig;
use crate::policies::PolicyKind;
use crate::trainer::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Desk,
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(format!("unknown preset `{other}`; expected desk or paper")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { episodes: 50, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub policies: Vec<PolicyKind>,
    pub ue_counts: Vec<usize>,
    pub sims: usize,
    pub seed: u64,
    pub oracle: bool,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            policies: vec![PolicyKind::DqnEs1, PolicyKind::DqnEs2, PolicyKind::Heuristic, PolicyKind::Baseline],
            ue_counts: vec![10, 20, 30, 50],
            sims: 50,
            seed: 0,
            oracle: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub reward: RewardWeights,
    pub dqn: TrainConfig,
    pub eval: EvalSection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            network: NetworkConfig::default(),
            reward: RewardWeights::default(),
            dqn: match preset {
                Preset::Desk => TrainConfig::desk(),
                Preset::Paper => TrainConfig::paper(),
            },
            eval: EvalSection::default(),
            bench: BenchSection::default(),
        }
    }

    pub fn load(path: &Path, preset: Preset) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, preset)
    }

    /// Overlays the document on `preset`. A `reward.mode` alone selects that
    /// mode's coefficients; explicit coefficients override them.
    pub fn parse(text: &str, preset: Preset) -> Result<Self, ConfigError> {
        let parse_err = |e: serde_json::Error| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        };
        // Typed pass first: it reports unknown keys and type errors with positions.
        serde_json::from_str::<RunConfig>(text).map_err(parse_err)?;
        let user: Value = serde_json::from_str(text).map_err(parse_err)?;

        let mut base = Self::preset(preset);
        if let Some(mode) = user.pointer("/reward/mode") {
            let mode: RewardMode = serde_json::from_value(mode.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            base.reward = RewardWeights::preset(mode);
        }
        let mut merged = serde_json::to_value(&base).expect("config serialises");
        overlay(&mut merged, &user);
        let cfg: RunConfig = serde_json::from_value(merged).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.network
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.dqn.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.bench.ue_counts.is_empty() {
            return Err(ConfigError::Invalid("bench.ue_counts must not be empty".into()));
        }
        Ok(())
    }

    /// Pretty JSON of the fully resolved configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 over the compact resolved JSON, hex encoded.
    pub fn digest(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    pub fn horizon(&self) -> usize {
        self.dqn.steps_per_episode
    }

    pub fn network_for(&self, num_ues: usize) -> NetworkConfig {
        self.network.clone().with_num_ues(num_ues)
    }

    pub fn env_for(&self, variant: StateVariant, num_ues: usize) -> Result<Env, EnvError> {
        let net = self.network_for(num_ues);
        let enc = StateEncoding::for_config(&net, variant);
        Env::new(net, enc, self.reward, self.horizon())
    }
}

/// Copies every key of `top` into `base`, descending one level into objects
/// so that a section may name only the keys it changes.
fn overlay(base: &mut Value, top: &Value) {
    let (Value::Object(b), Value::Object(t)) = (base, top) else {
        return;
    };
    for (section, value) in t {
        match (b.get_mut(section), value) {
            (Some(Value::Object(dst)), Value::Object(src)) => {
                for (k, v) in src {
                    dst.insert(k.clone(), v.clone());
                }
            }
            _ => {
                b.insert(section.clone(), value.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_preset() {
        assert_eq!(RunConfig::parse("{}", Preset::Desk).unwrap(), RunConfig::preset(Preset::Desk));
        assert_eq!(RunConfig::parse("{}", Preset::Paper).unwrap().dqn.episodes, 30_000);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "{\n  \"network\": {\n    \"num_ues\": 10,\n    \"num_uez\": 3\n  }\n}";
        match RunConfig::parse(text, Preset::Desk) {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("num_uez"));
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn sections_merge_key_by_key() {
        let cfg = RunConfig::parse(r#"{"dqn": {"episodes": 12}, "network": {"num_ues": 20}}"#, Preset::Paper).unwrap();
        assert_eq!(cfg.dqn.episodes, 12);
        assert_eq!(cfg.dqn.checkpoint_every, TrainConfig::paper().checkpoint_every);
        assert_eq!(cfg.network.num_ues, 20);
        assert_eq!(cfg.network.capacity_max, 10);
    }

    #[test]
    fn reward_mode_selects_its_preset() {
        let cfg = RunConfig::parse(r#"{"reward": {"mode": "paper_literal"}}"#, Preset::Desk).unwrap();
        assert_eq!(cfg.reward, RewardWeights::paper_literal());
        let cfg = RunConfig::parse(r#"{"reward": {"mode": "paper_literal", "w_on": 2.0}}"#, Preset::Desk).unwrap();
        assert_eq!(cfg.reward.w_off, -5.0);
        assert_eq!(cfg.reward.w_on, 2.0);
    }

    #[test]
    fn semantic_errors_are_invalid() {
        assert!(matches!(
            RunConfig::parse(r#"{"dqn": {"gamma": 1.5}}"#, Preset::Desk),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(RunConfig::parse("{", Preset::Desk), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.dqn.seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn resolved_json_parses_back() {
        let cfg = RunConfig::parse(r#"{"bench": {"sims": 3}}"#, Preset::Desk).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_json(), Preset::Paper).unwrap(), cfg);
    }
}
