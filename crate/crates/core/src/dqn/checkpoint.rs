//! Versioned JSON checkpoint for `f32` Q-networks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Gradients, Layer, QNetwork};
use super::optim::{AdamW, AdamWConfig};
use crate::env::StateVariant;
use crate::error::CheckpointError;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub steps: u64,
    pub first_weights: Vec<Vec<f32>>,
    pub first_biases: Vec<Vec<f32>>,
    pub second_weights: Vec<Vec<f32>>,
    pub second_biases: Vec<Vec<f32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub created_utc: String,
    pub config_digest: String,
    pub encoding_variant: StateVariant,
    pub layer_dims: Vec<usize>,
    /// Per layer, row-major `outputs × inputs`.
    pub weights: Vec<Vec<f32>>,
    pub biases: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer_state: Option<OptimizerState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_state: Option<serde_json::Value>,
}

/// Transposes a row-major `rows × cols` block.
fn transpose(data: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Weights in file order (`outputs × inputs`) and biases, per layer.
fn split(layers: &[Layer<f32>]) -> (Vec<Vec<f32>>, Vec<Vec<f32>>) {
    layers
        .iter()
        .map(|l| (transpose(&l.weights, l.inputs, l.outputs), l.biases.clone()))
        .unzip()
}

impl Checkpoint {
    pub fn new(
        net: &QNetwork<f32>,
        variant: StateVariant,
        config_digest: impl Into<String>,
        created_utc: impl Into<String>,
        optimizer: Option<&AdamW<f32>>,
    ) -> Self {
        let (weights, biases) = split(net.layers());
        let optimizer_state = optimizer.map(|opt| {
            let (first_weights, first_biases) = split(&opt.first_moments().layers);
            let (second_weights, second_biases) = split(&opt.second_moments().layers);
            OptimizerState {
                config: opt.config,
                steps: opt.steps(),
                first_weights,
                first_biases,
                second_weights,
                second_biases,
            }
        });
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            created_utc: created_utc.into(),
            config_digest: config_digest.into(),
            encoding_variant: variant,
            layer_dims: net.dims(),
            weights,
            biases,
            optimizer_state,
            rng_state: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims.first().copied().unwrap_or(0)
    }

    pub fn network(&self) -> Result<QNetwork<f32>, CheckpointError> {
        let n = self.layer_dims.len().saturating_sub(1);
        if n == 0 || self.weights.len() != n || self.biases.len() != n {
            return Err(CheckpointError::Malformed(format!(
                "{} layer dims but {} weight and {} bias arrays",
                self.layer_dims.len(),
                self.weights.len(),
                self.biases.len()
            )));
        }
        let layers = self
            .layer_dims
            .windows(2)
            .zip(self.weights.iter().zip(&self.biases))
            .map(|(d, (w, b))| {
                if w.len() != d[0] * d[1] {
                    return Err(CheckpointError::Malformed(format!(
                        "weight array of length {} for a {}×{} layer",
                        w.len(),
                        d[1],
                        d[0]
                    )));
                }
                Ok(Layer {
                    inputs: d[0],
                    outputs: d[1],
                    weights: transpose(w, d[1], d[0]),
                    biases: b.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        QNetwork::from_layers(layers).map_err(|e| CheckpointError::Malformed(e.to_string()))
    }

    pub fn optimizer(&self, net: &QNetwork<f32>) -> Option<AdamW<f32>> {
        let s = self.optimizer_state.as_ref()?;
        let mut opt = AdamW::new(net, s.config);
        let restore = |g: &mut Gradients<f32>, w: &[Vec<f32>], b: &[Vec<f32>]| {
            for ((l, w), b) in g.layers.iter_mut().zip(w).zip(b) {
                if w.len() == l.weights.len() && b.len() == l.biases.len() {
                    l.weights = transpose(w, l.outputs, l.inputs);
                    l.biases.clone_from(b);
                }
            }
        };
        restore(&mut opt.first, &s.first_weights, &s.first_biases);
        restore(&mut opt.second, &s.second_weights, &s.second_biases);
        opt.steps = s.steps;
        Some(opt)
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a checkpoint, refusing any `format_version` other than the current one.
    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| CheckpointError::Malformed("missing format_version".into()))?;
        if version != u64::from(CHECKPOINT_FORMAT_VERSION) {
            return Err(CheckpointError::UnsupportedVersion(version as u32));
        }
        let ckpt: Checkpoint = serde_json::from_value(value)?;
        ckpt.network()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
