//! The softmax-weighted estimator: one hidden neuron per representative.
//!
//! `ŷ(z) = Σ_i o_i · y(z_i)` where `o` is the softmax of the activations
//! `a_i = w_i·f(z, z_i) + b_i`. The estimate is a convex combination of the
//! representative deltas, so it can never leave their range.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::metamodel::features::FeatureConfig;
use crate::portfolio::VaContract;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metamodel {
    pub representatives: Vec<VaContract>,
    /// Representative deltas in original (unnormalized) units.
    pub deltas: Vec<f64>,
    pub features: FeatureConfig,
    /// Row-major `n × feature_count` weight matrix.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    /// `max |delta|` used to normalize targets during training (1 if all
    /// deltas are zero). Stored so training can resume in the same units.
    pub target_scale: f64,
}

impl Metamodel {
    /// Zero-initialized model: uniform softmax, so every estimate is the
    /// plain mean of the representative deltas.
    pub fn uniform(
        representatives: Vec<VaContract>,
        deltas: Vec<f64>,
        features: FeatureConfig,
    ) -> Result<Self> {
        if representatives.is_empty() || representatives.len() != deltas.len() {
            return Err(Error::InvalidConfig(format!(
                "metamodel needs matching non-empty representatives and deltas (got {} and {})",
                representatives.len(),
                deltas.len()
            )));
        }
        features.validate()?;
        let fc = features.feature_count();
        let n = representatives.len();
        let target_scale = deltas.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(f64::MIN_POSITIVE);
        Ok(Metamodel {
            representatives,
            deltas,
            features,
            weights: vec![0.0; n * fc],
            biases: vec![0.0; n],
            target_scale,
        })
    }

    pub fn rep_count(&self) -> usize {
        self.representatives.len()
    }

    /// Parameters flattened as `[weights (row-major), biases]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.biases);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let nw = self.weights.len();
        debug_assert_eq!(params.len(), nw + self.biases.len());
        self.weights.copy_from_slice(&params[..nw]);
        self.biases.copy_from_slice(&params[nw..]);
    }

    /// Softmax outputs for a query whose per-representative features are
    /// already laid out row-major in `feats` (`n × feature_count`).
    pub(crate) fn outputs_from_features(&self, feats: &[f64]) -> Vec<f64> {
        let fc = self.features.feature_count();
        let n = self.rep_count();
        debug_assert_eq!(feats.len(), n * fc);
        let mut acts = vec![0.0; n];
        for i in 0..n {
            let w = &self.weights[i * fc..(i + 1) * fc];
            let f = &feats[i * fc..(i + 1) * fc];
            acts[i] = self.biases[i] + w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        }
        // Max-subtraction: the largest exponent is exactly 1, so the
        // normalizer is ≥ 1 and finite for any activations.
        let peak = acts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in &mut acts {
            *a = (*a - peak).exp();
            total += *a;
        }
        for a in &mut acts {
            *a /= total;
        }
        acts
    }

    fn query_features(&self, query: &VaContract) -> Vec<f64> {
        let fc = self.features.feature_count();
        let mut feats = vec![0.0; self.rep_count() * fc];
        for (i, rep) in self.representatives.iter().enumerate() {
            self.features
                .build_into(query, rep, &mut feats[i * fc..(i + 1) * fc]);
        }
        feats
    }

    /// Delta estimate (original units) and the softmax outputs behind it.
    pub fn forward(&self, query: &VaContract) -> (f64, Vec<f64>) {
        let o = self.outputs_from_features(&self.query_features(query));
        let y = o.iter().zip(&self.deltas).map(|(o, y)| o * y).sum();
        (y, o)
    }

    pub fn predict(&self, query: &VaContract) -> f64 {
        self.forward(query).0
    }

    /// Per-contract estimates; read-only over the model, evaluation order
    /// does not affect the values.
    pub fn predict_portfolio(&self, queries: &[VaContract]) -> Vec<f64> {
        queries.par_iter().map(|q| self.predict(q)).collect()
    }
}

const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    model: Metamodel,
}

pub fn save_model(path: &Path, model: &Metamodel) -> Result<()> {
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Metamodel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported model schema version {} (expected {})",
            file.schema_version, MODEL_SCHEMA_VERSION
        )));
    }
    file.model.features.validate()?;
    Ok(file.model)
}
