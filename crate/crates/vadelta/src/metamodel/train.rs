//! Mini-batch training with Nesterov accelerated gradient.
//!
//! Targets are normalized by the largest absolute representative delta
//! before any loss or gradient is computed, and estimates are rescaled on
//! the way out; every quantity in this module's histories is in those
//! normalized units. The whole loop is a pure function of (data, config):
//! batch draws come from a dedicated seeded stream and nothing else is
//! random.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::metamodel::features::FeatureConfig;
use crate::metamodel::model::Metamodel;
use crate::metamodel::stopping::{detect_stopping, rel_err_stop};
use crate::portfolio::VaContract;
use crate::seeds::stage_rng;
use crate::Result;

/// The momentum schedule steps up every 50 iterations through
/// `1 − 2^{−1−⌊log₂ k⌋}` with `k = ⌊t/50⌋ + 1`: 0.5 for the first 50
/// iterations, 0.75 from 50, 0.875 from 150, doubling the approach to 1 each
/// time `k` reaches a power of two, clamped at `mu_max`.
pub const MOMENTUM_EPOCH: u64 = 50;

pub fn momentum_coeff(t: u64, mu_max: f64) -> f64 {
    debug_assert!(t >= 1);
    let k = t / MOMENTUM_EPOCH + 1;
    let mu = 1.0 - 0.5f64.powi(1 + k.ilog2() as i32);
    mu.min(mu_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub mu_max: f64,
    /// Iterations between validation-MSE records (I).
    pub record_interval: u64,
    /// Moving-average window over records (W̄).
    pub smoothing_window: usize,
    pub poly_degree: usize,
    /// Records examined for a rising trend (W).
    pub trend_window: usize,
    /// Aggregate relative-error threshold (δ).
    pub rel_err_threshold: f64,
    pub max_iterations: u64,
    pub seed: u64,
    /// Optional initial parameters `[weights, biases]` from a previous run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1.0,
            batch_size: 20,
            mu_max: 0.99,
            record_interval: 50,
            smoothing_window: 10,
            poly_degree: 6,
            trend_window: 4,
            rel_err_threshold: 0.005,
            max_iterations: 100_000,
            seed: 0,
            warm_start: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive (got {})", self.learning_rate));
        }
        if self.batch_size == 0 || self.record_interval == 0 {
            return bad("batch size and record interval must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mu_max) {
            return bad(format!("mu_max must lie in [0, 1] (got {})", self.mu_max));
        }
        if self.smoothing_window == 0 || self.trend_window < 2 {
            return bad("smoothing window must be ≥ 1 and trend window ≥ 2".into());
        }
        if self.poly_degree == 0 || self.poly_degree % 2 != 0 {
            return bad(format!("polynomial degree must be even and positive (got {})", self.poly_degree));
        }
        if !(self.rel_err_threshold > 0.0) {
            return bad(format!("relative-error threshold must be positive (got {})", self.rel_err_threshold));
        }
        Ok(())
    }
}

/// Why training ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// The fitted validation trend turned upward, completing the stop
    /// condition (the error criterion already held at the previous record).
    TrendUShape,
    /// The aggregate relative error dropped below δ while the trend was
    /// already rising.
    RelErrBelowDelta,
    MaxIterations,
    None,
}

/// One record of the training history, in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: u64,
    pub train_mse: f64,
    pub val_mse: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub iteration: u64,
    pub velocity: Vec<f64>,
    pub records: Vec<HistoryRecord>,
    /// Fitted trend values at the record stamps from the last stopping
    /// check (empty until enough records exist).
    pub trend: Vec<f64>,
    pub stop_reason: StopReason,
}

/// The three MC-valued portfolios training runs against.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub representatives: &'a [VaContract],
    pub representative_deltas: &'a [f64],
    pub training: &'a [VaContract],
    pub training_deltas: &'a [f64],
    pub validation: &'a [VaContract],
    pub validation_deltas: &'a [f64],
}

impl TrainingData<'_> {
    fn validate(&self) -> Result<()> {
        let pairs = [
            ("representative", self.representatives.len(), self.representative_deltas.len()),
            ("training", self.training.len(), self.training_deltas.len()),
            ("validation", self.validation.len(), self.validation_deltas.len()),
        ];
        for (name, contracts, deltas) in pairs {
            if contracts == 0 || contracts != deltas {
                return Err(Error::InvalidConfig(format!(
                    "{name} portfolio must be non-empty with one delta per contract (got {contracts} and {deltas})"
                )));
            }
        }
        Ok(())
    }
}

/// Features of every (contract, representative) pair plus normalized
/// targets, laid out for repeated batch evaluation.
struct FeatureCache {
    feats: Vec<f64>,
    targets_norm: Vec<f64>,
    block: usize,
}

impl FeatureCache {
    fn build(model: &Metamodel, contracts: &[VaContract], deltas: &[f64]) -> Self {
        let fc = model.features.feature_count();
        let block = model.rep_count() * fc;
        let mut feats = vec![0.0; contracts.len() * block];
        for (k, c) in contracts.iter().enumerate() {
            for (i, rep) in model.representatives.iter().enumerate() {
                let at = k * block + i * fc;
                model.features.build_into(c, rep, &mut feats[at..at + fc]);
            }
        }
        let targets_norm = deltas.iter().map(|y| y / model.target_scale).collect();
        FeatureCache { feats, targets_norm, block }
    }

    fn item(&self, k: usize) -> (&[f64], f64) {
        (&self.feats[k * self.block..(k + 1) * self.block], self.targets_norm[k])
    }

    fn len(&self) -> usize {
        self.targets_norm.len()
    }
}

/// Normalized prediction and softmax outputs from cached features.
fn forward_cached(model: &Metamodel, feats: &[f64]) -> (f64, Vec<f64>) {
    let o = model.outputs_from_features(feats);
    let y: f64 = o.iter().zip(&model.deltas).map(|(o, y)| o * y).sum();
    (y / model.target_scale, o)
}

fn mean_squared_error(model: &Metamodel, cache: &FeatureCache) -> f64 {
    let mut sum = 0.0;
    for k in 0..cache.len() {
        let (feats, target) = cache.item(k);
        let (y, _) = forward_cached(model, feats);
        sum += (y - target).powi(2);
    }
    sum / cache.len() as f64
}

/// Mini-batch loss `E = (1/2|B|) Σ (ŷ − y)²` in normalized units.
pub fn batch_loss(model: &Metamodel, batch: &[VaContract], targets: &[f64]) -> f64 {
    assert_eq!(batch.len(), targets.len());
    let s = model.target_scale;
    let sum: f64 = batch
        .iter()
        .zip(targets)
        .map(|(c, y)| (model.predict(c) / s - y / s).powi(2))
        .sum();
    sum / (2.0 * batch.len() as f64)
}

fn gradient_impl<'a>(
    model: &Metamodel,
    items: impl Iterator<Item = (&'a [f64], f64)>,
    batch_len: usize,
) -> Vec<f64> {
    let fc = model.features.feature_count();
    let n = model.rep_count();
    let s = model.target_scale;
    let inv_m = 1.0 / batch_len as f64;
    let mut grad = vec![0.0; n * fc + n];
    for (feats, target) in items {
        let (y_hat, o) = forward_cached(model, feats);
        let r = (y_hat - target) * inv_m;
        for i in 0..n {
            // ∂E/∂a_i for this sample; the weight rows pick up the feature
            // vector, the bias the raw term.
            let ga = r * o[i] * (model.deltas[i] / s - y_hat);
            let row = &mut grad[i * fc..(i + 1) * fc];
            for (g, f) in row.iter_mut().zip(&feats[i * fc..(i + 1) * fc]) {
                *g += ga * f;
            }
            grad[n * fc + i] += ga;
        }
    }
    grad
}

/// Analytic gradient of `batch_loss` with respect to `[weights, biases]`.
pub fn gradient(model: &Metamodel, batch: &[VaContract], targets: &[f64]) -> Vec<f64> {
    assert_eq!(batch.len(), targets.len());
    let fc = model.features.feature_count();
    let block = model.rep_count() * fc;
    let mut feats = vec![0.0; batch.len() * block];
    for (k, c) in batch.iter().enumerate() {
        for (i, rep) in model.representatives.iter().enumerate() {
            let at = k * block + i * fc;
            model.features.build_into(c, rep, &mut feats[at..at + fc]);
        }
    }
    let s = model.target_scale;
    let items = batch
        .iter()
        .enumerate()
        .map(|(k, _)| (&feats[k * block..(k + 1) * block], targets[k] / s));
    gradient_impl(model, items, batch.len())
}

/// One Nesterov step: the gradient is evaluated at the lookahead point
/// `θ + μv`, then `v ← μv − ε·g` and `θ ← θ + v`.
pub fn nag_step(
    params: &mut [f64],
    velocity: &mut [f64],
    mu: f64,
    learning_rate: f64,
    grad_at: impl FnOnce(&[f64]) -> Vec<f64>,
) {
    debug_assert_eq!(params.len(), velocity.len());
    let lookahead: Vec<f64> = params
        .iter()
        .zip(velocity.iter())
        .map(|(p, v)| p + mu * v)
        .collect();
    let g = grad_at(&lookahead);
    debug_assert_eq!(g.len(), params.len());
    for ((p, v), gi) in params.iter_mut().zip(velocity.iter_mut()).zip(&g) {
        *v = mu * *v - learning_rate * gi;
        *p += *v;
    }
}

pub fn train(
    data: &TrainingData,
    features: FeatureConfig,
    cfg: &TrainConfig,
) -> Result<(Metamodel, TrainState)> {
    train_impl(data, features, cfg, true)
}

/// Training loop with the early-stopping machinery optionally disabled —
/// the auto-tuner probes fixed-length runs and must not be cut short.
pub(crate) fn train_impl(
    data: &TrainingData,
    features: FeatureConfig,
    cfg: &TrainConfig,
    stop_enabled: bool,
) -> Result<(Metamodel, TrainState)> {
    cfg.validate()?;
    data.validate()?;
    let mut model = Metamodel::uniform(
        data.representatives.to_vec(),
        data.representative_deltas.to_vec(),
        features,
    )?;
    let dim = model.weights.len() + model.biases.len();
    if let Some(start) = &cfg.warm_start {
        if start.len() != dim {
            return Err(Error::InvalidConfig(format!(
                "warm start has {} parameters, model needs {dim}",
                start.len()
            )));
        }
        model.set_params(start);
    }

    let train_cache = FeatureCache::build(&model, data.training, data.training_deltas);
    let val_cache = FeatureCache::build(&model, data.validation, data.validation_deltas);
    let batch_size = cfg.batch_size.min(train_cache.len());

    let mut params = model.params();
    let mut velocity = vec![0.0; dim];
    let mut rng: ChaCha8Rng = stage_rng(cfg.seed, "train-batches");
    let mut state = TrainState {
        iteration: 0,
        velocity: Vec::new(),
        records: Vec::new(),
        trend: Vec::new(),
        stop_reason: StopReason::MaxIterations,
    };
    let mut prev_event = false;

    for t in 1..=cfg.max_iterations {
        state.iteration = t;
        let mu = momentum_coeff(t, cfg.mu_max);
        let batch = rand::seq::index::sample(&mut rng, train_cache.len(), batch_size);
        nag_step(&mut params, &mut velocity, mu, cfg.learning_rate, |look| {
            model.set_params(look);
            gradient_impl(
                &model,
                batch.iter().map(|k| train_cache.item(k)),
                batch.len(),
            )
        });
        model.set_params(&params);

        if t % cfg.record_interval == 0 {
            let train_mse = mean_squared_error(&model, &train_cache);
            let val_mse = mean_squared_error(&model, &val_cache);
            if !(train_mse.is_finite() && val_mse.is_finite()) {
                return Err(Error::TrainingDiverged { iteration: t });
            }
            state.records.push(HistoryRecord { iteration: t, train_mse, val_mse, mu });

            if stop_enabled {
                let series: Vec<f64> = state.records.iter().map(|r| r.val_mse).collect();
                let (event, trend) = detect_stopping(&series, cfg);
                if !trend.is_empty() {
                    state.trend = trend;
                }
                if event && rel_err_stop(&model, data.validation, data.validation_deltas, cfg.rel_err_threshold)? {
                    // Name the condition that completed the conjunction: if
                    // the trend had already turned at the previous record,
                    // the error criterion is what newly held.
                    state.stop_reason = if prev_event {
                        StopReason::RelErrBelowDelta
                    } else {
                        StopReason::TrendUShape
                    };
                    break;
                }
                prev_event = event;
            }
        }
    }
    state.velocity = velocity;
    Ok((model, state))
}
