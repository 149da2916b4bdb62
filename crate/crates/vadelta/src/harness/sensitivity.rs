//! Sensitivity experiments: how the network's accuracy and runtime react
//! to redrawing one of its portfolios, and to shrinking their sizes.
//!
//! Portfolio-choice sweeps fix everything except the varied portfolio and
//! redraw it per realization. The size sweep iterates fixed
//! (representatives, training, validation) size triples, redrawing all
//! three portfolios per realization at those sizes. Reported runtime
//! covers training plus estimation only; the MC valuation of the drawn
//! portfolios is deliberately excluded, matching how the comparison
//! separates method time from MC time.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mc::{value_portfolio, McConfig};
use crate::metamodel::{train, FeatureConfig, TrainConfig, TrainingData};
use crate::mortality::MortalityTable;
use crate::portfolio::{sample_from_grid, sample_validation, VaContract};
use crate::seeds;
use crate::Result;

use super::compare::{
    draw_representatives, fixed_portfolios, ground_truth, mean_std, FixedPortfolios,
};
use super::config::ExperimentConfig;

/// Which input of the training pipeline the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityVariable {
    Representatives,
    Training,
    Validation,
    /// Iterate the portfolio-size triples instead of redrawing one
    /// portfolio.
    Sizes,
}

impl SensitivityVariable {
    pub fn label(&self) -> &'static str {
        match self {
            SensitivityVariable::Representatives => "representatives",
            SensitivityVariable::Training => "training",
            SensitivityVariable::Validation => "validation",
            SensitivityVariable::Sizes => "sizes",
        }
    }
}

/// The size-sweep triples (representatives, training, validation): the
/// base protocol sizes, then representatives, training, and validation
/// each reduced in two steps.
pub const SIZE_SWEEP_TRIPLES: [(usize, usize, usize); 7] = [
    (300, 200, 250),
    (250, 200, 250),
    (200, 200, 250),
    (300, 150, 250),
    (300, 100, 250),
    (300, 200, 200),
    (300, 200, 150),
];

/// One network training under one sweep setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    /// Sweep setting: the varied-portfolio name, or a size triple.
    pub setting: String,
    pub realization: usize,
    pub relative_error: f64,
    /// Training plus estimation wall time.
    pub seconds: f64,
    /// Iteration the training stopped at — the deterministic driver of
    /// the runtime.
    pub stop_iteration: u64,
}

/// Mean/STD over the realizations of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub setting: String,
    pub realizations: usize,
    pub mean_relative_error: f64,
    pub std_relative_error: f64,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub mean_stop_iteration: f64,
    pub std_stop_iteration: f64,
}

/// Everything `runSensitivity` produces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Label of the varied input.
    pub variable: String,
    pub rows: Vec<SensitivityRow>,
    pub summaries: Vec<SensitivitySummary>,
}

/// Groups rows by setting, preserving first appearance order.
fn summarize(rows: &[SensitivityRow]) -> Vec<SensitivitySummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.setting.as_str()) {
            order.push(&r.setting);
        }
    }
    order
        .into_iter()
        .map(|setting| {
            let group: Vec<&SensitivityRow> =
                rows.iter().filter(|r| r.setting == setting).collect();
            let (mean_err, std_err) = mean_std(group.iter().map(|r| r.relative_error));
            let (mean_s, std_s) = mean_std(group.iter().map(|r| r.seconds));
            let (mean_it, std_it) = mean_std(group.iter().map(|r| r.stop_iteration as f64));
            SensitivitySummary {
                setting: setting.to_string(),
                realizations: group.len(),
                mean_relative_error: mean_err,
                std_relative_error: std_err,
                mean_seconds: mean_s,
                std_seconds: std_s,
                mean_stop_iteration: mean_it,
                std_stop_iteration: std_it,
            }
        })
        .collect()
}

/// Trains the network and estimates the input portfolio, timing both
/// together. Returns (relative error, seconds, stop iteration).
#[allow(clippy::too_many_arguments)]
fn nn_run(
    cfg: &ExperimentConfig,
    features: &FeatureConfig,
    reps: &[VaContract],
    rep_deltas: &[f64],
    training: &[VaContract],
    training_deltas: &[f64],
    validation: &[VaContract],
    validation_deltas: &[f64],
    input: &[VaContract],
    truth: f64,
    seed_label: &str,
) -> Result<(f64, f64, u64)> {
    let data = TrainingData {
        representatives: reps,
        representative_deltas: rep_deltas,
        training,
        training_deltas,
        validation,
        validation_deltas,
    };
    let train_cfg = TrainConfig {
        seed: seeds::stage_seed(cfg.master_seed, seed_label),
        ..cfg.train.clone()
    };
    let start = Instant::now();
    let (model, state) = train(&data, features.clone(), &train_cfg)?;
    let estimate: f64 = model.predict_portfolio(input).iter().sum();
    let seconds = start.elapsed().as_secs_f64();
    Ok(((estimate - truth) / truth.abs(), seconds, state.iteration))
}

/// MC values a freshly drawn portfolio under a stage-labeled seed.
fn mc_deltas(
    cfg: &ExperimentConfig,
    contracts: &[VaContract],
    mortality: &MortalityTable,
    stage: &str,
) -> Result<Vec<f64>> {
    let mc = McConfig { seed: seeds::stage_seed(cfg.master_seed, stage), ..cfg.mc.clone() };
    Ok(value_portfolio(contracts, mortality, &mc)?
        .results
        .iter()
        .map(|r| r.delta)
        .collect())
}

/// Runs one sensitivity sweep. For `Representatives`, `Training`, and
/// `Validation` the named portfolio is redrawn `realizations` times with
/// everything else fixed; for `Sizes` every scaled triple of
/// [`SIZE_SWEEP_TRIPLES`] is trained `realizations` times.
pub fn run_sensitivity(
    cfg: &ExperimentConfig,
    vary: SensitivityVariable,
    realizations: usize,
) -> Result<SensitivityReport> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    if realizations == 0 {
        return Err(
            Error::InvalidConfig("realizations must be ≥ 1".into()).in_stage("config"),
        );
    }
    let mortality = cfg.mortality().map_err(|e| e.in_stage("mortality"))?;
    let fixed = fixed_portfolios(cfg).map_err(|e| e.in_stage("portfolios"))?;
    let ground = ground_truth(cfg, &fixed.input, &mortality)
        .map_err(|e| e.in_stage("mc-ground-truth"))?;
    if ground.aggregate_delta == 0.0 {
        return Err(Error::InvalidConfig(
            "ground-truth portfolio delta is zero; relative errors are undefined".into(),
        )
        .in_stage("mc-ground-truth"));
    }
    let truth = ground.aggregate_delta;
    let mc_by_id: std::collections::HashMap<u64, f64> =
        ground.results.iter().map(|r| (r.id, r.delta)).collect();
    let features = FeatureConfig::from_space(&cfg.spaces.input)
        .map_err(|e| e.in_stage("estimator-setup"))?;

    let rows = match vary {
        SensitivityVariable::Sizes => size_sweep_rows(
            cfg,
            &mortality,
            &fixed,
            &mc_by_id,
            &features,
            truth,
            realizations,
        )?,
        _ => portfolio_sweep_rows(
            cfg,
            vary,
            &mortality,
            &fixed,
            &mc_by_id,
            &features,
            truth,
            realizations,
        )?,
    };
    let summaries = summarize(&rows);
    Ok(SensitivityReport { variable: vary.label().to_string(), rows, summaries })
}

#[allow(clippy::too_many_arguments)]
fn portfolio_sweep_rows(
    cfg: &ExperimentConfig,
    vary: SensitivityVariable,
    mortality: &MortalityTable,
    fixed: &FixedPortfolios,
    mc_by_id: &std::collections::HashMap<u64, f64>,
    features: &FeatureConfig,
    truth: f64,
    realizations: usize,
) -> Result<Vec<SensitivityRow>> {
    // Baseline draws shared by every realization; the varied one is
    // replaced inside the loop.
    let base_reps = draw_representatives(cfg, 0).map_err(|e| e.in_stage("representatives"))?;
    let base_rep_deltas = mc_deltas(cfg, &base_reps, mortality, "mc-representatives-0")
        .map_err(|e| e.in_stage("mc-representatives"))?;
    let base_training_deltas = mc_deltas(cfg, &fixed.training, mortality, "mc-training")
        .map_err(|e| e.in_stage("mc-training"))?;
    let base_validation_deltas: Vec<f64> =
        fixed.validation.iter().map(|c| mc_by_id[&c.id]).collect();

    let mut rows = Vec::with_capacity(realizations);
    for k in 0..realizations {
        let stage = format!("sensitivity-{}-{k}", vary.label());
        let (reps, rep_deltas, training, training_deltas, validation, validation_deltas);
        match vary {
            SensitivityVariable::Representatives => {
                reps = sample_from_grid(
                    &cfg.spaces.representatives,
                    cfg.sizes.representatives,
                    seeds::stage_seed(cfg.master_seed, &stage),
                    3_000_000_000 + k as u64 * 1_000_000,
                )
                .map_err(|e| e.in_stage("representatives"))?;
                rep_deltas = mc_deltas(cfg, &reps, mortality, &format!("mc-{stage}"))
                    .map_err(|e| e.in_stage("mc-representatives"))?;
                (training, training_deltas) = (fixed.training.clone(), base_training_deltas.clone());
                (validation, validation_deltas) =
                    (fixed.validation.clone(), base_validation_deltas.clone());
            }
            SensitivityVariable::Training => {
                training = sample_from_grid(
                    &cfg.spaces.training,
                    cfg.sizes.training,
                    seeds::stage_seed(cfg.master_seed, &stage),
                    4_000_000_000 + k as u64 * 1_000_000,
                )
                .map_err(|e| e.in_stage("training-portfolio"))?;
                training_deltas = mc_deltas(cfg, &training, mortality, &format!("mc-{stage}"))
                    .map_err(|e| e.in_stage("mc-training"))?;
                (reps, rep_deltas) = (base_reps.clone(), base_rep_deltas.clone());
                (validation, validation_deltas) =
                    (fixed.validation.clone(), base_validation_deltas.clone());
            }
            SensitivityVariable::Validation => {
                validation = sample_validation(
                    &fixed.input,
                    cfg.sizes.validation,
                    seeds::stage_seed(cfg.master_seed, &stage),
                )
                .map_err(|e| e.in_stage("validation-portfolio"))?;
                validation_deltas = validation.iter().map(|c| mc_by_id[&c.id]).collect();
                (reps, rep_deltas) = (base_reps.clone(), base_rep_deltas.clone());
                (training, training_deltas) = (fixed.training.clone(), base_training_deltas.clone());
            }
            SensitivityVariable::Sizes => unreachable!("handled by size_sweep_rows"),
        }
        let (err, seconds, stop_iteration) = nn_run(
            cfg,
            features,
            &reps,
            &rep_deltas,
            &training,
            &training_deltas,
            &validation,
            &validation_deltas,
            &fixed.input,
            truth,
            &format!("train-{stage}"),
        )
        .map_err(|e| e.in_stage("train"))?;
        rows.push(SensitivityRow {
            setting: vary.label().to_string(),
            realization: k,
            relative_error: err,
            seconds,
            stop_iteration,
        });
    }
    Ok(rows)
}

fn scale_triple(triple: (usize, usize, usize), scale: f64) -> (usize, usize, usize) {
    let f = |x: usize| ((x as f64 * scale).round() as usize).max(1);
    (f(triple.0), f(triple.1), f(triple.2))
}

#[allow(clippy::too_many_arguments)]
fn size_sweep_rows(
    cfg: &ExperimentConfig,
    mortality: &MortalityTable,
    fixed: &FixedPortfolios,
    mc_by_id: &std::collections::HashMap<u64, f64>,
    features: &FeatureConfig,
    truth: f64,
    realizations: usize,
) -> Result<Vec<SensitivityRow>> {
    let mut rows = Vec::new();
    for (i, &base) in SIZE_SWEEP_TRIPLES.iter().enumerate() {
        let (n_reps, n_train, n_val) = scale_triple(base, cfg.size_sweep_scale);
        if n_val > fixed.input.len() {
            return Err(Error::InvalidConfig(format!(
                "scaled validation size {n_val} exceeds input portfolio size {}",
                fixed.input.len()
            ))
            .in_stage("config"));
        }
        let setting = format!("({n_reps}, {n_train}, {n_val})");
        for k in 0..realizations {
            let stage = format!("sensitivity-sizes-{i}-{k}");
            let reps = sample_from_grid(
                &cfg.spaces.representatives,
                n_reps,
                seeds::stage_seed(cfg.master_seed, &format!("{stage}-reps")),
                5_000_000_000 + (i * realizations + k) as u64 * 1_000_000,
            )
            .map_err(|e| e.in_stage("representatives"))?;
            let rep_deltas = mc_deltas(cfg, &reps, mortality, &format!("mc-{stage}-reps"))
                .map_err(|e| e.in_stage("mc-representatives"))?;
            let training = sample_from_grid(
                &cfg.spaces.training,
                n_train,
                seeds::stage_seed(cfg.master_seed, &format!("{stage}-training")),
                6_000_000_000 + (i * realizations + k) as u64 * 1_000_000,
            )
            .map_err(|e| e.in_stage("training-portfolio"))?;
            let training_deltas =
                mc_deltas(cfg, &training, mortality, &format!("mc-{stage}-training"))
                    .map_err(|e| e.in_stage("mc-training"))?;
            let validation = sample_validation(
                &fixed.input,
                n_val,
                seeds::stage_seed(cfg.master_seed, &format!("{stage}-validation")),
            )
            .map_err(|e| e.in_stage("validation-portfolio"))?;
            let validation_deltas: Vec<f64> =
                validation.iter().map(|c| mc_by_id[&c.id]).collect();

            let (err, seconds, stop_iteration) = nn_run(
                cfg,
                features,
                &reps,
                &rep_deltas,
                &training,
                &training_deltas,
                &validation,
                &validation_deltas,
                &fixed.input,
                truth,
                &format!("train-{stage}"),
            )
            .map_err(|e| e.in_stage("train"))?;
            rows.push(SensitivityRow {
                setting: setting.clone(),
                realization: k,
                relative_error: err,
                seconds,
                stop_iteration,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::compare::tests::toy_config;

    #[test]
    fn single_realization_reports_zero_std() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path());
        let report = run_sensitivity(&cfg, SensitivityVariable::Validation, 1).unwrap();
        assert_eq!(report.variable, "validation");
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.summaries.len(), 1);
        let s = &report.summaries[0];
        assert_eq!(s.realizations, 1);
        assert_eq!(s.std_relative_error, 0.0);
        assert_eq!(s.std_seconds, 0.0);
        assert_eq!(s.mean_relative_error, report.rows[0].relative_error);
    }

    #[test]
    fn varied_portfolio_actually_changes_the_outcome() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path());
        let report = run_sensitivity(&cfg, SensitivityVariable::Representatives, 3).unwrap();
        assert_eq!(report.rows.len(), 3);
        let errs: Vec<f64> = report.rows.iter().map(|r| r.relative_error).collect();
        assert!(
            errs.windows(2).any(|p| p[0] != p[1]),
            "redrawing representatives must move the error: {errs:?}"
        );
        assert!(report.summaries[0].std_relative_error > 0.0);
    }

    #[test]
    fn sensitivity_is_deterministic_per_master_seed() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path());
        let a = run_sensitivity(&cfg, SensitivityVariable::Training, 2).unwrap();
        let b = run_sensitivity(&cfg, SensitivityVariable::Training, 2).unwrap();
        assert_eq!(a.variable, b.variable);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.relative_error, y.relative_error);
            assert_eq!(x.stop_iteration, y.stop_iteration);
        }
    }

    #[test]
    fn size_sweep_iterates_the_scaled_triples() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy_config(dir.path());
        // Scale (300, 200, 250) down to (30, 20, 25).
        cfg.size_sweep_scale = 0.1;
        let report = run_sensitivity(&cfg, SensitivityVariable::Sizes, 1).unwrap();
        assert_eq!(report.rows.len(), SIZE_SWEEP_TRIPLES.len());
        assert_eq!(report.summaries.len(), SIZE_SWEEP_TRIPLES.len());
        assert_eq!(report.summaries[0].setting, "(30, 20, 25)");
        assert_eq!(report.summaries[2].setting, "(20, 20, 25)");
        assert_eq!(report.summaries[6].setting, "(30, 20, 15)");
        for s in &report.summaries {
            assert_eq!(s.realizations, 1);
            assert!(s.mean_relative_error.is_finite());
        }
    }

    #[test]
    fn zero_realizations_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path());
        assert!(run_sensitivity(&cfg, SensitivityVariable::Training, 0).is_err());
    }
}
