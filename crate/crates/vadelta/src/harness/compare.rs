//! The estimator comparison: MC ground truth once, then per replication a
//! fresh representative draw, every configured method, and the relative
//! error of each against the ground-truth portfolio delta.
//!
//! Ground truth over the input portfolio dominates the cost, so it is
//! cached on disk, content-addressed by a hash of everything that
//! determines it (input space and size, MC settings, seeds, mortality
//! table). A cache hit is byte-identical to a fresh computation.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{portfolio_estimate, AttributeRanges};
use crate::error::Error;
use crate::mc::{self, value_portfolio, McConfig, McResult, PortfolioValuation, ResultsRow};
use crate::metamodel::{
    train, FeatureConfig, HistoryRecord, Metamodel, StopReason, TrainConfig, TrainingData,
};
use crate::mortality::MortalityTable;
use crate::portfolio::{
    generate_input_portfolio, sample_from_grid, sample_validation, VaContract,
};
use crate::seeds;
use crate::Result;

use super::config::{ExperimentConfig, MethodSpec};

/// Id offsets keeping the portfolios' id spaces disjoint in reports.
const REPRESENTATIVE_ID_BASE: u64 = 1_000_000_000;
const TRAINING_ID_BASE: u64 = 2_000_000_000;

/// One method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    pub replication: usize,
    /// Estimated portfolio delta Δ_m.
    pub estimate: f64,
    /// (Δ_m − Δ_MC) / |Δ_MC|.
    pub relative_error: f64,
    /// Wall time of the aggregate-only estimation pass.
    pub portfolio_mode_seconds: f64,
    /// Wall time of the per-policy estimation pass.
    pub per_policy_mode_seconds: f64,
}

/// Mean/STD of one method across replications. STD is the sample standard
/// deviation, reported as 0 for a single replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub replications: usize,
    pub mean_relative_error: f64,
    pub std_relative_error: f64,
    pub mean_portfolio_mode_seconds: f64,
    pub mean_per_policy_mode_seconds: f64,
}

/// One validation contract's MC delta against the network's estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub id: u64,
    pub mc_delta: f64,
    pub nn_delta: f64,
}

/// Training history of the network on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationHistory {
    pub replication: usize,
    pub stop_reason: StopReason,
    pub stop_iteration: u64,
    pub records: Vec<HistoryRecord>,
}

/// Everything `runComparison` produces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Ground-truth portfolio delta Δ_MC over the input portfolio.
    pub ground_truth_delta: f64,
    pub outcomes: Vec<MethodOutcome>,
    pub summaries: Vec<MethodSummary>,
    /// MC vs network delta per validation contract, first replication.
    pub scatter: Vec<ScatterPoint>,
    pub histories: Vec<ReplicationHistory>,
}

/// Sample mean and standard deviation (n−1 denominator; 0 when n < 2).
pub(crate) fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Per-method mean/STD rows, in first-appearance order.
pub fn summarize(outcomes: &[MethodOutcome]) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    for o in outcomes {
        if !order.contains(&o.method.as_str()) {
            order.push(&o.method);
        }
    }
    order
        .into_iter()
        .map(|label| {
            let rows: Vec<&MethodOutcome> =
                outcomes.iter().filter(|o| o.method == label).collect();
            let (mean_err, std_err) = mean_std(rows.iter().map(|o| o.relative_error));
            let (mean_pf, _) = mean_std(rows.iter().map(|o| o.portfolio_mode_seconds));
            let (mean_pp, _) = mean_std(rows.iter().map(|o| o.per_policy_mode_seconds));
            MethodSummary {
                method: label.to_string(),
                replications: rows.len(),
                mean_relative_error: mean_err,
                std_relative_error: std_err,
                mean_portfolio_mode_seconds: mean_pf,
                mean_per_policy_mode_seconds: mean_pp,
            }
        })
        .collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// The portfolios that stay fixed across replications.
pub struct FixedPortfolios {
    pub input: Vec<VaContract>,
    pub training: Vec<VaContract>,
    pub validation: Vec<VaContract>,
}

/// Draws the input, training, and validation portfolios exactly as the
/// comparison protocol does, so standalone pipeline steps reproduce them.
pub fn fixed_portfolios(cfg: &ExperimentConfig) -> Result<FixedPortfolios> {
    let input = generate_input_portfolio(
        &cfg.spaces.input,
        cfg.sizes.input,
        seeds::stage_seed(cfg.master_seed, "input-portfolio"),
        0,
    )?;
    let training = sample_from_grid(
        &cfg.spaces.training,
        cfg.sizes.training,
        seeds::stage_seed(cfg.master_seed, "training-portfolio"),
        TRAINING_ID_BASE,
    )?;
    let validation = sample_validation(
        &input,
        cfg.sizes.validation,
        seeds::stage_seed(cfg.master_seed, "validation-portfolio"),
    )?;
    Ok(FixedPortfolios { input, training, validation })
}

/// Representative draw of one replication; ids are disjoint across
/// replications so every valuation in the reports is unambiguous.
pub fn draw_representatives(
    cfg: &ExperimentConfig,
    replication: usize,
) -> Result<Vec<VaContract>> {
    sample_from_grid(
        &cfg.spaces.representatives,
        cfg.sizes.representatives,
        seeds::stage_seed(cfg.master_seed, &format!("representatives-{replication}")),
        REPRESENTATIVE_ID_BASE + replication as u64 * 1_000_000,
    )
}

/// Identity of the mortality table for cache keys: the CSV bytes when the
/// table comes from a file, a fixed tag for the built-in one.
fn mortality_cache_id(cfg: &ExperimentConfig) -> Result<String> {
    match &cfg.mortality_csv {
        None => Ok("synthetic-v1".into()),
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            Ok(format!("{:x}", Sha256::digest(&bytes)))
        }
    }
}

#[derive(Serialize)]
struct GroundTruthKey<'a> {
    space: &'a crate::portfolio::GenerationSpace,
    count: usize,
    portfolio_seed: u64,
    mc: &'a McConfig,
    mortality: &'a str,
}

fn ground_truth_cache_path(cfg: &ExperimentConfig, mc: &McConfig) -> Result<PathBuf> {
    let key = GroundTruthKey {
        space: &cfg.spaces.input,
        count: cfg.sizes.input,
        portfolio_seed: seeds::stage_seed(cfg.master_seed, "input-portfolio"),
        mc,
        mortality: &mortality_cache_id(cfg)?,
    };
    let digest = Sha256::digest(serde_json::to_vec(&key)?);
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    Ok(cfg.output_dir.join("cache").join(format!("ground-truth-{hex}.csv")))
}

fn read_cached_valuation(path: &Path, expected: usize, scenario_count: usize) -> Option<PortfolioValuation> {
    let rows = mc::read_results_csv(path).ok()?;
    if rows.len() != expected {
        return None;
    }
    let results: Option<Vec<McResult>> = rows
        .into_iter()
        .map(|r| {
            Some(McResult {
                id: r.id,
                liability: r.liability?,
                delta: r.delta,
                std_err: r.std_err?,
                scenario_count,
            })
        })
        .collect();
    let results = results?;
    let aggregate_delta = results.iter().map(|r| r.delta).sum();
    Some(PortfolioValuation { results, aggregate_delta })
}

/// MC values the input portfolio, reusing the on-disk cache when its key
/// matches. A missing or corrupt cache file is recomputed and rewritten.
pub fn ground_truth(
    cfg: &ExperimentConfig,
    input: &[VaContract],
    mortality: &MortalityTable,
) -> Result<PortfolioValuation> {
    let mc = McConfig {
        seed: seeds::stage_seed(cfg.master_seed, "mc-ground-truth"),
        ..cfg.mc.clone()
    };
    let path = ground_truth_cache_path(cfg, &mc)?;
    if let Some(cached) = read_cached_valuation(&path, input.len(), mc.scenario_count) {
        return Ok(cached);
    }
    let valuation = value_portfolio(input, mortality, &mc)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let rows: Vec<ResultsRow> = valuation.results.iter().map(ResultsRow::from).collect();
    mc::write_results_csv(&path, &rows)?;
    Ok(valuation)
}

/// Runs the full comparison. See [`run_comparison_into`] for the partial
/// results available after a mid-run failure.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::default();
    run_comparison_into(cfg, &mut report)?;
    Ok(report)
}

/// The comparison engine. Results accumulate in `report` as stages finish,
/// so on an error the caller still holds everything completed so far (the
/// CLI flushes it to disk before exiting).
pub fn run_comparison_into(cfg: &ExperimentConfig, report: &mut ComparisonReport) -> Result<()> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
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
    report.ground_truth_delta = ground.aggregate_delta;
    let mc_delta_by_id: HashMap<u64, f64> =
        ground.results.iter().map(|r| (r.id, r.delta)).collect();

    let training_mc = McConfig {
        seed: seeds::stage_seed(cfg.master_seed, "mc-training"),
        ..cfg.mc.clone()
    };
    let training_vals = value_portfolio(&fixed.training, &mortality, &training_mc)
        .map_err(|e| e.in_stage("mc-training"))?;
    let training_deltas: Vec<f64> = training_vals.results.iter().map(|r| r.delta).collect();
    // Validation ⊆ input, and the per-contract seeding makes its MC values
    // identical to the ground-truth rows, so look them up instead.
    let validation_deltas: Vec<f64> =
        fixed.validation.iter().map(|c| mc_delta_by_id[&c.id]).collect();

    let ranges = AttributeRanges::from_space(&cfg.spaces.input)
        .map_err(|e| e.in_stage("estimator-setup"))?;
    let features = FeatureConfig::from_space(&cfg.spaces.input)
        .map_err(|e| e.in_stage("estimator-setup"))?;

    for replication in 0..cfg.replications {
        let reps = draw_representatives(cfg, replication)
            .map_err(|e| e.in_stage("representatives"))?;
        let reps_mc = McConfig {
            seed: seeds::stage_seed(cfg.master_seed, &format!("mc-representatives-{replication}")),
            ..cfg.mc.clone()
        };
        let rep_vals = value_portfolio(&reps, &mortality, &reps_mc)
            .map_err(|e| e.in_stage("mc-representatives"))?;
        let rep_deltas: Vec<f64> = rep_vals.results.iter().map(|r| r.delta).collect();

        for method in &cfg.methods {
            let outcome = run_method(
                cfg,
                *method,
                replication,
                &reps,
                &rep_deltas,
                &fixed,
                &training_deltas,
                &validation_deltas,
                &ground,
                &ranges,
                &features,
                report,
            )
            .map_err(|e| e.in_stage("estimate"))?;
            report.outcomes.push(outcome);
        }
        report.summaries = summarize(&report.outcomes);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    cfg: &ExperimentConfig,
    method: MethodSpec,
    replication: usize,
    reps: &[VaContract],
    rep_deltas: &[f64],
    fixed: &FixedPortfolios,
    training_deltas: &[f64],
    validation_deltas: &[f64],
    ground: &PortfolioValuation,
    ranges: &AttributeRanges,
    features: &FeatureConfig,
    report: &mut ComparisonReport,
) -> Result<MethodOutcome> {
    let truth = ground.aggregate_delta;
    let (estimate, portfolio_s, per_policy_s) = match method {
        MethodSpec::Mc => {
            // Self-comparison: re-aggregate the stored ground truth.
            let (agg, t) = timed(|| ground.results.iter().map(|r| r.delta).sum::<f64>());
            (agg, t, t)
        }
        MethodSpec::Nn => {
            let data = TrainingData {
                representatives: reps,
                representative_deltas: rep_deltas,
                training: &fixed.training,
                training_deltas,
                validation: &fixed.validation,
                validation_deltas,
            };
            let train_cfg = TrainConfig {
                seed: seeds::stage_seed(cfg.master_seed, &format!("train-{replication}")),
                ..cfg.train.clone()
            };
            let (model, state) = train(&data, features.clone(), &train_cfg)?;
            report.histories.push(ReplicationHistory {
                replication,
                stop_reason: state.stop_reason,
                stop_iteration: state.iteration,
                records: state.records,
            });
            // The network has no aggregate-only shortcut; both modes run
            // the same per-policy pass.
            let (agg, t_pf) =
                timed(|| model.predict_portfolio(&fixed.input).iter().sum::<f64>());
            let (per, t_pp) = timed(|| model.predict_portfolio(&fixed.input));
            debug_assert_eq!(per.len(), fixed.input.len());
            if replication == 0 {
                report.scatter = nn_scatter(&model, &fixed.validation, validation_deltas);
            }
            (agg, t_pf, t_pp)
        }
        _ => {
            let kind = method.estimator().expect("mc and nn are handled above");
            let (fast, t_pf) = timed(|| {
                portfolio_estimate(kind, reps, rep_deltas, &fixed.input, cfg.gamma, ranges, false)
            });
            let (slow, t_pp) = timed(|| {
                portfolio_estimate(kind, reps, rep_deltas, &fixed.input, cfg.gamma, ranges, true)
            });
            slow?;
            (fast?.aggregate, t_pf, t_pp)
        }
    };
    Ok(MethodOutcome {
        method: method.label(),
        replication,
        estimate,
        relative_error: (estimate - truth) / truth.abs(),
        portfolio_mode_seconds: portfolio_s,
        per_policy_mode_seconds: per_policy_s,
    })
}

fn nn_scatter(
    model: &Metamodel,
    validation: &[VaContract],
    validation_deltas: &[f64],
) -> Vec<ScatterPoint> {
    let preds: Vec<f64> = validation.par_iter().map(|c| model.predict(c)).collect();
    validation
        .iter()
        .zip(validation_deltas)
        .zip(preds)
        .map(|((c, &mc_delta), nn_delta)| ScatterPoint { id: c.id, mc_delta, nn_delta })
        .collect()
}
