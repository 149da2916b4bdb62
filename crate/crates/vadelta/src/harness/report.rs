//! Report emission: turns comparison and sensitivity results into CSV
//! files plus a JSON manifest.
//!
//! Wall-clock measurements are quarantined into `timings.csv`,
//! `sensitivity_timings.csv`, `raw_results.json`, and the manifest's
//! timestamp; every other emitted file is a pure function of the
//! configuration and master seed, so rerunning an experiment reproduces
//! them byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::seeds;
use crate::Result;

use super::compare::{run_comparison_into, ComparisonReport};
use super::config::ExperimentConfig;
use super::sensitivity::{run_sensitivity, SensitivityReport, SensitivityVariable};

/// Borrowed results handed to [`emit_reports`]. Either half may be
/// absent; the full file set is written regardless, with headers only
/// where there is no data.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunArtifacts<'a> {
    pub comparison: Option<&'a ComparisonReport>,
    pub sensitivity: Option<&'a SensitivityReport>,
}

/// On-disk echo of a run: the configuration plus both result sets.
/// `report` re-emits CSVs from this without recomputing anything.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RawResults {
    pub config: ExperimentConfig,
    pub comparison: Option<ComparisonReport>,
    pub sensitivity: Option<SensitivityReport>,
}

impl RawResults {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join("raw_results.json")
    }

    pub fn load(dir: &Path) -> Result<RawResults> {
        let path = Self::path(dir);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn artifacts(&self) -> RunArtifacts<'_> {
        RunArtifacts {
            comparison: self.comparison.as_ref(),
            sensitivity: self.sensitivity.as_ref(),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    created_unix_seconds: u64,
    master_seed: u64,
    /// Derived per-stage seeds, so a single stage can be replayed in
    /// isolation.
    stage_seeds: BTreeMap<String, u64>,
    config: &'a ExperimentConfig,
}

fn stage_seed_map(cfg: &ExperimentConfig) -> BTreeMap<String, u64> {
    let mut map = BTreeMap::new();
    for stage in [
        "input-portfolio",
        "training-portfolio",
        "validation-portfolio",
        "mc-ground-truth",
        "mc-training",
    ] {
        map.insert(stage.to_string(), seeds::stage_seed(cfg.master_seed, stage));
    }
    for r in 0..cfg.replications {
        for stage in [
            format!("representatives-{r}"),
            format!("mc-representatives-{r}"),
            format!("train-{r}"),
        ] {
            let seed = seeds::stage_seed(cfg.master_seed, &stage);
            map.insert(stage, seed);
        }
    }
    map
}

fn finish(mut w: csv::Writer<fs::File>, path: PathBuf, files: &mut Vec<PathBuf>) -> Result<()> {
    w.flush().map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Writes the full report set into `out`: `comparison.csv`,
/// `summary.csv`, `scatter.csv`, per-replication `history_rep{r}.csv`,
/// `sensitivity.csv`, `sensitivity_summary.csv`, the volatile
/// `timings.csv` / `sensitivity_timings.csv`, `raw_results.json`, and
/// `manifest.json`. Returns the written paths.
pub fn emit_reports(
    cfg: &ExperimentConfig,
    artifacts: &RunArtifacts,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();

    let path = out.join("comparison.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["method", "replication", "estimate", "relative_error"])?;
    if let Some(report) = artifacts.comparison {
        for o in &report.outcomes {
            w.write_record(&[
                o.method.clone(),
                o.replication.to_string(),
                o.estimate.to_string(),
                o.relative_error.to_string(),
            ])?;
        }
    }
    finish(w, path, &mut files)?;

    let path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["method", "replications", "mean_relative_error", "std_relative_error"])?;
    if let Some(report) = artifacts.comparison {
        for s in &report.summaries {
            w.write_record(&[
                s.method.clone(),
                s.replications.to_string(),
                s.mean_relative_error.to_string(),
                s.std_relative_error.to_string(),
            ])?;
        }
    }
    finish(w, path, &mut files)?;

    let path = out.join("timings.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "method",
        "replication",
        "portfolio_mode_seconds",
        "per_policy_mode_seconds",
    ])?;
    if let Some(report) = artifacts.comparison {
        for o in &report.outcomes {
            w.write_record(&[
                o.method.clone(),
                o.replication.to_string(),
                o.portfolio_mode_seconds.to_string(),
                o.per_policy_mode_seconds.to_string(),
            ])?;
        }
    }
    finish(w, path, &mut files)?;

    let path = out.join("scatter.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["id", "mc_delta", "nn_delta"])?;
    if let Some(report) = artifacts.comparison {
        for p in &report.scatter {
            w.write_record(&[
                p.id.to_string(),
                p.mc_delta.to_string(),
                p.nn_delta.to_string(),
            ])?;
        }
    }
    finish(w, path, &mut files)?;

    if let Some(report) = artifacts.comparison {
        for h in &report.histories {
            let path = out.join(format!("history_rep{}.csv", h.replication));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["iteration", "train_mse", "val_mse", "mu"])?;
            for rec in &h.records {
                w.write_record(&[
                    rec.iteration.to_string(),
                    rec.train_mse.to_string(),
                    rec.val_mse.to_string(),
                    rec.mu.to_string(),
                ])?;
            }
            finish(w, path, &mut files)?;
        }
    }

    let path = out.join("sensitivity.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["variable", "setting", "realization", "relative_error", "stop_iteration"])?;
    if let Some(report) = artifacts.sensitivity {
        for r in &report.rows {
            w.write_record(&[
                report.variable.clone(),
                r.setting.clone(),
                r.realization.to_string(),
                r.relative_error.to_string(),
                r.stop_iteration.to_string(),
            ])?;
        }
    }
    finish(w, path, &mut files)?;

    let path = out.join("sensitivity_summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "variable",
        "setting",
        "realizations",
        "mean_relative_error",
        "std_relative_error",
        "mean_stop_iteration",
        "std_stop_iteration",
    ])?;
    if let Some(report) = artifacts.sensitivity {
        for s in &report.summaries {
            w.write_record(&[
                report.variable.clone(),
                s.setting.clone(),
                s.realizations.to_string(),
                s.mean_relative_error.to_string(),
                s.std_relative_error.to_string(),
                s.mean_stop_iteration.to_string(),
                s.std_stop_iteration.to_string(),
            ])?;
        }
    }
    finish(w, path, &mut files)?;

    let path = out.join("sensitivity_timings.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["variable", "setting", "realization", "seconds"])?;
    if let Some(report) = artifacts.sensitivity {
        for r in &report.rows {
            w.write_record(&[
                report.variable.clone(),
                r.setting.clone(),
                r.realization.to_string(),
                r.seconds.to_string(),
            ])?;
        }
    }
    finish(w, path, &mut files)?;

    let raw = RawResults {
        config: cfg.clone(),
        comparison: artifacts.comparison.cloned(),
        sensitivity: artifacts.sensitivity.cloned(),
    };
    let path = RawResults::path(out);
    let json = serde_json::to_vec_pretty(&raw)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    files.push(path);

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        created_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        master_seed: cfg.master_seed,
        stage_seeds: stage_seed_map(cfg),
        config: cfg,
    };
    let path = out.join("manifest.json");
    let json = serde_json::to_vec_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    files.push(path);

    Ok(files)
}

/// Runs the comparison and emits reports into `cfg.output_dir`. A
/// mid-run failure still flushes whatever replications completed before
/// the error propagates.
pub fn run_comparison_to_dir(
    cfg: &ExperimentConfig,
) -> Result<(ComparisonReport, Vec<PathBuf>)> {
    let mut report = ComparisonReport::default();
    let run = run_comparison_into(cfg, &mut report);
    let prior = prior_sensitivity(cfg);
    let artifacts = RunArtifacts {
        comparison: Some(&report),
        sensitivity: prior.as_ref(),
    };
    let emitted = emit_reports(cfg, &artifacts, &cfg.output_dir);
    match run {
        Ok(()) => Ok((report, emitted?)),
        // The run error is the diagnosis; a secondary flush failure
        // would only obscure it.
        Err(e) => Err(e),
    }
}

/// Runs one sensitivity sweep and emits reports into `cfg.output_dir`,
/// carrying forward comparison results already stored there.
pub fn run_sensitivity_to_dir(
    cfg: &ExperimentConfig,
    vary: SensitivityVariable,
    realizations: usize,
) -> Result<(SensitivityReport, Vec<PathBuf>)> {
    let report = run_sensitivity(cfg, vary, realizations)?;
    let prior = RawResults::load(&cfg.output_dir).ok();
    let artifacts = RunArtifacts {
        comparison: prior.as_ref().and_then(|p| p.comparison.as_ref()),
        sensitivity: Some(&report),
    };
    let files = emit_reports(cfg, &artifacts, &cfg.output_dir)?;
    Ok((report, files))
}

/// Sensitivity results already emitted into this output directory, if
/// any — kept when a comparison run rewrites the file set.
fn prior_sensitivity(cfg: &ExperimentConfig) -> Option<SensitivityReport> {
    RawResults::load(&cfg.output_dir).ok()?.sensitivity
}
