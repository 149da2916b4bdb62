//! `vadelta`: command-line front end for portfolio generation, Monte
//! Carlo valuation, network training, estimation, and the comparison /
//! sensitivity experiments.
//!
//! Configuration comes from an optional JSON file (missing keys fall
//! back to defaults); the `--scenarios`, `--seed`, `--rate`, `--vol`,
//! and `--bump` flags override individual keys, `VADELTA_OUT_DIR`
//! overrides the output directory, and `--out` overrides both. Errors
//! exit nonzero with a stage-tagged diagnostic on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vadelta::harness::{
    draw_representatives, emit_reports, fixed_portfolios, run_comparison_to_dir,
    run_sensitivity_to_dir, ExperimentConfig, RawResults, RunArtifacts, SensitivityVariable,
};
use vadelta::mc::{value_portfolio, write_results_csv, McConfig, ResultsRow};
use vadelta::metamodel::{
    load_model, save_model, train, FeatureConfig, TrainConfig, TrainingData,
};
use vadelta::portfolio::{read_portfolio_csv, write_portfolio_csv, VaContract};
use vadelta::{seeds, Error, Result};

#[derive(Parser)]
#[command(name = "vadelta", version, about = "Variable-annuity portfolio delta estimation")]
struct Cli {
    /// JSON experiment config; missing keys fall back to defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Start from the reduced preset (10k contracts, 100 representatives,
    /// 1k scenarios, 3 replications) instead of the full-scale defaults.
    #[arg(long, global = true, conflicts_with = "config")]
    desk_scale: bool,

    /// Output directory (flag > VADELTA_OUT_DIR > config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Mortality table CSV (gender,age,qx); built-in table otherwise.
    #[arg(long, global = true, value_name = "FILE")]
    mortality: Option<PathBuf>,

    /// Override the Monte Carlo scenario count.
    #[arg(long, global = true)]
    scenarios: Option<usize>,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the risk-free rate.
    #[arg(long, global = true)]
    rate: Option<f64>,

    /// Override the volatility.
    #[arg(long, global = true)]
    vol: Option<f64>,

    /// Override the delta bump fraction.
    #[arg(long, global = true)]
    bump: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PortfolioKind {
    Input,
    Representatives,
    Training,
    Validation,
}

#[derive(Clone, Copy, ValueEnum)]
enum VaryArg {
    Representatives,
    Training,
    Validation,
    Sizes,
}

impl From<VaryArg> for SensitivityVariable {
    fn from(v: VaryArg) -> Self {
        match v {
            VaryArg::Representatives => SensitivityVariable::Representatives,
            VaryArg::Training => SensitivityVariable::Training,
            VaryArg::Validation => SensitivityVariable::Validation,
            VaryArg::Sizes => SensitivityVariable::Sizes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a portfolio from the configured generation spaces and write
    /// it as CSV.
    Generate {
        #[arg(long, value_enum, default_value_t = PortfolioKind::Input)]
        kind: PortfolioKind,
        /// Contract count; defaults to the configured size for the kind.
        #[arg(long)]
        count: Option<usize>,
        /// Input portfolio CSV to subsample (validation kind only;
        /// defaults to regenerating it from the config).
        #[arg(long, value_name = "FILE")]
        from: Option<PathBuf>,
        #[arg(long, default_value = "portfolio.csv", value_name = "FILE")]
        output: PathBuf,
    },
    /// Monte Carlo value a portfolio CSV: liability, delta, and standard
    /// error per contract.
    McValue {
        #[arg(long, value_name = "FILE")]
        portfolio: PathBuf,
        #[arg(long, default_value = "results.csv", value_name = "FILE")]
        output: PathBuf,
    },
    /// Draw and MC-value the training portfolios, train the network, and
    /// save the model.
    Train {
        #[arg(long, default_value = "model.json", value_name = "FILE")]
        model: PathBuf,
        /// Also write the training history (iteration, MSEs, momentum).
        #[arg(long, value_name = "FILE")]
        history: Option<PathBuf>,
    },
    /// Estimate per-contract deltas of a portfolio CSV with a trained
    /// model; liability and standard error stay empty.
    Estimate {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        portfolio: PathBuf,
        #[arg(long, default_value = "estimates.csv", value_name = "FILE")]
        output: PathBuf,
    },
    /// Run the full method comparison and write reports into the output
    /// directory.
    Compare,
    /// Rerun the network while redrawing one portfolio (or sweeping the
    /// size triples) and write reports.
    Sensitivity {
        #[arg(long, value_enum)]
        vary: VaryArg,
        #[arg(long, default_value_t = 5)]
        realizations: usize,
    },
    /// Re-emit report files from raw_results.json without recomputing.
    Report {
        /// Directory holding raw_results.json; defaults to the output
        /// directory.
        #[arg(long, value_name = "DIR")]
        from: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if cli.desk_scale => ExperimentConfig::desk_scale(),
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.scenarios {
        cfg.mc.scenario_count = n;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = cli.rate {
        cfg.mc.risk_free_rate = r;
    }
    if let Some(v) = cli.vol {
        cfg.mc.volatility = v;
    }
    if let Some(b) = cli.bump {
        cfg.mc.bump_fraction = b;
    }
    if let Some(path) = &cli.mortality {
        cfg.mortality_csv = Some(path.clone());
    }
    cfg.apply_env_output_dir();
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli).map_err(|e| e.in_stage("config"))?;
    match cli.command {
        Command::Generate { kind, count, from, output } => generate(&cfg, kind, count, from, &output),
        Command::McValue { portfolio, output } => mc_value(&cfg, &portfolio, &output),
        Command::Train { model, history } => train_model(&cfg, &model, history.as_deref()),
        Command::Estimate { model, portfolio, output } => estimate(&model, &portfolio, &output),
        Command::Compare => compare(&cfg),
        Command::Sensitivity { vary, realizations } => sensitivity(&cfg, vary.into(), realizations),
        Command::Report { from } => report(&cfg, from.as_deref()),
    }
}

fn generate(
    cfg: &ExperimentConfig,
    kind: PortfolioKind,
    count: Option<usize>,
    from: Option<PathBuf>,
    output: &Path,
) -> Result<()> {
    use vadelta::portfolio::{generate_input_portfolio, sample_validation};
    // Draw through the same code paths the comparison protocol uses, so a
    // generated CSV matches what `compare` would value internally.
    let contracts = match kind {
        PortfolioKind::Input => generate_input_portfolio(
            &cfg.spaces.input,
            count.unwrap_or(cfg.sizes.input),
            seeds::stage_seed(cfg.master_seed, "input-portfolio"),
            0,
        ),
        PortfolioKind::Representatives => {
            let mut tweaked = cfg.clone();
            if let Some(n) = count {
                tweaked.sizes.representatives = n;
            }
            draw_representatives(&tweaked, 0)
        }
        PortfolioKind::Training => {
            let mut tweaked = cfg.clone();
            if let Some(n) = count {
                tweaked.sizes.training = n;
            }
            fixed_portfolios(&tweaked).map(|f| f.training)
        }
        PortfolioKind::Validation => match from {
            Some(path) => {
                let input = read_portfolio_csv(&path).map_err(|e| e.in_stage("input-portfolio"))?;
                sample_validation(
                    &input,
                    count.unwrap_or(cfg.sizes.validation),
                    seeds::stage_seed(cfg.master_seed, "validation-portfolio"),
                )
            }
            None => {
                let mut tweaked = cfg.clone();
                if let Some(n) = count {
                    tweaked.sizes.validation = n;
                }
                fixed_portfolios(&tweaked).map(|f| f.validation)
            }
        },
    }
    .map_err(|e| e.in_stage("generate"))?;
    write_portfolio_csv(output, &contracts).map_err(|e| e.in_stage("generate"))?;
    println!("wrote {} contracts to {}", contracts.len(), output.display());
    Ok(())
}

fn mc_value(cfg: &ExperimentConfig, portfolio: &Path, output: &Path) -> Result<()> {
    let contracts = read_portfolio_csv(portfolio).map_err(|e| e.in_stage("portfolio-read"))?;
    let mortality = cfg.mortality().map_err(|e| e.in_stage("mortality"))?;
    let mc = McConfig { seed: seeds::stage_seed(cfg.master_seed, "mc-value"), ..cfg.mc.clone() };
    let valuation =
        value_portfolio(&contracts, &mortality, &mc).map_err(|e| e.in_stage("mc-value"))?;
    let rows: Vec<ResultsRow> = valuation.results.iter().map(ResultsRow::from).collect();
    write_results_csv(output, &rows).map_err(|e| e.in_stage("results-write"))?;
    println!(
        "portfolio delta {:.4} over {} contracts ({} scenarios) -> {}",
        valuation.aggregate_delta,
        contracts.len(),
        mc.scenario_count,
        output.display()
    );
    Ok(())
}

fn train_model(cfg: &ExperimentConfig, model_path: &Path, history: Option<&Path>) -> Result<()> {
    let mortality = cfg.mortality().map_err(|e| e.in_stage("mortality"))?;
    let fixed = fixed_portfolios(cfg).map_err(|e| e.in_stage("portfolios"))?;
    let reps = draw_representatives(cfg, 0).map_err(|e| e.in_stage("representatives"))?;

    let mc_with = |label: &str| McConfig {
        seed: seeds::stage_seed(cfg.master_seed, label),
        ..cfg.mc.clone()
    };
    let rep_deltas = deltas(&reps, &mortality, &mc_with("mc-representatives-0"))
        .map_err(|e| e.in_stage("mc-representatives"))?;
    let training_deltas = deltas(&fixed.training, &mortality, &mc_with("mc-training"))
        .map_err(|e| e.in_stage("mc-training"))?;
    // Valuing the validation contracts under the ground-truth seed gives
    // the same per-contract streams as a full input-portfolio valuation
    // restricted to those ids, so this model matches the comparison's
    // replication 0 exactly.
    let validation_deltas = deltas(&fixed.validation, &mortality, &mc_with("mc-ground-truth"))
        .map_err(|e| e.in_stage("mc-ground-truth"))?;

    let features =
        FeatureConfig::from_space(&cfg.spaces.input).map_err(|e| e.in_stage("estimator-setup"))?;
    let data = TrainingData {
        representatives: &reps,
        representative_deltas: &rep_deltas,
        training: &fixed.training,
        training_deltas: &training_deltas,
        validation: &fixed.validation,
        validation_deltas: &validation_deltas,
    };
    let train_cfg = TrainConfig {
        seed: seeds::stage_seed(cfg.master_seed, "train-0"),
        ..cfg.train.clone()
    };
    let (model, state) = train(&data, features, &train_cfg).map_err(|e| e.in_stage("train"))?;
    save_model(model_path, &model).map_err(|e| e.in_stage("model-write"))?;
    if let Some(path) = history {
        write_history_csv(path, &state.records).map_err(|e| e.in_stage("history-write"))?;
    }
    println!(
        "trained on {} representatives: stopped at iteration {} ({:?}) -> {}",
        reps.len(),
        state.iteration,
        state.stop_reason,
        model_path.display()
    );
    Ok(())
}

fn deltas(
    contracts: &[VaContract],
    mortality: &vadelta::mortality::MortalityTable,
    mc: &McConfig,
) -> Result<Vec<f64>> {
    Ok(value_portfolio(contracts, mortality, mc)?
        .results
        .iter()
        .map(|r| r.delta)
        .collect())
}

fn write_history_csv(path: &Path, records: &[vadelta::metamodel::HistoryRecord]) -> Result<()> {
    let mut out = String::from("iteration,train_mse,val_mse,mu\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.iteration, r.train_mse, r.val_mse, r.mu));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn estimate(model_path: &Path, portfolio: &Path, output: &Path) -> Result<()> {
    let model = load_model(model_path).map_err(|e| e.in_stage("model-read"))?;
    let contracts = read_portfolio_csv(portfolio).map_err(|e| e.in_stage("portfolio-read"))?;
    let predictions = model.predict_portfolio(&contracts);
    let rows: Vec<ResultsRow> = contracts
        .iter()
        .zip(&predictions)
        .map(|(c, &delta)| ResultsRow { id: c.id, liability: None, delta, std_err: None })
        .collect();
    write_results_csv(output, &rows).map_err(|e| e.in_stage("results-write"))?;
    println!(
        "estimated portfolio delta {:.4} over {} contracts -> {}",
        predictions.iter().sum::<f64>(),
        contracts.len(),
        output.display()
    );
    Ok(())
}

fn compare(cfg: &ExperimentConfig) -> Result<()> {
    let (report, files) = run_comparison_to_dir(cfg)?;
    println!(
        "ground-truth portfolio delta {:.4} ({} replications)",
        report.ground_truth_delta, cfg.replications
    );
    println!(
        "{:<24} {:>12} {:>12} {:>14} {:>14}",
        "method", "mean Err", "STD Err", "portfolio s", "per-policy s"
    );
    for s in &report.summaries {
        println!(
            "{:<24} {:>12.5} {:>12.5} {:>14.3} {:>14.3}",
            s.method,
            s.mean_relative_error,
            s.std_relative_error,
            s.mean_portfolio_mode_seconds,
            s.mean_per_policy_mode_seconds
        );
    }
    println!("wrote {} report files to {}", files.len(), cfg.output_dir.display());
    Ok(())
}

fn sensitivity(
    cfg: &ExperimentConfig,
    vary: SensitivityVariable,
    realizations: usize,
) -> Result<()> {
    let (report, files) = run_sensitivity_to_dir(cfg, vary, realizations)?;
    println!("sensitivity sweep over {} ({} realizations per setting)", report.variable, realizations);
    println!(
        "{:<18} {:>12} {:>12} {:>12} {:>12}",
        "setting", "mean Err", "STD Err", "mean s", "STD s"
    );
    for s in &report.summaries {
        println!(
            "{:<18} {:>12.5} {:>12.5} {:>12.3} {:>12.3}",
            s.setting, s.mean_relative_error, s.std_relative_error, s.mean_seconds, s.std_seconds
        );
    }
    println!("wrote {} report files to {}", files.len(), cfg.output_dir.display());
    Ok(())
}

fn report(cfg: &ExperimentConfig, from: Option<&Path>) -> Result<()> {
    let source = from.unwrap_or(&cfg.output_dir);
    let files = match RawResults::load(source) {
        Ok(raw) => {
            // The stored config is the one the numbers came from; echo it,
            // not the current invocation's.
            emit_reports(&raw.config, &raw.artifacts(), &cfg.output_dir)?
        }
        Err(Error::Io { ref source, .. })
            if source.kind() == std::io::ErrorKind::NotFound =>
        {
            emit_reports(cfg, &RunArtifacts::default(), &cfg.output_dir)?
        }
        Err(e) => return Err(e.in_stage("report")),
    };
    println!("wrote {} report files to {}", files.len(), cfg.output_dir.display());
    Ok(())
}
