//! Experiment configuration: generation spaces, portfolio sizes, engine and
//! training settings, the method list, and the master seed.
//!
//! Configs are plain JSON files; every field has a default, so a config file
//! only needs the keys it overrides. Two presets exist: [`ExperimentConfig::default`]
//! mirrors the full-scale protocol (100k contracts, 300 representatives,
//! 10k scenarios, 6 replications) and [`ExperimentConfig::desk_scale`] is the
//! scaled-down variant the test suite runs (10k contracts, 100
//! representatives, 1k scenarios, 3 replications).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{EstimatorKind, VariogramKind};
use crate::error::Error;
use crate::mc::McConfig;
use crate::metamodel::TrainConfig;
use crate::portfolio::GenerationSpace;
use crate::Result;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "VADELTA_OUT_DIR";

/// The three generation spaces an experiment draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Spaces {
    /// Space of the input portfolio (continuous account/guarantee values).
    pub input: GenerationSpace,
    /// Finite grid representative contracts are sampled from.
    pub representatives: GenerationSpace,
    /// Finite grid the training portfolio is sampled from; offset from the
    /// representative grid so the two never coincide.
    pub training: GenerationSpace,
}

impl Default for Spaces {
    fn default() -> Self {
        Spaces {
            input: GenerationSpace::input_default(),
            representatives: GenerationSpace::representative_grid_default(),
            training: GenerationSpace::training_grid_default(),
        }
    }
}

/// How many contracts each portfolio holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PortfolioSizes {
    pub input: usize,
    pub representatives: usize,
    pub training: usize,
    pub validation: usize,
}

impl Default for PortfolioSizes {
    fn default() -> Self {
        PortfolioSizes { input: 100_000, representatives: 300, training: 200, validation: 250 }
    }
}

/// One estimation method in the comparison, with its free parameters.
///
/// `Mc` re-reports the ground truth (zero error by definition) and anchors
/// the report; `Nn` is the trained softmax network; the rest are the
/// spatial-interpolation baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Mc,
    Nn,
    Idw { power: f64 },
    Kriging { variogram: VariogramKind },
    Rbf { epsilon: f64 },
}

impl MethodSpec {
    /// Short label used in report tables and file names.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Mc => "mc".into(),
            MethodSpec::Nn => "nn".into(),
            MethodSpec::Idw { power } => EstimatorKind::Idw { power: *power }.label(),
            MethodSpec::Kriging { variogram } => {
                EstimatorKind::Kriging { variogram: *variogram }.label()
            }
            MethodSpec::Rbf { epsilon } => EstimatorKind::Rbf { epsilon: *epsilon }.label(),
        }
    }

    /// The baseline estimator behind this method, if it is one.
    pub fn estimator(&self) -> Option<EstimatorKind> {
        match self {
            MethodSpec::Mc | MethodSpec::Nn => None,
            MethodSpec::Idw { power } => Some(EstimatorKind::Idw { power: *power }),
            MethodSpec::Kriging { variogram } => {
                Some(EstimatorKind::Kriging { variogram: *variogram })
            }
            MethodSpec::Rbf { epsilon } => Some(EstimatorKind::Rbf { epsilon: *epsilon }),
        }
    }
}

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub spaces: Spaces,
    pub sizes: PortfolioSizes,
    pub mc: McConfig,
    pub train: TrainConfig,
    pub methods: Vec<MethodSpec>,
    /// Independent representative-contract realizations per comparison.
    pub replications: usize,
    pub output_dir: PathBuf,
    /// Root of all randomness; every stage seed derives from it.
    pub master_seed: u64,
    /// Mortality rates CSV; the built-in synthetic table when absent.
    pub mortality_csv: Option<PathBuf>,
    /// Categorical mismatch weight shared by both contract distances.
    pub gamma: f64,
    /// Multiplier applied to the size-sweep triples of the sensitivity
    /// experiment (1 = full scale).
    pub size_sweep_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            spaces: Spaces::default(),
            sizes: PortfolioSizes::default(),
            mc: McConfig::default(),
            train: TrainConfig::default(),
            methods: vec![
                MethodSpec::Nn,
                MethodSpec::Kriging { variogram: VariogramKind::Spherical },
                MethodSpec::Kriging { variogram: VariogramKind::Exponential },
                MethodSpec::Idw { power: 1.0 },
                MethodSpec::Rbf { epsilon: 1.0 },
            ],
            replications: 6,
            output_dir: PathBuf::from("out"),
            master_seed: 0,
            mortality_csv: None,
            gamma: 1.0,
            size_sweep_scale: 1.0,
        }
    }
}

impl ExperimentConfig {
    /// The scaled-down preset: 10k contracts, 100 representatives, 1k
    /// scenarios, 3 replications. Training and validation sizes stay at
    /// full scale.
    pub fn desk_scale() -> Self {
        ExperimentConfig {
            sizes: PortfolioSizes { input: 10_000, representatives: 100, ..Default::default() },
            mc: McConfig { scenario_count: 1_000, ..McConfig::default() },
            replications: 3,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spaces.input.validate()?;
        self.spaces.representatives.validate()?;
        self.spaces.training.validate()?;
        self.mc.validate()?;
        self.train.validate()?;
        let s = &self.sizes;
        if s.input == 0 || s.representatives == 0 || s.training == 0 || s.validation == 0 {
            return Err(Error::InvalidConfig("portfolio sizes must be positive".into()));
        }
        if s.validation > s.input {
            return Err(Error::InvalidConfig(format!(
                "validation size {} exceeds input portfolio size {}",
                s.validation, s.input
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("method list must be non-empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be ≥ 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig("gamma must be finite and ≥ 0".into()));
        }
        if !(self.size_sweep_scale > 0.0 && self.size_sweep_scale.is_finite()) {
            return Err(Error::InvalidConfig("size_sweep_scale must be > 0".into()));
        }
        Ok(())
    }

    /// Reads a JSON config file; missing keys fall back to defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Replaces the output directory with the `VADELTA_OUT_DIR` environment
    /// variable when it is set and non-empty.
    pub fn apply_env_output_dir(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }

    /// Mortality table per the config: the CSV when given, the synthetic
    /// table otherwise.
    pub fn mortality(&self) -> Result<crate::mortality::MortalityTable> {
        match &self.mortality_csv {
            Some(path) => crate::mortality::MortalityTable::read_csv(path),
            None => Ok(crate::mortality::MortalityTable::synthetic_default()),
        }
    }
}
