//! Error type shared across the crate.

use std::path::PathBuf;

/// Errors surfaced by generation, valuation, fitting, training, and the
/// experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A generation-space attribute has no values or an inverted interval.
    #[error("generation space attribute `{attribute}` is empty or invalid")]
    EmptyRange { attribute: &'static str },

    /// More grid points requested than the Cartesian grid contains.
    #[error("requested {requested} contracts but the grid has only {available} points")]
    GridTooSmall { requested: usize, available: usize },

    /// Sampling without replacement from a population that is too small.
    #[error("requested {requested} contracts from a population of {available}")]
    CountExceedsPopulation { requested: usize, available: usize },

    /// Grid sampling needs finite value sets for every attribute.
    #[error("attribute `{attribute}` is a continuous interval; grid sampling needs a finite set")]
    NotAGrid { attribute: &'static str },

    /// Mortality lookup outside the table.
    #[error("mortality table has no rate for {gender} age {age}")]
    MissingMortalityAge { gender: &'static str, age: u32 },

    /// A distance normalization range is zero.
    #[error("attribute `{attribute}` has zero range; distances are undefined")]
    ZeroAttributeRange { attribute: &'static str },

    /// Representative set carries no spatial structure to fit a variogram to.
    #[error("all representative contracts are identical; cannot fit a variogram")]
    NoSpatialStructure,

    /// Two representatives coincide, which makes the RBF system singular.
    #[error("representatives {first} and {second} are at distance zero")]
    DuplicateRepresentatives { first: usize, second: usize },

    /// Linear system remained singular after diagonal jitter.
    #[error("{context} system is singular even after diagonal jitter")]
    SingularSystem { context: &'static str },

    /// The relative-error stopping criterion divides by the mean MC delta.
    #[error("mean MC delta over the validation portfolio is zero; relative error is undefined")]
    ZeroMeanValidationDelta,

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged at iteration {iteration} (non-finite loss; lower the learning rate)")]
    TrainingDiverged { iteration: u64 },

    /// Auto-tuning exhausted its probe budget without a stable candidate.
    #[error("no stable candidate within the probe budget; tried: {tried}")]
    NoStableCandidate { tried: String },

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Malformed input file content.
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// A harness stage failed; the stage name tags the diagnostic.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the harness stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// An [`Error::Io`] carrying the offending path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
