//! Classical spatial interpolators estimating portfolio delta from a
//! valued representative set: inverse-distance weighting, ordinary kriging
//! (spherical or exponential variogram), and Gaussian radial basis
//! functions.
//!
//! Kriging and RBF work over the range-normalized contract distance; IDW
//! uses the moneyness-damped distance. Kriging supports a portfolio mode
//! that produces the aggregate with a single linear solve.

pub mod distance;
pub mod idw;
pub mod kriging;
pub mod rbf;
pub mod variogram;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::portfolio::VaContract;
use crate::Result;
pub use distance::{AttributeRanges, MoneynessDampedDistance, RangeNormalizedDistance};
pub use idw::IdwEstimator;
pub use kriging::KrigingSystem;
pub use rbf::RbfInterpolator;
pub use variogram::{
    empirical_semivariogram, fit_variogram, SemivariogramBin, VariogramKind, VariogramModel,
};

/// Which interpolator to run, with its free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimatorKind {
    Idw { power: f64 },
    Kriging { variogram: VariogramKind },
    Rbf { epsilon: f64 },
}

impl EstimatorKind {
    /// Short label used in report tables.
    pub fn label(&self) -> String {
        match self {
            EstimatorKind::Idw { power } => format!("idw_p{power}"),
            EstimatorKind::Kriging {
                variogram: VariogramKind::Spherical,
            } => "kriging_spherical".into(),
            EstimatorKind::Kriging {
                variogram: VariogramKind::Exponential,
            } => "kriging_exponential".into(),
            EstimatorKind::Rbf { .. } => "rbf_gaussian".into(),
        }
    }
}

/// Portfolio-level estimate; per-policy values are kept only when asked
/// for, since kriging can aggregate with one solve instead.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioEstimate {
    pub aggregate: f64,
    pub per_policy: Option<Vec<f64>>,
}

/// Estimates the delta of `queries` from valued representatives.
///
/// `gamma` weights categorical mismatches in both distances; `ranges`
/// normalizes the numeric attributes (take them from the generation space,
/// not the sample). With `per_policy` set, every query's estimate is
/// returned and the aggregate is their sum; without it, kriging uses its
/// single-solve portfolio mode.
pub fn portfolio_estimate(
    kind: EstimatorKind,
    reps: &[VaContract],
    deltas: &[f64],
    queries: &[VaContract],
    gamma: f64,
    ranges: &AttributeRanges,
    per_policy: bool,
) -> Result<PortfolioEstimate> {
    let collect = |estimates: Vec<f64>| {
        let aggregate = estimates.iter().sum();
        PortfolioEstimate {
            aggregate,
            per_policy: Some(estimates),
        }
    };
    match kind {
        EstimatorKind::Idw { power } => {
            let dist =
                MoneynessDampedDistance::from_contracts(gamma, reps.iter().chain(queries))?;
            let est = IdwEstimator::new(reps, deltas, power, dist)?;
            let estimates: Vec<f64> = queries.par_iter().map(|q| est.estimate(q)).collect();
            let mut out = collect(estimates);
            if !per_policy {
                out.per_policy = None;
            }
            Ok(out)
        }
        EstimatorKind::Kriging { variogram } => {
            let dist = RangeNormalizedDistance::new(gamma, ranges)?;
            let model = fit_variogram(reps, deltas, variogram, &dist)?;
            let sys = KrigingSystem::build(reps, deltas, model, dist)?;
            if per_policy {
                let estimates: Vec<f64> = queries
                    .par_iter()
                    .map(|q| sys.estimate(q))
                    .collect::<Result<_>>()?;
                Ok(collect(estimates))
            } else {
                Ok(PortfolioEstimate {
                    aggregate: sys.aggregate(queries)?,
                    per_policy: None,
                })
            }
        }
        EstimatorKind::Rbf { epsilon } => {
            let dist = RangeNormalizedDistance::new(gamma, ranges)?;
            let rbf = RbfInterpolator::fit(reps, deltas, epsilon, dist)?;
            let estimates: Vec<f64> = queries.par_iter().map(|q| rbf.estimate(q)).collect();
            let mut out = collect(estimates);
            if !per_policy {
                out.per_policy = None;
            }
            Ok(out)
        }
    }
}
