//! Empirical semivariograms and parametric model fitting.
//!
//! The empirical semivariogram pools every representative pair into 15
//! equal-width distance bins: each nonempty bin contributes a point
//! (mean pair distance, mean of `(y_i − y_j)²/2`) — the mean distance
//! rather than the bin midpoint, because pair distances pile up unevenly
//! inside a bin and the midpoint would bias the curve. A parametric model
//! is fitted by scanning a grid of candidate ranges and, for each, solving
//! the two-parameter nonnegative least-squares problem for
//! (nugget, sill − nugget) over the nonempty bins, all bins weighted
//! equally; the best total squared error wins.

use serde::{Deserialize, Serialize};

use crate::baselines::distance::RangeNormalizedDistance;
use crate::error::Error;
use crate::portfolio::VaContract;
use crate::Result;

/// Shape of the variogram's rise toward the sill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariogramKind {
    /// Polynomial rise, exactly flat beyond the range.
    Spherical,
    /// `1 − e^{−3h/a}`: asymptotic approach, ~95% of the sill at `h = a`.
    Exponential,
}

/// Fitted variogram: `γ(0) = 0`, and for `h > 0`
/// `γ(h) = nugget + (sill − nugget) · shape(h / range)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub kind: VariogramKind,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl VariogramModel {
    pub fn new(kind: VariogramKind, nugget: f64, sill: f64, range: f64) -> Result<Self> {
        if !(nugget >= 0.0 && sill >= nugget && range > 0.0)
            || !(nugget.is_finite() && sill.is_finite() && range.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "variogram needs 0 ≤ nugget ≤ sill and range > 0 (got {nugget}, {sill}, {range})"
            )));
        }
        Ok(VariogramModel {
            kind,
            nugget,
            sill,
            range,
        })
    }

    fn shape(kind: VariogramKind, ratio: f64) -> f64 {
        match kind {
            VariogramKind::Spherical => {
                if ratio >= 1.0 {
                    1.0
                } else {
                    1.5 * ratio - 0.5 * ratio * ratio * ratio
                }
            }
            VariogramKind::Exponential => 1.0 - (-3.0 * ratio).exp(),
        }
    }

    /// Semivariance at distance `h`; `γ(0) = 0` by convention, with the
    /// nugget appearing as a discontinuity at the origin.
    pub fn gamma(&self, h: f64) -> f64 {
        if h == 0.0 {
            0.0
        } else {
            self.nugget + (self.sill - self.nugget) * Self::shape(self.kind, h / self.range)
        }
    }
}

/// One nonempty distance bin of an empirical semivariogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemivariogramBin {
    /// Mean pair distance within the bin.
    pub distance: f64,
    pub value: f64,
    pub pairs: usize,
}

const BIN_COUNT: usize = 15;

/// All-pairs empirical semivariogram in 15 equal-width distance bins.
/// Errors if every pair sits at distance zero (no spatial structure).
pub fn empirical_semivariogram(
    reps: &[VaContract],
    deltas: &[f64],
    dist: &RangeNormalizedDistance,
) -> Result<Vec<SemivariogramBin>> {
    if reps.len() != deltas.len() || reps.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "semivariogram needs matching representatives and deltas, at least 2 (got {} and {})",
            reps.len(),
            deltas.len()
        )));
    }
    let mut pairs = Vec::with_capacity(reps.len() * (reps.len() - 1) / 2);
    let mut d_max = 0.0f64;
    for i in 0..reps.len() {
        for j in (i + 1)..reps.len() {
            let d = dist.distance(&reps[i], &reps[j]);
            let v = 0.5 * (deltas[i] - deltas[j]).powi(2);
            d_max = d_max.max(d);
            pairs.push((d, v));
        }
    }
    if d_max == 0.0 {
        return Err(Error::NoSpatialStructure);
    }
    let width = d_max / BIN_COUNT as f64;
    let mut value_sums = [0.0f64; BIN_COUNT];
    let mut dist_sums = [0.0f64; BIN_COUNT];
    let mut counts = [0usize; BIN_COUNT];
    for (d, v) in pairs {
        let k = ((d / width) as usize).min(BIN_COUNT - 1);
        value_sums[k] += v;
        dist_sums[k] += d;
        counts[k] += 1;
    }
    Ok((0..BIN_COUNT)
        .filter(|&k| counts[k] > 0)
        .map(|k| SemivariogramBin {
            distance: dist_sums[k] / counts[k] as f64,
            value: value_sums[k] / counts[k] as f64,
            pairs: counts[k],
        })
        .collect())
}

/// Best (nugget, sill − nugget) ≥ 0 for fixed shape values `x`, by direct
/// enumeration of the active-set cases of the 2-variable nonnegative
/// least-squares problem. Returns (nugget, partial_sill, sse).
fn nnls_two(x: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let sv: f64 = v.iter().sum();
    let sxv: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();

    let sse_of = |b0: f64, b1: f64| {
        x.iter()
            .zip(v)
            .map(|(a, y)| {
                let r = b0 + b1 * a - y;
                r * r
            })
            .sum::<f64>()
    };

    let mut candidates: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    // β₁ = 0: intercept only.
    candidates.push(((sv / n).max(0.0), 0.0));
    // β₀ = 0: slope only.
    if sxx > 0.0 {
        candidates.push((0.0, (sxv / sxx).max(0.0)));
    }
    // Both free: 2×2 normal equations.
    let det = n * sxx - sx * sx;
    if det.abs() > 1e-12 * n * sxx.max(1.0) {
        let b0 = (sv * sxx - sx * sxv) / det;
        let b1 = (n * sxv - sx * sv) / det;
        if b0 >= 0.0 && b1 >= 0.0 {
            candidates.push((b0, b1));
        }
    }
    candidates
        .into_iter()
        .map(|(b0, b1)| (b0, b1, sse_of(b0, b1)))
        .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .unwrap()
}

/// Fits model parameters to already-binned semivariogram values: grid
/// search over the range, constrained least squares for nugget and sill at
/// each candidate, all nonempty bins weighted equally.
pub fn fit_to_bins(bins: &[SemivariogramBin], kind: VariogramKind) -> Result<VariogramModel> {
    if bins.is_empty() {
        return Err(Error::NoSpatialStructure);
    }
    // The farthest pair always lands in the last occupied bin, so its mean
    // distance sits within half a bin width of the true maximum — close
    // enough to scale the range search grid.
    let d_max = bins.last().map(|b| b.distance).unwrap() / (1.0 - 0.5 / BIN_COUNT as f64);
    let xs: Vec<f64> = bins.iter().map(|b| b.distance).collect();
    let vs: Vec<f64> = bins.iter().map(|b| b.value).collect();

    if bins.len() < 2 {
        // A single occupied bin cannot separate nugget from sill; collapse
        // to a flat model at the observed level.
        let level = vs[0].max(0.0);
        return VariogramModel::new(kind, level, level, d_max.max(f64::MIN_POSITIVE));
    }

    const RANGE_GRID: usize = 120;
    let mut best: Option<(f64, VariogramModel)> = None;
    for k in 1..=RANGE_GRID {
        // Candidate ranges from d_max/60 up to 2·d_max.
        let a = d_max * (k as f64 / RANGE_GRID as f64) * 2.0;
        let shape: Vec<f64> = xs
            .iter()
            .map(|&h| VariogramModel::shape(kind, h / a))
            .collect();
        let (nugget, partial, sse) = nnls_two(&shape, &vs);
        let model = VariogramModel::new(kind, nugget, nugget + partial, a)?;
        if best.as_ref().is_none_or(|(s, _)| sse < *s) {
            best = Some((sse, model));
        }
    }
    Ok(best.unwrap().1)
}

/// Fits a variogram model to the empirical semivariogram of the
/// representatives.
pub fn fit_variogram(
    reps: &[VaContract],
    deltas: &[f64],
    kind: VariogramKind,
    dist: &RangeNormalizedDistance,
) -> Result<VariogramModel> {
    if reps.len() < 10 {
        return Err(Error::InvalidConfig(format!(
            "variogram fitting needs at least 10 representatives (got {})",
            reps.len()
        )));
    }
    fit_to_bins(&empirical_semivariogram(reps, deltas, dist)?, kind)
}
