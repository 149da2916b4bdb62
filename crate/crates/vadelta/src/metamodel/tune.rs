//! Probe-based selection of learning rate, batch size, and record interval.
//!
//! Every candidate gets the same treatment: a fixed 3000-iteration training
//! run with early stopping disabled, then a verdict from the smoothed
//! training-MSE series. "Unstable" means the smoothed series either takes a
//! big jump (an increase of more than 50% between consecutive records) or
//! fails to end below where it started; a run that diverges outright counts
//! as unstable too.

use std::fmt::Write as _;

use crate::error::Error;
use crate::metamodel::features::FeatureConfig;
use crate::metamodel::stopping::centered_moving_average;
use crate::metamodel::train::{train_impl, TrainConfig, TrainingData};
use crate::Result;

const PROBE_ITERATIONS: u64 = 3000;
const BIG_JUMP_RATIO: f64 = 1.5;
/// Doubling steps before a search gives up on finding the far edge.
const MAX_DOUBLINGS: usize = 12;
const BISECTIONS: usize = 4;

/// Verdict on one probe run's training-MSE series.
pub fn classify_stability(train_mse: &[f64], smoothing_window: usize) -> bool {
    if train_mse.len() < 2 || train_mse.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let s = centered_moving_average(train_mse, smoothing_window);
    let no_jump = s.windows(2).all(|p| p[1] <= BIG_JUMP_RATIO * p[0]);
    no_jump && s.last().unwrap() < s.first().unwrap()
}

/// Confirmed direction reversals of the smoothed series with swing at least
/// 25% of its total span — the count of major peaks and valleys.
pub fn count_major_extrema(series: &[f64], smoothing_window: usize) -> usize {
    let s = centered_moving_average(series, smoothing_window);
    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let prominence = 0.25 * (hi - lo);
    if !(prominence > 0.0) {
        return 0;
    }
    let mut count = 0;
    let mut extreme = s[0];
    let mut direction = 0i8;
    for &v in &s[1..] {
        match direction {
            0 => {
                if (v - extreme).abs() >= prominence {
                    direction = if v > extreme { 1 } else { -1 };
                    extreme = v;
                }
            }
            1 => {
                if v > extreme {
                    extreme = v;
                } else if extreme - v >= prominence {
                    count += 1;
                    direction = -1;
                    extreme = v;
                }
            }
            _ => {
                if v < extreme {
                    extreme = v;
                } else if v - extreme >= prominence {
                    count += 1;
                    direction = 1;
                    extreme = v;
                }
            }
        }
    }
    count
}

/// Tracks how many probe runs remain and what was tried, for the error
/// report when nothing stable turns up.
struct ProbeLog {
    remaining: usize,
    tried: String,
}

impl ProbeLog {
    fn charge(&mut self, what: &str) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.remaining -= 1;
        if !self.tried.is_empty() {
            self.tried.push_str(", ");
        }
        let _ = write!(self.tried, "{what}");
        true
    }

    fn exhausted(&self, stage: &str) -> Error {
        Error::NoStableCandidate {
            tried: format!("{stage}; probes spent: {}", self.tried),
        }
    }
}

/// Doubling-until-unstable from 1, then bisection between the last stable
/// and first unstable rate; returns the largest rate observed stable. A
/// rate-1 instability searches downward by halving first.
fn search_learning_rate(
    mut probe: impl FnMut(f64) -> Result<bool>,
    log: &mut ProbeLog,
) -> Result<f64> {
    let mut try_rate = |rate: f64, log: &mut ProbeLog| -> Result<Option<bool>> {
        if !log.charge(&format!("lr {rate}")) {
            return Ok(None);
        }
        probe(rate).map(Some)
    };

    let mut stable = None;
    let mut unstable = None;
    let mut rate = 1.0;
    for _ in 0..=MAX_DOUBLINGS {
        match try_rate(rate, log)? {
            None => break,
            Some(true) => {
                stable = Some(rate);
                rate *= 2.0;
            }
            Some(false) => {
                unstable = Some(rate);
                break;
            }
        }
    }
    if stable.is_none() {
        // Nothing stable at 1 or above: halve downward.
        let mut rate = 0.5;
        for _ in 0..MAX_DOUBLINGS {
            match try_rate(rate, log)? {
                None => break,
                Some(true) => {
                    stable = Some(rate);
                    break;
                }
                Some(false) => {
                    unstable = Some(rate);
                    rate /= 2.0;
                }
            }
        }
    }
    let Some(mut best) = stable else {
        return Err(log.exhausted("no stable learning rate"));
    };
    if let Some(mut hi) = unstable {
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (best + hi);
            match try_rate(mid, log)? {
                None => break,
                Some(true) => best = mid,
                Some(false) => hi = mid,
            }
        }
    }
    Ok(best)
}

/// Doubling-until-stable from 5, capped at the full training portfolio.
fn search_batch_size(
    mut probe: impl FnMut(usize) -> Result<bool>,
    training_len: usize,
    log: &mut ProbeLog,
) -> Result<usize> {
    let mut size = 5.min(training_len);
    loop {
        if !log.charge(&format!("batch {size}")) {
            return Err(log.exhausted("no stable batch size"));
        }
        if probe(size)? {
            return Ok(size);
        }
        if size >= training_len {
            return Err(log.exhausted("no stable batch size up to the full portfolio"));
        }
        size = (size * 2).min(training_len);
    }
}

/// Doubling from 10 while the count of major extrema of the smoothed trend
/// is preserved — dropping to fewer than half the extrema means the coarser
/// records lost real structure, so the previous interval wins.
fn search_record_interval(
    mut extrema_at: impl FnMut(u64) -> Result<usize>,
    max_interval: u64,
    log: &mut ProbeLog,
) -> Result<u64> {
    let mut interval = 10u64;
    if !log.charge(&format!("interval {interval}")) {
        return Err(log.exhausted("no record-interval probe budget"));
    }
    let mut count = extrema_at(interval)?;
    while interval * 2 <= max_interval {
        if !log.charge(&format!("interval {}", interval * 2)) {
            break;
        }
        let next = extrema_at(interval * 2)?;
        let preserved = count == 0 || 2 * next > count;
        if !preserved {
            break;
        }
        interval *= 2;
        count = next;
    }
    Ok(interval)
}

/// Selected `(learning rate, batch size, record interval)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedParameters {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub record_interval: u64,
}

/// Runs the three searches in order (rate at the base batch size, batch
/// size at the chosen rate, record interval at both), spending at most
/// `budget` probe trainings overall. A zero budget bypasses probing and
/// returns the built-in defaults (1, 20, 50).
pub fn auto_tune(
    data: &TrainingData,
    features: &FeatureConfig,
    base: &TrainConfig,
    budget: usize,
) -> Result<TunedParameters> {
    if budget == 0 {
        return Ok(TunedParameters {
            learning_rate: 1.0,
            batch_size: 20,
            record_interval: 50,
        });
    }
    let mut log = ProbeLog { remaining: budget, tried: String::new() };

    let run = |cfg: TrainConfig| -> Result<Option<Vec<f64>>> {
        match train_impl(data, features.clone(), &cfg, false) {
            Ok((_, state)) => Ok(Some(state.records.iter().map(|r| r.train_mse).collect())),
            Err(Error::TrainingDiverged { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let probe_cfg = |lr: f64, batch: usize, interval: u64| TrainConfig {
        learning_rate: lr,
        batch_size: batch,
        record_interval: interval,
        max_iterations: PROBE_ITERATIONS,
        ..base.clone()
    };

    let learning_rate = search_learning_rate(
        |lr| {
            Ok(run(probe_cfg(lr, base.batch_size, base.record_interval))?
                .map(|series| classify_stability(&series, base.smoothing_window))
                .unwrap_or(false))
        },
        &mut log,
    )?;

    let batch_size = search_batch_size(
        |batch| {
            Ok(run(probe_cfg(learning_rate, batch, base.record_interval))?
                .map(|series| classify_stability(&series, base.smoothing_window))
                .unwrap_or(false))
        },
        data.training.len(),
        &mut log,
    )?;

    // Keep at least 2·W̄ records so the smoothed trend means something.
    let max_interval = PROBE_ITERATIONS / (2 * base.smoothing_window as u64).max(1);
    let record_interval = search_record_interval(
        |interval| {
            Ok(run(probe_cfg(learning_rate, batch_size, interval))?
                .map(|series| count_major_extrema(&series, base.smoothing_window))
                .unwrap_or(0))
        },
        max_interval,
        &mut log,
    )?;

    Ok(TunedParameters { learning_rate, batch_size, record_interval })
}
