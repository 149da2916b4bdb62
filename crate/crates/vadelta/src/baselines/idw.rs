//! Inverse-distance-weighted estimation.
//!
//! `ŷ(q) = Σ_i d_i^{−p} y_i / Σ_i d_i^{−p}` with the moneyness-damped
//! distance. Weights are combined in log space so that large powers (the
//! near-nearest-neighbor regime, `p = 100`) do not overflow; a query at
//! distance zero from any representative returns that representative's
//! value exactly (ties average).

use crate::baselines::distance::MoneynessDampedDistance;
use crate::error::Error;
use crate::portfolio::VaContract;
use crate::Result;

/// Inverse-distance interpolator over a fixed representative set.
#[derive(Debug, Clone)]
pub struct IdwEstimator {
    reps: Vec<VaContract>,
    deltas: Vec<f64>,
    power: f64,
    dist: MoneynessDampedDistance,
}

impl IdwEstimator {
    pub fn new(
        reps: &[VaContract],
        deltas: &[f64],
        power: f64,
        dist: MoneynessDampedDistance,
    ) -> Result<Self> {
        if reps.is_empty() || reps.len() != deltas.len() {
            return Err(Error::InvalidConfig(format!(
                "need matching non-empty representatives and deltas (got {} and {})",
                reps.len(),
                deltas.len()
            )));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidConfig("IDW power must be > 0".into()));
        }
        Ok(IdwEstimator {
            reps: reps.to_vec(),
            deltas: deltas.to_vec(),
            power,
            dist,
        })
    }

    pub fn estimate(&self, query: &VaContract) -> f64 {
        let distances: Vec<f64> = self
            .reps
            .iter()
            .map(|r| self.dist.distance(query, r))
            .collect();

        // Exact-match rule: zero distance dominates any finite weight.
        let mut exact_sum = 0.0;
        let mut exact_count = 0usize;
        for (d, y) in distances.iter().zip(&self.deltas) {
            if *d == 0.0 {
                exact_sum += y;
                exact_count += 1;
            }
        }
        if exact_count > 0 {
            return exact_sum / exact_count as f64;
        }

        // log w_i = −p ln d_i, shifted by the max so exp cannot overflow.
        let log_weights: Vec<f64> = distances.iter().map(|d| -self.power * d.ln()).collect();
        let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (lw, y) in log_weights.iter().zip(&self.deltas) {
            let w = (lw - top).exp();
            num += w * y;
            den += w;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{generate_input_portfolio, GenerationSpace};
    use proptest::prelude::*;

    fn setup(n: usize, seed: u64) -> (Vec<VaContract>, Vec<f64>, MoneynessDampedDistance) {
        let space = GenerationSpace::input_default();
        let reps = generate_input_portfolio(&space, n, seed, 0).unwrap();
        let deltas: Vec<f64> = (0..n).map(|i| -1e4 - 750.0 * i as f64).collect();
        let dist = MoneynessDampedDistance::from_contracts(1.0, reps.iter()).unwrap();
        (reps, deltas, dist)
    }

    #[test]
    fn query_on_a_representative_returns_its_delta() {
        let (reps, deltas, dist) = setup(20, 1);
        let est = IdwEstimator::new(&reps, &deltas, 1.0, dist).unwrap();
        for i in [0, 7, 19] {
            assert_eq!(est.estimate(&reps[i]), deltas[i]);
        }
    }

    #[test]
    fn tied_zero_distances_average() {
        let (mut reps, mut deltas, dist) = setup(6, 2);
        reps[3] = reps[0].clone();
        deltas[0] = -100.0;
        deltas[3] = -300.0;
        let est = IdwEstimator::new(&reps, &deltas, 2.0, dist).unwrap();
        assert_eq!(est.estimate(&reps[0]), -200.0);
    }

    // Large p is nearest-neighbor. A clear margin between the nearest and
    // second-nearest distance (d₂ ≥ 1.2·d₁ gives a weight ratio below
    // (1/1.2)^100 ≈ 1.2e-8) pins the estimate to the argmin rep within 1e-6
    // relative; near-tied queries must still land in the hull of their tied
    // set, since the p → ∞ limit itself cannot split a tie.
    #[test]
    fn power_one_hundred_tracks_the_nearest_representative() {
        let (reps, deltas, dist) = setup(50, 3);
        let est = IdwEstimator::new(&reps, &deltas, 100.0, dist).unwrap();
        let space = GenerationSpace::input_default();
        let queries = generate_input_portfolio(&space, 40, 99, 10_000).unwrap();
        let mut clear = 0;
        for q in &queries {
            let mut ds: Vec<(f64, usize)> = reps
                .iter()
                .enumerate()
                .map(|(i, r)| (dist.distance(q, r), i))
                .collect();
            ds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let got = est.estimate(q);
            let want = deltas[ds[0].1];
            if ds[1].0 >= 1.2 * ds[0].0 {
                clear += 1;
                assert!(
                    (got - want).abs() <= 1e-6 * want.abs(),
                    "query drifted from nearest: {got} vs {want}"
                );
            } else {
                let tied: Vec<f64> = ds
                    .iter()
                    .filter(|(d, _)| *d <= 1.2 * ds[0].0)
                    .map(|(_, i)| deltas[*i])
                    .collect();
                let lo = tied.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = tied.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(got >= lo - 1e-9 && got <= hi + 1e-9);
            }
        }
        assert!(clear >= queries.len() / 2, "only {clear} clear-margin queries");
    }

    #[test]
    fn equidistant_pair_averages_at_power_one() {
        // Two reps differing from the query only in gender and rider
        // respectively: both at categorical distance √γ.
        let space = GenerationSpace::input_default();
        let base = generate_input_portfolio(&space, 1, 5, 0).unwrap().remove(0);
        let mut a = base.clone();
        a.gender = match a.gender {
            crate::portfolio::Gender::Male => crate::portfolio::Gender::Female,
            crate::portfolio::Gender::Female => crate::portfolio::Gender::Male,
        };
        let mut b = base.clone();
        b.rider = match b.rider {
            crate::portfolio::Rider::GmdbOnly => crate::portfolio::Rider::GmdbPlusGmwb,
            crate::portfolio::Rider::GmdbPlusGmwb => crate::portfolio::Rider::GmdbOnly,
        };
        // Keep guarantee structure identical so only the categorical term
        // differs.
        b.gd_value = base.gd_value;
        b.gw_value = base.gw_value;
        let dist = MoneynessDampedDistance::new(1.0, 60.0).unwrap();
        assert_eq!(dist.distance(&base, &a), dist.distance(&base, &b));
        let est = IdwEstimator::new(&[a, b], &[-500.0, -900.0], 1.0, dist).unwrap();
        assert_eq!(est.estimate(&base), -700.0);
    }

    proptest! {
        // The estimate is a convex combination of representative deltas.
        #[test]
        fn estimates_stay_in_the_convex_hull(seed in 0u64..200, power in 0.5f64..8.0) {
            let (reps, deltas, dist) = setup(15, seed);
            let est = IdwEstimator::new(&reps, &deltas, power, dist).unwrap();
            let space = GenerationSpace::input_default();
            let q = &generate_input_portfolio(&space, 1, seed + 1000, 50_000).unwrap()[0];
            let y = est.estimate(q);
            let lo = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(y >= lo - 1e-9 && y <= hi + 1e-9, "{y} outside [{lo}, {hi}]");
        }
    }
}
