//! The two contract-space distance functions used by the interpolators.
//!
//! Both treat gender and rider as categorical mismatches weighted by `γ`.
//! The range-normalized distance scales each numeric attribute by its span
//! over the generation space; the moneyness-damped distance instead damps
//! maturity, withdrawal rate, and age by `e^{−AV/GD}` and weights the age
//! gap by how close the pair is to the oldest age in play.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::portfolio::{GenerationSpace, VaContract};
use crate::Result;

/// Min/max per numeric attribute, used to normalize distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeRanges {
    pub account_value: (f64, f64),
    pub gd_value: (f64, f64),
    pub gw_value: (f64, f64),
    pub age: (f64, f64),
    pub maturity: (f64, f64),
    pub withdrawal_rate: (f64, f64),
}

impl AttributeRanges {
    /// Ranges implied by a generation space. The GW span starts at zero
    /// because GMDB-only contracts carry a zero withdrawal benefit.
    pub fn from_space(space: &GenerationSpace) -> Result<Self> {
        space.validate()?;
        let ages = (
            *space.ages.iter().min().unwrap() as f64,
            *space.ages.iter().max().unwrap() as f64,
        );
        let maturities = (
            *space.maturities.iter().min().unwrap() as f64,
            *space.maturities.iter().max().unwrap() as f64,
        );
        let wr = NumericMinMax::over(space.withdrawal_rates.iter().copied());
        let gv = space.guarantee_values.bounds();
        Ok(AttributeRanges {
            account_value: space.account_values.bounds(),
            gd_value: gv,
            gw_value: (0.0, gv.1),
            age: ages,
            maturity: maturities,
            withdrawal_rate: wr,
        })
    }

    /// Ranges observed over a concrete set of contracts.
    pub fn from_contracts(contracts: &[VaContract]) -> Result<Self> {
        if contracts.is_empty() {
            return Err(Error::InvalidConfig(
                "cannot derive attribute ranges from an empty portfolio".into(),
            ));
        }
        Ok(AttributeRanges {
            account_value: NumericMinMax::over(contracts.iter().map(|c| c.account_value)),
            gd_value: NumericMinMax::over(contracts.iter().map(|c| c.gd_value)),
            gw_value: NumericMinMax::over(contracts.iter().map(|c| c.gw_value)),
            age: NumericMinMax::over(contracts.iter().map(|c| c.age as f64)),
            maturity: NumericMinMax::over(contracts.iter().map(|c| c.maturity as f64)),
            withdrawal_rate: NumericMinMax::over(contracts.iter().map(|c| c.withdrawal_rate)),
        })
    }

    fn spans(&self) -> Result<[f64; 6]> {
        let pairs = [
            ("account_value", self.account_value),
            ("gd_value", self.gd_value),
            ("gw_value", self.gw_value),
            ("maturity", self.maturity),
            ("age", self.age),
            ("withdrawal_rate", self.withdrawal_rate),
        ];
        let mut spans = [0.0; 6];
        for (k, (attribute, (lo, hi))) in pairs.into_iter().enumerate() {
            let span = hi - lo;
            if !(span > 0.0 && span.is_finite()) {
                return Err(Error::ZeroAttributeRange { attribute });
            }
            spans[k] = span;
        }
        Ok(spans)
    }
}

struct NumericMinMax;

impl NumericMinMax {
    fn over(values: impl Iterator<Item = f64>) -> (f64, f64) {
        values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    }
}

fn categorical_mismatches(x: &VaContract, y: &VaContract) -> f64 {
    (x.gender != y.gender) as u32 as f64 + (x.rider != y.rider) as u32 as f64
}

/// Range-normalized Euclidean distance over all six numeric attributes plus
/// `γ`-weighted categorical mismatches:
/// `√( Σ_N ((x_h − y_h)/(max_h − min_h))² + γ Σ_C δ(x_h, y_h) )`.
#[derive(Debug, Clone, Copy)]
pub struct RangeNormalizedDistance {
    gamma: f64,
    spans: [f64; 6],
}

impl RangeNormalizedDistance {
    pub fn new(gamma: f64, ranges: &AttributeRanges) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig("distance γ must be ≥ 0".into()));
        }
        Ok(RangeNormalizedDistance {
            gamma,
            spans: ranges.spans()?,
        })
    }

    pub fn distance(&self, x: &VaContract, y: &VaContract) -> f64 {
        let [av, gd, gw, maturity, age, wr] = self.spans;
        let gaps = [
            (x.account_value - y.account_value) / av,
            (x.gd_value - y.gd_value) / gd,
            (x.gw_value - y.gw_value) / gw,
            (x.maturity as f64 - y.maturity as f64) / maturity,
            (x.age as f64 - y.age as f64) / age,
            (x.withdrawal_rate - y.withdrawal_rate) / wr,
        ];
        let numeric: f64 = gaps.iter().map(|g| g * g).sum();
        (numeric + self.gamma * categorical_mismatches(x, y)).sqrt()
    }
}

/// Moneyness-damped distance: each of maturity, withdrawal rate, and age
/// enters as `(e^{−r_x} x_h − e^{−r_y} y_h)²` with `r = AV/GD`, the age term
/// additionally weighted by `exp((x_age + y_age)/2 − M)` with `M` the
/// maximum age in play; categorical mismatches are `γ`-weighted; all under
/// one square root. A zero death benefit is the `r → ∞` limit, `e^{−r} = 0`.
#[derive(Debug, Clone, Copy)]
pub struct MoneynessDampedDistance {
    gamma: f64,
    max_age: f64,
}

impl MoneynessDampedDistance {
    pub fn new(gamma: f64, max_age: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig("distance γ must be ≥ 0".into()));
        }
        if !max_age.is_finite() {
            return Err(Error::InvalidConfig("max age must be finite".into()));
        }
        Ok(MoneynessDampedDistance { gamma, max_age })
    }

    /// `M` taken as the oldest age over every contract the distance will
    /// compare (representatives and queries alike).
    pub fn from_contracts<'a>(
        gamma: f64,
        contracts: impl Iterator<Item = &'a VaContract>,
    ) -> Result<Self> {
        let max_age = contracts.map(|c| c.age).max().ok_or_else(|| {
            Error::InvalidConfig("cannot derive max age from an empty portfolio".into())
        })?;
        Self::new(gamma, max_age as f64)
    }

    fn damping(c: &VaContract) -> f64 {
        if c.gd_value > 0.0 {
            (-c.account_value / c.gd_value).exp()
        } else {
            0.0
        }
    }

    pub fn distance(&self, x: &VaContract, y: &VaContract) -> f64 {
        let dx = Self::damping(x);
        let dy = Self::damping(y);
        let g = |xv: f64, yv: f64| {
            let diff = dx * xv - dy * yv;
            diff * diff
        };
        let age_weight = ((x.age as f64 + y.age as f64) / 2.0 - self.max_age).exp();
        let sum = age_weight * g(x.age as f64, y.age as f64)
            + g(x.maturity as f64, y.maturity as f64)
            + g(x.withdrawal_rate, y.withdrawal_rate)
            + self.gamma * categorical_mismatches(x, y);
        sum.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{generate_input_portfolio, Gender, Rider};
    use proptest::prelude::*;

    fn contract(av: f64, gd: f64, gw: f64, age: u32, maturity: u32, wr: f64) -> VaContract {
        VaContract {
            id: 0,
            rider: Rider::GmdbPlusGmwb,
            gender: Gender::Female,
            age,
            account_value: av,
            gd_value: gd,
            gw_value: gw,
            withdrawal_rate: wr,
            maturity,
        }
    }

    fn input_ranges() -> AttributeRanges {
        AttributeRanges::from_space(&GenerationSpace::input_default()).unwrap()
    }

    #[test]
    fn range_normalized_distance_is_zero_at_identity() {
        let d = RangeNormalizedDistance::new(1.0, &input_ranges()).unwrap();
        let x = contract(2e5, 3e5, 3e5, 40, 15, 0.05);
        assert_eq!(d.distance(&x, &x), 0.0);
    }

    #[test]
    fn lone_gender_mismatch_scores_one() {
        let d = RangeNormalizedDistance::new(1.0, &input_ranges()).unwrap();
        let x = contract(2e5, 3e5, 3e5, 40, 15, 0.05);
        let mut y = x.clone();
        y.gender = Gender::Male;
        assert_eq!(d.distance(&x, &y), 1.0);
    }

    // Two numeric gaps at exactly half their spans, same categories:
    // D = √(0.5² + 0.5²) = √0.5.
    #[test]
    fn known_numeric_gaps_evaluate_directly() {
        let ranges = AttributeRanges {
            account_value: (0.0, 1e5),
            gd_value: (0.0, 2e5),
            gw_value: (0.0, 1e5),
            age: (20.0, 60.0),
            maturity: (10.0, 25.0),
            withdrawal_rate: (0.04, 0.08),
        };
        let d = RangeNormalizedDistance::new(1.0, &ranges).unwrap();
        let x = contract(5e4, 1e5, 1e4, 30, 12, 0.05);
        let mut y = x.clone();
        y.account_value = 0.0; // gap 0.5 of span
        y.gd_value = 0.0; // gap 0.5 of span
        let got = d.distance(&x, &y);
        assert!((got - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_span_is_a_configuration_error() {
        let mut ranges = input_ranges();
        ranges.age = (40.0, 40.0);
        let err = RangeNormalizedDistance::new(1.0, &ranges).unwrap_err();
        assert!(matches!(err, Error::ZeroAttributeRange { attribute: "age" }));
    }

    #[test]
    fn moneyness_damped_distance_is_zero_at_identity() {
        let d = MoneynessDampedDistance::new(1.0, 60.0).unwrap();
        for c in [
            contract(2e5, 3e5, 3e5, 40, 15, 0.05),
            contract(2e5, 0.0, 0.0, 40, 15, 0.05), // zero GD: damped limit
        ] {
            assert_eq!(d.distance(&c, &c), 0.0);
        }
    }

    // Independent recomputation of the formula on a hand-built pair.
    #[test]
    fn moneyness_damped_distance_matches_hand_evaluation() {
        let x = contract(1e5, 2e5, 2e5, 40, 15, 0.05);
        let mut y = contract(1.5e5, 1e5, 1e5, 50, 20, 0.07);
        y.gender = Gender::Male;
        let d = MoneynessDampedDistance::new(1.0, 60.0).unwrap();

        let ex = (-0.5f64).exp();
        let ey = (-1.5f64).exp();
        let f = ((40.0 + 50.0) / 2.0 - 60.0f64).exp();
        let expect = (f * (ex * 40.0 - ey * 50.0).powi(2)
            + (ex * 15.0 - ey * 20.0).powi(2)
            + (ex * 0.05 - ey * 0.07).powi(2)
            + 1.0)
            .sqrt();
        assert!((d.distance(&x, &y) - expect).abs() < 1e-15);
    }

    #[test]
    fn max_age_comes_from_all_contracts() {
        let a = contract(1e5, 2e5, 2e5, 35, 15, 0.05);
        let b = contract(1e5, 2e5, 2e5, 58, 15, 0.05);
        let d = MoneynessDampedDistance::from_contracts(1.0, [a, b].iter()).unwrap();
        let via_const = MoneynessDampedDistance::new(1.0, 58.0).unwrap();
        let x = contract(2e5, 1e5, 1e5, 41, 12, 0.06);
        let y = contract(3e5, 2e5, 2e5, 47, 18, 0.04);
        assert_eq!(d.distance(&x, &y), via_const.distance(&x, &y));
    }

    proptest! {
        #[test]
        fn both_distances_are_symmetric_and_nonnegative(
            seed in 0u64..500,
        ) {
            let space = GenerationSpace::input_default();
            let pair = generate_input_portfolio(&space, 2, seed, 0).unwrap();
            let (x, y) = (&pair[0], &pair[1]);
            let rn = RangeNormalizedDistance::new(1.0, &input_ranges()).unwrap();
            let md = MoneynessDampedDistance::new(1.0, 60.0).unwrap();
            for (dxy, dyx) in [
                (rn.distance(x, y), rn.distance(y, x)),
                (md.distance(x, y), md.distance(y, x)),
            ] {
                prop_assert!(dxy >= 0.0);
                prop_assert_eq!(dxy, dyx);
                }
            prop_assert_eq!(rn.distance(x, x), 0.0);
            prop_assert_eq!(md.distance(x, x), 0.0);
        }
    }
}
