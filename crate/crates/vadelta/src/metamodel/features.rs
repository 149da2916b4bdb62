//! Per-representative feature vectors for the softmax network.
//!
//! A query is never fed to the network directly; each hidden neuron sees the
//! query only relative to its own representative: one 0/1 mismatch entry per
//! categorical attribute, and a rectified pair per numeric transform —
//! `[t(x) − t(x_i)]⁺/R_t` and `[t(x_i) − t(x)]⁺/R_t` — so direction of the
//! difference is encoded by which side is nonzero.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::portfolio::{GenerationSpace, Rider, VaContract};
use crate::Result;

/// Categorical attribute compared for exact mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalAttribute {
    Rider,
    Gender,
}

impl CategoricalAttribute {
    fn mismatch(self, x: &VaContract, y: &VaContract) -> f64 {
        let same = match self {
            CategoricalAttribute::Rider => x.rider == y.rider,
            CategoricalAttribute::Gender => x.gender == y.gender,
        };
        if same {
            0.0
        } else {
            1.0
        }
    }
}

/// Numeric transform `t(·)` of a contract, compared through a rectified
/// difference pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericTransform {
    Maturity,
    Age,
    AccountValue,
    GdOverAv,
    GwOverAv,
    WithdrawalRate,
}

impl NumericTransform {
    pub fn apply(self, c: &VaContract) -> f64 {
        match self {
            NumericTransform::Maturity => c.maturity as f64,
            NumericTransform::Age => c.age as f64,
            NumericTransform::AccountValue => c.account_value,
            NumericTransform::GdOverAv => c.gd_value / c.account_value,
            NumericTransform::GwOverAv => c.gw_value / c.account_value,
            NumericTransform::WithdrawalRate => c.withdrawal_rate,
        }
    }
}

/// Feature layout: categorical mismatches first, then a `(F⁺, F⁻)` pair per
/// numeric transform, each scaled by that transform's range `R_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub categoricals: Vec<CategoricalAttribute>,
    /// `(transform, R_t)` with `R_t > 0`.
    pub transforms: Vec<(NumericTransform, f64)>,
}

impl FeatureConfig {
    /// Full default feature set with ranges derived from a generation space.
    ///
    /// Linear transforms span their attribute's own extremes. The moneyness
    /// ratios normalize by the first-order spread of the quotient at the
    /// midpoint account value, `(ΔG + Ḡ·ΔA/Ā)/Ā` — NOT by the worst-case
    /// quotient of extremes. On the default space that worst case is a 60×
    /// ratio, which would compress typical moneyness differences to a
    /// percent of the feature scale; a network trained at the standard rate
    /// then stops long before it can separate in- from out-of-the-money
    /// business, and portfolio-level accuracy collapses.
    pub fn from_space(space: &GenerationSpace) -> Result<Self> {
        let int_span = |vals: &[u32], attribute: &'static str| -> Result<f64> {
            let lo = *vals.iter().min().ok_or(Error::EmptyRange { attribute })?;
            let hi = *vals.iter().max().unwrap();
            Ok((hi - lo) as f64)
        };
        let (av_lo, av_hi) = space.account_values.bounds();
        let (gv_lo, gv_hi) = space.guarantee_values.bounds();
        let wr_lo = space
            .withdrawal_rates
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let wr_hi = space
            .withdrawal_rates
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);

        // Spread the ratio can move to first order: guarantee sweeping its
        // interval at the midpoint account value, plus the account value
        // sweeping its interval at the midpoint guarantee. Degenerate
        // spaces stay usable as long as one of the two directions varies.
        let av_mid = 0.5 * (av_lo + av_hi);
        let ratio_span = |num_lo: f64, num_hi: f64| -> f64 {
            let num_mid = 0.5 * (num_lo + num_hi);
            ((num_hi - num_lo) + num_mid * (av_hi - av_lo) / av_mid) / av_mid
        };
        // GW is zero for death-benefit-only contracts, so its value floor
        // is 0 whenever that rider is in play.
        let gw_lo = if space.riders.contains(&Rider::GmdbOnly) {
            0.0
        } else {
            gv_lo
        };

        let cfg = FeatureConfig {
            categoricals: vec![CategoricalAttribute::Rider, CategoricalAttribute::Gender],
            transforms: vec![
                (NumericTransform::Maturity, int_span(&space.maturities, "maturities")?),
                (NumericTransform::Age, int_span(&space.ages, "ages")?),
                (NumericTransform::AccountValue, av_hi - av_lo),
                (NumericTransform::GdOverAv, ratio_span(gv_lo, gv_hi)),
                (NumericTransform::GwOverAv, ratio_span(gw_lo, gv_hi)),
                (NumericTransform::WithdrawalRate, wr_hi - wr_lo),
            ],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for &(t, r) in &self.transforms {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "feature range for {t:?} must be positive and finite (got {r})"
                )));
            }
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.categoricals.len() + 2 * self.transforms.len()
    }

    /// Writes `f(z, z_i)` for `query` against `rep` into `out`
    /// (length `feature_count()`).
    pub fn build_into(&self, query: &VaContract, rep: &VaContract, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.feature_count());
        let mut k = 0;
        for &c in &self.categoricals {
            out[k] = c.mismatch(query, rep);
            k += 1;
        }
        for &(t, r) in &self.transforms {
            let diff = t.apply(query) - t.apply(rep);
            out[k] = diff.max(0.0) / r;
            out[k + 1] = (-diff).max(0.0) / r;
            k += 2;
        }
    }

    pub fn build(&self, query: &VaContract, rep: &VaContract) -> Vec<f64> {
        let mut out = vec![0.0; self.feature_count()];
        self.build_into(query, rep, &mut out);
        out
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        // The default input space has positive span in every transform, so
        // this cannot fail.
        FeatureConfig::from_space(&GenerationSpace::input_default()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{generate_input_portfolio, Gender};
    use proptest::prelude::*;

    fn contract(age: u32, av: f64, gd: f64, gw: f64, wr: f64, maturity: u32) -> VaContract {
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

    #[test]
    fn identical_contracts_have_all_zero_features() {
        let cfg = FeatureConfig::default();
        let c = contract(40, 2e5, 1e5, 1e5, 0.05, 15);
        assert!(cfg.build(&c, &c).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn default_ranges_come_from_the_input_space_extremes() {
        let cfg = FeatureConfig::default();
        let ranges: Vec<f64> = cfg.transforms.iter().map(|&(_, r)| r).collect();
        // maturity, age, AV, GD/AV, GW/AV, withdrawal rate.
        let expect = [15.0, 40.0, 4.9e5, 59.99, 60.0, 0.04];
        for (got, want) in ranges.iter().zip(expect) {
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
        assert_eq!(cfg.feature_count(), 14);
    }

    #[test]
    fn age_extremes_saturate_the_rectified_pair() {
        let cfg = FeatureConfig::default();
        let query = contract(60, 2e5, 1e5, 1e5, 0.05, 15);
        let rep = contract(20, 2e5, 1e5, 1e5, 0.05, 15);
        let f = cfg.build(&query, &rep);
        // Layout: [rider, gender, maturity±, age±, ...] → age pair at 4, 5.
        assert_eq!(f[4], 1.0);
        assert_eq!(f[5], 0.0);
        let b = cfg.build(&rep, &query);
        assert_eq!(b[4], 0.0);
        assert_eq!(b[5], 1.0);
    }

    #[test]
    fn degenerate_space_is_rejected() {
        let mut space = GenerationSpace::input_default();
        space.ages = vec![40];
        assert!(FeatureConfig::from_space(&space).is_err());
    }

    proptest! {
        // Rectifier complementarity and boundedness over in-space contracts.
        #[test]
        fn features_are_bounded_with_one_sided_pairs(seed in 0u64..500) {
            let cfg = FeatureConfig::default();
            let space = GenerationSpace::input_default();
            let cs = generate_input_portfolio(&space, 2, seed, 0).unwrap();
            let f = cfg.build(&cs[0], &cs[1]);
            for k in 0..cfg.categoricals.len() {
                prop_assert!(f[k] == 0.0 || f[k] == 1.0);
            }
            for p in 0..cfg.transforms.len() {
                let plus = f[cfg.categoricals.len() + 2 * p];
                let minus = f[cfg.categoricals.len() + 2 * p + 1];
                prop_assert!(plus * minus == 0.0);
                prop_assert!((0.0..=1.0).contains(&plus), "{plus}");
                prop_assert!((0.0..=1.0).contains(&minus), "{minus}");
            }
        }
    }
}
