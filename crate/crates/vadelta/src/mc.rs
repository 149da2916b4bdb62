//! Monte Carlo valuation of individual contracts: liability and delta.
//!
//! The fund follows a one-factor log-normal model with annual steps; the
//! guarantee cash flows are projected per scenario with mortality applied
//! as a deterministic decrement. Delta is a central difference of the
//! liability under a relative bump of the initial account value, valued on
//! the same path matrix (common random numbers), and is reported per unit
//! of relative fund move (`dV/dS · S`).
//!
//! Cash-flow model, fixed by design and shared by every estimator that is
//! compared against this engine: within each policy year, fund growth is
//! applied first, then the guaranteed withdrawal (GMWB riders only), then
//! the death-benefit assessment; all flows discount at the risk-free rate.
//! Withdrawals are static at `withdrawal_rate · GW₀` per year while
//! guaranteed balance remains, reduce the account and the death benefit
//! dollar-for-dollar, and generate an insurer cash flow only for the
//! shortfall over the available account value. No rider fees are modeled;
//! the liability is the expected discounted payout alone.

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mortality::MortalityTable;
use crate::portfolio::{Rider, VaContract};
use crate::seeds;
use crate::Result;

/// Monte Carlo engine settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub scenario_count: usize,
    /// Annual continuously-compounded risk-free rate; also the drift.
    pub risk_free_rate: f64,
    /// Annual volatility.
    pub volatility: f64,
    pub time_step_years: f64,
    /// Relative bump applied to the initial account value for delta.
    pub bump_fraction: f64,
    /// Base seed; per-contract path seeds are derived from it and the
    /// contract id.
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            scenario_count: 10_000,
            risk_free_rate: 0.03,
            volatility: 0.20,
            time_step_years: 1.0,
            bump_fraction: 0.01,
            seed: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenario_count < 1 {
            return Err(Error::InvalidConfig("scenario_count must be ≥ 1".into()));
        }
        if !(self.volatility >= 0.0 && self.volatility.is_finite()) {
            return Err(Error::InvalidConfig("volatility must be ≥ 0".into()));
        }
        if !self.risk_free_rate.is_finite() {
            return Err(Error::InvalidConfig("risk_free_rate must be finite".into()));
        }
        if !(self.time_step_years > 0.0 && self.time_step_years.is_finite()) {
            return Err(Error::InvalidConfig("time_step_years must be > 0".into()));
        }
        if !(self.bump_fraction > 0.0 && self.bump_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "bump_fraction must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Fund growth factors, one row per scenario, one column per year.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    factors: Vec<f64>,
    scenarios: usize,
    horizon: usize,
}

impl PathMatrix {
    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Growth factors of one scenario, indexed by year − 1.
    pub fn row(&self, scenario: usize) -> &[f64] {
        let start = scenario * self.horizon;
        &self.factors[start..start + self.horizon]
    }
}

/// Simulates the growth-factor matrix: each entry is
/// `exp((μ − σ²/2)Δt + σ√Δt · Z)` with independent standard-normal `Z`.
/// Deterministic per seed; one matrix serves every bumped valuation of a
/// contract (common random numbers).
pub fn generate_paths(cfg: &McConfig, horizon_years: u32, seed: u64) -> Result<PathMatrix> {
    cfg.validate()?;
    if horizon_years < 1 {
        return Err(Error::InvalidConfig("path horizon must be ≥ 1 year".into()));
    }
    let dt = cfg.time_step_years;
    let drift = (cfg.risk_free_rate - 0.5 * cfg.volatility * cfg.volatility) * dt;
    let diffusion = cfg.volatility * dt.sqrt();
    let horizon = horizon_years as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = (0..cfg.scenario_count * horizon)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (drift + diffusion * z).exp()
        })
        .collect();
    Ok(PathMatrix {
        factors,
        scenarios: cfg.scenario_count,
        horizon,
    })
}

/// Per-contract projection state that is identical across scenarios and
/// bump scales: decrement weights and discount factors.
struct Projection<'a> {
    contract: &'a VaContract,
    /// Probability of death in year `t`, at `death[t − 1]`.
    death: Vec<f64>,
    /// Discount factor to the end of year `t`, at `discount[t − 1]`.
    discount: Vec<f64>,
}

impl<'a> Projection<'a> {
    fn new(contract: &'a VaContract, mortality: &MortalityTable, cfg: &McConfig) -> Result<Self> {
        let dec = mortality.decrements(contract.gender, contract.age, contract.maturity)?;
        let discount = (1..=contract.maturity)
            .map(|t| (-cfg.risk_free_rate * t as f64 * cfg.time_step_years).exp())
            .collect();
        Ok(Projection {
            contract,
            death: dec.death,
            discount,
        })
    }

    /// Discounted guarantee payout of one scenario, starting from
    /// `initial_scale · account_value`.
    fn scenario_pv(&self, growth: &[f64], initial_scale: f64) -> f64 {
        let c = self.contract;
        let mut av = initial_scale * c.account_value;
        let withdrawal = c.annual_withdrawal();
        let mut balance = c.gw_value;
        let mut withdrawn = 0.0;
        let mut pv = 0.0;
        for t in 0..c.maturity as usize {
            av *= growth[t];
            if c.rider == Rider::GmdbPlusGmwb && balance > 0.0 && withdrawal > 0.0 {
                let w = withdrawal.min(balance);
                // Insurer pays only the shortfall the account cannot cover.
                pv += self.discount[t] * (w - av).max(0.0);
                av = (av - w).max(0.0);
                balance -= w;
                withdrawn += w;
            }
            let gd = (c.gd_value - withdrawn).max(0.0);
            pv += self.discount[t] * self.death[t] * (gd - av).max(0.0);
        }
        pv
    }
}

/// Values one contract on a given path matrix: mean discounted payout over
/// scenarios, with the initial account value scaled by `initial_scale`.
pub fn project_contract(
    contract: &VaContract,
    paths: &PathMatrix,
    mortality: &MortalityTable,
    cfg: &McConfig,
    initial_scale: f64,
) -> Result<f64> {
    if paths.horizon() < contract.maturity as usize {
        return Err(Error::InvalidConfig(format!(
            "path horizon {} is shorter than contract maturity {}",
            paths.horizon(),
            contract.maturity
        )));
    }
    let proj = Projection::new(contract, mortality, cfg)?;
    let sum: f64 = (0..paths.scenarios())
        .map(|s| proj.scenario_pv(paths.row(s), initial_scale))
        .sum();
    Ok(sum / paths.scenarios() as f64)
}

/// Valuation output for one contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub id: u64,
    /// Liability at the unbumped account value.
    pub liability: f64,
    /// Central-difference delta per unit of relative fund move.
    pub delta: f64,
    /// Standard error of the delta, from the per-scenario central
    /// differences.
    pub std_err: f64,
    pub scenario_count: usize,
}

/// Values a contract and its delta on one common-random-number path matrix.
///
/// `delta = [V(1 + h) − V(1 − h)] / (2h)` with `h = bump_fraction`; the
/// standard error is the sample standard error of the per-scenario central
/// differences. The path seed is derived from `(cfg.seed, contract.id)`, so
/// the result does not depend on how contracts are batched or scheduled.
pub fn compute_delta(
    contract: &VaContract,
    mortality: &MortalityTable,
    cfg: &McConfig,
) -> Result<McResult> {
    let seed = seeds::contract_seed(cfg.seed, contract.id);
    let paths = generate_paths(cfg, contract.maturity, seed)?;
    let proj = Projection::new(contract, mortality, cfg)?;
    let h = cfg.bump_fraction;
    let n = paths.scenarios();

    let mut liability_sum = 0.0;
    // Welford accumulation of the central-difference sample.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for s in 0..n {
        let row = paths.row(s);
        liability_sum += proj.scenario_pv(row, 1.0);
        let up = proj.scenario_pv(row, 1.0 + h);
        let down = proj.scenario_pv(row, 1.0 - h);
        let d = (up - down) / (2.0 * h);
        let k = (s + 1) as f64;
        let delta1 = d - mean;
        mean += delta1 / k;
        m2 += delta1 * (d - mean);
    }
    let std_err = if n > 1 {
        (m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    Ok(McResult {
        id: contract.id,
        liability: liability_sum / n as f64,
        delta: mean,
        std_err,
        scenario_count: n,
    })
}

/// Per-contract results plus the portfolio aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioValuation {
    pub results: Vec<McResult>,
    /// Sum of per-contract deltas.
    pub aggregate_delta: f64,
}

/// Values every contract in parallel. Results keep the input order, and the
/// per-contract seed derivation makes the output independent of the worker
/// count.
pub fn value_portfolio(
    contracts: &[VaContract],
    mortality: &MortalityTable,
    cfg: &McConfig,
) -> Result<PortfolioValuation> {
    if contracts.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot value an empty portfolio".into(),
        ));
    }
    let results: Vec<McResult> = contracts
        .par_iter()
        .map(|c| compute_delta(c, mortality, cfg))
        .collect::<Result<_>>()?;
    let aggregate_delta = results.iter().map(|r| r.delta).sum();
    Ok(PortfolioValuation {
        results,
        aggregate_delta,
    })
}

/// One row of the results CSV (`id,liability,delta,std_err`).
///
/// MC valuations fill every column; interpolator outputs carry only deltas
/// and leave liability and standard error empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub id: u64,
    pub liability: Option<f64>,
    pub delta: f64,
    pub std_err: Option<f64>,
}

impl From<&McResult> for ResultsRow {
    fn from(r: &McResult) -> Self {
        ResultsRow {
            id: r.id,
            liability: Some(r.liability),
            delta: r.delta,
            std_err: Some(r.std_err),
        }
    }
}

/// Writes results in the `id,liability,delta,std_err` CSV format.
pub fn write_results_csv(path: &Path, rows: &[ResultsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_to_error(path, e))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a results CSV written by [`write_results_csv`].
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_to_error(path, e))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(Error::Csv)
}

fn csv_to_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("is_io_error guarantees an io kind"),
        }
    } else {
        Error::Csv(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::Gender;
    use proptest::prelude::*;

    fn gmdb(id: u64, age: u32, av: f64, gd: f64, maturity: u32) -> VaContract {
        VaContract {
            id,
            rider: Rider::GmdbOnly,
            gender: Gender::Male,
            age,
            account_value: av,
            gd_value: gd,
            gw_value: 0.0,
            withdrawal_rate: 0.05,
            maturity,
        }
    }

    fn gmwb(id: u64, age: u32, av: f64, gv: f64, rate: f64, maturity: u32) -> VaContract {
        VaContract {
            id,
            rider: Rider::GmdbPlusGmwb,
            gender: Gender::Female,
            age,
            account_value: av,
            gd_value: gv,
            gw_value: gv,
            withdrawal_rate: rate,
            maturity,
        }
    }

    /// Black–Scholes put price and spot delta `N(d₁) − 1`.
    fn bs_put(s: f64, k: f64, r: f64, vol: f64, t: f64) -> (f64, f64) {
        use statrs::distribution::{ContinuousCDF, Normal};
        let norm = Normal::new(0.0, 1.0).unwrap();
        let d1 = ((s / k).ln() + (r + 0.5 * vol * vol) * t) / (vol * t.sqrt());
        let d2 = d1 - vol * t.sqrt();
        let price = k * (-r * t).exp() * norm.cdf(-d2) - s * norm.cdf(-d1);
        (price, norm.cdf(d1) - 1.0)
    }

    #[test]
    fn zero_volatility_paths_are_pure_drift() {
        let cfg = McConfig {
            volatility: 0.0,
            scenario_count: 8,
            ..McConfig::default()
        };
        let paths = generate_paths(&cfg, 5, 3).unwrap();
        let expect = (0.03f64).exp();
        for s in 0..8 {
            for &g in paths.row(s) {
                assert_eq!(g, expect);
            }
        }
    }

    #[test]
    fn paths_are_deterministic_per_seed() {
        let cfg = McConfig::default();
        let a = generate_paths(&cfg, 25, 11).unwrap();
        let b = generate_paths(&cfg, 25, 11).unwrap();
        let c = generate_paths(&cfg, 25, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    // E[growth factor] = exp(μΔt) for the log-normal model; the sample mean
    // of the first-year column must sit within 3 standard errors.
    #[test]
    fn one_year_growth_mean_matches_lognormal_moment() {
        let cfg = McConfig::default();
        let paths = generate_paths(&cfg, 25, 7).unwrap();
        let n = paths.scenarios();
        let first: Vec<f64> = (0..n).map(|s| paths.row(s)[0]).collect();
        let mean = first.iter().sum::<f64>() / n as f64;
        let var = first.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let expect = (0.03f64).exp();
        assert!(
            (mean - expect).abs() <= 3.0 * se,
            "mean {mean} vs {expect} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn zero_death_benefit_is_worthless_with_zero_delta() {
        let c = gmdb(1, 40, 2e5, 0.0, 20);
        let table = MortalityTable::synthetic_default();
        let cfg = McConfig {
            scenario_count: 500,
            ..McConfig::default()
        };
        let r = compute_delta(&c, &table, &cfg).unwrap();
        assert_eq!(r.liability, 0.0);
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.std_err, 0.0);
    }

    // With an empty account the guaranteed withdrawals are paid in full by
    // the insurer every year, so the liability is a deterministic annuity:
    // Σ_t e^{−μt} · W_t with W_t = min(rate · GW₀, remaining balance).
    // Mortality is zeroed so no death-benefit flow interferes.
    #[test]
    fn empty_account_withdrawals_price_as_deterministic_annuity() {
        let table = MortalityTable::flat(0.0);
        let cfg = McConfig {
            scenario_count: 64,
            ..McConfig::default()
        };

        // Balance outlasts the horizon: every withdrawal is the full W.
        let c = gmwb(1, 40, 0.0, 1e5, 0.05, 15);
        let expect: f64 = (1..=15).map(|t| (-0.03 * t as f64).exp() * 5000.0).sum();
        let got = compute_delta(&c, &table, &cfg).unwrap();
        assert!((got.liability - expect).abs() / expect < 1e-12);
        assert_eq!(got.delta, 0.0);

        // Balance exhausts mid-schedule with one partial withdrawal:
        // 3000, 3000, 3000, 1000, then nothing.
        let c = gmwb(2, 40, 0.0, 1e4, 0.30, 15);
        let w = [3000.0, 3000.0, 3000.0, 1000.0];
        let expect: f64 = w
            .iter()
            .enumerate()
            .map(|(i, amt)| (-0.03 * (i + 1) as f64).exp() * amt)
            .sum();
        let got = compute_delta(&c, &table, &cfg).unwrap();
        assert!((got.liability - expect).abs() / expect < 1e-12);
    }

    // A one-year GMDB with q = 1 at the contract age pays
    // e^{−μ}·max(K − AV·G, 0) with probability one: a European put. Price
    // and (relative-move) delta must match Black–Scholes within 3 standard
    // errors, the price SE taken from the per-scenario payoffs.
    #[test]
    fn single_period_certain_death_benefit_is_a_black_scholes_put() {
        let av = 1e5;
        let k = 1.05e5;
        let c = gmdb(31, 50, av, k, 1);
        let table = MortalityTable::flat(1.0);
        let cfg = McConfig::default();
        let r = compute_delta(&c, &table, &cfg).unwrap();
        let (price, spot_delta) = bs_put(av, k, 0.03, 0.20, 1.0);

        let seed = seeds::contract_seed(cfg.seed, c.id);
        let paths = generate_paths(&cfg, 1, seed).unwrap();
        let n = paths.scenarios();
        let payoffs: Vec<f64> = (0..n)
            .map(|s| (-0.03f64).exp() * (k - av * paths.row(s)[0]).max(0.0))
            .collect();
        let mean = payoffs.iter().sum::<f64>() / n as f64;
        let var = payoffs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let price_se = (var / n as f64).sqrt();

        assert!(
            (r.liability - price).abs() <= 3.0 * price_se,
            "liability {} vs put {price} (3se = {})",
            r.liability,
            3.0 * price_se
        );
        let dollar_delta = av * spot_delta;
        assert!(
            (r.delta - dollar_delta).abs() <= 3.0 * r.std_err,
            "delta {} vs {dollar_delta} (3se = {})",
            r.delta,
            3.0 * r.std_err
        );
    }

    // Two independent 10,000-scenario runs of the same contract stay within
    // 5% of each other.
    #[test]
    fn independent_runs_agree_within_five_percent() {
        let c = gmdb(5, 50, 1e5, 1.2e5, 10);
        let table = MortalityTable::synthetic_default();
        let a = compute_delta(&c, &table, &McConfig::default()).unwrap();
        let b = compute_delta(
            &c,
            &table,
            &McConfig {
                seed: 1,
                ..McConfig::default()
            },
        )
        .unwrap();
        let rel = (a.delta - b.delta).abs() / a.delta.abs();
        assert!(rel <= 0.05, "relative difference {rel}");
    }

    // With σ = 0 and a death benefit deep in the money, the liability is
    // linear in the initial scale, so the central difference equals the
    // exact sensitivity −AV₀ · Σ_t P(death in year t).
    #[test]
    fn zero_volatility_delta_matches_deterministic_sensitivity() {
        let c = gmdb(8, 40, 1e4, 1e7, 10);
        let table = MortalityTable::synthetic_default();
        let cfg = McConfig {
            volatility: 0.0,
            scenario_count: 16,
            ..McConfig::default()
        };
        let r = compute_delta(&c, &table, &cfg).unwrap();
        let dec = table.decrements(Gender::Male, 40, 10).unwrap();
        let expect = -c.account_value * dec.death.iter().sum::<f64>();
        assert!(
            (r.delta - expect).abs() <= 1e-9 * expect.abs(),
            "delta {} vs exact {expect}",
            r.delta
        );
        assert_eq!(r.std_err, 0.0);
    }

    // Richardson check on the put case: the central-difference bias is
    // O(h²), so halving h shrinks it ≈ 4×. The per-path payoff is piecewise
    // linear (kinked), so the quadratic law holds for the bias in
    // expectation, not per path set; average over independent path sets to
    // expose it, and accept a wide band around 4.
    #[test]
    fn halving_the_bump_shrinks_delta_error_quadratically() {
        let c = gmdb(13, 50, 1e5, 1.05e5, 1);
        let table = MortalityTable::flat(1.0);
        let mean_delta_at = |h: f64| {
            (0..32)
                .map(|seed| {
                    let cfg = McConfig {
                        bump_fraction: h,
                        scenario_count: 20_000,
                        seed,
                        ..McConfig::default()
                    };
                    compute_delta(&c, &table, &cfg).unwrap().delta
                })
                .sum::<f64>()
                / 32.0
        };
        let limit = mean_delta_at(1e-3);
        let e_big = (mean_delta_at(0.04) - limit).abs();
        let e_small = (mean_delta_at(0.02) - limit).abs();
        let ratio = e_big / e_small;
        assert!(
            (2.0..=8.0).contains(&ratio),
            "error ratio {ratio} (e_big {e_big}, e_small {e_small})"
        );
    }

    // SE ∝ 1/√n: quadrupling the scenario count halves the standard error,
    // within ±25%.
    #[test]
    fn standard_error_scales_as_inverse_sqrt_of_scenarios() {
        let c = gmdb(21, 50, 1e5, 1.2e5, 10);
        let table = MortalityTable::synthetic_default();
        let small = compute_delta(
            &c,
            &table,
            &McConfig {
                scenario_count: 1000,
                ..McConfig::default()
            },
        )
        .unwrap();
        let big = compute_delta(
            &c,
            &table,
            &McConfig {
                scenario_count: 4000,
                ..McConfig::default()
            },
        )
        .unwrap();
        let ratio = small.std_err / big.std_err;
        assert!(
            (1.5..=2.5).contains(&ratio),
            "SE ratio {ratio} (expected ≈ 2)"
        );
    }

    #[test]
    fn portfolio_aggregate_is_the_sum_of_deltas() {
        let table = MortalityTable::synthetic_default();
        let cfg = McConfig {
            scenario_count: 200,
            ..McConfig::default()
        };
        let a = gmdb(1, 40, 1e5, 1.5e5, 10);
        let b = gmwb(2, 50, 2e5, 1.8e5, 0.06, 15);

        let single = value_portfolio(std::slice::from_ref(&a), &table, &cfg).unwrap();
        assert_eq!(single.aggregate_delta, single.results[0].delta);

        let doubled = value_portfolio(&[a.clone(), a.clone()], &table, &cfg).unwrap();
        assert_eq!(doubled.aggregate_delta, 2.0 * single.aggregate_delta);

        let pair = value_portfolio(&[a.clone(), b.clone()], &table, &cfg).unwrap();
        let four = value_portfolio(&[a.clone(), b.clone(), a, b], &table, &cfg).unwrap();
        let rel =
            (four.aggregate_delta - 2.0 * pair.aggregate_delta).abs() / pair.aggregate_delta.abs();
        assert!(rel < 1e-12);
    }

    #[test]
    fn valuation_is_reproducible_across_calls() {
        let table = MortalityTable::synthetic_default();
        let cfg = McConfig {
            scenario_count: 500,
            ..McConfig::default()
        };
        let contracts: Vec<VaContract> = (0..16).map(|i| gmdb(i, 40 + (i as u32 % 10), 1e5, 1.3e5, 12)).collect();
        let x = value_portfolio(&contracts, &table, &cfg).unwrap();
        let y = value_portfolio(&contracts, &table, &cfg).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn results_csv_round_trips_including_empty_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows = vec![
            ResultsRow { id: 0, liability: Some(123.456), delta: -789.25, std_err: Some(1.5) },
            ResultsRow { id: 7, liability: None, delta: 0.125, std_err: None },
        ];
        write_results_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,liability,delta,std_err"));
        assert!(text.contains("7,,0.125,"), "empty fields stay empty: {text}");
        assert_eq!(read_results_csv(&path).unwrap(), rows);
    }

    // Valuation work is proportional to the scenario count: 10× the
    // scenarios must cost 10× the time, within a factor of 2 either way.
    #[test]
    fn portfolio_valuation_time_is_linear_in_scenario_count() {
        use crate::portfolio::{sample_from_grid, GenerationSpace};
        let reps =
            sample_from_grid(&GenerationSpace::representative_grid_default(), 300, 3, 0).unwrap();
        let table = MortalityTable::synthetic_default();
        let time_at = |scenarios: usize| {
            let cfg = McConfig { scenario_count: scenarios, ..McConfig::default() };
            // Warm-up pass so allocator and thread-pool startup are not
            // billed to the first measurement.
            value_portfolio(&reps[..8], &table, &cfg).unwrap();
            let start = std::time::Instant::now();
            value_portfolio(&reps, &table, &cfg).unwrap();
            start.elapsed().as_secs_f64()
        };
        let small = time_at(1_000);
        let big = time_at(10_000);
        let ratio = big / small;
        assert!(
            (5.0..=20.0).contains(&ratio),
            "time ratio {ratio} for 10× scenarios (small {small}s, big {big}s)"
        );
    }

    #[test]
    fn short_path_matrix_is_rejected() {
        let cfg = McConfig {
            scenario_count: 4,
            ..McConfig::default()
        };
        let paths = generate_paths(&cfg, 5, 1).unwrap();
        let c = gmdb(1, 40, 1e5, 1e5, 10);
        let table = MortalityTable::synthetic_default();
        assert!(project_contract(&c, &paths, &table, &cfg, 1.0).is_err());
    }

    proptest! {
        // Payoffs are nonnegative, so the liability is too; and raising the
        // death benefit with everything else fixed never lowers it.
        #[test]
        fn liability_nonnegative_and_monotone_in_death_benefit(
            age in 20u32..=60,
            maturity in 1u32..=25,
            av in 0.0..5e5f64,
            gd_lo in 0.0..6e5f64,
            bump in 0.0..2e5f64,
            seed in 0u64..1000,
        ) {
            let cfg = McConfig { scenario_count: 50, ..McConfig::default() };
            let table = MortalityTable::synthetic_default();
            let paths = generate_paths(&cfg, maturity, seed).unwrap();
            let lo = gmdb(1, age, av, gd_lo, maturity);
            let hi = gmdb(1, age, av, gd_lo + bump, maturity);
            let v_lo = project_contract(&lo, &paths, &table, &cfg, 1.0).unwrap();
            let v_hi = project_contract(&hi, &paths, &table, &cfg, 1.0).unwrap();
            prop_assert!(v_lo >= 0.0);
            prop_assert!(v_hi >= v_lo);
        }

        #[test]
        fn gmwb_liability_nonnegative(
            age in 20u32..=60,
            maturity in 1u32..=25,
            av in 0.0..5e5f64,
            gv in 0.0..6e5f64,
            rate in 0.04..0.08f64,
            seed in 0u64..1000,
        ) {
            let cfg = McConfig { scenario_count: 50, ..McConfig::default() };
            let table = MortalityTable::synthetic_default();
            let paths = generate_paths(&cfg, maturity, seed).unwrap();
            let c = gmwb(1, age, av, gv, rate, maturity);
            let v = project_contract(&c, &paths, &table, &cfg, 1.0).unwrap();
            prop_assert!(v >= 0.0);
        }
    }
}
