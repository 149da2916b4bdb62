//! Contract types and portfolio generation.
//!
//! A variable-annuity contract is described by its guarantee rider, the
//! policyholder's gender and age, the account value, the guaranteed death
//! and withdrawal benefit values, the annual withdrawal rate, and the years
//! to maturity. Portfolios are drawn from a [`GenerationSpace`]: either
//! attribute-wise uniform sampling over the whole space (the input
//! portfolio) or uniform sampling without replacement from the Cartesian
//! grid of finite attribute sets (representative and training portfolios).
//!
//! All draws are deterministic functions of their seed.

use std::fmt;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Guarantee rider carried by a contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rider {
    /// Guaranteed minimum death benefit only.
    GmdbOnly,
    /// Death benefit plus a guaranteed minimum withdrawal benefit.
    GmdbPlusGmwb,
}

impl Rider {
    /// CSV token for this rider.
    pub fn as_str(self) -> &'static str {
        match self {
            Rider::GmdbOnly => "GMDB",
            Rider::GmdbPlusGmwb => "GMDB_GMWB",
        }
    }

    pub fn from_str_token(s: &str) -> Option<Self> {
        match s {
            "GMDB" => Some(Rider::GmdbOnly),
            "GMDB_GMWB" => Some(Rider::GmdbPlusGmwb),
            _ => None,
        }
    }
}

impl fmt::Display for Rider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Policyholder gender, the key into the mortality table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    /// CSV token for this gender.
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }

    pub fn from_str_token(s: &str) -> Option<Self> {
        match s {
            "M" => Some(Gender::Male),
            "F" => Some(Gender::Female),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One variable-annuity contract.
///
/// Invariants maintained by the generators: a GMWB rider implies
/// `gd_value == gw_value`, and a GMDB-only contract has `gw_value == 0`.
/// GMDB-only contracts still carry a sampled withdrawal rate so the feature
/// space is uniform across riders; the cash-flow model ignores it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaContract {
    pub id: u64,
    pub rider: Rider,
    pub gender: Gender,
    /// Age in whole years at valuation.
    pub age: u32,
    /// Current account value.
    pub account_value: f64,
    /// Guaranteed death benefit value.
    pub gd_value: f64,
    /// Guaranteed withdrawal benefit value (zero for GMDB-only contracts).
    pub gw_value: f64,
    /// Annual withdrawal rate as a fraction of the initial GW value.
    pub withdrawal_rate: f64,
    /// Years to maturity.
    pub maturity: u32,
}

impl VaContract {
    /// Annual guaranteed withdrawal amount, fixed at inception.
    pub fn annual_withdrawal(&self) -> f64 {
        self.withdrawal_rate * self.gw_value
    }
}

/// Values an attribute may take: a continuous interval or a finite set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericRange {
    /// Closed interval sampled uniformly.
    Interval { min: f64, max: f64 },
    /// Finite value set sampled uniformly.
    Set(Vec<f64>),
}

impl NumericRange {
    fn validate(&self, attribute: &'static str) -> Result<()> {
        let ok = match self {
            NumericRange::Interval { min, max } => min.is_finite() && max.is_finite() && min <= max,
            NumericRange::Set(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::EmptyRange { attribute })
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            NumericRange::Interval { min, max } => {
                if min == max {
                    *min
                } else {
                    Uniform::new_inclusive(*min, *max).sample(rng)
                }
            }
            NumericRange::Set(v) => v[rng.gen_range(0..v.len())],
        }
    }

    /// Extremes of the values this range can produce.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            NumericRange::Interval { min, max } => (*min, *max),
            NumericRange::Set(v) => {
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    fn as_set(&self, attribute: &'static str) -> Result<&[f64]> {
        match self {
            NumericRange::Set(v) => Ok(v),
            NumericRange::Interval { .. } => Err(Error::NotAGrid { attribute }),
        }
    }
}

/// The space contracts are generated from: per-attribute value sets or
/// continuous ranges.
///
/// The guarantee-value entry drives both guarantee benefits: a GMWB contract
/// draws its GW value from it and sets GD equal; a GMDB-only contract draws
/// its GD value from it and has GW fixed at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpace {
    pub riders: Vec<Rider>,
    pub genders: Vec<Gender>,
    pub ages: Vec<u32>,
    pub account_values: NumericRange,
    pub guarantee_values: NumericRange,
    pub withdrawal_rates: Vec<f64>,
    pub maturities: Vec<u32>,
}

impl GenerationSpace {
    /// The default input-portfolio space: both riders and genders, ages
    /// 20..=60, account value uniform on [1e4, 5e5], guarantee value uniform
    /// on [5e3, 6e5], withdrawal rates {0.04..0.08}, maturities 10..=25.
    pub fn input_default() -> Self {
        GenerationSpace {
            riders: vec![Rider::GmdbOnly, Rider::GmdbPlusGmwb],
            genders: vec![Gender::Male, Gender::Female],
            ages: (20..=60).collect(),
            account_values: NumericRange::Interval { min: 1e4, max: 5e5 },
            guarantee_values: NumericRange::Interval { min: 0.5e4, max: 6e5 },
            withdrawal_rates: vec![0.04, 0.05, 0.06, 0.07, 0.08],
            maturities: (10..=25).collect(),
        }
    }

    /// The default grid representative contracts are drawn from.
    pub fn representative_grid_default() -> Self {
        GenerationSpace {
            riders: vec![Rider::GmdbOnly, Rider::GmdbPlusGmwb],
            genders: vec![Gender::Male, Gender::Female],
            ages: vec![20, 30, 40, 50, 60],
            account_values: NumericRange::Set(vec![1e4, 1e5, 2e5, 3e5, 4e5, 5e5]),
            guarantee_values: NumericRange::Set(vec![0.5e4, 1e5, 2e5, 3e5, 4e5, 5e5, 6e5]),
            withdrawal_rates: vec![0.04, 0.08],
            maturities: vec![10, 15, 20, 25],
        }
    }

    /// The default grid the training portfolio is drawn from; intentionally
    /// offset from the representative grid so training contracts do not
    /// coincide with representatives.
    pub fn training_grid_default() -> Self {
        GenerationSpace {
            riders: vec![Rider::GmdbOnly, Rider::GmdbPlusGmwb],
            genders: vec![Gender::Male, Gender::Female],
            ages: vec![23, 27, 33, 37, 43, 47, 53, 57],
            account_values: NumericRange::Set(vec![0.2e5, 1.5e5, 2.5e5, 3.5e5, 4.5e5]),
            guarantee_values: NumericRange::Set(vec![0.5e5, 1.5e5, 2.5e5, 3.5e5, 4.5e5, 5.5e5]),
            withdrawal_rates: vec![0.05, 0.06, 0.07],
            maturities: vec![12, 13, 17, 18, 22, 23],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.riders.is_empty() {
            return Err(Error::EmptyRange { attribute: "rider" });
        }
        if self.genders.is_empty() {
            return Err(Error::EmptyRange { attribute: "gender" });
        }
        if self.ages.is_empty() {
            return Err(Error::EmptyRange { attribute: "age" });
        }
        self.account_values.validate("account_value")?;
        self.guarantee_values.validate("guarantee_value")?;
        if self.withdrawal_rates.is_empty() {
            return Err(Error::EmptyRange {
                attribute: "withdrawal_rate",
            });
        }
        if self.maturities.is_empty() {
            return Err(Error::EmptyRange { attribute: "maturity" });
        }
        Ok(())
    }

    /// Number of points in the Cartesian grid, if every attribute is a
    /// finite set.
    pub fn grid_size(&self) -> Result<usize> {
        let av = self.account_values.as_set("account_value")?.len();
        let gv = self.guarantee_values.as_set("guarantee_value")?.len();
        Ok(self.riders.len()
            * self.genders.len()
            * self.ages.len()
            * av
            * gv
            * self.withdrawal_rates.len()
            * self.maturities.len())
    }

    /// Decodes a flat grid index into a contract (row-major over rider,
    /// gender, age, account value, guarantee value, withdrawal rate,
    /// maturity).
    fn grid_point(&self, index: usize, id: u64) -> Result<VaContract> {
        let av_set = self.account_values.as_set("account_value")?;
        let gv_set = self.guarantee_values.as_set("guarantee_value")?;
        let dims = [
            self.maturities.len(),
            self.withdrawal_rates.len(),
            gv_set.len(),
            av_set.len(),
            self.ages.len(),
            self.genders.len(),
            self.riders.len(),
        ];
        let mut rest = index;
        let mut idx = [0usize; 7];
        for (k, d) in dims.iter().enumerate() {
            idx[k] = rest % d;
            rest /= d;
        }
        let rider = self.riders[idx[6]];
        let gv = gv_set[idx[2]];
        let (gd, gw) = match rider {
            Rider::GmdbOnly => (gv, 0.0),
            Rider::GmdbPlusGmwb => (gv, gv),
        };
        Ok(VaContract {
            id,
            rider,
            gender: self.genders[idx[5]],
            age: self.ages[idx[4]],
            account_value: av_set[idx[3]],
            gd_value: gd,
            gw_value: gw,
            withdrawal_rate: self.withdrawal_rates[idx[1]],
            maturity: self.maturities[idx[0]],
        })
    }
}

/// Generates `count` contracts with attributes drawn uniformly at random
/// from `space`, ids `id_base..id_base + count`.
///
/// Continuous attributes are uniform on their interval, discrete attributes
/// uniform on their set. GMWB contracts get `gd = gw`; GMDB-only contracts
/// get `gw = 0` but keep their sampled withdrawal rate.
pub fn generate_input_portfolio(
    space: &GenerationSpace,
    count: usize,
    seed: u64,
    id_base: u64,
) -> Result<Vec<VaContract>> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let rider = space.riders[rng.gen_range(0..space.riders.len())];
        let gender = space.genders[rng.gen_range(0..space.genders.len())];
        let age = space.ages[rng.gen_range(0..space.ages.len())];
        let account_value = space.account_values.sample(&mut rng);
        let gv = space.guarantee_values.sample(&mut rng);
        let withdrawal_rate = space.withdrawal_rates[rng.gen_range(0..space.withdrawal_rates.len())];
        let maturity = space.maturities[rng.gen_range(0..space.maturities.len())];
        let (gd_value, gw_value) = match rider {
            Rider::GmdbOnly => (gv, 0.0),
            Rider::GmdbPlusGmwb => (gv, gv),
        };
        out.push(VaContract {
            id: id_base + k as u64,
            rider,
            gender,
            age,
            account_value,
            gd_value,
            gw_value,
            withdrawal_rate,
            maturity,
        });
    }
    Ok(out)
}

/// Samples `count` distinct contracts uniformly without replacement from the
/// Cartesian grid of `space`'s value sets, ids `id_base..`.
pub fn sample_from_grid(
    space: &GenerationSpace,
    count: usize,
    seed: u64,
    id_base: u64,
) -> Result<Vec<VaContract>> {
    space.validate()?;
    let size = space.grid_size()?;
    if count > size {
        return Err(Error::GridTooSmall {
            requested: count,
            available: size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, size, count);
    picks
        .iter()
        .enumerate()
        .map(|(k, index)| space.grid_point(index, id_base + k as u64))
        .collect()
}

/// Samples `count` contracts uniformly without replacement from an existing
/// portfolio, preserving their ids.
pub fn sample_validation(
    input: &[VaContract],
    count: usize,
    seed: u64,
) -> Result<Vec<VaContract>> {
    if count > input.len() {
        return Err(Error::CountExceedsPopulation {
            requested: count,
            available: input.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, input.len(), count);
    Ok(picks.iter().map(|i| input[i].clone()).collect())
}

/// Seeds used for each portfolio draw of an experiment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioSeeds {
    pub input: u64,
    pub representatives: u64,
    pub training: u64,
    pub validation: u64,
}

/// The four portfolios an experiment works with.
///
/// The validation portfolio is a subset of the input portfolio; the
/// representative and training portfolios come from their own grids.
#[derive(Debug, Clone)]
pub struct PortfolioSet {
    pub input: Vec<VaContract>,
    pub representatives: Vec<VaContract>,
    pub training: Vec<VaContract>,
    pub validation: Vec<VaContract>,
    pub seeds: PortfolioSeeds,
}

// CSV header: id,rider,gender,age,account_value,gd_value,gw_value,withdrawal_rate,maturity
#[derive(Serialize, Deserialize)]
struct ContractRow {
    id: u64,
    rider: String,
    gender: String,
    age: u32,
    account_value: f64,
    gd_value: f64,
    gw_value: f64,
    withdrawal_rate: f64,
    maturity: u32,
}

/// Writes a portfolio in the contract CSV format.
pub fn write_portfolio_csv(path: &Path, contracts: &[VaContract]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io(path))?;
    for c in contracts {
        w.serialize(ContractRow {
            id: c.id,
            rider: c.rider.as_str().to_string(),
            gender: c.gender.as_str().to_string(),
            age: c.age,
            account_value: c.account_value,
            gd_value: c.gd_value,
            gw_value: c.gw_value,
            withdrawal_rate: c.withdrawal_rate,
            maturity: c.maturity,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a portfolio from the contract CSV format.
pub fn read_portfolio_csv(path: &Path) -> Result<Vec<VaContract>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_io(path))?;
    let mut out = Vec::new();
    for row in r.deserialize::<ContractRow>() {
        let row = row?;
        let rider = Rider::from_str_token(&row.rider).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("unknown rider `{}`", row.rider),
        })?;
        let gender = Gender::from_str_token(&row.gender).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("unknown gender `{}`", row.gender),
        })?;
        out.push(VaContract {
            id: row.id,
            rider,
            gender,
            age: row.age,
            account_value: row.account_value,
            gd_value: row.gd_value,
            gw_value: row.gw_value,
            withdrawal_rate: row.withdrawal_rate,
            maturity: row.maturity,
        });
    }
    Ok(out)
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                _ => unreachable!("is_io_error guarantees an io kind"),
            }
        } else {
            Error::Csv(e)
        }
    }
}
