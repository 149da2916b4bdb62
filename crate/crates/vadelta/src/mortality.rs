//! Mortality tables and deterministic decrements.
//!
//! Death-benefit cash flows are weighted by the probability that the
//! policyholder dies in a given policy year, computed from annual mortality
//! rates `qx` keyed by gender and age. Mortality is applied as a
//! deterministic decrement: it scales the expected cash flow rather than
//! being simulated per scenario.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::portfolio::Gender;
use crate::Result;

/// Annual mortality rates `qx` by gender and age.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityTable {
    rates: HashMap<(Gender, u32), f64>,
}

/// Per-year decrement weights for one contract horizon.
///
/// `death[t - 1]` is the probability of death in policy year `t` (survival
/// to the start of the year times that year's `qx`); `survival[t - 1]` is
/// the probability of surviving to the *start* of year `t`, so
/// `survival[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decrements {
    pub death: Vec<f64>,
    pub survival: Vec<f64>,
}

impl MortalityTable {
    pub fn new(rates: HashMap<(Gender, u32), f64>) -> Self {
        MortalityTable { rates }
    }

    /// A table with the same rate `q` at every age 0..=200 for both genders.
    /// Mostly useful for tests: `q = 0` removes mortality entirely and
    /// `q = 1` forces death in the first year.
    pub fn flat(q: f64) -> Self {
        let mut rates = HashMap::new();
        for age in 0..=200 {
            rates.insert((Gender::Male, age), q);
            rates.insert((Gender::Female, age), q);
        }
        MortalityTable { rates }
    }

    /// A synthetic Makeham-shaped table covering ages 0..=120: a constant
    /// accident term plus an exponentially growing senescent term, with
    /// female rates equal to male rates two years younger.
    pub fn synthetic_default() -> Self {
        const A: f64 = 5e-4;
        const B: f64 = 3e-5;
        const C: f64 = 1.095;
        let male = |age: f64| (A + B * C.powf(age)).min(1.0);
        let mut rates = HashMap::new();
        for age in 0..=120u32 {
            rates.insert((Gender::Male, age), male(age as f64));
            rates.insert((Gender::Female, age), male(age as f64 - 2.0));
        }
        MortalityTable { rates }
    }

    /// Annual mortality rate for `gender` at `age`.
    pub fn qx(&self, gender: Gender, age: u32) -> Result<f64> {
        self.rates
            .get(&(gender, age))
            .copied()
            .ok_or(Error::MissingMortalityAge {
                gender: gender.as_str(),
                age,
            })
    }

    /// Decrement weights over `maturity` policy years starting from `age`.
    /// Year `t` uses the rate at attained age `age + t - 1`.
    pub fn decrements(&self, gender: Gender, age: u32, maturity: u32) -> Result<Decrements> {
        let mut death = Vec::with_capacity(maturity as usize);
        let mut survival = Vec::with_capacity(maturity as usize);
        let mut alive = 1.0;
        for t in 1..=maturity {
            let q = self.qx(gender, age + t - 1)?;
            survival.push(alive);
            death.push(alive * q);
            alive *= 1.0 - q;
        }
        Ok(Decrements { death, survival })
    }

    /// Reads a `gender,age,qx` CSV.
    pub fn read_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            gender: String,
            age: u32,
            qx: f64,
        }
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
        let mut rates = HashMap::new();
        for row in r.deserialize::<Row>() {
            let row = row?;
            let gender = Gender::from_str_token(&row.gender).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                message: format!("unknown gender `{}`", row.gender),
            })?;
            if !(0.0..=1.0).contains(&row.qx) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("qx {} out of [0, 1] at {} age {}", row.qx, row.gender, row.age),
                });
            }
            rates.insert((gender, row.age), row.qx);
        }
        Ok(MortalityTable { rates })
    }

    /// Writes the table as a `gender,age,qx` CSV, sorted by gender then age.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            gender: &'a str,
            age: u32,
            qx: f64,
        }
        let mut rows: Vec<(&(Gender, u32), &f64)> = self.rates.iter().collect();
        rows.sort_by_key(|((g, age), _)| (g.as_str(), *age));
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
        for ((gender, age), qx) in rows {
            w.serialize(Row {
                gender: gender.as_str(),
                age: *age,
                qx: *qx,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
