//! Gaussian radial-basis-function interpolation.
//!
//! Coefficients solve `Φλ = y` with `Φ_ij = exp(−(ε·D(z_i, z_j))²)` over
//! the range-normalized distance. The kernel matrix is symmetric positive
//! definite for pairwise-distinct representatives, so duplicates are
//! rejected up front; near-singularity still gets one diagonal-jitter
//! retry.

use nalgebra::{DMatrix, DVector, LU};

use crate::baselines::distance::RangeNormalizedDistance;
use crate::error::Error;
use crate::portfolio::VaContract;
use crate::Result;

const JITTER: f64 = 1e-10;

/// Fitted Gaussian RBF interpolant.
#[derive(Debug, Clone)]
pub struct RbfInterpolator {
    reps: Vec<VaContract>,
    lambdas: Vec<f64>,
    epsilon: f64,
    dist: RangeNormalizedDistance,
}

impl RbfInterpolator {
    pub fn fit(
        reps: &[VaContract],
        deltas: &[f64],
        epsilon: f64,
        dist: RangeNormalizedDistance,
    ) -> Result<Self> {
        if reps.is_empty() || reps.len() != deltas.len() {
            return Err(Error::InvalidConfig(format!(
                "need matching non-empty representatives and deltas (got {} and {})",
                reps.len(),
                deltas.len()
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig("RBF ε must be > 0".into()));
        }
        let n = reps.len();
        let mut phi = DMatrix::zeros(n, n);
        for i in 0..n {
            phi[(i, i)] = 1.0;
            for j in (i + 1)..n {
                let d = dist.distance(&reps[i], &reps[j]);
                if d == 0.0 {
                    return Err(Error::DuplicateRepresentatives { first: i, second: j });
                }
                let k = (-(epsilon * d).powi(2)).exp();
                phi[(i, j)] = k;
                phi[(j, i)] = k;
            }
        }
        let y = DVector::from_column_slice(deltas);
        let lambdas = match Self::solve(phi.clone(), &y) {
            Some(sol) => sol,
            None => {
                for i in 0..n {
                    phi[(i, i)] += JITTER;
                }
                Self::solve(phi, &y).ok_or(Error::SingularSystem { context: "RBF" })?
            }
        };
        Ok(RbfInterpolator {
            reps: reps.to_vec(),
            lambdas: lambdas.as_slice().to_vec(),
            epsilon,
            dist,
        })
    }

    fn solve(phi: DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
        let lu = LU::new(phi);
        lu.is_invertible().then(|| lu.solve(y)).flatten()
    }

    pub fn estimate(&self, query: &VaContract) -> f64 {
        self.reps
            .iter()
            .zip(&self.lambdas)
            .map(|(rep, l)| {
                let d = self.dist.distance(query, rep);
                l * (-(self.epsilon * d).powi(2)).exp()
            })
            .sum()
    }
}
