//! Ordinary kriging over representative contracts.
//!
//! The (n+1)×(n+1) augmented system carries the pairwise semivariances plus
//! a Lagrange row enforcing that weights sum to one. The matrix is
//! LU-factorized once per representative set and reused for every query;
//! estimating a whole portfolio needs only a single extra solve because the
//! system is linear in the right-hand side (sum the per-query vectors, then
//! solve once).

use nalgebra::{DMatrix, DVector, LU};

use crate::baselines::distance::RangeNormalizedDistance;
use crate::baselines::variogram::VariogramModel;
use crate::error::Error;
use crate::portfolio::VaContract;
use crate::Result;

const JITTER: f64 = 1e-10;

/// Factorized ordinary-kriging system for one representative set.
#[derive(Debug, Clone)]
pub struct KrigingSystem {
    reps: Vec<VaContract>,
    deltas: Vec<f64>,
    model: VariogramModel,
    dist: RangeNormalizedDistance,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl KrigingSystem {
    pub fn build(
        reps: &[VaContract],
        deltas: &[f64],
        model: VariogramModel,
        dist: RangeNormalizedDistance,
    ) -> Result<Self> {
        if reps.is_empty() || reps.len() != deltas.len() {
            return Err(Error::InvalidConfig(format!(
                "need matching non-empty representatives and deltas (got {} and {})",
                reps.len(),
                deltas.len()
            )));
        }
        let n = reps.len();
        let mut a = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in (i + 1)..n {
                let g = model.gamma(dist.distance(&reps[i], &reps[j]));
                a[(i, j)] = g;
                a[(j, i)] = g;
            }
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
        }

        let lu = match Self::factorize(a.clone()) {
            Some(lu) => lu,
            None => {
                // Jitter only the semivariance block; the constraint row
                // must stay exact.
                for i in 0..n {
                    a[(i, i)] += JITTER;
                }
                Self::factorize(a).ok_or(Error::SingularSystem { context: "kriging" })?
            }
        };
        Ok(KrigingSystem {
            reps: reps.to_vec(),
            deltas: deltas.to_vec(),
            model,
            dist,
            lu,
        })
    }

    fn factorize(a: DMatrix<f64>) -> Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let lu = LU::new(a);
        lu.is_invertible().then_some(lu)
    }

    fn rhs(&self, query: &VaContract) -> DVector<f64> {
        let n = self.reps.len();
        let mut b = DVector::zeros(n + 1);
        for (i, rep) in self.reps.iter().enumerate() {
            b[i] = self.model.gamma(self.dist.distance(query, rep));
        }
        b[n] = 1.0;
        b
    }

    fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(b)
            .ok_or(Error::SingularSystem { context: "kriging" })
    }

    /// Interpolation weights for one query (they sum to 1) and the Lagrange
    /// multiplier.
    pub fn weights(&self, query: &VaContract) -> Result<(Vec<f64>, f64)> {
        let n = self.reps.len();
        let sol = self.solve(&self.rhs(query))?;
        Ok((sol.as_slice()[..n].to_vec(), sol[n]))
    }

    /// Kriging estimate for one query contract.
    pub fn estimate(&self, query: &VaContract) -> Result<f64> {
        let (w, _) = self.weights(query)?;
        Ok(w.iter().zip(&self.deltas).map(|(wi, yi)| wi * yi).sum())
    }

    /// Portfolio aggregate through one solve: by linearity the summed
    /// right-hand sides yield the summed per-query weights.
    pub fn aggregate(&self, queries: &[VaContract]) -> Result<f64> {
        let n = self.reps.len();
        let mut b = DVector::zeros(n + 1);
        for q in queries {
            b += self.rhs(q);
        }
        let sol = self.solve(&b)?;
        Ok(sol.as_slice()[..n]
            .iter()
            .zip(&self.deltas)
            .map(|(wi, yi)| wi * yi)
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::distance::AttributeRanges;
    use crate::baselines::variogram::{fit_variogram, VariogramKind};
    use crate::portfolio::{generate_input_portfolio, GenerationSpace};

    fn setup(n: usize, seed: u64) -> (Vec<VaContract>, Vec<f64>, RangeNormalizedDistance) {
        let space = GenerationSpace::input_default();
        let reps = generate_input_portfolio(&space, n, seed, 0).unwrap();
        let deltas: Vec<f64> = reps
            .iter()
            .map(|c| -0.2 * c.account_value + 0.1 * c.gd_value.min(3e5))
            .collect();
        let ranges = AttributeRanges::from_space(&space).unwrap();
        let dist = RangeNormalizedDistance::new(1.0, &ranges).unwrap();
        (reps, deltas, dist)
    }

    #[test]
    fn representative_queries_are_reproduced_exactly() {
        let (reps, deltas, dist) = setup(40, 2);
        let model = fit_variogram(&reps, &deltas, VariogramKind::Spherical, &dist).unwrap();
        let zero_nugget =
            VariogramModel::new(model.kind, 0.0, model.sill.max(1.0), model.range).unwrap();
        let sys = KrigingSystem::build(&reps, &deltas, zero_nugget, dist).unwrap();
        for i in [0, 13, 39] {
            let got = sys.estimate(&reps[i]).unwrap();
            assert!(
                (got - deltas[i]).abs() <= 1e-8 * deltas[i].abs().max(1.0),
                "rep {i}: {got} vs {}",
                deltas[i]
            );
        }
    }

    #[test]
    fn weights_sum_to_one_for_random_queries() {
        let (reps, deltas, dist) = setup(60, 3);
        let model = fit_variogram(&reps, &deltas, VariogramKind::Exponential, &dist).unwrap();
        let sys = KrigingSystem::build(&reps, &deltas, model, dist).unwrap();
        let space = GenerationSpace::input_default();
        let queries = generate_input_portfolio(&space, 50, 77, 1_000).unwrap();
        for q in &queries {
            let (w, _) = sys.weights(q).unwrap();
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() <= 1e-10, "Σw = {total}");
        }
    }

    #[test]
    fn constant_deltas_estimate_the_constant_anywhere() {
        let (reps, _, dist) = setup(30, 4);
        let c = -7.5e4;
        let deltas = vec![c; 30];
        let model = VariogramModel::new(VariogramKind::Spherical, 0.05, 1.0, 0.7).unwrap();
        let sys = KrigingSystem::build(&reps, &deltas, model, dist).unwrap();
        let space = GenerationSpace::input_default();
        for q in &generate_input_portfolio(&space, 20, 9, 500).unwrap() {
            let got = sys.estimate(q).unwrap();
            assert!((got - c).abs() <= 1e-8 * c.abs());
        }
    }

    #[test]
    fn portfolio_aggregate_matches_summed_per_policy_estimates() {
        let (reps, deltas, dist) = setup(50, 5);
        let model = fit_variogram(&reps, &deltas, VariogramKind::Spherical, &dist).unwrap();
        let sys = KrigingSystem::build(&reps, &deltas, model, dist).unwrap();
        let space = GenerationSpace::input_default();
        let queries = generate_input_portfolio(&space, 200, 13, 9_000).unwrap();
        let summed: f64 = queries.iter().map(|q| sys.estimate(q).unwrap()).sum();
        let direct = sys.aggregate(&queries).unwrap();
        assert!(
            (summed - direct).abs() <= 1e-8 * summed.abs(),
            "{direct} vs {summed}"
        );
    }

    // Duplicated representatives make the semivariance block singular (two
    // identical rows); the diagonal jitter must rescue the factorization.
    #[test]
    fn duplicate_representatives_survive_via_jitter() {
        let (mut reps, mut deltas, dist) = setup(20, 6);
        reps[5] = reps[2].clone();
        deltas[5] = deltas[2];
        let model = VariogramModel::new(VariogramKind::Spherical, 0.0, 1.0, 0.5).unwrap();
        let sys = KrigingSystem::build(&reps, &deltas, model, dist).unwrap();
        let (w, _) = sys.weights(&reps[9]).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
    }
}
