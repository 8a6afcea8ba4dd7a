//! Monte Carlo sweeps over random ReLU minima: how often independent draws
//! share a center, and the two-piece geodesic bounds they admit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relu::{
    find_shared_zero_center, optimal_two_piece_center, sample_sparse_minimum_with,
    sample_uniform_minimum_with, ManifoldSpec, NeuronMatrix, SparseDistSpec,
};
use crate::rng::{Rng, RngSeed};

/// Success count over independent trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialEstimate {
    pub successes: usize,
    pub trials: usize,
}

impl BinomialEstimate {
    pub fn frequency(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// `√(p(1 − p)/N)` at the empirical frequency.
    pub fn stderr(&self) -> f64 {
        let p = self.frequency();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// `frequency ≥ bound − 3·stderr`.
    pub fn consistent_with_lower_bound(&self, bound: f64) -> bool {
        self.frequency() >= bound - 3.0 * self.stderr()
    }
}

/// Law the random minima are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum MinimaLaw {
    Uniform,
    Sparse { r: f64 },
}

impl MinimaLaw {
    pub fn draw(&self, spec: ManifoldSpec, rng: &mut Rng) -> Result<NeuronMatrix> {
        match *self {
            MinimaLaw::Uniform => sample_uniform_minimum_with(spec, rng),
            MinimaLaw::Sparse { r } => sample_sparse_minimum_with(SparseDistSpec::new(r, spec)?, rng),
        }
    }
}

/// Fraction of trials in which `k` independent minima share a center
/// linearly connected to all of them. For `k = 2` this is 2-piece
/// connectability of the pair.
pub fn connectivity_frequency(
    law: MinimaLaw,
    spec: ManifoldSpec,
    k: usize,
    trials: usize,
    seed: RngSeed,
) -> Result<BinomialEstimate> {
    if k == 0 || trials == 0 {
        return Err(Error::degenerate("need k ≥ 1 minima and at least one trial"));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            let feet = (0..k).map(|_| law.draw(spec, &mut rng)).collect::<Result<Vec<_>>>()?;
            Ok(find_shared_zero_center(&feet)?.is_some() as usize)
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(BinomialEstimate {
        successes: hits.iter().sum(),
        trials,
    })
}

/// Summary of a sample of NGD bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgdStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    /// Pairs with a two-piece center.
    pub count: usize,
    /// Pairs without one, or identical pairs.
    pub skipped: usize,
}

/// Two-piece NGD bounds of `trials` independent pairs.
pub fn ngd_bound_stats(law: MinimaLaw, spec: ManifoldSpec, trials: usize, seed: RngSeed) -> Result<NgdStats> {
    let bounds = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.derive(t as u64).rng();
            let w1 = law.draw(spec, &mut rng)?;
            let w2 = law.draw(spec, &mut rng)?;
            match optimal_two_piece_center(&w1, &w2) {
                Ok(c) => Ok(Some(c.ngd_bound)),
                Err(Error::NotTwoPlConnectable { .. } | Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    let found: Vec<f64> = bounds.iter().flatten().copied().collect();
    if found.is_empty() {
        return Err(Error::degenerate("no pair admitted a two-piece center"));
    }
    let n = found.len() as f64;
    let mean = found.iter().sum::<f64>() / n;
    let var = found.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(NgdStats {
        mean,
        std: var.sqrt(),
        max: found.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        count: found.len(),
        skipped: trials - found.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relu::two_pl_bound;

    #[test]
    fn single_teacher_always_connects() {
        let est = connectivity_frequency(MinimaLaw::Uniform, ManifoldSpec::new(1, 5, 3), 3, 200, RngSeed(1)).unwrap();
        assert_eq!(est.frequency(), 1.0);
        assert_eq!(est.stderr(), 0.0);
    }

    #[test]
    fn frequency_respects_the_bound() {
        let spec = ManifoldSpec::new(2, 8, 2);
        let est = connectivity_frequency(MinimaLaw::Uniform, spec, 2, 2000, RngSeed(2)).unwrap();
        assert!(est.consistent_with_lower_bound(two_pl_bound(2, 8)), "{est:?}");
        let again = connectivity_frequency(MinimaLaw::Uniform, spec, 2, 2000, RngSeed(2)).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn binomial_error() {
        let est = BinomialEstimate { successes: 25, trials: 100 };
        assert!((est.stderr() - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert!(est.consistent_with_lower_bound(0.25 + 2.9 * est.stderr()));
        assert!(!est.consistent_with_lower_bound(0.25 + 3.1 * est.stderr()));
    }

    #[test]
    fn ngd_bounds_are_at_least_one() {
        let stats = ngd_bound_stats(MinimaLaw::Sparse { r: 0.5 }, ManifoldSpec::new(2, 16, 2), 300, RngSeed(3)).unwrap();
        assert!(stats.mean >= 1.0 && stats.max >= stats.mean);
        assert_eq!(stats.count + stats.skipped, 300);
        assert!(connectivity_frequency(MinimaLaw::Uniform, ManifoldSpec::new(2, 8, 2), 0, 10, RngSeed(0)).is_err());
    }
}
