//! Loss and accuracy along parameter-space paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::center::LossOracle;
use crate::error::{Error, Result};
use crate::params::{uniform_grid, PiecewisePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Linear,
    FoldLine,
    Piecewise { segments: usize },
}

impl PathKind {
    pub fn of(path: &PiecewisePath) -> Self {
        match path.num_segments() {
            1 => PathKind::Linear,
            2 => PathKind::FoldLine,
            segments => PathKind::Piecewise { segments },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub loss: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub kind: PathKind,
    pub grid: usize,
    pub max_loss: f64,
    pub min_accuracy: Option<f64>,
    pub endpoint_loss: [f64; 2],
    pub endpoint_accuracy: Option<[f64; 2]>,
    pub points: Vec<PathPoint>,
}

impl BarrierReport {
    /// `max_loss − max(endpoint losses)`.
    pub fn loss_barrier(&self) -> f64 {
        self.max_loss - self.endpoint_loss[0].max(self.endpoint_loss[1])
    }

    /// `min(endpoint accuracies) − min_accuracy`.
    pub fn accuracy_drop(&self) -> Option<f64> {
        Some(self.endpoint_accuracy?[0].min(self.endpoint_accuracy?[1]) - self.min_accuracy?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,loss,accuracy\n");
        for p in &self.points {
            let acc = p.accuracy.map(|a| a.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{}\n", p.t, p.loss, acc));
        }
        s
    }
}

/// Loss (and accuracy, when the oracle reports one) at `grid` uniformly
/// spaced points including both endpoints.
pub fn measure_barrier(path: &PiecewisePath, oracle: &dyn LossOracle, grid: usize) -> Result<BarrierReport> {
    if grid < 2 {
        return Err(Error::NumericInput(format!("grid of {grid} points")));
    }
    let points = uniform_grid(grid)
        .into_par_iter()
        .map(|t| {
            let p = path.eval(t);
            Ok(PathPoint {
                t,
                loss: oracle.loss(&p)?,
                accuracy: oracle.accuracy(&p)?,
            })
        })
        .collect::<Result<Vec<PathPoint>>>()?;
    let max_loss = points.iter().map(|p| p.loss).fold(f64::NEG_INFINITY, f64::max);
    let accs: Option<Vec<f64>> = points.iter().map(|p| p.accuracy).collect();
    let last = points.len() - 1;
    Ok(BarrierReport {
        kind: PathKind::of(path),
        grid,
        max_loss,
        min_accuracy: accs.as_ref().map(|a| a.iter().copied().fold(f64::INFINITY, f64::min)),
        endpoint_loss: [points[0].loss, points[last].loss],
        endpoint_accuracy: accs.map(|a| [a[0], a[last]]),
        points,
    })
}

/// Per-neuron L2 norms, largest first.
pub fn neuron_norms<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut norms: Vec<f64> = rows
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    norms.sort_by(|a, b| b.total_cmp(a));
    norms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::center::ReluRiskOracle;
    use crate::params::FlatParams;
    use crate::relu::{four_pl_path, merge_minimum, sample_sparse_minimum, sample_uniform_minimum, ManifoldSpec, SparseDistSpec};
    use crate::rng::RngSeed;

    struct Constant;
    impl LossOracle for Constant {
        fn loss(&self, _: &FlatParams) -> Result<f64> {
            Ok(0.25)
        }
        fn loss_grad(&self, t: &FlatParams) -> Result<FlatParams> {
            Ok(t.map(|_| 0.0))
        }
        fn accuracy(&self, _: &FlatParams) -> Result<Option<f64>> {
            Ok(Some(0.9))
        }
    }

    #[test]
    fn constant_oracle() {
        let path = PiecewisePath::linear(FlatParams::vector(vec![0.0]), FlatParams::vector(vec![1.0])).unwrap();
        let r = measure_barrier(&path, &Constant, 11).unwrap();
        assert_eq!((r.max_loss, r.min_accuracy, r.kind), (0.25, Some(0.9), PathKind::Linear));
        assert_eq!(r.loss_barrier(), 0.0);
        assert_eq!(r.points.len(), 11);
        assert!(r.to_csv().starts_with("t,loss,accuracy\n0,0.25,0.9\n"));
        assert!(measure_barrier(&path, &Constant, 1).is_err());
    }

    #[test]
    fn exact_paths_have_no_barrier() {
        let spec = ManifoldSpec::new(3, 5, 4);
        let w1 = sample_uniform_minimum(spec, RngSeed(1)).unwrap();
        let w2 = sample_uniform_minimum(spec, RngSeed(2)).unwrap();
        let path = four_pl_path(&w1, &w2).unwrap();
        let r = measure_barrier(&path, &ReluRiskOracle, 101).unwrap();
        assert!(r.max_loss <= 1e-9, "{}", r.max_loss);
        assert_eq!(r.min_accuracy, None);
        assert!(r.max_loss >= r.endpoint_loss[0].max(r.endpoint_loss[1]));
    }

    #[test]
    fn merged_minimum_has_teacher_count_nonzero_norms() {
        let spec = ManifoldSpec::new(3, 9, 5);
        let merged = merge_minimum(&sample_uniform_minimum(spec, RngSeed(4)).unwrap()).unwrap();
        let norms = neuron_norms(merged.rows());
        assert_eq!(norms.iter().filter(|&&n| n > 0.0).count(), 3);
        assert!(norms.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sparse_minima_have_about_half_zero_rows() {
        // SP(r) zeroes each neuron with probability r, apart from the rows
        // needed to cover every teacher
        let sp = SparseDistSpec::new(0.5, ManifoldSpec::new(2, 40, 4)).unwrap();
        let mut nonzero = 0usize;
        let trials = 400;
        for s in 0..trials {
            let w = sample_sparse_minimum(sp, RngSeed(s)).unwrap();
            nonzero += neuron_norms(w.rows()).iter().filter(|&&n| n > 0.0).count();
        }
        let mean = nonzero as f64 / trials as f64;
        // binomial mean 20, std of the trial average √10/20 ≈ 0.16
        assert!((mean - 20.0).abs() < 1.0, "{mean}");
    }
}
