//! Minibatch training to a target loss, and the dataset-backed loss oracle.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::network::{Architecture, BatchEval, MlpModel};
use crate::center::LossOracle;
use crate::error::{Error, Result};
use crate::optim::AdamState;
use crate::params::FlatParams;
use crate::rng::{Rng, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Training stops once the full training loss is at or below this.
    pub target_loss: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            batch_size: 200,
            max_epochs: 200,
            target_loss: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub params: FlatParams,
    pub final_loss: f64,
    pub epochs: usize,
    /// Whether `target_loss` was reached within `max_epochs`.
    pub converged: bool,
    pub loss_history: Vec<f64>,
}

const EVAL_CHUNK: usize = 1024;

/// Mean loss (and accuracy when classifying) over `idx`, evaluated in chunks.
pub fn dataset_loss(arch: &dyn Architecture, theta: &[f64], data: &Dataset, idx: &[usize]) -> Result<(f64, Option<f64>)> {
    let mut loss = 0.0;
    let mut correct = None;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let e = arch.evaluate(theta, data, chunk, false)?;
        loss += e.loss * e.count as f64;
        if let Some(c) = e.correct {
            *correct.get_or_insert(0) += c;
        }
    }
    let n = idx.len() as f64;
    Ok((loss / n, correct.map(|c| c as f64 / n)))
}

/// Shuffled minibatch passes from `init` until the full training loss
/// reaches `target_loss` or `max_epochs` run out. Deterministic in `seed`.
pub fn train_network(arch: &dyn Architecture, init: FlatParams, data: &Dataset, cfg: &TrainConfig, seed: RngSeed) -> Result<TrainOutcome> {
    if data.is_empty() || cfg.batch_size == 0 {
        return Err(Error::degenerate("empty data or zero batch size"));
    }
    if init.shape_tag() != &arch.shape_tag() {
        return Err(Error::shape(format!("{:?} for {:?}", init.shape_tag(), arch.shape_tag())));
    }
    let tag = init.shape_tag().clone();
    let mut theta = init.into_values();
    let mut rng = seed.rng();
    let mut adam = AdamState::new(theta.len());
    let all: Vec<usize> = (0..data.len()).collect();
    let mut order = all.clone();
    let mut loss = dataset_loss(arch, &theta, data, &all)?.0;
    let mut history = vec![loss];
    let mut epochs = 0;
    while loss > cfg.target_loss && epochs < cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let g = arch.evaluate(&theta, data, batch, true)?.grad.expect("gradient requested");
            match cfg.optimizer {
                OptimizerKind::Adam => adam.step(&mut theta, &g, cfg.lr),
                OptimizerKind::Sgd => theta.iter_mut().zip(&g).for_each(|(p, gk)| *p -= cfg.lr * gk),
            }
        }
        epochs += 1;
        loss = dataset_loss(arch, &theta, data, &all)?.0;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: epochs,
                last_finite: Box::new(FlatParams::new(theta, tag)?),
            });
        }
        history.push(loss);
    }
    Ok(TrainOutcome {
        params: FlatParams::new(theta, tag)?,
        final_loss: loss,
        epochs,
        converged: loss <= cfg.target_loss,
        loss_history: history,
    })
}

/// Trains `model` in place of its current parameters.
pub fn train_mlp(model: &MlpModel, data: &Dataset, cfg: &TrainConfig, seed: RngSeed) -> Result<(MlpModel, TrainOutcome)> {
    let outcome = train_network(&model.arch, model.params().clone(), data, cfg, seed)?;
    let trained = MlpModel::new(model.arch.clone(), outcome.params.clone())?;
    Ok((trained, outcome))
}

/// Default size of the fixed evaluation subset.
pub const EVAL_SUBSET: usize = 2048;

/// Loss oracle over a training set: exact loss and accuracy on a fixed
/// evaluation subset, minibatch gradients over the full set.
#[derive(Clone)]
pub struct DataOracle<A> {
    pub arch: A,
    data: Arc<Dataset>,
    eval_idx: Vec<usize>,
    batch_size: usize,
}

impl<A: Architecture> DataOracle<A> {
    pub fn new(arch: A, data: Arc<Dataset>, eval_size: usize, batch_size: usize, seed: RngSeed) -> Self {
        let eval_idx = data.eval_indices(eval_size, seed);
        DataOracle {
            arch,
            data,
            eval_idx,
            batch_size: batch_size.max(1),
        }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn check(&self, theta: &FlatParams) -> Result<()> {
        if theta.shape_tag() != &self.arch.shape_tag() {
            return Err(Error::shape(format!("{:?} for {:?}", theta.shape_tag(), self.arch.shape_tag())));
        }
        Ok(())
    }

    fn eval_full(&self, theta: &FlatParams, grad: bool) -> Result<BatchEval> {
        self.check(theta)?;
        self.arch.evaluate(theta.values(), &self.data, &self.eval_idx, grad)
    }
}

impl<A: Architecture> LossOracle for DataOracle<A> {
    fn loss(&self, theta: &FlatParams) -> Result<f64> {
        self.check(theta)?;
        Ok(dataset_loss(&self.arch, theta.values(), &self.data, &self.eval_idx)?.0)
    }

    fn loss_grad(&self, theta: &FlatParams) -> Result<FlatParams> {
        let g = self.eval_full(theta, true)?.grad.expect("gradient requested");
        FlatParams::new(g, theta.shape_tag().clone())
    }

    fn accuracy(&self, theta: &FlatParams) -> Result<Option<f64>> {
        self.check(theta)?;
        Ok(dataset_loss(&self.arch, theta.values(), &self.data, &self.eval_idx)?.1)
    }

    fn sample_grad(&self, theta: &FlatParams, rng: &mut Rng) -> Result<FlatParams> {
        self.check(theta)?;
        let n = self.data.len();
        let idx: Vec<usize> = (0..self.batch_size.min(n)).map(|_| rng.random_range(0..n)).collect();
        let g = self.arch.evaluate(theta.values(), &self.data, &idx, true)?.grad.expect("gradient requested");
        FlatParams::new(g, theta.shape_tag().clone())
    }

    fn steps_per_epoch(&self) -> usize {
        self.data.len().div_ceil(self.batch_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::center::check_oracle_gradient;
    use crate::train::data::{teacher_student_data, Split, Targets};
    use crate::train::network::{LossKind, MlpArch};

    fn separable() -> Dataset {
        let mut rng = RngSeed(4).rng();
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let c = i % 2;
            let shift = if c == 0 { -1.0 } else { 1.0 };
            inputs.push((shift + rng.random_range(-0.5..0.5)) as f32);
            inputs.push(rng.random_range(-1.0..1.0) as f32);
            labels.push(c as u8);
        }
        Dataset::new(inputs, 2, Targets::Classes { labels, n_classes: 2 }, Split::Train).unwrap()
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let data = separable();
        let model = MlpModel::he_init(MlpArch::new(vec![2, 8, 2], LossKind::CrossEntropy).unwrap(), RngSeed(1));
        let cfg = TrainConfig {
            lr: 0.01,
            batch_size: 20,
            target_loss: 0.01,
            ..TrainConfig::default()
        };
        let (trained, outcome) = train_mlp(&model, &data, &cfg, RngSeed(2)).unwrap();
        assert!(outcome.converged);
        let all: Vec<usize> = (0..data.len()).collect();
        let (_, acc) = dataset_loss(&trained.arch, trained.params().values(), &data, &all).unwrap();
        assert_eq!(acc, Some(1.0));
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let data = separable();
        let model = MlpModel::he_init(MlpArch::new(vec![2, 6, 2], LossKind::CrossEntropy).unwrap(), RngSeed(3));
        let cfg = TrainConfig {
            max_epochs: 5,
            target_loss: 0.0,
            ..TrainConfig::default()
        };
        let a = train_mlp(&model, &data, &cfg, RngSeed(9)).unwrap().0;
        let b = train_mlp(&model, &data, &cfg, RngSeed(9)).unwrap().0;
        let bits = |m: &MlpModel| m.params().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = train_mlp(&model, &data, &cfg, RngSeed(10)).unwrap().0;
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn oracle_gradient_and_epoch_length() {
        let data = Arc::new(teacher_student_data(2, 5, 300, RngSeed(1)).unwrap());
        let arch = MlpArch::new(vec![5, 7, 1], LossKind::SquaredError).unwrap();
        let oracle = DataOracle::new(arch.clone(), data, 128, 50, RngSeed(0));
        assert_eq!(oracle.steps_per_epoch(), 6);
        let pts: Vec<FlatParams> = (0..10).map(|s| MlpModel::he_init(arch.clone(), RngSeed(s)).params().clone()).collect();
        assert!(check_oracle_gradient(&oracle, &pts, RngSeed(1)).unwrap().passes(1e-4));
        assert_eq!(oracle.accuracy(&pts[0]).unwrap(), None);
    }
}
