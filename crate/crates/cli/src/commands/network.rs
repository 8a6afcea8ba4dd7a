//! Network training and barrier measurement on saved checkpoints.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use modeconn::params::PiecewisePath;
use modeconn::rng::RngSeed;
use modeconn::train::{train_mlp, DataOracle, Dataset, LossKind, MlpArch, MlpModel, TrainConfig, TrainOutcome, EVAL_SUBSET};
use serde::{Deserialize, Serialize};

use super::push_curve;
use crate::config::{DataSpec, ExperimentConfig};
use crate::output::{RunOutput, Table};

/// Architecture, data and optimizer for a batch of independently trained
/// models.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub data: DataSpec,
    pub widths: Vec<usize>,
    pub loss: LossKind,
    pub models: usize,
    pub train: TrainConfig,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            data: DataSpec::default(),
            widths: vec![784, 32, 16, 10],
            loss: LossKind::CrossEntropy,
            models: 3,
            train: TrainConfig::default(),
        }
    }
}

impl TrainParams {
    pub fn arch(&self) -> Result<MlpArch> {
        Ok(MlpArch::new(self.widths.clone(), self.loss)?)
    }
}

/// Trains `params.models` networks from He initializations; model `i`
/// uses seeds derived from `seed` and `i`.
pub fn train_models(params: &TrainParams, data: &Dataset, seed: RngSeed) -> Result<Vec<(MlpModel, TrainOutcome)>> {
    let arch = params.arch()?;
    if arch.widths[0] != data.dim() {
        bail!("input width {} does not match data dimension {}", arch.widths[0], data.dim());
    }
    (0..params.models)
        .map(|i| {
            let base = seed.derive(i as u64);
            let init = MlpModel::he_init(arch.clone(), base.derive(0));
            let (model, outcome) = train_mlp(&init, data, &params.train, base.derive(1))?;
            log::info!(
                "model {i}: loss {:.4} after {} epochs{}",
                outcome.final_loss,
                outcome.epochs,
                if outcome.converged { "" } else { " (target not reached)" }
            );
            Ok((model, outcome))
        })
        .collect()
}

pub fn run_train(cfg: &ExperimentConfig<TrainParams>, out: &mut RunOutput) -> Result<()> {
    let data = cfg.params.data.load()?;
    let trained = train_models(&cfg.params, &data, cfg.stage_seed(1))?;
    let mut table = Table::new("train", &["model", "epoch"]);
    for (i, (model, outcome)) in trained.iter().enumerate() {
        for (epoch, loss) in outcome.loss_history.iter().enumerate() {
            table.push(&[&i, &epoch], "loss", *loss);
        }
        let path = out.out_dir().join(format!("model_{i}.bin"));
        model.save(&path)?;
        out.add_file(path);
        out.check(
            format!("model {i} reaches the target loss"),
            outcome.converged,
            format!("{:.4} after {} epochs (target {})", outcome.final_loss, outcome.epochs, cfg.params.train.target_loss),
        );
    }
    out.add_table(table);
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierParams {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Measure the fold line `a → center → b` instead of the segment.
    pub center: Option<PathBuf>,
    pub data: DataSpec,
    pub eval_size: usize,
    pub grid: usize,
    /// Fails the run when the loss barrier exceeds this.
    pub max_barrier: Option<f64>,
}

impl Default for BarrierParams {
    fn default() -> Self {
        BarrierParams {
            a: PathBuf::from("out/model_0.bin"),
            b: PathBuf::from("out/model_1.bin"),
            center: None,
            data: DataSpec::default(),
            eval_size: EVAL_SUBSET,
            grid: 101,
            max_barrier: None,
        }
    }
}

fn load(path: &PathBuf) -> Result<MlpModel> {
    MlpModel::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn run_barrier(cfg: &ExperimentConfig<BarrierParams>, out: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let a = load(&p.a)?;
    let b = load(&p.b)?;
    if a.arch != b.arch {
        bail!("checkpoints have different architectures");
    }
    let path = match &p.center {
        Some(c) => PiecewisePath::fold_line(a.params().clone(), load(c)?.params().clone(), b.params().clone())?,
        None => PiecewisePath::linear(a.params().clone(), b.params().clone())?,
    };
    let data = Arc::new(p.data.load()?);
    let oracle = DataOracle::new(a.arch.clone(), data, p.eval_size, 1, cfg.stage_seed(1));
    let report = modeconn::train::measure_barrier(&path, &oracle, p.grid)?;
    let mut table = Table::new("barrier", &["path", "t"]);
    let name = if p.center.is_some() { "fold_line" } else { "linear" };
    push_curve(&mut table, name, &report);
    out.add_table(table);
    if let Some(limit) = p.max_barrier {
        out.check(
            format!("{name} barrier within {limit}"),
            report.loss_barrier() <= limit,
            format!("barrier {:.4}", report.loss_barrier()),
        );
    }
    Ok(())
}
