//! Center search over trained networks, with fold-line barriers through
//! the found center.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use modeconn::center::{find_center, CenterFindConfig};
use modeconn::params::PiecewisePath;
use modeconn::train::{measure_barrier, DataOracle, MlpModel, EVAL_SUBSET};
use serde::{Deserialize, Serialize};

use super::network::{train_models, TrainParams};
use super::push_curve;
use crate::config::ExperimentConfig;
use crate::output::{RunOutput, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Feet loaded from checkpoints; when empty, `train` produces them.
    pub checkpoints: Vec<PathBuf>,
    pub train: TrainParams,
    /// `seed` inside this block is replaced by one derived from the run seed.
    pub center: CenterFindConfig,
    pub eval_size: usize,
    pub grid: usize,
    pub max_fold_barrier: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            checkpoints: Vec::new(),
            train: TrainParams::default(),
            center: CenterFindConfig {
                epochs: 20,
                ..CenterFindConfig::default()
            },
            eval_size: EVAL_SUBSET,
            grid: 101,
            max_fold_barrier: 0.05,
        }
    }
}

pub fn run(cfg: &ExperimentConfig<Params>, out: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let data = p.train.data.load()?;
    let feet: Vec<MlpModel> = if p.checkpoints.is_empty() {
        train_models(&p.train, &data, cfg.stage_seed(1))?.into_iter().map(|(m, _)| m).collect()
    } else {
        p.checkpoints
            .iter()
            .map(|c| MlpModel::load(c).with_context(|| format!("loading checkpoint {}", c.display())))
            .collect::<Result<_>>()?
    };
    if feet.len() < 2 {
        bail!("center search needs at least two feet, got {}", feet.len());
    }
    let arch = feet[0].arch.clone();
    if feet.iter().any(|f| f.arch != arch) {
        bail!("feet have different architectures");
    }
    let params: Vec<_> = feet.iter().map(|f| f.params().clone()).collect();
    let oracle = DataOracle::new(arch.clone(), Arc::new(data), p.eval_size, p.train.train.batch_size, cfg.stage_seed(2));
    let center_cfg = CenterFindConfig {
        seed: cfg.stage_seed(3),
        ..p.center.clone()
    };
    let run = find_center(&params, &oracle, &center_cfg)?;

    let mut history = Table::new("center_find", &["path", "t"]);
    for row in &run.history {
        history.push(&[&"history", &row.epoch], "objective", row.objective);
        history.push(&[&"history", &row.epoch], "mean_foot_distance", row.mean_foot_distance);
    }
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        for j in i + 1..params.len() {
            let fold = PiecewisePath::fold_line(params[i].clone(), run.center.clone(), params[j].clone())?;
            let report = measure_barrier(&fold, &oracle, p.grid)?;
            worst = worst.max(report.loss_barrier());
            push_curve(&mut history, &format!("fold_{i}_{j}"), &report);
        }
    }
    out.add_table(history);
    let center_path = out.out_dir().join("center.bin");
    MlpModel::new(arch, run.center)?.save(&center_path)?;
    out.add_file(center_path);
    out.check(
        "fold-line barriers through the center",
        worst <= p.max_fold_barrier,
        format!("max barrier {worst:.4} (limit {})", p.max_fold_barrier),
    );
    Ok(())
}
