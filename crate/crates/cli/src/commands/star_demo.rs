//! A center linearly connected to `k` minima, with the loss along every
//! pairwise segment and every spoke.

use std::sync::Arc;

use anyhow::{bail, Result};
use modeconn::center::{find_center, CenterFindConfig, LossOracle, ReluRiskOracle};
use modeconn::params::{FlatParams, PiecewisePath};
use modeconn::relu::{sample_uniform_minimum, star_center_2pl, ManifoldSpec};
use modeconn::train::{measure_barrier, DataOracle, EVAL_SUBSET};
use serde::{Deserialize, Serialize};

use super::network::{train_models, TrainParams};
use super::push_curve;
use crate::config::ExperimentConfig;
use crate::output::{RunOutput, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Sampled ReLU minima and the constructive center.
    Analytic,
    /// Trained networks and the center search.
    Trained,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub k: usize,
    pub source: Source,
    pub teachers: usize,
    pub d: usize,
    /// Width of the analytic minima; defaults to `kM`.
    pub m: Option<usize>,
    pub train: TrainParams,
    pub center: CenterFindConfig,
    pub eval_size: usize,
    pub grid: usize,
    /// Fold-line barrier allowed, relative to the smallest linear barrier.
    pub max_ratio: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            k: 3,
            source: Source::Analytic,
            teachers: 2,
            d: 3,
            m: None,
            train: TrainParams::default(),
            center: CenterFindConfig {
                epochs: 20,
                ..CenterFindConfig::default()
            },
            eval_size: EVAL_SUBSET,
            grid: 101,
            max_ratio: 0.05,
        }
    }
}

const ANALYTIC_TOL: f64 = 1e-9;

pub fn run(cfg: &ExperimentConfig<Params>, out: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    if p.k == 0 {
        bail!("k must be at least 1");
    }
    match p.source {
        Source::Analytic => run_analytic(cfg, out),
        Source::Trained => run_trained(cfg, out),
    }
}

fn run_analytic(cfg: &ExperimentConfig<Params>, out: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let spec = ManifoldSpec::new(p.teachers, p.m.unwrap_or(p.k * p.teachers), p.d);
    let feet = (0..p.k)
        .map(|i| sample_uniform_minimum(spec, cfg.stage_seed(i as u64)))
        .collect::<modeconn::error::Result<Vec<_>>>()?;
    let star = star_center_2pl(&feet)?;
    let flats: Vec<FlatParams> = feet.iter().map(|f| f.to_flat()).collect();
    let spokes: Vec<PiecewisePath> = star.spokes.clone();
    let worst = emit(cfg, out, &flats, &spokes, &ReluRiskOracle)?;
    out.check(
        "every spoke stays on the manifold",
        worst.spoke <= ANALYTIC_TOL,
        format!("max spoke risk {:.2e}", worst.spoke),
    );
    Ok(())
}

fn run_trained(cfg: &ExperimentConfig<Params>, out: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let train = TrainParams {
        models: p.k,
        ..p.train.clone()
    };
    let data = train.data.load()?;
    let models = train_models(&train, &data, cfg.stage_seed(1))?;
    let feet: Vec<FlatParams> = models.iter().map(|(m, _)| m.params().clone()).collect();
    let oracle = DataOracle::new(train.arch()?, Arc::new(data), p.eval_size, train.train.batch_size, cfg.stage_seed(2));
    let center_cfg = CenterFindConfig {
        seed: cfg.stage_seed(3),
        ..p.center.clone()
    };
    let center = find_center(&feet, &oracle, &center_cfg)?.center;
    let spokes = feet
        .iter()
        .map(|f| PiecewisePath::linear(f.clone(), center.clone()))
        .collect::<modeconn::error::Result<Vec<_>>>()?;
    let worst = emit(cfg, out, &feet, &spokes, &oracle)?;
    if p.k >= 2 {
        out.check(
            "fold-line barriers far below linear barriers",
            worst.fold <= p.max_ratio * worst.linear,
            format!(
                "max fold barrier {:.4}, min linear barrier {:.4} (ratio limit {})",
                worst.fold, worst.linear, p.max_ratio
            ),
        );
    }
    Ok(())
}

struct Extremes {
    /// Largest loss on any spoke.
    spoke: f64,
    /// Largest fold-line barrier.
    fold: f64,
    /// Smallest linear barrier.
    linear: f64,
}

fn emit(cfg: &ExperimentConfig<Params>, out: &mut RunOutput, feet: &[FlatParams], spokes: &[PiecewisePath], oracle: &dyn LossOracle) -> Result<Extremes> {
    let grid = cfg.params.grid;
    let mut table = Table::new("star_demo", &["path", "t"]);
    let mut worst = Extremes {
        spoke: 0.0,
        fold: 0.0,
        linear: f64::INFINITY,
    };
    let center = spokes[0].anchors().last().expect("spoke has anchors").clone();
    for (i, spoke) in spokes.iter().enumerate() {
        let r = measure_barrier(spoke, oracle, grid)?;
        worst.spoke = worst.spoke.max(r.max_loss);
        push_curve(&mut table, &format!("spoke_{i}"), &r);
    }
    for i in 0..feet.len() {
        for j in i + 1..feet.len() {
            let linear = measure_barrier(&PiecewisePath::linear(feet[i].clone(), feet[j].clone())?, oracle, grid)?;
            worst.linear = worst.linear.min(linear.loss_barrier());
            push_curve(&mut table, &format!("linear_{i}_{j}"), &linear);
            let fold = PiecewisePath::fold_line(feet[i].clone(), center.clone(), feet[j].clone())?;
            let fold = measure_barrier(&fold, oracle, grid)?;
            worst.fold = worst.fold.max(fold.loss_barrier());
            push_curve(&mut table, &format!("fold_{i}_{j}"), &fold);
        }
    }
    out.add_table(table);
    Ok(worst)
}
