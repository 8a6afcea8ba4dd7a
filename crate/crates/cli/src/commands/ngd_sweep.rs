//! Normalized geodesic distance against width: analytic two-piece bounds on
//! sparse minima and center-search estimates on trained students.

use std::sync::Arc;

use anyhow::Result;
use modeconn::center::{balanced_lambda, estimate_ngd, CenterFindConfig, PenaltyKind};
use modeconn::params::FlatParams;
use modeconn::relu::ManifoldSpec;
use modeconn::rng::RngSeed;
use modeconn::sweep::{ngd_bound_stats, MinimaLaw};
use modeconn::train::{teacher_student_data, train_network, Architecture, DataOracle, StudentArch, TrainConfig};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{RunOutput, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub teachers: usize,
    pub widths: Vec<usize>,
    /// Zero-neuron probability of the sparse law.
    pub r: f64,
    /// Also estimate NGD between trained students.
    pub trained: Option<TrainedParams>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            teachers: 2,
            widths: vec![8, 16, 32, 64, 128, 256],
            r: 0.5,
            trained: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainedParams {
    pub widths: Vec<usize>,
    pub d: usize,
    pub samples: usize,
    pub pairs: usize,
    /// Standard deviation of the Gaussian initialization.
    pub init_std: f64,
    pub train: TrainConfig,
    /// A zero `lambda` is replaced by the balanced weight for each pair.
    pub center: CenterFindConfig,
}

impl Default for TrainedParams {
    fn default() -> Self {
        TrainedParams {
            widths: vec![8, 16, 32, 64],
            d: 8,
            samples: 2048,
            pairs: 2,
            init_std: 0.1,
            train: TrainConfig {
                max_epochs: 500,
                target_loss: 1e-3,
                ..TrainConfig::default()
            },
            center: CenterFindConfig {
                epochs: 60,
                penalty_kind: PenaltyKind::SquaredDistance,
                ..CenterFindConfig::default()
            },
        }
    }
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

pub fn run(cfg: &ExperimentConfig<Params>, out: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let mut table = Table::new("ngd_sweep", &["mode", "m"]);
    let mut means = Vec::new();
    for (i, &m) in p.widths.iter().enumerate() {
        let spec = ManifoldSpec::new(p.teachers, m, p.teachers);
        let s = ngd_bound_stats(MinimaLaw::Sparse { r: p.r }, spec, cfg.trials, cfg.stage_seed(i as u64))?;
        table.push(&[&"analytic_sparse", &m], "mean", s.mean);
        table.push(&[&"analytic_sparse", &m], "std", s.std);
        table.push(&[&"analytic_sparse", &m], "count", s.count as f64);
        table.push(&[&"analytic_sparse", &m], "skipped", s.skipped as f64);
        means.push(s.mean);
    }
    out.check(
        "analytic mean NGD strictly decreasing in m",
        strictly_decreasing(&means),
        format!("{means:.4?}"),
    );
    out.check(
        "analytic mean NGD at least 1",
        means.iter().all(|&v| v >= 1.0),
        format!("min {:.4}", means.iter().copied().fold(f64::INFINITY, f64::min)),
    );

    if let Some(tp) = &p.trained {
        let trained_means = run_trained(cfg, tp, &mut table)?;
        if trained_means.len() >= 2 {
            out.check(
                "trained mean NGD strictly decreasing in m",
                strictly_decreasing(&trained_means),
                format!("{trained_means:.4?}"),
            );
        }
    }
    out.add_table(table);
    Ok(())
}

fn gaussian_init(arch: &StudentArch, std: f64, seed: RngSeed) -> Result<FlatParams> {
    let mut rng = seed.rng();
    let dist = Normal::new(0.0, std)?;
    Ok(FlatParams::new(
        (0..arch.num_params()).map(|_| dist.sample(&mut rng)).collect(),
        arch.shape_tag(),
    )?)
}

fn run_trained(cfg: &ExperimentConfig<Params>, tp: &TrainedParams, table: &mut Table) -> Result<Vec<f64>> {
    let teachers = cfg.params.teachers;
    let data = Arc::new(teacher_student_data(teachers, tp.d, tp.samples, cfg.stage_seed(100))?);
    let mut means = Vec::new();
    for (wi, &m) in tp.widths.iter().enumerate() {
        let arch = StudentArch { teachers, m, d: tp.d };
        let oracle = DataOracle::new(arch, data.clone(), tp.samples, tp.train.batch_size, cfg.stage_seed(200));
        let mut ngds = Vec::new();
        for pair in 0..tp.pairs {
            let base = cfg.stage_seed(1000 + (wi * tp.pairs + pair) as u64);
            let mut feet = Vec::new();
            for k in 0..2u64 {
                let init = gaussian_init(&arch, tp.init_std, base.derive(2 * k))?;
                let outcome = train_network(&arch, init, &data, &tp.train, base.derive(2 * k + 1))?;
                if outcome.converged {
                    feet.push(outcome.params);
                } else {
                    log::warn!("m = {m}, pair {pair}: student stopped at loss {:.2e}; pair excluded", outcome.final_loss);
                }
            }
            if feet.len() < 2 {
                continue;
            }
            let lambda = if tp.center.lambda > 0.0 {
                tp.center.lambda
            } else {
                balanced_lambda(&feet, &oracle, tp.center.n_quad)?
            };
            let center_cfg = CenterFindConfig {
                lambda,
                seed: base.derive(9),
                ..tp.center.clone()
            };
            let report = estimate_ngd(&feet[0], &feet[1], &oracle, &center_cfg)?;
            log::info!(
                "m = {m}, pair {pair}: NGD {:.4} at λ = {lambda:.2e}, spoke max losses {:.2e}, {:.2e}",
                report.ngd,
                report.spoke_max_loss[0],
                report.spoke_max_loss[1]
            );
            ngds.push(report.ngd);
        }
        if ngds.is_empty() {
            log::warn!("m = {m}: no converged pair");
            continue;
        }
        let (mean, std) = mean_std(&ngds);
        table.push(&[&"trained", &m], "mean", mean);
        table.push(&[&"trained", &m], "std", std);
        table.push(&[&"trained", &m], "count", ngds.len() as f64);
        means.push(mean);
    }
    Ok(means)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
