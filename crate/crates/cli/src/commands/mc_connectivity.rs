//! Frequency with which independent uniform minima share a center, against
//! the analytic lower bound.

use anyhow::Result;
use modeconn::relu::{star_bound, ManifoldSpec};
use modeconn::sweep::{connectivity_frequency, BinomialEstimate, MinimaLaw};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{RunOutput, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub teachers: Vec<usize>,
    pub widths: Vec<usize>,
    /// Number of minima per trial; `2` is 2-piece connectability.
    pub ks: Vec<usize>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            teachers: vec![1, 2, 4],
            widths: vec![4, 8, 16, 24, 40],
            ks: vec![2, 3],
        }
    }
}

pub fn run(cfg: &ExperimentConfig<Params>, out: &mut RunOutput) -> Result<()> {
    let mut table = Table::new("mc_connectivity", &["teachers", "m", "k"]);
    let mut cell = 0u64;
    for &teachers in &cfg.params.teachers {
        for &k in &cfg.params.ks {
            let mut column: Vec<(usize, BinomialEstimate)> = Vec::new();
            for &m in &cfg.params.widths {
                cell += 1;
                if teachers == 0 || m < teachers || k == 0 {
                    log::info!("skipping (M, m, k) = ({teachers}, {m}, {k}): width cannot cover the teachers");
                    continue;
                }
                let spec = ManifoldSpec::new(teachers, m, teachers);
                let est = connectivity_frequency(MinimaLaw::Uniform, spec, k, cfg.trials, cfg.stage_seed(cell))?;
                let bound = star_bound(teachers, m, k);
                let keys: [&dyn ToString; 3] = [&teachers, &m, &k];
                table.push(&keys, "frequency", est.frequency());
                table.push(&keys, "stderr", est.stderr());
                table.push(&keys, "bound", bound);
                let ok = est.consistent_with_lower_bound(bound);
                table.push(&keys, "pass", ok as u8 as f64);
                out.check(
                    format!("frequency ≥ bound − 3·CI at (M, m, k) = ({teachers}, {m}, {k})"),
                    ok,
                    format!("{:.4} ± {:.4} vs {bound:.4}", est.frequency(), est.stderr()),
                );
                column.push((m, est));
            }
            for w in column.windows(2) {
                let (a, b) = (&w[0].1, &w[1].1);
                let slack = 3.0 * (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
                out.check(
                    format!("frequency nondecreasing from m = {} to {} at (M, k) = ({teachers}, {k})", w[0].0, w[1].0),
                    b.frequency() >= a.frequency() - slack,
                    format!("{:.4} → {:.4} (slack {slack:.4})", a.frequency(), b.frequency()),
                );
            }
        }
    }
    out.add_table(table);
    Ok(())
}
