//! The depth-2 pair with no 2-piece path: best value of the path objective
//! and the 3-piece escape.

use anyhow::Result;
use modeconn::linear::{counterexample_search, lemma_instance, linear_risk, three_pl_path, LinearStack};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{RunOutput, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub grid: usize,
    /// Floor the best objective must stay above.
    pub floor: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            grid: 101,
            floor: 4.0 / 15.0 - 0.01,
        }
    }
}

const PATH_TOL: f64 = 1e-8;
const QUADRATURE_TOL: f64 = 1e-10;

pub fn run(cfg: &ExperimentConfig<Params>, out: &mut RunOutput) -> Result<()> {
    let report = counterexample_search(cfg.trials, cfg.stage_seed(1))?;
    let (t1, t2, spec) = lemma_instance();
    let path = three_pl_path(&t1, &t2, &spec, cfg.stage_seed(2))?;

    let mut table = Table::new("counterexample", &["path", "t"]);
    let mut worst: f64 = 0.0;
    for (t, p) in path.sample(cfg.params.grid.max(2)) {
        let risk = linear_risk(&LinearStack::from_flat(&p)?, &spec)?;
        worst = worst.max(risk);
        table.push(&[&"three_piece", &t], "risk", risk);
    }
    table.push(&[&"search", &""], "best_objective", report.best_value);
    table.push(&[&"search", &""], "quadrature_error", report.quadrature_error);
    table.push(&[&"search", &""], "starts", report.starts as f64);
    table.push(&[&"search", &""], "bound", 4.0 / 15.0);
    out.add_table(table);

    out.check(
        "best objective above the floor",
        report.best_value >= cfg.params.floor,
        format!("{:.6} over {} starts (floor {:.4})", report.best_value, report.starts, cfg.params.floor),
    );
    out.check("3-piece path stays on the manifold", worst <= PATH_TOL, format!("max grid risk {worst:.2e}"));
    out.check(
        "quadrature error",
        report.quadrature_error <= QUADRATURE_TOL,
        format!("{:.2e}", report.quadrature_error),
    );
    Ok(())
}
