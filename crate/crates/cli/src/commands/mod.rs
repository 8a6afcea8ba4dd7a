pub mod center_find;
pub mod counterexample;
pub mod mc_connectivity;
pub mod network;
pub mod ngd_sweep;
pub mod star_demo;

use modeconn::train::BarrierReport;

use crate::output::Table;

/// Appends a loss (and accuracy) curve under the key `path`.
pub fn push_curve(table: &mut Table, path: &str, report: &BarrierReport) {
    for p in &report.points {
        table.push(&[&path, &p.t], "loss", p.loss);
        if let Some(a) = p.accuracy {
            table.push(&[&path, &p.t], "accuracy", a);
        }
    }
    table.push(&[&path, &""], "barrier", report.loss_barrier());
    table.push(&[&path, &""], "max_loss", report.max_loss);
}

