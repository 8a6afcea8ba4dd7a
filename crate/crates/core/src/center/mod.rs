//! Empirical center finding: a single free point `θ` that is linearly
//! connected, in the sense of low loss along each spoke, to a set of feet.

mod finder;
mod oracle;

pub use finder::{
    balanced_lambda, center_objective, estimate_ngd, find_center, minibatch_center_grad, minibatch_center_objective,
    stochastic_center_grad, CenterDraws, CenterFindConfig, CenterRun, HistoryRow, NgdReport, PenaltyKind,
};
pub use oracle::{
    check_oracle_gradient, directional_fd_error, GradCheck, LossOracle, QuadraticOracle, ReluRiskOracle,
};
#[cfg(test)]
pub(crate) use oracle::random_unit;
