//! Deep linear networks `x ↦ A_L ⋯ A_1 x` with a scalar linear target: the
//! exact risk, random minima, 2- and 3-piece connections, star-shaped
//! centers and the depth-2 pair that has no 2-piece path.

pub mod connect;
pub mod counterexample;
pub mod linalg;
pub mod star;
pub mod stack;

pub use connect::{three_pl_path, two_pl_center_linear};
pub use counterexample::{
    counterexample_lower_bound, counterexample_search, lemma_instance, path_objective,
    CounterexampleReport, UnitQuadrature,
};
pub use star::{solve_independence_lemma, star_center_linear, MixedProductTable, LINEAR_TOL};
pub use stack::{
    is_linear_minimum, linear_risk, max_path_risk, sample_linear_minimum,
    sample_linear_minimum_with, LinearStack, TargetSpec,
};
