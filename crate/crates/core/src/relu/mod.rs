//! Two-layer ReLU teacher–student model: the analytic minima manifold, its
//! exact risk, random minima, and connectivity constructions on it.

pub mod connect;
pub mod geodesic;
pub mod neuron;
pub mod risk;
pub mod sampling;

pub use connect::{
    find_shared_zero_center, four_pl_path, is_two_pl_connectable, linearly_connected,
    merge_minimum, star_bound, star_center_2pl, two_pl_bound, StarCenter,
};
pub use geodesic::{optimal_two_piece_center, TwoPieceCenter};
pub use neuron::{
    classify_neuron, is_global_minimum, neuron_types, NeuronMatrix, NeuronType, MANIFOLD_TOL,
    TRAINED_TOL,
};
pub use risk::{
    relu_kernel, relu_kernel_grad, risk_closed_form, risk_closed_form_grad, risk_monte_carlo,
    McEstimate,
};
pub use sampling::{
    sample_sparse_minimum, sample_sparse_minimum_with, sample_uniform_minimum,
    sample_uniform_minimum_with, ManifoldSpec, SparseDistSpec,
};
