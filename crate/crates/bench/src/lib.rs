//! Fixed inputs shared by the benchmarks.

use modeconn::linear::{sample_linear_minimum, LinearStack, TargetSpec};
use modeconn::relu::{sample_uniform_minimum, ManifoldSpec, NeuronMatrix};
use modeconn::rng::RngSeed;
use modeconn::train::{synthetic_digits, Dataset, LossKind, MlpArch, MlpModel};
use nalgebra::DMatrix;

pub fn relu_pair(teachers: usize, m: usize, d: usize) -> (NeuronMatrix, NeuronMatrix) {
    let spec = ManifoldSpec::new(teachers, m, d);
    (
        sample_uniform_minimum(spec, RngSeed(1)).expect("valid spec"),
        sample_uniform_minimum(spec, RngSeed(2)).expect("valid spec"),
    )
}

pub fn linear_feet(count: usize, depth: usize, m: usize) -> (Vec<LinearStack>, TargetSpec) {
    let spec = TargetSpec::isotropic(DMatrix::from_row_slice(1, 2, &[1.0, -0.5])).expect("valid target");
    let feet = (0..count)
        .map(|i| sample_linear_minimum(&spec, depth, m, RngSeed(10 + i as u64)).expect("valid widths"))
        .collect();
    (feet, spec)
}

pub fn digits_mlp(n: usize) -> (Dataset, MlpModel) {
    let data = synthetic_digits(n, RngSeed(3)).expect("positive size");
    let arch = MlpArch::new(vec![784, 32, 16, 10], LossKind::CrossEntropy).expect("valid widths");
    (data, MlpModel::he_init(arch, RngSeed(4)))
}
