//! Random global minima.
//!
//! Each neuron independently picks a piece `S_0, .., S_M` of the neuron set;
//! draws that leave some teacher direction uncovered are rejected. Within
//! each teacher group the magnitudes are uniform on the simplex.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::neuron::NeuronMatrix;
use crate::error::{Error, Result};
use crate::rng::{Rng, RngSeed};

/// Dimensions of a teacher–student problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    /// Teacher neurons `M`.
    pub teachers: usize,
    /// Student width `m`.
    pub m: usize,
    /// Input dimension `d`.
    pub d: usize,
}

impl ManifoldSpec {
    pub fn new(teachers: usize, m: usize, d: usize) -> Self {
        ManifoldSpec { teachers, m, d }
    }

    fn validate(&self) -> Result<()> {
        if self.teachers == 0 || self.teachers > self.d {
            return Err(Error::infeasible(format!(
                "need 1 ≤ M ≤ d, got M = {}, d = {}",
                self.teachers, self.d
            )));
        }
        if self.m < self.teachers {
            return Err(Error::infeasible(format!(
                "width m = {} cannot cover M = {} teacher directions",
                self.m, self.teachers
            )));
        }
        Ok(())
    }
}

/// Neuron-sparse law: a neuron is zero with probability `r` and otherwise
/// aligned with one of the `M` teacher directions uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseDistSpec {
    pub r: f64,
    pub dims: ManifoldSpec,
}

impl SparseDistSpec {
    pub fn new(r: f64, dims: ManifoldSpec) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::infeasible(format!("sparsity r = {r} outside (0, 1)")));
        }
        Ok(SparseDistSpec { r, dims })
    }
}

/// Draws piece labels (`0` = zero neuron, `j ≥ 1` = teacher `j − 1`) until
/// every teacher direction is used at least once.
pub(crate) fn sample_types(spec: &ManifoldSpec, p_zero: f64, rng: &mut Rng) -> Vec<usize> {
    let mut types = vec![0usize; spec.m];
    let mut seen = vec![false; spec.teachers];
    loop {
        seen.fill(false);
        for t in types.iter_mut() {
            *t = if rng.random::<f64>() < p_zero {
                0
            } else {
                1 + rng.random_range(0..spec.teachers)
            };
            if *t > 0 {
                seen[*t - 1] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            return types;
        }
    }
}

fn fill_magnitudes(spec: &ManifoldSpec, types: &[usize], rng: &mut Rng) -> NeuronMatrix {
    let mut w = NeuronMatrix::zeros(spec.teachers, spec.m, spec.d).expect("validated spec");
    let mut raw = vec![0.0; spec.m];
    let mut totals = vec![0.0; spec.teachers];
    for (i, &t) in types.iter().enumerate() {
        if t > 0 {
            let e: f64 = Exp1.sample(rng);
            raw[i] = e;
            totals[t - 1] += e;
        }
    }
    for (i, &t) in types.iter().enumerate() {
        if t > 0 {
            w.set(i, t - 1, raw[i] / totals[t - 1]);
        }
    }
    w
}

fn sample_with_law(spec: &ManifoldSpec, p_zero: f64, rng: &mut Rng) -> NeuronMatrix {
    let types = sample_types(spec, p_zero, rng);
    fill_magnitudes(spec, &types, rng)
}

/// Minimum with uniform piece assignment over `{S_0, .., S_M}`.
pub fn sample_uniform_minimum(spec: ManifoldSpec, seed: RngSeed) -> Result<NeuronMatrix> {
    sample_uniform_minimum_with(spec, &mut seed.rng())
}

pub fn sample_uniform_minimum_with(spec: ManifoldSpec, rng: &mut Rng) -> Result<NeuronMatrix> {
    spec.validate()?;
    Ok(sample_with_law(&spec, 1.0 / (spec.teachers as f64 + 1.0), rng))
}

/// Minimum drawn from the neuron-sparse law.
pub fn sample_sparse_minimum(spec: SparseDistSpec, seed: RngSeed) -> Result<NeuronMatrix> {
    sample_sparse_minimum_with(spec, &mut seed.rng())
}

pub fn sample_sparse_minimum_with(spec: SparseDistSpec, rng: &mut Rng) -> Result<NeuronMatrix> {
    spec.dims.validate()?;
    Ok(sample_with_law(&spec.dims, spec.r, rng))
}
