use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{FlatParams, ShapeTag};

/// Membership tolerance for constructed and sampled minima.
pub const MANIFOLD_TOL: f64 = 1e-9;
/// Membership tolerance for minima reached by training.
pub const TRAINED_TOL: f64 = 1e-4;

/// Student first-layer weights: `m` ReLU neurons in `ℝ^d`, learning a teacher
/// made of the first `teachers` canonical basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronMatrix {
    teachers: usize,
    d: usize,
    m: usize,
    data: Vec<f64>,
}

impl NeuronMatrix {
    pub fn new(teachers: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::shape("rows of unequal length"));
        }
        Self::from_data(teachers, m, d, rows.concat())
    }

    pub fn from_data(teachers: usize, m: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::infeasible("student needs at least one neuron"));
        }
        if teachers == 0 || teachers > d {
            return Err(Error::infeasible(format!(
                "need 1 ≤ M ≤ d, got M = {teachers}, d = {d}"
            )));
        }
        if data.len() != m * d {
            return Err(Error::shape(format!("{} entries for {m}×{d}", data.len())));
        }
        Ok(NeuronMatrix { teachers, d, m, data })
    }

    pub fn zeros(teachers: usize, m: usize, d: usize) -> Result<Self> {
        Self::from_data(teachers, m, d, vec![0.0; m * d])
    }

    /// The teacher itself: `m = M` rows `e_1, .., e_M`.
    pub fn teacher(teachers: usize, d: usize) -> Result<Self> {
        let mut w = Self::zeros(teachers, teachers, d)?;
        for j in 0..teachers {
            w.set(j, j, 1.0);
        }
        Ok(w)
    }

    pub fn teachers(&self) -> usize {
        self.teachers
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn width(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.d + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn same_dims(&self, other: &NeuronMatrix) -> bool {
        self.teachers == other.teachers && self.d == other.d && self.m == other.m
    }

    pub fn shape_tag(&self) -> ShapeTag {
        ShapeTag::Neurons {
            m: self.m,
            d: self.d,
            teachers: self.teachers,
        }
    }

    pub fn to_flat(&self) -> FlatParams {
        FlatParams::new(self.data.clone(), self.shape_tag()).expect("length matches tag")
    }

    pub fn from_flat(p: &FlatParams) -> Result<Self> {
        match *p.shape_tag() {
            ShapeTag::Neurons { m, d, teachers } => {
                Self::from_data(teachers, m, d, p.values().to_vec())
            }
            ref other => Err(Error::shape(format!("expected neurons, got {other:?}"))),
        }
    }

    /// Sum of column `j` over all neurons.
    pub fn column_sum(&self, j: usize) -> f64 {
        self.rows().map(|r| r[j]).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&NeuronMatrixJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: NeuronMatrixJson = serde_json::from_str(s)?;
        let w = NeuronMatrix::new(j.teachers, j.rows)?;
        if w.d != j.d {
            return Err(Error::shape(format!("declared d = {} but rows have {}", j.d, w.d)));
        }
        Ok(w)
    }
}

/// `{"M": int, "d": int, "rows": [[f64, ..], ..]}`
#[derive(Serialize, Deserialize)]
struct NeuronMatrixJson {
    #[serde(rename = "M")]
    teachers: usize,
    d: usize,
    rows: Vec<Vec<f64>>,
}

impl From<&NeuronMatrix> for NeuronMatrixJson {
    fn from(w: &NeuronMatrix) -> Self {
        NeuronMatrixJson {
            teachers: w.teachers,
            d: w.d,
            rows: w.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

/// Which piece of the neuron set `S = S_0 ∪ S_1 ∪ .. ∪ S_M` a row lies in.
///
/// Coordinates are zero-based: `Axis { coord: 0, .. }` is the first teacher
/// direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuronType {
    Zero,
    Axis { coord: usize, magnitude: f64 },
}

impl NeuronType {
    pub fn coord(&self) -> Option<usize> {
        match *self {
            NeuronType::Zero => None,
            NeuronType::Axis { coord, .. } => Some(coord),
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            NeuronType::Zero => 0.0,
            NeuronType::Axis { magnitude, .. } => magnitude,
        }
    }

    /// Zero or aligned with teacher coordinate `j`.
    pub fn admits(&self, j: usize) -> bool {
        match *self {
            NeuronType::Zero => true,
            NeuronType::Axis { coord, .. } => coord == j,
        }
    }
}

/// Classifies one neuron; `None` when it cannot appear in any global minimum.
///
/// A row is `Axis(j)` only if its single entry above `tol` sits in a teacher
/// column and is positive.
pub fn classify_neuron(w: &[f64], teachers: usize, tol: f64) -> Option<NeuronType> {
    let mut big = w.iter().enumerate().filter(|(_, v)| v.abs() > tol || !v.is_finite());
    match (big.next(), big.next()) {
        (None, _) => Some(NeuronType::Zero),
        (Some((j, &v)), None) if j < teachers && v > 0.0 && v.is_finite() => Some(NeuronType::Axis {
            coord: j,
            magnitude: v,
        }),
        _ => None,
    }
}

/// Types of every row, or an error naming the first row off the manifold.
pub fn neuron_types(w: &NeuronMatrix, tol: f64) -> Result<Vec<NeuronType>> {
    w.rows()
        .enumerate()
        .map(|(i, r)| {
            classify_neuron(r, w.teachers, tol)
                .ok_or_else(|| Error::NotOnManifold(format!("row {i} = {r:?}")))
        })
        .collect()
}

/// Membership in the minima manifold: every row is zero or a positive
/// multiple of a teacher direction, and each teacher column sums to one.
pub fn is_global_minimum(w: &NeuronMatrix, tol: f64) -> bool {
    w.rows().all(|r| classify_neuron(r, w.teachers, tol).is_some())
        && (0..w.teachers).all(|j| (w.column_sum(j) - 1.0).abs() <= tol)
}

pub(crate) fn require_minimum(w: &NeuronMatrix, tol: f64) -> Result<Vec<NeuronType>> {
    let types = neuron_types(w, tol)?;
    for j in 0..w.teachers {
        let s = w.column_sum(j);
        if (s - 1.0).abs() > tol {
            return Err(Error::NotOnManifold(format!("column {j} sums to {s}")));
        }
    }
    Ok(types)
}
