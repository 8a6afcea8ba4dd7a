//! Fully connected ReLU networks with hand-written backpropagation.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::{Dataset, Targets};
use crate::error::{Error, Result};
use crate::params::{FlatParams, ShapeTag};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(1/n) Σ ‖f(x) − y‖²`.
    SquaredError,
    /// Mean softmax cross-entropy.
    CrossEntropy,
}

/// Mean loss over a batch, its gradient and the number of correct
/// predictions (classification only).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEval {
    pub loss: f64,
    pub grad: Option<Vec<f64>>,
    pub correct: Option<usize>,
    pub count: usize,
}

/// A model family whose parameters live in a flat vector.
pub trait Architecture: Send + Sync {
    fn shape_tag(&self) -> ShapeTag;

    fn evaluate(&self, theta: &[f64], data: &Dataset, idx: &[usize], want_grad: bool) -> Result<BatchEval>;

    fn num_params(&self) -> usize {
        self.shape_tag().len()
    }
}

/// Widths `[input, hidden.., output]`, ReLU on hidden layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    pub widths: Vec<usize>,
    pub loss: LossKind,
}

impl MlpArch {
    pub fn new(widths: Vec<usize>, loss: LossKind) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::shape(format!("widths {widths:?}")));
        }
        Ok(MlpArch { widths, loss })
    }

    /// Offsets of `(W_l, b_l)` in the flat layout: each layer stores its
    /// `out × in` weights row-major, then its `out` biases.
    fn layer_offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut off = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let entry = (off, off + fan_in * fan_out, fan_in, fan_out);
                off += (fan_in + 1) * fan_out;
                entry
            })
            .collect()
    }

    fn unpack(&self, theta: &[f64]) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        self.layer_offsets()
            .into_iter()
            .map(|(w, b, fan_in, fan_out)| {
                (
                    DMatrix::from_row_slice(fan_out, fan_in, &theta[w..b]),
                    DVector::from_column_slice(&theta[b..b + fan_out]),
                )
            })
            .collect()
    }

    /// Output layer values for a batch of inputs (`rows = examples`).
    pub fn forward(&self, theta: &[f64], x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(theta, x.ncols())?;
        let layers = self.unpack(theta);
        let mut a = x.clone();
        for (l, (w, b)) in layers.iter().enumerate() {
            let mut z = &a * w.transpose();
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
            if l + 1 < layers.len() {
                z.apply(|v| *v = v.max(0.0));
            }
            a = z;
        }
        Ok(a)
    }

    fn check(&self, theta: &[f64], input_dim: usize) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::shape(format!("{} parameters for {:?}", theta.len(), self.widths)));
        }
        if input_dim != self.widths[0] {
            return Err(Error::shape(format!("inputs of width {input_dim} for {:?}", self.widths)));
        }
        Ok(())
    }
}

fn argmax<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Loss, `∂loss/∂out` and correct count for output rows `out`.
fn output_loss(kind: LossKind, out: &DMatrix<f64>, data: &Dataset, idx: &[usize]) -> Result<(f64, DMatrix<f64>, Option<usize>)> {
    let n = idx.len() as f64;
    match (kind, data.targets()) {
        (LossKind::CrossEntropy, Targets::Classes { labels, n_classes }) => {
            if out.ncols() != *n_classes {
                return Err(Error::shape(format!("{} outputs for {n_classes} classes", out.ncols())));
            }
            let mut grad = DMatrix::zeros(out.nrows(), out.ncols());
            let mut loss = 0.0;
            let mut correct = 0;
            for (r, &i) in idx.iter().enumerate() {
                let row = out.row(r);
                let max = row.max();
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                let y = labels[i] as usize;
                loss += lse - row[y];
                for c in 0..out.ncols() {
                    grad[(r, c)] = (row[c] - lse).exp() / n;
                }
                grad[(r, y)] -= 1.0 / n;
                if argmax(row.iter()) == y {
                    correct += 1;
                }
            }
            Ok((loss / n, grad, Some(correct)))
        }
        (LossKind::SquaredError, Targets::Values { values, width }) => {
            if out.ncols() != *width {
                return Err(Error::shape(format!("{} outputs for targets of width {width}", out.ncols())));
            }
            let mut grad = DMatrix::zeros(out.nrows(), out.ncols());
            let mut loss = 0.0;
            for (r, &i) in idx.iter().enumerate() {
                for c in 0..*width {
                    let e = out[(r, c)] - values[i * width + c];
                    loss += e * e;
                    grad[(r, c)] = 2.0 * e / n;
                }
            }
            Ok((loss / n, grad, None))
        }
        (LossKind::SquaredError, Targets::Classes { labels, n_classes }) => {
            let mut grad = DMatrix::zeros(out.nrows(), out.ncols());
            let mut loss = 0.0;
            let mut correct = 0;
            for (r, &i) in idx.iter().enumerate() {
                for c in 0..*n_classes {
                    let y = if labels[i] as usize == c { 1.0 } else { 0.0 };
                    let e = out[(r, c)] - y;
                    loss += e * e;
                    grad[(r, c)] = 2.0 * e / n;
                }
                if argmax(out.row(r).iter()) == labels[i] as usize {
                    correct += 1;
                }
            }
            Ok((loss / n, grad, Some(correct)))
        }
        (LossKind::CrossEntropy, Targets::Values { .. }) => {
            Err(Error::shape("cross-entropy needs class targets"))
        }
    }
}

impl Architecture for MlpArch {
    fn shape_tag(&self) -> ShapeTag {
        ShapeTag::Mlp {
            widths: self.widths.clone(),
        }
    }

    fn evaluate(&self, theta: &[f64], data: &Dataset, idx: &[usize], want_grad: bool) -> Result<BatchEval> {
        if idx.is_empty() {
            return Err(Error::degenerate("empty batch"));
        }
        let x = data.batch_inputs(idx);
        self.check(theta, x.ncols())?;
        let layers = self.unpack(theta);
        // pre-activations of every layer and the activations feeding them
        let mut acts = vec![x];
        let mut pre = Vec::with_capacity(layers.len());
        for (l, (w, b)) in layers.iter().enumerate() {
            let mut z = acts[l].clone() * w.transpose();
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
            let a = if l + 1 < layers.len() { z.map(|v| v.max(0.0)) } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        let out = acts.last().expect("at least one layer");
        let (loss, mut delta, correct) = output_loss(self.loss, out, data, idx)?;
        let grad = if want_grad {
            let offsets = self.layer_offsets();
            let mut g = vec![0.0; theta.len()];
            for l in (0..layers.len()).rev() {
                if l + 1 < layers.len() {
                    delta.zip_apply(&pre[l], |d, z| {
                        if z <= 0.0 {
                            *d = 0.0
                        }
                    });
                }
                let gw = delta.transpose() * &acts[l];
                let (w_off, b_off, fan_in, fan_out) = offsets[l];
                for r in 0..fan_out {
                    for c in 0..fan_in {
                        g[w_off + r * fan_in + c] = gw[(r, c)];
                    }
                    g[b_off + r] = delta.column(r).sum();
                }
                if l > 0 {
                    delta = &delta * &layers[l].0;
                }
            }
            Some(g)
        } else {
            None
        };
        Ok(BatchEval {
            loss,
            grad,
            correct,
            count: idx.len(),
        })
    }
}

/// An MLP with concrete parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: MlpArch,
    params: FlatParams,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    arch: MlpArch,
    shape_tag: ShapeTag,
}

impl MlpModel {
    pub fn new(arch: MlpArch, params: FlatParams) -> Result<Self> {
        if params.shape_tag() != &arch.shape_tag() {
            return Err(Error::shape(format!("{:?} for {:?}", params.shape_tag(), arch.widths)));
        }
        Ok(MlpModel { arch, params })
    }

    pub fn zeros(arch: MlpArch) -> Self {
        let params = FlatParams::zeros(arch.shape_tag());
        MlpModel { arch, params }
    }

    /// He-normal weights `N(0, 2/fan_in)`, zero biases.
    pub fn he_init(arch: MlpArch, seed: RngSeed) -> Self {
        let mut rng = seed.rng();
        let mut values = vec![0.0; arch.num_params()];
        for (w, b, fan_in, _) in arch.layer_offsets() {
            let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for v in &mut values[w..b] {
                *v = dist.sample(&mut rng);
            }
        }
        let params = FlatParams::new(values, arch.shape_tag()).expect("layout matches tag");
        MlpModel { arch, params }
    }

    pub fn params(&self) -> &FlatParams {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.arch.forward(self.params.values(), x)
    }

    /// Rows of the first weight matrix, one per first-layer neuron.
    pub fn first_layer_rows(&self) -> Vec<&[f64]> {
        let fan_in = self.arch.widths[0];
        let n = self.arch.widths[1];
        (0..n).map(|r| &self.params.values()[r * fan_in..(r + 1) * fan_in]).collect()
    }

    /// Binary parameters at `path` plus a JSON architecture sidecar next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.params.write_binary(&mut f)?;
        f.flush()?;
        let sidecar = Sidecar {
            arch: self.arch.clone(),
            shape_tag: self.params.shape_tag().clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let params = FlatParams::read_binary(std::fs::File::open(path)?, sidecar.shape_tag)?;
        MlpModel::new(sidecar.arch, params)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    name.into()
}

/// Two-layer student `f(x) = Σ_i σ(w_i·x)` with fixed unit output weights,
/// the empirical counterpart of the population risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentArch {
    pub teachers: usize,
    pub m: usize,
    pub d: usize,
}

impl Architecture for StudentArch {
    fn shape_tag(&self) -> ShapeTag {
        ShapeTag::Neurons {
            m: self.m,
            d: self.d,
            teachers: self.teachers,
        }
    }

    fn evaluate(&self, theta: &[f64], data: &Dataset, idx: &[usize], want_grad: bool) -> Result<BatchEval> {
        if idx.is_empty() {
            return Err(Error::degenerate("empty batch"));
        }
        if theta.len() != self.m * self.d || data.dim() != self.d {
            return Err(Error::shape(format!("student {}×{} on inputs of width {}", self.m, self.d, data.dim())));
        }
        let Targets::Values { values, width: 1 } = data.targets() else {
            return Err(Error::shape("student needs scalar regression targets"));
        };
        let w = DMatrix::from_row_slice(self.m, self.d, theta);
        let x = data.batch_inputs(idx);
        let z = &x * w.transpose();
        let n = idx.len() as f64;
        let mut loss = 0.0;
        let mut dz = DMatrix::zeros(z.nrows(), z.ncols());
        for (r, &i) in idx.iter().enumerate() {
            let f: f64 = z.row(r).iter().map(|v| v.max(0.0)).sum();
            let e = f - values[i];
            loss += e * e;
            for c in 0..self.m {
                if z[(r, c)] > 0.0 {
                    dz[(r, c)] = 2.0 * e / n;
                }
            }
        }
        let grad = want_grad.then(|| {
            let gw = dz.transpose() * &x;
            let mut g = vec![0.0; theta.len()];
            for r in 0..self.m {
                for c in 0..self.d {
                    g[r * self.d + c] = gw[(r, c)];
                }
            }
            g
        });
        Ok(BatchEval {
            loss: loss / n,
            grad,
            correct: None,
            count: idx.len(),
        })
    }
}
