//! Datasets: MNIST IDX files, a synthetic digit-like fallback and
//! teacher–student regression data.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Rng, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes { labels: Vec<u8>, n_classes: usize },
    /// Row-major `n × width` regression targets.
    Values { values: Vec<f64>, width: usize },
}

/// Inputs are stored row-major in `f32`; batches are widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f32>,
    dim: usize,
    targets: Targets,
    pub split: Split,
}

impl Dataset {
    pub fn new(inputs: Vec<f32>, dim: usize, targets: Targets, split: Split) -> Result<Self> {
        if dim == 0 || inputs.is_empty() || inputs.len() % dim != 0 {
            return Err(Error::shape(format!("{} input values for dimension {dim}", inputs.len())));
        }
        let n = inputs.len() / dim;
        let target_rows = match &targets {
            Targets::Classes { labels, n_classes } => {
                if let Some(&bad) = labels.iter().find(|&&l| l as usize >= *n_classes) {
                    return Err(Error::NumericInput(format!("label {bad} with {n_classes} classes")));
                }
                labels.len()
            }
            Targets::Values { values, width } => {
                if *width == 0 || values.len() % width != 0 || !values.iter().all(|v| v.is_finite()) {
                    return Err(Error::NumericInput("malformed regression targets".into()));
                }
                values.len() / width
            }
        };
        if target_rows != n {
            return Err(Error::shape(format!("{n} inputs but {target_rows} targets")));
        }
        if !inputs.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericInput("non-finite input".into()));
        }
        Ok(Dataset { inputs, dim, targets, split })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Output width a model needs for these targets.
    pub fn output_width(&self) -> usize {
        match &self.targets {
            Targets::Classes { n_classes, .. } => *n_classes,
            Targets::Values { width, .. } => *width,
        }
    }

    pub fn input_row(&self, i: usize) -> &[f32] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// `idx.len() × dim` matrix of the selected inputs.
    pub fn batch_inputs(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), self.dim, |r, c| self.inputs[idx[r] * self.dim + c] as f64)
    }

    /// Copy of the selected examples.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            inputs.extend_from_slice(self.input_row(i));
        }
        let targets = match &self.targets {
            Targets::Classes { labels, n_classes } => Targets::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
            Targets::Values { values, width } => Targets::Values {
                values: idx.iter().flat_map(|&i| values[i * width..(i + 1) * width].iter().copied()).collect(),
                width: *width,
            },
        };
        Dataset {
            inputs,
            dim: self.dim,
            targets,
            split: self.split,
        }
    }

    /// Splits off the last `n_test` examples as a test set.
    pub fn split_off(mut self, n_test: usize) -> Result<(Dataset, Dataset)> {
        if n_test == 0 || n_test >= self.len() {
            return Err(Error::infeasible(format!("cannot split {} examples into {n_test} test", self.len())));
        }
        let n_train = self.len() - n_test;
        let train_idx: Vec<usize> = (0..n_train).collect();
        let test_idx: Vec<usize> = (n_train..self.len()).collect();
        let mut test = self.subset(&test_idx);
        test.split = Split::Test;
        self = self.subset(&train_idx);
        self.split = Split::Train;
        Ok((self, test))
    }

    /// `n` distinct indices, fixed by `seed` (all indices when `n ≥ len`).
    pub fn eval_indices(&self, n: usize, seed: RngSeed) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        if n < idx.len() {
            idx.shuffle(&mut seed.rng());
            idx.truncate(n);
            idx.sort_unstable();
        }
        idx
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(bytes.len(), "truncated header"))
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Parses an IDX image file: `n × rows × cols` unsigned bytes.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(0, format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = n * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(format_err(bytes.len(), format!("expected {need} pixel bytes, found {}", body.len())));
    }
    Ok((n, rows * cols, body[..need].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format_err(0, format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(format_err(bytes.len(), format!("expected {n} labels, found {}", body.len())));
    }
    if let Some(pos) = body[..n].iter().position(|&l| l > 9) {
        return Err(format_err(8 + pos, format!("label {} out of range", body[pos])));
    }
    Ok(body[..n].to_vec())
}

/// MNIST from a pair of IDX files, pixels scaled to `[0, 1]`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (n, dim, pixels) = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if labels.len() != n {
        return Err(format_err(4, format!("{n} images but {} labels", labels.len())));
    }
    let inputs = pixels.into_iter().map(|p| p as f32 / 255.0).collect();
    Dataset::new(inputs, dim, Targets::Classes { labels, n_classes: 10 }, Split::Train)
}

/// Standard MNIST training files inside `dir`, if both are present.
pub fn find_mnist(dir: &Path) -> Option<(std::path::PathBuf, std::path::PathBuf)> {
    let images = dir.join("train-images-idx3-ubyte");
    let labels = dir.join("train-labels-idx1-ubyte");
    (images.is_file() && labels.is_file()).then_some((images, labels))
}

const SIDE: usize = 28;
const STROKES: usize = 3;

/// Ten classes of 28×28 stroke images in `[0, 1]`.
///
/// Each class owns three random line segments; every sample jitters the
/// endpoints, shifts the glyph by up to two pixels and adds pixel noise.
pub fn synthetic_digits(n: usize, seed: RngSeed) -> Result<Dataset> {
    let mut rng = seed.rng();
    let prototypes: Vec<[[f64; 4]; STROKES]> = (0..10)
        .map(|_| std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(5.0..23.0))))
        .collect();
    let jitter = Normal::new(0.0, 1.0).expect("valid normal");
    let noise = Normal::new(0.0, 0.05).expect("valid normal");
    let mut inputs = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 10;
        let (dx, dy) = (rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0));
        let strokes: Vec<[f64; 4]> = prototypes[class]
            .iter()
            .map(|s| {
                let j: [f64; 4] = std::array::from_fn(|_| jitter.sample(&mut rng));
                [s[0] + dx + j[0], s[1] + dy + j[1], s[2] + dx + j[2], s[3] + dy + j[3]]
            })
            .collect();
        for py in 0..SIDE {
            for px in 0..SIDE {
                let (x, y) = (px as f64, py as f64);
                let ink = strokes
                    .iter()
                    .map(|s| (-segment_distance2(x, y, s) / 2.0).exp())
                    .fold(0.0, f64::max);
                inputs.push((ink + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32);
            }
        }
        labels.push(class as u8);
    }
    Dataset::new(inputs, SIDE * SIDE, Targets::Classes { labels, n_classes: 10 }, Split::Train)
}

fn segment_distance2(x: f64, y: f64, s: &[f64; 4]) -> f64 {
    let (ax, ay, bx, by) = (s[0], s[1], s[2], s[3]);
    let (vx, vy) = (bx - ax, by - ay);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((x - ax) * vx + (y - ay) * vy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * vx - x, ay + t * vy - y);
    cx * cx + cy * cy
}

fn sphere_point(d: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Inputs uniform on the unit sphere in `R^d`, targets `Σ_{j<teachers} σ(x_j)`.
pub fn teacher_student_data(teachers: usize, d: usize, n: usize, seed: RngSeed) -> Result<Dataset> {
    if teachers == 0 || teachers > d {
        return Err(Error::infeasible(format!("{teachers} teachers in dimension {d}")));
    }
    let mut rng = seed.rng();
    let mut inputs = Vec::with_capacity(n * d);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let x = sphere_point(d, &mut rng);
        values.push(x[..teachers].iter().map(|v| v.max(0.0)).sum());
        inputs.extend(x.iter().map(|&v| v as f32));
    }
    Dataset::new(inputs, d, Targets::Values { values, width: 1 }, Split::Train)
}
