//! Flat parameter vectors, linear interpolation and piecewise-linear paths.
//!
//! Every model in the crate can be flattened into a [`FlatParams`] whose
//! [`ShapeTag`] records the structure it came from. Only values with equal
//! tags can be combined.
//!
//! Interpolation follows the convention `interpolate(a, b, t) = t·a + (1−t)·b`:
//! `t = 1` returns the *first* argument.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structure a flat parameter vector was produced from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeTag {
    /// Unstructured vector.
    Vector { len: usize },
    /// Student neuron matrix, `m` rows of dimension `d`, `teachers` teacher units.
    Neurons { m: usize, d: usize, teachers: usize },
    /// Deep linear network, widths `[m_0 = d, m_1, .., m_L = 1]`.
    LinearStack { widths: Vec<usize> },
    /// Fully connected network with biases, widths `[input, hidden.., output]`.
    Mlp { widths: Vec<usize> },
}

impl ShapeTag {
    pub fn len(&self) -> usize {
        match self {
            ShapeTag::Vector { len } => *len,
            ShapeTag::Neurons { m, d, .. } => m * d,
            ShapeTag::LinearStack { widths } => widths.windows(2).map(|w| w[0] * w[1]).sum(),
            ShapeTag::Mlp { widths } => widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An immutable point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatParams {
    values: Vec<f64>,
    shape_tag: ShapeTag,
}

impl FlatParams {
    pub fn new(values: Vec<f64>, shape_tag: ShapeTag) -> Result<Self> {
        if values.len() != shape_tag.len() {
            return Err(Error::shape(format!(
                "{} values for a shape of length {}",
                values.len(),
                shape_tag.len()
            )));
        }
        Ok(FlatParams { values, shape_tag })
    }

    /// Untagged vector.
    pub fn vector(values: Vec<f64>) -> Self {
        let len = values.len();
        FlatParams {
            values,
            shape_tag: ShapeTag::Vector { len },
        }
    }

    pub fn zeros(shape_tag: ShapeTag) -> Self {
        FlatParams {
            values: vec![0.0; shape_tag.len()],
            shape_tag,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn shape_tag(&self) -> &ShapeTag {
        &self.shape_tag
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_compatible(&self, other: &FlatParams) -> Result<()> {
        if self.shape_tag != other.shape_tag {
            return Err(Error::shape(format!(
                "{:?} vs {:?}",
                self.shape_tag, other.shape_tag
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &FlatParams, f: impl Fn(f64, f64) -> f64) -> Result<FlatParams> {
        self.check_compatible(other)?;
        Ok(FlatParams {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            shape_tag: self.shape_tag.clone(),
        })
    }

    pub fn add(&self, other: &FlatParams) -> Result<FlatParams> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &FlatParams) -> Result<FlatParams> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> FlatParams {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FlatParams {
        FlatParams {
            values: self.values.iter().map(|&v| f(v)).collect(),
            shape_tag: self.shape_tag.clone(),
        }
    }

    pub fn dot(&self, other: &FlatParams) -> Result<f64> {
        self.check_compatible(other)?;
        let prods: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(pairwise_sum(&prods))
    }

    pub fn norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        pairwise_sum(&sq).sqrt()
    }

    /// Euclidean distance.
    pub fn distance(&self, other: &FlatParams) -> Result<f64> {
        self.check_compatible(other)?;
        let sq: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        Ok(pairwise_sum(&sq).sqrt())
    }

    /// Elementwise mean of a nonempty set of compatible points.
    pub fn mean(points: &[FlatParams]) -> Result<FlatParams> {
        let first = points
            .first()
            .ok_or_else(|| Error::degenerate("mean of an empty set"))?;
        let mut acc = vec![0.0; first.len()];
        for p in points {
            first.check_compatible(p)?;
            for (a, v) in acc.iter_mut().zip(&p.values) {
                *a += v;
            }
        }
        let n = points.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(FlatParams {
            values: acc,
            shape_tag: first.shape_tag.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: FlatParams = serde_json::from_str(s)?;
        FlatParams::new(p.values, p.shape_tag)
    }

    /// Little-endian binary checkpoint without the shape tag (kept in a sidecar).
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary_values(w, &self.values)
    }

    pub fn read_binary<R: Read>(r: R, shape_tag: ShapeTag) -> Result<Self> {
        let values = read_binary_values(r)?;
        FlatParams::new(values, shape_tag)
    }
}

pub const BINARY_MAGIC: &[u8; 4] = b"MWPM";
pub const BINARY_VERSION: u32 = 1;

/// Writes `"MWPM" | version: u32 | len: u64 | len × f64`, all little-endian.
pub fn write_binary_values<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary_values<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: "truncated header".into(),
        });
    }
    if &bytes[0..4] != BINARY_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic".into(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != len * 8 {
        return Err(Error::Format {
            offset: 16 + body.len().min(len * 8) as u64,
            message: format!("expected {} payload bytes, found {}", len * 8, body.len()),
        });
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Sum with O(log n) rounding growth.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// `t·a + (1−t)·b`; `t = 1` returns `a`, `t = 0` returns `b`.
pub fn interpolate(a: &FlatParams, b: &FlatParams, t: f64) -> Result<FlatParams> {
    a.zip_with(b, |x, y| t * x + (1.0 - t) * y)
}

/// Piecewise-linear path through an ordered list of anchors.
///
/// A path with `k` segments assigns segment `i` to `t ∈ [i/k, (i+1)/k]`, so
/// the fold-line `a → c → b` passes through `c` at `t = 0.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePath {
    anchors: Vec<FlatParams>,
}

impl PiecewisePath {
    pub fn new(anchors: Vec<FlatParams>) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::degenerate("a path needs at least two anchors"));
        }
        let tag = anchors[0].shape_tag();
        if let Some(bad) = anchors.iter().find(|a| a.shape_tag() != tag) {
            return Err(Error::shape(format!(
                "anchor {:?} on a path of {:?}",
                bad.shape_tag(),
                tag
            )));
        }
        Ok(PiecewisePath { anchors })
    }

    /// Single segment `from → to`.
    pub fn linear(from: FlatParams, to: FlatParams) -> Result<Self> {
        Self::new(vec![from, to])
    }

    /// Two segments `from → center → to`.
    pub fn fold_line(from: FlatParams, center: FlatParams, to: FlatParams) -> Result<Self> {
        Self::new(vec![from, center, to])
    }

    pub fn anchors(&self) -> &[FlatParams] {
        &self.anchors
    }

    pub fn num_segments(&self) -> usize {
        self.anchors.len() - 1
    }

    pub fn first(&self) -> &FlatParams {
        &self.anchors[0]
    }

    pub fn last(&self) -> &FlatParams {
        &self.anchors[self.anchors.len() - 1]
    }

    pub fn segments(&self) -> impl Iterator<Item = (&FlatParams, &FlatParams)> {
        self.anchors.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn eval(&self, t: f64) -> FlatParams {
        let k = self.num_segments();
        let s = t.clamp(0.0, 1.0) * k as f64;
        let i = (s.floor() as usize).min(k - 1);
        let local = s - i as f64;
        interpolate(&self.anchors[i + 1], &self.anchors[i], local)
            .expect("anchors share a shape tag")
    }

    /// `grid` uniformly spaced points including both endpoints.
    pub fn sample(&self, grid: usize) -> Vec<(f64, FlatParams)> {
        uniform_grid(grid)
            .into_iter()
            .map(|t| (t, self.eval(t)))
            .collect()
    }

    /// Sum of Euclidean segment lengths.
    pub fn length(&self) -> f64 {
        let lens: Vec<f64> = self
            .segments()
            .map(|(a, b)| a.distance(b).expect("anchors share a shape tag"))
            .collect();
        pairwise_sum(&lens)
    }
}

pub fn path_eval(path: &PiecewisePath, t: f64) -> FlatParams {
    path.eval(t)
}

pub fn path_length(path: &PiecewisePath) -> f64 {
    path.length()
}

/// `n` points `0, 1/(n−1), .., 1`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Length of the fold-line `θ1 → c → θ2` relative to `‖θ1 − θ2‖`.
///
/// When `c` is linearly connected to both endpoints on the minima manifold
/// this bounds the normalized geodesic distance from above.
pub fn ngd_from_center(theta1: &FlatParams, theta2: &FlatParams, center: &FlatParams) -> Result<f64> {
    let direct = theta1.distance(theta2)?;
    if direct == 0.0 {
        return Err(Error::degenerate("θ1 = θ2 has no normalized distance"));
    }
    Ok((theta1.distance(center)? + center.distance(theta2)?) / direct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> FlatParams {
        FlatParams::vector(xs.to_vec())
    }

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let a = v(&[2.0, 0.0]);
        let b = v(&[0.0, 2.0]);
        assert_eq!(interpolate(&a, &b, 1.0).unwrap(), a);
        assert_eq!(interpolate(&a, &b, 0.0).unwrap(), b);
        assert_eq!(interpolate(&a, &b, 0.5).unwrap().values(), &[1.0, 1.0]);
    }

    #[test]
    fn interpolate_rejects_mismatched_tags() {
        let a = v(&[1.0, 2.0]);
        let b = FlatParams::new(vec![1.0, 2.0], ShapeTag::Neurons { m: 1, d: 2, teachers: 1 }).unwrap();
        assert!(matches!(interpolate(&a, &b, 0.3), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn path_eval_conventions() {
        let a = v(&[0.0, 0.0]);
        let c = v(&[1.0, 1.0]);
        let b = v(&[2.0, 0.0]);
        let two = PiecewisePath::linear(a.clone(), b.clone()).unwrap();
        assert_eq!(two.eval(0.5).values(), &[1.0, 0.0]);
        let fold = PiecewisePath::fold_line(a.clone(), c.clone(), b.clone()).unwrap();
        assert_eq!(fold.eval(0.5), c);
        assert_eq!(fold.eval(0.25).values(), &[0.5, 0.5]);
        assert_eq!(fold.eval(0.0), a);
        assert_eq!(fold.eval(1.0), b);
    }

    #[test]
    fn path_lengths() {
        let a = v(&[0.0, 0.0]);
        let b = v(&[2.0, 0.0]);
        assert_eq!(PiecewisePath::linear(a.clone(), b.clone()).unwrap().length(), 2.0);
        let on = PiecewisePath::fold_line(a.clone(), v(&[0.5, 0.0]), b.clone()).unwrap();
        assert!((on.length() - 2.0).abs() < 1e-15);
        let fold = PiecewisePath::fold_line(a, v(&[1.0, 1.0]), b).unwrap();
        assert!((fold.length() - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ngd_examples() {
        let t1 = v(&[1.0, 0.0]);
        let t2 = v(&[-1.0, 0.0]);
        assert!((ngd_from_center(&t1, &t2, &v(&[0.3, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((ngd_from_center(&t1, &t2, &v(&[0.0, 1.0])).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            ngd_from_center(&t1, &t1, &t2),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn short_paths_rejected() {
        assert!(PiecewisePath::new(vec![v(&[1.0])]).is_err());
    }

    #[test]
    fn binary_roundtrip_and_errors() {
        let p = FlatParams::new(vec![1.5, -2.0, 3.25], ShapeTag::Vector { len: 3 }).unwrap();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MWPM");
        assert_eq!(buf.len(), 16 + 24);
        let back = FlatParams::read_binary(&buf[..], ShapeTag::Vector { len: 3 }).unwrap();
        assert_eq!(back, p);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_binary_values(&bad[..]), Err(Error::Format { offset: 0, .. })));
        let truncated = &buf[..30];
        assert!(matches!(read_binary_values(truncated), Err(Error::Format { .. })));
        assert!(FlatParams::read_binary(&buf[..], ShapeTag::Vector { len: 4 }).is_err());
    }

    #[test]
    fn json_carries_shape_tag() {
        let p = FlatParams::new(vec![0.0, 1.0], ShapeTag::Neurons { m: 2, d: 1, teachers: 1 }).unwrap();
        let s = p.to_json().unwrap();
        assert!(s.contains("\"shape_tag\""));
        assert!(s.contains("\"kind\":\"neurons\""));
        assert_eq!(FlatParams::from_json(&s).unwrap(), p);
        assert!(FlatParams::from_json(r#"{"values":[1.0],"shape_tag":{"kind":"vector","len":2}}"#).is_err());
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0..10.0f64, n),
                prop::collection::vec(-10.0..10.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn interpolation_is_affine_symmetric((a, b) in vec_pair(), t in 0.0..=1.0f64) {
            let (a, b) = (v(&a), v(&b));
            let lhs = interpolate(&a, &b, t).unwrap().add(&interpolate(&b, &a, t).unwrap()).unwrap();
            let rhs = a.add(&b).unwrap();
            for (x, y) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn path_length_dominates_chord(
            anchors in (1usize..6).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), 2..6))
        ) {
            let pts: Vec<FlatParams> = anchors.iter().map(|a| v(a)).collect();
            let path = PiecewisePath::new(pts.clone()).unwrap();
            let chord = pts[0].distance(pts.last().unwrap()).unwrap();
            prop_assert!(path.length() >= chord - 1e-12);
            prop_assert_eq!(path.eval(0.0), pts[0].clone());
            prop_assert_eq!(path.eval(1.0), pts.last().unwrap().clone());
        }

        #[test]
        fn ngd_at_least_one((a, b) in vec_pair(), c in prop::collection::vec(-10.0..10.0f64, 12)) {
            let (a, b) = (v(&a), v(&b));
            prop_assume!(a.distance(&b).unwrap() > 1e-6);
            let c = v(&c[..a.len()]);
            prop_assert!(ngd_from_center(&a, &b, &c).unwrap() >= 1.0 - 1e-12);
        }
    }
}
