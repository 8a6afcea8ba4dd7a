use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::linalg::{pinv, rank};
use crate::error::{Error, Result};
use crate::params::{FlatParams, PiecewisePath, ShapeTag};
use crate::rng::{Rng, RngSeed};

/// Deep linear network `x ↦ A_L ⋯ A_1 x` with scalar output.
///
/// Factors are stored top first: `factors()[0]` is the `1 × m_{L−1}` row
/// `A_L`, the last entry is the `m_1 × d` input layer `A_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStack {
    factors: Vec<DMatrix<f64>>,
}

impl LinearStack {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let top = factors
            .first()
            .ok_or_else(|| Error::shape("a linear stack needs at least one factor"))?;
        if top.nrows() != 1 {
            return Err(Error::shape(format!("top factor has {} rows, expected 1", top.nrows())));
        }
        for (l, pair) in factors.windows(2).enumerate() {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(Error::shape(format!(
                    "factor {l} is {}×{} but factor {} is {}×{}",
                    pair[0].nrows(),
                    pair[0].ncols(),
                    l + 1,
                    pair[1].nrows(),
                    pair[1].ncols()
                )));
            }
        }
        if factors.iter().any(|f| f.is_empty()) {
            return Err(Error::shape("empty factor"));
        }
        Ok(LinearStack { factors })
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<DMatrix<f64>> {
        self.factors
    }

    /// Depth `L`.
    pub fn depth(&self) -> usize {
        self.factors.len()
    }

    pub fn input_dim(&self) -> usize {
        self.factors.last().expect("non-empty").ncols()
    }

    /// `[m_0 = d, m_1, .., m_L = 1]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.factors.iter().rev().map(|f| f.ncols()).collect();
        w.push(1);
        w
    }

    /// `A_L ⋯ A_1`, a `1 × d` row.
    pub fn product(&self) -> DMatrix<f64> {
        self.prefix_product(self.depth())
    }

    /// Product of the top `q` factors, `A_L ⋯ A_{L−q+1}`.
    pub fn prefix_product(&self, q: usize) -> DMatrix<f64> {
        let mut p = DMatrix::identity(1, 1);
        for f in &self.factors[..q] {
            p = p * f;
        }
        p
    }

    pub fn shape_tag(&self) -> ShapeTag {
        ShapeTag::LinearStack { widths: self.widths() }
    }

    /// Row-major entries of every factor, top factor first.
    pub fn to_flat(&self) -> FlatParams {
        let values = self
            .factors
            .iter()
            .flat_map(|f| f.transpose().iter().copied().collect::<Vec<_>>())
            .collect();
        FlatParams::new(values, self.shape_tag()).expect("length matches tag")
    }

    pub fn from_flat(p: &FlatParams) -> Result<Self> {
        let ShapeTag::LinearStack { widths } = p.shape_tag() else {
            return Err(Error::shape(format!("expected a linear stack, got {:?}", p.shape_tag())));
        };
        let mut factors = Vec::with_capacity(widths.len().saturating_sub(1));
        let mut offset = 0;
        for l in (1..widths.len()).rev() {
            let (rows, cols) = (widths[l], widths[l - 1]);
            factors.push(DMatrix::from_row_slice(rows, cols, &p.values()[offset..offset + rows * cols]));
            offset += rows * cols;
        }
        LinearStack::new(factors)
    }

    pub fn to_json(&self) -> Result<String> {
        let j = LinearStackJson {
            depth: self.depth(),
            widths: self.widths(),
            factors: self
                .factors
                .iter()
                .map(|f| f.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
        };
        Ok(serde_json::to_string(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: LinearStackJson = serde_json::from_str(s)?;
        let factors = j
            .factors
            .iter()
            .map(|rows| {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(Error::shape("ragged factor"));
                }
                Ok(DMatrix::from_row_slice(r, c, &rows.concat()))
            })
            .collect::<Result<Vec<_>>>()?;
        let stack = LinearStack::new(factors)?;
        if stack.depth() != j.depth || stack.widths() != j.widths {
            return Err(Error::shape(format!(
                "declared L = {}, widths {:?} but factors give L = {}, widths {:?}",
                j.depth,
                j.widths,
                stack.depth(),
                stack.widths()
            )));
        }
        Ok(stack)
    }
}

/// `{"L": int, "widths": [..], "factors": [[[f64, ..], ..], ..]}`, `A_L` first.
#[derive(Serialize, Deserialize)]
struct LinearStackJson {
    #[serde(rename = "L")]
    depth: usize,
    widths: Vec<usize>,
    factors: Vec<Vec<Vec<f64>>>,
}

/// Linear target `y = Q x` with input second moment `Σx`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    q: DMatrix<f64>,
    sigma: DMatrix<f64>,
}

impl TargetSpec {
    pub fn new(q: DMatrix<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = q.ncols();
        if q.nrows() != 1 || sigma.shape() != (d, d) {
            return Err(Error::shape(format!(
                "Q is {}×{}, Σx is {}×{}",
                q.nrows(),
                q.ncols(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if (&sigma - sigma.transpose()).abs().max() > 1e-12 * sigma.abs().max().max(1.0) {
            return Err(Error::NumericInput("Σx is not symmetric".into()));
        }
        if sigma.clone().cholesky().is_none() {
            return Err(Error::NumericInput("Σx is not positive definite".into()));
        }
        Ok(TargetSpec { q, sigma })
    }

    /// `Σx = I`.
    pub fn isotropic(q: DMatrix<f64>) -> Result<Self> {
        let d = q.ncols();
        Self::new(q, DMatrix::identity(d, d))
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn input_dim(&self) -> usize {
        self.q.ncols()
    }
}

fn check_dims(theta: &LinearStack, spec: &TargetSpec) -> Result<()> {
    if theta.input_dim() != spec.input_dim() {
        return Err(Error::shape(format!(
            "stack input dimension {} vs target dimension {}",
            theta.input_dim(),
            spec.input_dim()
        )));
    }
    Ok(())
}

/// Exact population risk `(P − Q) Σx (P − Q)ᵀ`, `P = A_L ⋯ A_1`.
pub fn linear_risk(theta: &LinearStack, spec: &TargetSpec) -> Result<f64> {
    check_dims(theta, spec)?;
    let diff = theta.product() - &spec.q;
    Ok((&diff * &spec.sigma * diff.transpose())[(0, 0)])
}

/// `‖A_L ⋯ A_1 − Q‖_∞ ≤ tol`.
pub fn is_linear_minimum(theta: &LinearStack, spec: &TargetSpec, tol: f64) -> bool {
    theta.input_dim() == spec.input_dim() && (theta.product() - &spec.q).abs().max() <= tol
}

/// Largest risk over `grid` evenly spaced points of every segment of `path`.
pub fn max_path_risk(path: &PiecewisePath, spec: &TargetSpec, grid: usize) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in path.segments() {
        let seg = PiecewisePath::linear(a.clone(), b.clone())?;
        for (_, p) in seg.sample(grid) {
            worst = worst.max(linear_risk(&LinearStack::from_flat(&p)?, spec)?);
        }
    }
    Ok(worst)
}

const MAX_RESAMPLES: usize = 100;

pub(crate) fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Minimum with Gaussian `A_1, .., A_{L−1}` and the least-norm `A_L` solving
/// `A_L (A_{L−1} ⋯ A_1) = Q`.
pub fn sample_linear_minimum(spec: &TargetSpec, depth: usize, m: usize, seed: RngSeed) -> Result<LinearStack> {
    sample_linear_minimum_with(spec, depth, m, &mut seed.rng())
}

pub fn sample_linear_minimum_with(
    spec: &TargetSpec,
    depth: usize,
    m: usize,
    rng: &mut Rng,
) -> Result<LinearStack> {
    if depth < 2 || m == 0 {
        return Err(Error::infeasible(format!("need L ≥ 2 and m ≥ 1, got L = {depth}, m = {m}")));
    }
    let d = spec.input_dim();
    for _ in 0..MAX_RESAMPLES {
        let mut lower: Vec<DMatrix<f64>> = Vec::with_capacity(depth - 1);
        for l in (1..depth).rev() {
            let cols = if l == 1 { d } else { m };
            lower.push(gaussian_matrix(m, cols, rng));
        }
        let mut prefix = DMatrix::identity(m, m);
        for f in &lower {
            prefix = prefix * f;
        }
        if rank(&prefix) < d {
            continue;
        }
        let top = &spec.q * pinv(&prefix);
        let mut factors = vec![top];
        factors.extend(lower);
        let stack = LinearStack::new(factors)?;
        if is_linear_minimum(&stack, spec, 1e-10 * spec.q.abs().max().max(1.0)) {
            return Ok(stack);
        }
    }
    Err(Error::degenerate(format!(
        "prefix product rank deficient after {MAX_RESAMPLES} draws (m = {m}, d = {d})"
    )))
}
