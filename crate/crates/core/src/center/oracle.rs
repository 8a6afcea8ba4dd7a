//! Loss oracles: a loss and its gradient bound to a fixed model and data.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::params::FlatParams;
use crate::relu::{risk_closed_form, risk_closed_form_grad, NeuronMatrix};
use crate::rng::{Rng, RngSeed};

/// A loss `𝓡(θ)` with gradient, safe to share between concurrent runs.
pub trait LossOracle: Send + Sync {
    fn loss(&self, theta: &FlatParams) -> Result<f64>;

    fn loss_grad(&self, theta: &FlatParams) -> Result<FlatParams>;

    /// Classification accuracy at `θ`, when the oracle has one.
    fn accuracy(&self, _theta: &FlatParams) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Gradient used by stochastic optimizers. Empirical oracles override
    /// this with a minibatch gradient.
    fn sample_grad(&self, theta: &FlatParams, _rng: &mut Rng) -> Result<FlatParams> {
        self.loss_grad(theta)
    }

    /// Optimizer steps that make up one epoch.
    fn steps_per_epoch(&self) -> usize {
        100
    }
}

impl<T: LossOracle + ?Sized> LossOracle for &T {
    fn loss(&self, theta: &FlatParams) -> Result<f64> {
        (**self).loss(theta)
    }
    fn loss_grad(&self, theta: &FlatParams) -> Result<FlatParams> {
        (**self).loss_grad(theta)
    }
    fn accuracy(&self, theta: &FlatParams) -> Result<Option<f64>> {
        (**self).accuracy(theta)
    }
    fn sample_grad(&self, theta: &FlatParams, rng: &mut Rng) -> Result<FlatParams> {
        (**self).sample_grad(theta, rng)
    }
    fn steps_per_epoch(&self) -> usize {
        (**self).steps_per_epoch()
    }
}

/// `‖Aθ − b‖²`. With `A = I`, `b = 0` the minimum is the origin; with a wide
/// `A` the minima form an affine subspace.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl QuadraticOracle {
    /// `‖θ‖²` on `dim` coordinates.
    pub fn isotropic(dim: usize) -> Self {
        QuadraticOracle {
            a: DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
        }
    }

    pub fn affine(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::shape(format!("A has {} rows, b has {}", a.nrows(), b.len())));
        }
        Ok(QuadraticOracle { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn residual(&self, theta: &FlatParams) -> Result<DVector<f64>> {
        if theta.len() != self.dim() {
            return Err(Error::shape(format!("{} parameters for a {}-dim quadratic", theta.len(), self.dim())));
        }
        Ok(&self.a * DVector::from_column_slice(theta.values()) - &self.b)
    }
}

impl LossOracle for QuadraticOracle {
    fn loss(&self, theta: &FlatParams) -> Result<f64> {
        Ok(self.residual(theta)?.norm_squared())
    }

    fn loss_grad(&self, theta: &FlatParams) -> Result<FlatParams> {
        let g = self.a.transpose() * self.residual(theta)? * 2.0;
        FlatParams::new(g.as_slice().to_vec(), theta.shape_tag().clone())
    }
}

/// Exact population risk of the two-layer ReLU student.
#[derive(Debug, Clone, Copy)]
pub struct ReluRiskOracle;

impl LossOracle for ReluRiskOracle {
    fn loss(&self, theta: &FlatParams) -> Result<f64> {
        risk_closed_form(&NeuronMatrix::from_flat(theta)?)
    }

    fn loss_grad(&self, theta: &FlatParams) -> Result<FlatParams> {
        let g = risk_closed_form_grad(&NeuronMatrix::from_flat(theta)?)?;
        FlatParams::new(g, theta.shape_tag().clone())
    }
}

/// Worst relative error over a set of finite-difference probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub probes: usize,
    pub max_rel_error: f64,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

const FD_STEP: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-8;

/// Relative error between `g·v` and the central difference
/// `(f(x + hv) − f(x − hv)) / 2h` along a unit direction `v`.
pub fn directional_fd_error(f: impl Fn(&[f64]) -> f64, x: &[f64], g: &[f64], v: &[f64]) -> f64 {
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(v).map(|(a, b)| a + s * b).collect() };
    let fd = (f(&shifted(FD_STEP)) - f(&shifted(-FD_STEP))) / (2.0 * FD_STEP);
    let analytic: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum();
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(FD_FLOOR)
}

pub(crate) fn random_unit(len: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Checks `oracle.loss_grad` against central differences along one random
/// direction at each point.
pub fn check_oracle_gradient(oracle: &dyn LossOracle, points: &[FlatParams], seed: RngSeed) -> Result<GradCheck> {
    let mut rng = seed.rng();
    let mut worst: f64 = 0.0;
    for p in points {
        let g = oracle.loss_grad(p)?;
        let v = random_unit(p.len(), &mut rng);
        let tag = p.shape_tag().clone();
        let f = |x: &[f64]| {
            FlatParams::new(x.to_vec(), tag.clone())
                .and_then(|q| oracle.loss(&q))
                .unwrap_or(f64::NAN)
        };
        let err = directional_fd_error(f, p.values(), g.values(), &v);
        worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
    }
    Ok(GradCheck {
        probes: points.len(),
        max_rel_error: worst,
    })
}
