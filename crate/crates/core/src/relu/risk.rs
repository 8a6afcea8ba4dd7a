//! Population risk of the two-layer ReLU student against an orthonormal
//! teacher, for inputs uniform on the unit sphere.
//!
//! The closed form uses the arc-cosine kernel
//!
//! ```text
//! E_s[σ(u·s) σ(v·s)] = ‖u‖‖v‖ (sin θ + (π − θ) cos θ) / (2π d)
//! ```
//!
//! which follows from the Gaussian version after dividing by `E‖g‖² = d`.
//! [`risk_monte_carlo`] estimates the same expectation directly and is kept
//! as the independent check.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::neuron::NeuronMatrix;
use crate::error::{Error, Result};
use crate::params::pairwise_sum;
use crate::rng::RngSeed;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `sin θ + (π − θ) cos θ` as a function of `cos θ`.
fn angular(cos: f64) -> f64 {
    let c = cos.clamp(-1.0, 1.0);
    (1.0 - c * c).sqrt() + (PI - c.acos()) * c
}

/// `E[σ(u·x) σ(v·x)]` for `x ~ Unif(S^{d−1})`.
pub fn relu_kernel(u: &[f64], v: &[f64]) -> f64 {
    let d = u.len() as f64;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    nu * nv * angular(dot(u, v) / (nu * nv)) / (2.0 * PI * d)
}

/// Gradient of [`relu_kernel`] in its first argument,
/// `(‖v‖ sin θ û + (π − θ) v) / (2π d)`, taken as zero at `u = 0`.
pub fn relu_kernel_grad(u: &[f64], v: &[f64]) -> Vec<f64> {
    let d = u.len() as f64;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return vec![0.0; u.len()];
    }
    let c = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    let theta = c.acos();
    let s = (1.0 - c * c).sqrt();
    u.iter()
        .zip(v)
        .map(|(&ui, &vi)| (nv * s * ui / nu + (PI - theta) * vi) / (2.0 * PI * d))
        .collect()
}

fn check_inputs(w: &NeuronMatrix) -> Result<()> {
    if w.input_dim() < 2 {
        return Err(Error::infeasible("closed-form risk needs d ≥ 2"));
    }
    if !w.data().iter().all(|v| v.is_finite()) {
        return Err(Error::NumericInput("non-finite neuron weights".into()));
    }
    Ok(())
}

/// Exact population risk
/// `Σ_{i,i'} k(w_i, w_i') − 2 Σ_{i,j≤M} k(w_i, e_j) + Σ_{j,j'≤M} k(e_j, e_j')`.
pub fn risk_closed_form(w: &NeuronMatrix) -> Result<f64> {
    check_inputs(w)?;
    let d = w.input_dim() as f64;
    let teachers = w.teachers();
    let rows: Vec<&[f64]> = w.rows().collect();
    let norms: Vec<f64> = rows.iter().map(|r| norm(r)).collect();

    let mut terms = Vec::with_capacity(rows.len() * (rows.len() + teachers) + 1);
    for (i, (ri, &ni)) in rows.iter().zip(&norms).enumerate() {
        if ni == 0.0 {
            continue;
        }
        terms.push(ni * ni / (2.0 * d));
        for (rk, &nk) in rows[i + 1..].iter().zip(&norms[i + 1..]) {
            if nk == 0.0 {
                continue;
            }
            terms.push(2.0 * ni * nk * angular(dot(ri, rk) / (ni * nk)) / (2.0 * PI * d));
        }
        for j in 0..teachers {
            terms.push(-2.0 * ni * angular(ri[j] / ni) / (2.0 * PI * d));
        }
    }
    let m = teachers as f64;
    terms.push((m * PI + m * (m - 1.0)) / (2.0 * PI * d));
    Ok(pairwise_sum(&terms))
}

/// Gradient of [`risk_closed_form`] with respect to every neuron, row-major.
pub fn risk_closed_form_grad(w: &NeuronMatrix) -> Result<Vec<f64>> {
    check_inputs(w)?;
    let d = w.input_dim();
    let teachers = w.teachers();
    let rows: Vec<&[f64]> = w.rows().collect();
    let mut grad = vec![0.0; w.data().len()];
    let mut e = vec![0.0; d];
    for (i, ri) in rows.iter().enumerate() {
        if norm(ri) == 0.0 {
            continue;
        }
        let g = &mut grad[i * d..(i + 1) * d];
        for (gk, rk) in g.iter_mut().zip(ri.iter()) {
            *gk += rk / d as f64;
        }
        for (k, rk) in rows.iter().enumerate() {
            if k == i {
                continue;
            }
            for (gk, dk) in g.iter_mut().zip(relu_kernel_grad(ri, rk)) {
                *gk += 2.0 * dk;
            }
        }
        for j in 0..teachers {
            e.fill(0.0);
            e[j] = 1.0;
            for (gk, dk) in g.iter_mut().zip(relu_kernel_grad(ri, &e)) {
                *gk -= 2.0 * dk;
            }
        }
    }
    Ok(grad)
}

/// Monte Carlo estimate of the risk with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

const MC_CHUNK: usize = 1 << 15;

/// Direct estimator: sphere samples from normalized Gaussians, evaluated in
/// fixed-size chunks with per-chunk derived seeds so the result does not
/// depend on the thread count.
pub fn risk_monte_carlo(w: &NeuronMatrix, n_samples: usize, seed: RngSeed) -> McEstimate {
    assert!(n_samples >= 1, "need at least one sample");
    let d = w.input_dim();
    let teachers = w.teachers();
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.derive(c as u64).rng();
            let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let mut x = vec![0.0; d];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for xi in x.iter_mut() {
                    *xi = StandardNormal.sample(&mut rng);
                }
                let nx = norm(&x);
                x.iter_mut().for_each(|xi| *xi /= nx);
                let student: f64 = w.rows().map(|r| dot(r, &x).max(0.0)).sum();
                let teacher: f64 = x[..teachers].iter().map(|v| v.max(0.0)).sum();
                let diff = student - teacher;
                let sq = diff * diff;
                s1 += sq;
                s2 += sq * sq;
            }
            (s1, s2)
        })
        .collect();
    let n = n_samples as f64;
    let s1: f64 = partial.iter().map(|p| p.0).sum();
    let s2: f64 = partial.iter().map(|p| p.1).sum();
    let mean = s1 / n;
    let var = if n_samples > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    McEstimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}
