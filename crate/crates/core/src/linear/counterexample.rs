//! The depth-2 pair `θ1 = (e_1, e_1ᵀ)`, `θ2 = −θ1` (`m = 4`, `d = 1`,
//! `y = x`), which admits no 2-piece path on the minima manifold.
//!
//! For a candidate center `θ = (a, b)` with `a·b = 1` the path-averaged risk
//!
//! ```text
//! J(θ) = ∫₀¹ R(tθ1 + (1−t)θ) dt + ∫₀¹ R(tθ2 + (1−t)θ) dt
//! ```
//!
//! equals `(2s² + 8)/30` with `s = a_1 + b_1`, so its infimum is `4/15`.
//! [`counterexample_search`] minimizes `J` numerically as an independent
//! check of that value.

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::stack::{linear_risk, LinearStack, TargetSpec};
use crate::error::Result;
use crate::optim::AdamState;
use crate::params::interpolate;
use crate::rng::RngSeed;

const DIM: usize = 4;
type Vec4 = [f64; DIM];

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitQuadrature {
    nodes: Vec<(f64, f64)>,
}

impl UnitQuadrature {
    pub fn gauss_legendre(points: usize) -> Self {
        let n = std::num::NonZeroUsize::new(points.max(2)).expect("at least two points");
        let rule = GaussLegendre::new(n);
        let nodes = rule.iter().map(|&(x, w)| ((x + 1.0) / 2.0, w / 2.0)).collect();
        UnitQuadrature { nodes }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(t, w)| w * f(t)).sum()
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }
}

/// The two feet and the target `Q = 1`, `E[x²] = 1`.
pub fn lemma_instance() -> (LinearStack, LinearStack, TargetSpec) {
    let a = DMatrix::from_row_slice(1, DIM, &[1.0, 0.0, 0.0, 0.0]);
    let b = a.transpose();
    let t1 = LinearStack::new(vec![a.clone(), b.clone()]).expect("valid shapes");
    let t2 = LinearStack::new(vec![-a, -b]).expect("valid shapes");
    let spec = TargetSpec::isotropic(DMatrix::from_element(1, 1, 1.0)).expect("valid target");
    (t1, t2, spec)
}

/// `J(θ)` for an arbitrary depth-2 stack, integrating the exact risk along
/// both segments.
pub fn path_objective(center: &LinearStack, quad: &UnitQuadrature) -> Result<f64> {
    let (t1, t2, spec) = lemma_instance();
    let c = center.to_flat();
    let mut total = 0.0;
    for foot in [t1.to_flat(), t2.to_flat()] {
        let mut err = None;
        total += quad.integrate(|t| {
            let p = interpolate(&foot, &c, t).and_then(|p| LinearStack::from_flat(&p));
            match p.and_then(|s| linear_risk(&s, &spec)) {
                Ok(r) => r,
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(total)
}

fn dot(x: &Vec4, y: &Vec4) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// The manifold chart `(a, u) ↦ (a, b)` with
/// `b = a/‖a‖² + u − a (a·u)/‖a‖²`, so that `a·b = 1` for every `a ≠ 0`.
pub fn chart(a: &Vec4, u: &Vec4) -> Vec4 {
    let n = dot(a, a);
    let au = dot(a, u);
    std::array::from_fn(|i| a[i] / n + u[i] - a[i] * au / n)
}

fn center_stack(a: &Vec4, b: &Vec4) -> LinearStack {
    LinearStack::new(vec![DMatrix::from_row_slice(1, DIM, a), DMatrix::from_row_slice(DIM, 1, b)])
        .expect("valid shapes")
}

/// `J` in chart coordinates and its gradient with respect to `(a, u)`.
pub fn chart_objective(a: &Vec4, u: &Vec4, quad: &UnitQuadrature) -> (f64, Vec4, Vec4) {
    let b = chart(a, u);
    let mut value = 0.0;
    let mut ga = [0.0; DIM];
    let mut gb = [0.0; DIM];
    for sign in [1.0, -1.0] {
        // foot (sign·e_1, sign·e_1ᵀ)
        for &(t, w) in quad.nodes() {
            let s = 1.0 - t;
            let alpha: Vec4 = std::array::from_fn(|i| s * a[i] + if i == 0 { t * sign } else { 0.0 });
            let beta: Vec4 = std::array::from_fn(|i| s * b[i] + if i == 0 { t * sign } else { 0.0 });
            let g = dot(&alpha, &beta) - 1.0;
            value += w * g * g;
            for i in 0..DIM {
                ga[i] += w * 2.0 * g * s * beta[i];
                gb[i] += w * 2.0 * g * s * alpha[i];
            }
        }
    }
    // chain rule through b(a, u)
    let n = dot(a, a);
    let au = dot(a, u);
    let ag = dot(a, &gb);
    let grad_a: Vec4 = std::array::from_fn(|j| {
        ga[j] + gb[j] / n - 2.0 * a[j] * ag / (n * n) - gb[j] * au / n - u[j] * ag / n
            + 2.0 * a[j] * au * ag / (n * n)
    });
    let grad_u: Vec4 = std::array::from_fn(|j| gb[j] - a[j] * ag / n);
    (value, grad_a, grad_u)
}

/// Outcome of the multi-start minimization of `J`.
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub best_value: f64,
    pub best_center: LinearStack,
    /// `|J_64 − J_256|` at the best center.
    pub quadrature_error: f64,
    pub starts: usize,
}

const STEPS: usize = 3000;
const LEARNING_RATE: f64 = 0.02;

fn descend(seed: RngSeed, quad: &UnitQuadrature) -> (f64, Vec4, Vec4) {
    let mut rng = seed.rng();
    let mut draw = || -> Vec4 { std::array::from_fn(|_| StandardNormal.sample(&mut rng)) };
    let mut a = draw();
    let u = draw();
    if dot(&a, &a) < 1e-6 {
        a[0] += 1.0;
    }
    let mut adam = AdamState::new(2 * DIM);
    let mut x: Vec<f64> = a.iter().chain(u.iter()).copied().collect();
    let mut best = (f64::INFINITY, a, u);
    for _ in 0..STEPS {
        let a: Vec4 = std::array::from_fn(|i| x[i]);
        let u: Vec4 = std::array::from_fn(|i| x[DIM + i]);
        let (value, ga, gu) = chart_objective(&a, &u, quad);
        if !value.is_finite() {
            break;
        }
        if value < best.0 {
            best = (value, a, u);
        }
        let g: Vec<f64> = ga.iter().chain(gu.iter()).copied().collect();
        adam.step(&mut x, &g, LEARNING_RATE);
    }
    best
}

/// Minimizes `J` over the manifold from `n_starts` random initializations
/// (Adam in the chart, 64-point Gauss–Legendre in `t`).
pub fn counterexample_search(n_starts: usize, seed: RngSeed) -> Result<CounterexampleReport> {
    let quad = UnitQuadrature::gauss_legendre(64);
    let results: Vec<(f64, Vec4, Vec4)> = (0..n_starts.max(1))
        .into_par_iter()
        .map(|s| descend(seed.derive(s as u64), &quad))
        .collect();
    let (best_value, a, u) = results
        .into_iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .expect("at least one start");
    let best_center = center_stack(&a, &chart(&a, &u));
    let fine = path_objective(&best_center, &UnitQuadrature::gauss_legendre(256))?;
    let coarse = path_objective(&best_center, &quad)?;
    Ok(CounterexampleReport {
        best_value,
        best_center,
        quadrature_error: (fine - coarse).abs(),
        starts: n_starts.max(1),
    })
}

/// Best value of `J` found by [`counterexample_search`].
pub fn counterexample_lower_bound(n_starts: usize, seed: RngSeed) -> Result<f64> {
    Ok(counterexample_search(n_starts, seed)?.best_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn quadrature_is_exact_on_polynomials() {
        let q = UnitQuadrature::gauss_legendre(64);
        assert!((q.integrate(|t| t * t * (1.0 - t) * (1.0 - t)) - 1.0 / 30.0).abs() < 1e-15);
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn objective_at_first_foot() {
        let (t1, t2, spec) = lemma_instance();
        let q = UnitQuadrature::gauss_legendre(64);
        let j = path_objective(&t1, &q).unwrap();
        // first integral vanishes; the second runs along the segment θ2 → θ1
        let flat = (t2.to_flat(), t1.to_flat());
        let second = q.integrate(|t| {
            let p = interpolate(&flat.0, &flat.1, t).unwrap();
            linear_risk(&LinearStack::from_flat(&p).unwrap(), &spec).unwrap()
        });
        assert!((j - second).abs() < 1e-14);
        // s = a_1 + b_1 = 2 gives (2·4 + 8)/30
        assert!((j - 16.0 / 30.0).abs() < 1e-13);
    }

    #[test]
    fn chart_stays_on_manifold_and_matches_closed_form() {
        let mut rng = RngSeed(1).rng();
        let q = UnitQuadrature::gauss_legendre(64);
        for _ in 0..20 {
            let a: Vec4 = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let u: Vec4 = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let b = chart(&a, &u);
            assert!((dot(&a, &b) - 1.0).abs() < 1e-12);
            let s = a[0] + b[0];
            let (v, _, _) = chart_objective(&a, &u, &q);
            assert!((v - (2.0 * s * s + 8.0) / 30.0).abs() < 1e-12);
            let generic = path_objective(&center_stack(&a, &b), &q).unwrap();
            assert!((v - generic).abs() < 1e-12);
        }
    }

    #[test]
    fn chart_gradient_matches_central_differences() {
        let mut rng = RngSeed(2).rng();
        let q = UnitQuadrature::gauss_legendre(64);
        for _ in 0..10 {
            let a: Vec4 = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let u: Vec4 = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let (_, ga, gu) = chart_objective(&a, &u, &q);
            let h = 1e-6;
            for k in 0..2 * DIM {
                let bump = |delta: f64| {
                    let (mut a2, mut u2) = (a, u);
                    if k < DIM {
                        a2[k] += delta;
                    } else {
                        u2[k - DIM] += delta;
                    }
                    chart_objective(&a2, &u2, &q).0
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let g = if k < DIM { ga[k] } else { gu[k - DIM] };
                assert!((fd - g).abs() <= 1e-4 * fd.abs().max(g.abs()).max(1e-2), "{fd} vs {g}");
            }
        }
    }

    #[test]
    fn search_respects_the_bound() {
        let report = counterexample_search(16, RngSeed(3)).unwrap();
        assert!(report.best_value >= 4.0 / 15.0 - 1e-12);
        assert!(report.best_value <= 4.0 / 15.0 + 1e-3);
        assert!(report.quadrature_error <= 1e-10);
    }
}
