//! Star-shaped centers for deep linear networks.
//!
//! Interpolating every factor between a foot `θ_i` and the center `θ*`
//! expands into Bernstein form
//!
//! ```text
//! Π_q (t A_q^(i) + (1−t) A_q*) = Σ_k t^k (1−t)^(L−k) σ_{i,k,L}
//! ```
//!
//! so the whole segment stays on the manifold once `σ_{i,k,L} = C(L,k)·Q` for
//! every `k`. The center is built one factor at a time from the top, keeping
//! the family of partial sums linearly independent so the last factor can
//! be solved for exactly.

use nalgebra::DMatrix;

use super::linalg::{pinv, rank, require_independent_rows, row_space_complement, vstack};
use super::stack::{is_linear_minimum, max_path_risk, LinearStack, TargetSpec};
use crate::error::{Error, Result};
use crate::params::PiecewisePath;

/// Membership tolerance for linear minima given to or returned by the
/// constructions.
pub const LINEAR_TOL: f64 = 1e-8;

/// `σ[i][k][q]`: the sum of the `C(q, k)` products of the top `q` factors
/// taking exactly `k` of them from foot `i` and the rest from the center.
#[derive(Debug, Clone)]
pub struct MixedProductTable {
    // sigma[i][q][k]
    sigma: Vec<Vec<Vec<DMatrix<f64>>>>,
}

impl MixedProductTable {
    pub fn new(center: &LinearStack, feet: &[LinearStack]) -> Result<Self> {
        check_same_shape(center, feet)?;
        let sigma = feet
            .iter()
            .map(|foot| {
                let mut levels = vec![vec![DMatrix::identity(1, 1)]];
                for q in 1..=center.depth() {
                    let (bc, bi) = (&center.factors()[q - 1], &foot.factors()[q - 1]);
                    let prev = &levels[q - 1];
                    let level: Vec<DMatrix<f64>> = (0..=q)
                        .map(|k| {
                            let mut s = DMatrix::zeros(1, bc.ncols());
                            if k < q {
                                s += &prev[k] * bc;
                            }
                            if k > 0 {
                                s += &prev[k - 1] * bi;
                            }
                            s
                        })
                        .collect();
                    levels.push(level);
                }
                levels
            })
            .collect();
        Ok(MixedProductTable { sigma })
    }

    /// `σ_{i,k,q}`, a row vector of the width below the top `q` factors.
    pub fn get(&self, i: usize, k: usize, q: usize) -> &DMatrix<f64> {
        &self.sigma[i][q][k]
    }

    pub fn num_feet(&self) -> usize {
        self.sigma.len()
    }

    pub fn depth(&self) -> usize {
        self.sigma.first().map_or(0, |s| s.len() - 1)
    }

    /// Largest entry of `σ_{i,k,L} − C(L,k)·Q` over all feet and orders.
    pub fn max_order_violation(&self, q_target: &DMatrix<f64>) -> f64 {
        let depth = self.depth();
        let mut worst: f64 = 0.0;
        for i in 0..self.num_feet() {
            for k in 0..=depth {
                let dev = self.get(i, k, depth) - q_target * binomial(depth, k);
                worst = worst.max(dev.abs().max());
            }
        }
        worst
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn check_same_shape(reference: &LinearStack, others: &[LinearStack]) -> Result<()> {
    let widths = reference.widths();
    match others.iter().find(|o| o.widths() != widths) {
        Some(o) => Err(Error::shape(format!("widths {:?} vs {:?}", o.widths(), widths))),
        None => Ok(()),
    }
}

/// Finds `K` (`r1 × r2`) making `{C_i K + E_i} ∪ {D_j}` linearly independent.
///
/// `C` is `p × r1` with independent rows, `D` is `q × r2` with independent
/// rows and `E` is `p × r2`. Rows `F_i` completing `D` to an independent
/// family are taken from the orthogonal complement of its row space, and
/// `C K = F − E` is solved column by column, which needs `r1 ≥ p` and
/// `r2 > p + q`.
pub fn solve_independence_lemma(c: &DMatrix<f64>, d: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, r1) = c.shape();
    let (q, r2) = d.shape();
    if e.shape() != (p, r2) {
        return Err(Error::shape(format!("E is {:?}, expected ({p}, {r2})", e.shape())));
    }
    if p == 0 {
        return Ok(DMatrix::zeros(r1, r2));
    }
    if r2 <= p + q {
        return Err(Error::infeasible(format!("need r2 > p + q, got r2 = {r2}, p = {p}, q = {q}")));
    }
    if r1 < p {
        return Err(Error::infeasible(format!("need r1 ≥ p, got r1 = {r1}, p = {p}")));
    }
    require_independent_rows(c, "C")?;
    require_independent_rows(d, "D")?;

    let norms: Vec<f64> = d.row_iter().chain(e.row_iter()).map(|r| r.norm()).filter(|&n| n > 0.0).collect();
    let scale = if norms.is_empty() {
        1.0
    } else {
        norms.iter().sum::<f64>() / norms.len() as f64
    };
    let f = row_space_complement(d, r2).rows(0, p) * scale;
    Ok(pinv(c) * (f - e))
}

/// Rows `{C_i K + E_i} ∪ {D_j}` for checking a lemma solution.
pub fn independence_family(c: &DMatrix<f64>, d: &DMatrix<f64>, e: &DMatrix<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    vstack(&(c * k + e), d)
}

fn check_feet(feet: &[LinearStack], spec: &TargetSpec) -> Result<()> {
    let first = feet.first().ok_or_else(|| Error::degenerate("no feet given"))?;
    check_same_shape(first, feet)?;
    if first.depth() < 2 {
        return Err(Error::infeasible("depth L ≥ 2 required"));
    }
    let widths = first.widths();
    let hidden = &widths[1..widths.len() - 1];
    if hidden.iter().any(|&w| w != hidden[0]) {
        return Err(Error::shape(format!("hidden widths {hidden:?} are not uniform")));
    }
    let scale = spec.q().abs().max().max(1.0);
    for (i, f) in feet.iter().enumerate() {
        if !is_linear_minimum(f, spec, LINEAR_TOL * scale) {
            return Err(Error::NotOnManifold(format!("foot {i} does not multiply to Q")));
        }
    }
    Ok(())
}

/// Center linearly connected to each of `r` minima, for `m > 1 + r(L − 1)`.
///
/// Fails with `Degenerate` when the feet are not in general position (a
/// family that has to be independent has condition number above `1e12`) or
/// when the finished center does not pass the 101-point risk check on every
/// spoke.
pub fn star_center_linear(feet: &[LinearStack], spec: &TargetSpec) -> Result<LinearStack> {
    check_feet(feet, spec)?;
    let r = feet.len();
    let depth = feet[0].depth();
    let m = feet[0].widths()[1];
    if m <= 1 + r * (depth - 1) {
        return Err(Error::infeasible(format!(
            "star center needs m > 1 + r(L − 1) = {}, got m = {m}",
            1 + r * (depth - 1)
        )));
    }

    // sigma[i][k] holds σ_{i,k,q−1} while choosing factor q
    let mut sigma: Vec<Vec<DMatrix<f64>>> = vec![vec![DMatrix::identity(1, 1)]; r];
    let mut center: Vec<DMatrix<f64>> = Vec::with_capacity(depth);
    for q in 1..depth {
        let r1 = sigma[0][0].ncols();
        let rows = 1 + r * (q - 1);
        let mut c = DMatrix::zeros(rows, r1);
        let mut e = DMatrix::zeros(rows, m);
        c.row_mut(0).copy_from(&sigma[0][0]);
        let mut row = 1;
        for (i, s) in sigma.iter().enumerate() {
            let bi = &feet[i].factors()[q - 1];
            for k in 1..q {
                c.row_mut(row).copy_from(&s[k]);
                e.row_mut(row).copy_from(&(&s[k - 1] * bi));
                row += 1;
            }
        }
        let mut dm = DMatrix::zeros(r, m);
        for (i, s) in sigma.iter().enumerate() {
            dm.row_mut(i).copy_from(&(&s[q - 1] * &feet[i].factors()[q - 1]));
        }
        let k_mat = solve_independence_lemma(&c, &dm, &e)?;
        for (i, s) in sigma.iter_mut().enumerate() {
            let bi = &feet[i].factors()[q - 1];
            let next: Vec<DMatrix<f64>> = (0..=q)
                .map(|k| {
                    let mut v = DMatrix::zeros(1, m);
                    if k < q {
                        v += &s[k] * &k_mat;
                    }
                    if k > 0 {
                        v += &s[k - 1] * bi;
                    }
                    v
                })
                .collect();
            *s = next;
        }
        center.push(k_mat);
    }

    // last factor: σ_{i,k,L} = C(L,k)·Q for k < L
    let d = spec.input_dim();
    let rows = 1 + r * (depth - 1);
    let mut g = DMatrix::zeros(rows, m);
    let mut h = DMatrix::zeros(rows, d);
    g.row_mut(0).copy_from(&sigma[0][0]);
    h.row_mut(0).copy_from(spec.q());
    let mut row = 1;
    for (i, s) in sigma.iter().enumerate() {
        let bi = &feet[i].factors()[depth - 1];
        for k in 1..depth {
            g.row_mut(row).copy_from(&s[k]);
            h.row_mut(row).copy_from(&(spec.q() * binomial(depth, k) - &s[k - 1] * bi));
            row += 1;
        }
    }
    require_independent_rows(&g, "final coefficient family")?;
    center.push(refined_solve(&g, &h));
    let center = LinearStack::new(center)?;
    validate_star(&center, feet, spec)?;
    Ok(center)
}

const REFINEMENT_STEPS: usize = 3;

/// Least-norm solution of `G X = H` with a few rounds of iterative
/// refinement on the residual.
fn refined_solve(g: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let g_pinv = pinv(g);
    let mut x = &g_pinv * h;
    for _ in 0..REFINEMENT_STEPS {
        let residual = h - g * &x;
        x += &g_pinv * residual;
    }
    x
}

/// Checks membership, the order conditions to `1e−7` and every spoke's
/// 101-point risk grid to `1e−8`.
pub(crate) fn validate_star(center: &LinearStack, feet: &[LinearStack], spec: &TargetSpec) -> Result<()> {
    let scale = spec.q().abs().max().max(1.0);
    if !is_linear_minimum(center, spec, LINEAR_TOL * scale) {
        return Err(Error::degenerate("center does not multiply to Q"));
    }
    let table = MixedProductTable::new(center, feet)?;
    let violation = table.max_order_violation(spec.q());
    if violation > 1e-7 * scale {
        return Err(Error::degenerate(format!("order conditions violated by {violation:.3e}")));
    }
    for foot in feet {
        let spoke = PiecewisePath::linear(foot.to_flat(), center.to_flat())?;
        let risk = max_path_risk(&spoke, spec, 101)?;
        if risk > 1e-8 {
            return Err(Error::degenerate(format!("spoke risk {risk:.3e} on the grid")));
        }
    }
    Ok(())
}

/// Stacked family used by [`star_center_linear`] for the last factor; exposed
/// for rank checks.
pub fn final_family_rank(center: &LinearStack, feet: &[LinearStack]) -> Result<usize> {
    let table = MixedProductTable::new(center, feet)?;
    let depth = table.depth();
    let mut rows = vec![table.get(0, 0, depth - 1).clone()];
    for i in 0..feet.len() {
        for k in 1..depth {
            rows.push(table.get(i, k, depth - 1).clone());
        }
    }
    let stacked = rows.iter().skip(1).fold(rows[0].clone(), |acc, r| vstack(&acc, r));
    Ok(rank(&stacked))
}
