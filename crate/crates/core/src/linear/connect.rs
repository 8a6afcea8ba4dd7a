//! Two- and three-piece connections between deep linear minima.

use nalgebra::DMatrix;

use super::linalg::{condition_number, pinv, rank, row_space_complement, vstack};
use super::star::{star_center_linear, validate_star, LINEAR_TOL};
use super::stack::{gaussian_matrix, is_linear_minimum, max_path_risk, LinearStack, TargetSpec};
use crate::error::{Error, Result};
use crate::params::PiecewisePath;
use crate::rng::RngSeed;

fn check_pair(theta1: &LinearStack, theta2: &LinearStack, spec: &TargetSpec) -> Result<()> {
    if theta1.widths() != theta2.widths() {
        return Err(Error::shape(format!("widths {:?} vs {:?}", theta1.widths(), theta2.widths())));
    }
    let scale = spec.q().abs().max().max(1.0);
    for (i, t) in [theta1, theta2].into_iter().enumerate() {
        if !is_linear_minimum(t, spec, LINEAR_TOL * scale) {
            return Err(Error::NotOnManifold(format!("input {} does not multiply to Q", i + 1)));
        }
    }
    let depth = theta1.depth();
    let m = theta1.widths()[1];
    if depth < 2 || m <= 2 * depth - 1 {
        return Err(Error::infeasible(format!(
            "need L ≥ 2 and m > 2L − 1, got L = {depth}, m = {m}"
        )));
    }
    Ok(())
}

/// Center `θ*` with `θ1 ↔ θ*` and `θ* ↔ θ2`, for `m > 2L − 1`.
///
/// In the generic case the top row of the center is chosen independent of
/// both inputs' top rows and the remaining factors follow from linear
/// solves. At depth 2 with proportional top rows `a2 = k·a1`, the center's
/// top row must solve `a*(k b1 − b2) = (2k − 2) Q`; when that system has no
/// solution (as for `θ2 = −θ1`) no center exists and `Degenerate` is
/// returned.
pub fn two_pl_center_linear(theta1: &LinearStack, theta2: &LinearStack, spec: &TargetSpec) -> Result<LinearStack> {
    check_pair(theta1, theta2, spec)?;
    if theta1 == theta2 {
        return Ok(theta1.clone());
    }
    let tops = vstack(&theta1.factors()[0], &theta2.factors()[0]);
    if theta1.depth() > 2 || rank(&tops) == 2 {
        return star_center_linear(&[theta1.clone(), theta2.clone()], spec);
    }
    proportional_center(theta1, theta2, spec)
}

fn proportional_center(theta1: &LinearStack, theta2: &LinearStack, spec: &TargetSpec) -> Result<LinearStack> {
    let (a1, b1) = (&theta1.factors()[0], &theta1.factors()[1]);
    let (a2, b2) = (&theta2.factors()[0], &theta2.factors()[1]);
    let (reference, other, b_ref, b_other, swapped) = if a1.norm() >= a2.norm() {
        (a1, a2, b1, b2, false)
    } else {
        (a2, a1, b2, b1, true)
    };
    if reference.norm() == 0.0 {
        return Err(Error::degenerate("both top rows vanish"));
    }
    let k = other.dot(reference) / reference.norm_squared();
    let n = b_ref * k - b_other;
    let rhs = spec.q() * (2.0 * k - 2.0);
    let scale = spec.q().abs().max().max(1.0);

    let particular = &rhs * pinv(&n);
    if (&particular * &n - &rhs).abs().max() > 1e-9 * scale {
        return Err(Error::degenerate(format!(
            "proportional top rows (k = {k:.6}) admit no common center"
        )));
    }
    if n.abs().max() <= 1e-12 * scale && (k - 1.0).abs() <= 1e-12 {
        return Ok(theta1.clone());
    }

    // free directions z with z·N = 0; keep the one that best separates a*
    // from the reference row
    let free = row_space_complement(&n.transpose(), reference.ncols());
    let unit = reference.norm();
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for z in free.row_iter() {
        let z = DMatrix::from_iterator(1, z.len(), z.iter().copied());
        for sign in [1.0, -1.0] {
            let cand = &particular + &z * (sign * unit);
            let cond = condition_number(&vstack(reference, &cand));
            if best.as_ref().is_none_or(|(c, _)| cond < *c) {
                best = Some((cond, cand));
            }
        }
    }
    let (_, top) = best.ok_or_else(|| Error::degenerate("no free direction for the center's top row"))?;

    let g = vstack(reference, &top);
    let h = vstack(&(spec.q() * 2.0 - &top * b_ref), spec.q());
    let bottom = pinv(&g) * h;
    let center = LinearStack::new(vec![top, bottom])?;
    let feet = if swapped {
        [theta2.clone(), theta1.clone()]
    } else {
        [theta1.clone(), theta2.clone()]
    };
    validate_star(&center, &feet, spec)?;
    Ok(center)
}

const THREE_PL_ATTEMPTS: usize = 100;

/// Path `θ1 → θ3 → θ* → θ2` for any two minima with `m > 2L − 1`.
///
/// `θ3` keeps every factor of `θ1` except the top row, which is redrawn as
/// `Q E⁺ + z (I − E E⁺)` with `E = A_{L−1} ⋯ A_1` and random `z`. That keeps
/// `θ1 ↔ θ3` and puts `θ3` in general position relative to `θ2`, so a 2-piece
/// center exists between them. Draws that still fail are rejected.
pub fn three_pl_path(theta1: &LinearStack, theta2: &LinearStack, spec: &TargetSpec, seed: RngSeed) -> Result<PiecewisePath> {
    check_pair(theta1, theta2, spec)?;
    let mut rng = seed.rng();
    let below = &theta1.factors()[1..];
    let mut e = DMatrix::identity(below[0].nrows(), below[0].nrows());
    for f in below {
        e = e * f;
    }
    let particular = spec.q() * pinv(&e);
    let free = row_space_complement(&e.transpose(), e.nrows());
    let unit = theta1.factors()[0].norm().max(1.0) / (free.nrows().max(1) as f64).sqrt();

    for _ in 0..THREE_PL_ATTEMPTS {
        let z = gaussian_matrix(1, free.nrows(), &mut rng) * &free * unit;
        let mut factors = theta1.factors().to_vec();
        factors[0] = &particular + z;
        let theta3 = LinearStack::new(factors)?;
        let Ok(center) = two_pl_center_linear(&theta3, theta2, spec) else {
            continue;
        };
        let path = PiecewisePath::new(vec![theta1.to_flat(), theta3.to_flat(), center.to_flat(), theta2.to_flat()])?;
        if max_path_risk(&path, spec, 101)? <= 1e-8 {
            return Ok(path);
        }
    }
    Err(Error::degenerate(format!("no admissible θ3 in {THREE_PL_ATTEMPTS} draws")))
}
