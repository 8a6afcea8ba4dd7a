//! Linear connectivity between ReLU minima and the constructive paths built
//! from it: merging, shared centers, 4-piece paths and 2-piece star spokes.
//!
//! Two minima are linearly connected exactly when, row by row, one of them is
//! a zero neuron or both point along the same teacher direction. A center for
//! a family of minima therefore amounts to giving each teacher direction its
//! own row that every member leaves compatible, which is a bipartite matching
//! between teacher directions and rows.

use super::neuron::{neuron_types, require_minimum, NeuronMatrix, NeuronType, MANIFOLD_TOL};
use crate::error::{Error, Result};
use crate::params::PiecewisePath;

fn check_dims(ws: &[&NeuronMatrix]) -> Result<()> {
    let first = ws
        .first()
        .ok_or_else(|| Error::degenerate("empty family of minima"))?;
    if let Some(bad) = ws.iter().find(|w| !w.same_dims(first)) {
        return Err(Error::shape(format!(
            "(M, m, d) = ({}, {}, {}) vs ({}, {}, {})",
            bad.teachers(),
            bad.width(),
            bad.input_dim(),
            first.teachers(),
            first.width(),
            first.input_dim()
        )));
    }
    Ok(())
}

/// Lemma-style row test: `W1 ↔ W2` iff every row has a zero on one side or
/// the same teacher direction on both.
pub fn linearly_connected(w1: &NeuronMatrix, w2: &NeuronMatrix, tol: f64) -> Result<bool> {
    check_dims(&[w1, w2])?;
    let t1 = require_minimum(w1, tol)?;
    let t2 = require_minimum(w2, tol)?;
    Ok(types_connected(&t1, &t2))
}

pub(crate) fn types_connected(t1: &[NeuronType], t2: &[NeuronType]) -> bool {
    t1.iter().zip(t2).all(|(a, b)| match (a.coord(), b.coord()) {
        (None, _) | (_, None) => true,
        (Some(x), Some(y)) => x == y,
    })
}

/// Gives every teacher direction a distinct row.
///
/// `admits(i, j)` says row `i` may host direction `j`; rows with
/// `prefers(i, j)` are tried first, each group in index order.
pub(crate) fn assign_rows(
    m: usize,
    teachers: usize,
    admits: impl Fn(usize, usize) -> bool,
    prefers: impl Fn(usize, usize) -> bool,
) -> Option<Vec<usize>> {
    let candidates: Vec<Vec<usize>> = (0..teachers)
        .map(|j| {
            let (mut first, rest): (Vec<usize>, Vec<usize>) =
                (0..m).filter(|&i| admits(i, j)).partition(|&i| prefers(i, j));
            first.extend(rest);
            first
        })
        .collect();

    fn augment(
        j: usize,
        candidates: &[Vec<usize>],
        owner: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for &i in &candidates[j] {
            if visited[i] {
                continue;
            }
            visited[i] = true;
            if owner[i].is_none_or(|k| augment(k, candidates, owner, visited)) {
                owner[i] = Some(j);
                return true;
            }
        }
        false
    }

    let mut owner: Vec<Option<usize>> = vec![None; m];
    for j in 0..teachers {
        let mut visited = vec![false; m];
        if !augment(j, &candidates, &mut owner, &mut visited) {
            return None;
        }
    }
    let mut rows = vec![0; teachers];
    for (i, o) in owner.iter().enumerate() {
        if let Some(j) = *o {
            rows[j] = i;
        }
    }
    Some(rows)
}

/// Minimum with `e_j` at `rows[j]` and zeros elsewhere.
pub(crate) fn unit_minimum(like: &NeuronMatrix, rows: &[usize]) -> NeuronMatrix {
    let mut c = NeuronMatrix::zeros(like.teachers(), like.width(), like.input_dim())
        .expect("dimensions of an existing matrix");
    for (j, &i) in rows.iter().enumerate() {
        c.set(i, j, 1.0);
    }
    c
}

fn shared_center_from_types(like: &NeuronMatrix, types: &[Vec<NeuronType>]) -> Option<NeuronMatrix> {
    let rows = assign_rows(
        like.width(),
        like.teachers(),
        |i, j| types.iter().all(|t| t[i].admits(j)),
        |i, j| types.iter().any(|t| t[i].coord() == Some(j)),
    )?;
    Some(unit_minimum(like, &rows))
}

/// Searches for one minimum linearly connected to every member of `minima`.
///
/// The search is exact: `None` means no such center exists. Rows already
/// carrying direction `j` in some input are preferred, so a family of
/// identical minima gets back their merged form.
pub fn find_shared_zero_center(minima: &[NeuronMatrix]) -> Result<Option<NeuronMatrix>> {
    let refs: Vec<&NeuronMatrix> = minima.iter().collect();
    check_dims(&refs)?;
    let types = minima
        .iter()
        .map(|w| require_minimum(w, MANIFOLD_TOL))
        .collect::<Result<Vec<_>>>()?;
    Ok(shared_center_from_types(&minima[0], &types))
}

/// Direct test of 2-piece connectivity: does a common center exist?
pub fn is_two_pl_connectable(w1: &NeuronMatrix, w2: &NeuronMatrix) -> Result<bool> {
    Ok(find_shared_zero_center(&[w1.clone(), w2.clone()])?.is_some())
}

/// Collapses each teacher group onto its lowest-index row, which becomes `e_j`.
pub fn merge_minimum(w: &NeuronMatrix) -> Result<NeuronMatrix> {
    let types = require_minimum(w, MANIFOLD_TOL)?;
    Ok(merge_types(w, &types))
}

fn merge_types(w: &NeuronMatrix, types: &[NeuronType]) -> NeuronMatrix {
    let rows: Vec<usize> = (0..w.teachers())
        .map(|j| {
            types
                .iter()
                .position(|t| t.coord() == Some(j))
                .expect("minimum covers every direction")
        })
        .collect();
    unit_minimum(w, &rows)
}

/// `1 − M((M²−1)/M²)^{m−2M}`, floored at zero.
pub fn two_pl_bound(teachers: usize, m: usize) -> f64 {
    star_bound(teachers, m, 2)
}

/// `1 − M((M^k−1)/M^k)^{m−kM}`, floored at zero.
pub fn star_bound(teachers: usize, m: usize, k: usize) -> f64 {
    if teachers == 1 {
        return 1.0;
    }
    let mk = (teachers as f64).powi(k as i32);
    let exponent = m as i64 - (k * teachers) as i64;
    let miss = ((mk - 1.0) / mk).powi(exponent as i32);
    (1.0 - teachers as f64 * miss).max(0.0)
}

/// Visits every placement of `e_1, .., e_M` on distinct rows that is linearly
/// connected to a minimum with row types `types`, until `visit` returns
/// `Some`. Rows of type `j` are offered before zero rows, so the first
/// placement visited is the lowest-index merge.
fn search_placements<T>(
    types: &[NeuronType],
    teachers: usize,
    mut visit: impl FnMut(&[usize]) -> Option<T>,
) -> Option<T> {
    let candidates: Vec<Vec<usize>> = (0..teachers)
        .map(|j| {
            let own = (0..types.len()).filter(|&i| types[i].coord() == Some(j));
            let zero = (0..types.len()).filter(|&i| types[i] == NeuronType::Zero);
            own.chain(zero).collect()
        })
        .collect();

    fn go<T>(
        j: usize,
        candidates: &[Vec<usize>],
        used: &mut Vec<bool>,
        rows: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> Option<T>,
    ) -> Option<T> {
        if j == candidates.len() {
            return visit(rows);
        }
        for &i in &candidates[j] {
            if used[i] {
                continue;
            }
            used[i] = true;
            rows.push(i);
            let found = go(j + 1, candidates, used, rows, visit);
            rows.pop();
            used[i] = false;
            if found.is_some() {
                return found;
            }
        }
        None
    }

    let mut used = vec![false; types.len()];
    let mut rows = Vec::with_capacity(teachers);
    go(0, &candidates, &mut used, &mut rows, &mut visit)
}

/// A path `W1 → merged(W1) → mid → merged'(W2) → W2` with every segment
/// linearly connected.
///
/// `merged'(W2)` places each `e_j` on a row where `W2` is of type `j` or
/// zero; placements are searched, starting from the plain merge, until the
/// two merged minima share a center. When `m ≥ 2M` the plain merges already
/// work. At `m = 2M − 1` a unit neuron sometimes has to move into a zero row
/// of `W2`. Should no placement for `W2` work, placements for `W1` are
/// searched too.
pub fn four_pl_path(w1: &NeuronMatrix, w2: &NeuronMatrix) -> Result<PiecewisePath> {
    check_dims(&[w1, w2])?;
    let (teachers, m) = (w1.teachers(), w1.width());
    if m + 1 < 2 * teachers {
        return Err(Error::infeasible(format!(
            "4-piece path needs m ≥ 2M − 1, got m = {m}, M = {teachers}"
        )));
    }
    let t1 = require_minimum(w1, MANIFOLD_TOL)?;
    let t2 = require_minimum(w2, MANIFOLD_TOL)?;
    if w1 == w2 {
        return PiecewisePath::linear(w1.to_flat(), w2.to_flat());
    }

    let found = search_placements(&t1, teachers, |rows1| {
        let merged1 = unit_minimum(w1, rows1);
        let mt1 = neuron_types(&merged1, MANIFOLD_TOL).expect("unit minimum");
        search_placements(&t2, teachers, |rows2| {
            let merged2 = unit_minimum(w2, rows2);
            let mt2 = neuron_types(&merged2, MANIFOLD_TOL).expect("unit minimum");
            shared_center_from_types(w1, &[mt1.clone(), mt2])
                .map(|mid| (merged1.clone(), mid, merged2))
        })
    });
    let (merged1, mid, merged2) =
        found.ok_or_else(|| Error::degenerate("no placement admits a shared center"))?;
    PiecewisePath::new(vec![
        w1.to_flat(),
        merged1.to_flat(),
        mid.to_flat(),
        merged2.to_flat(),
        w2.to_flat(),
    ])
}

/// Center together with one 2-piece spoke per foot.
#[derive(Debug, Clone)]
pub struct StarCenter {
    pub center: NeuronMatrix,
    /// `foot → merged(foot) → center`, in input order.
    pub spokes: Vec<PiecewisePath>,
}

/// Center reachable from each of `k` minima by a 2-piece path, for `m ≥ kM`.
///
/// Every foot is merged first; the merged minima each have at least
/// `(k − 1)M` zero rows, which leaves room for a common center.
pub fn star_center_2pl(minima: &[NeuronMatrix]) -> Result<StarCenter> {
    let refs: Vec<&NeuronMatrix> = minima.iter().collect();
    check_dims(&refs)?;
    let (teachers, m, k) = (minima[0].teachers(), minima[0].width(), minima.len());
    if m < k * teachers {
        return Err(Error::infeasible(format!(
            "star center for k = {k} needs m ≥ kM = {}, got {m}",
            k * teachers
        )));
    }
    let merged = minima
        .iter()
        .map(merge_minimum)
        .collect::<Result<Vec<_>>>()?;
    let center = find_shared_zero_center(&merged)?
        .ok_or_else(|| Error::degenerate("merged feet share no center"))?;
    let spokes = minima
        .iter()
        .zip(&merged)
        .map(|(w, mw)| PiecewisePath::new(vec![w.to_flat(), mw.to_flat(), center.to_flat()]))
        .collect::<Result<Vec<_>>>()?;
    Ok(StarCenter { center, spokes })
}
