//! Two-piece upper bounds on the normalized geodesic distance between ReLU
//! minima.

use super::connect::assign_rows;
use super::neuron::{require_minimum, NeuronMatrix, NeuronType, MANIFOLD_TOL};
use crate::error::{Error, Result};
use crate::params::ngd_from_center;

/// Center of a two-piece path and the NGD bound it certifies.
#[derive(Debug, Clone)]
pub struct TwoPieceCenter {
    pub center: NeuronMatrix,
    pub ngd_bound: f64,
}

/// Which teacher coordinate a center row may carry.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RowClass {
    /// Inputs point along different directions; the center row must vanish.
    Conflict,
    /// At least one input is `Axis(j)`.
    Only(usize),
    /// Both inputs are zero.
    Free,
}

fn classify_pair(a: NeuronType, b: NeuronType) -> RowClass {
    match (a.coord(), b.coord()) {
        (None, None) => RowClass::Free,
        (Some(j), None) | (None, Some(j)) => RowClass::Only(j),
        (Some(j), Some(k)) if j == k => RowClass::Only(j),
        _ => RowClass::Conflict,
    }
}

/// Minimizes `‖c − W1‖² + ‖c − W2‖²` over centers linearly connected to both
/// inputs, then reports `ngd_from_center` for it.
///
/// Within the rows that may carry coordinate `j` the optimum is
/// `x_i = (a_i + b_i)/2 + (1 − Σ (a_k + b_k)/2) / n_j`. Rows where both
/// inputs vanish can host any coordinate: first they fill coordinates with no
/// other row, then they go one at a time to the block with the largest drop
/// in `2 D_j² / n_j`.
pub fn optimal_two_piece_center(w1: &NeuronMatrix, w2: &NeuronMatrix) -> Result<TwoPieceCenter> {
    if !w1.same_dims(w2) {
        return Err(Error::shape("minima of different dimensions"));
    }
    let t1 = require_minimum(w1, MANIFOLD_TOL)?;
    let t2 = require_minimum(w2, MANIFOLD_TOL)?;
    let (teachers, m) = (w1.teachers(), w1.width());
    let classes: Vec<RowClass> = t1.iter().zip(&t2).map(|(&a, &b)| classify_pair(a, b)).collect();

    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); teachers];
    let mut free = Vec::new();
    for (i, c) in classes.iter().enumerate() {
        match *c {
            RowClass::Only(j) => blocks[j].push(i),
            RowClass::Free => free.push(i),
            RowClass::Conflict => {}
        }
    }

    // uncovered coordinates take free rows first
    let empty: Vec<usize> = (0..teachers).filter(|&j| blocks[j].is_empty()).collect();
    if empty.len() > free.len() {
        let coordinate = empty[free.len()];
        return Err(Error::NotTwoPlConnectable { coordinate });
    }
    if !empty.is_empty() {
        let rows = assign_rows(
            m,
            empty.len(),
            |i, _| classes[i] == RowClass::Free,
            |_, _| false,
        )
        .expect("enough free rows");
        for (k, &j) in empty.iter().enumerate() {
            blocks[j].push(rows[k]);
        }
        free.retain(|i| !rows.contains(i));
    }

    let mid = |i: usize, j: usize| (w1.get(i, j) + w2.get(i, j)) / 2.0;
    let slack: Vec<f64> = (0..teachers)
        .map(|j| 1.0 - blocks[j].iter().map(|&i| mid(i, j)).sum::<f64>())
        .collect();
    let gain = |j: usize, n: usize| {
        let n = n as f64;
        2.0 * slack[j] * slack[j] * (1.0 / n - 1.0 / (n + 1.0))
    };
    for i in free {
        let best = (0..teachers)
            .max_by(|&x, &y| gain(x, blocks[x].len()).total_cmp(&gain(y, blocks[y].len())).then(y.cmp(&x)))
            .expect("at least one teacher");
        blocks[best].push(i);
    }

    let mut center = NeuronMatrix::zeros(teachers, m, w1.input_dim())?;
    for (j, rows) in blocks.iter().enumerate() {
        let share = slack[j] / rows.len() as f64;
        for &i in rows {
            center.set(i, j, mid(i, j) + share);
        }
    }
    let ngd_bound = ngd_from_center(&w1.to_flat(), &w2.to_flat(), &center.to_flat())?;
    Ok(TwoPieceCenter { center, ngd_bound })
}
