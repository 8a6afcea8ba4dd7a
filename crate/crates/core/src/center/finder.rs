//! Stochastic minimization of the path-averaged loss
//!
//! ```text
//! J(θ) = (1/r) Σ_i [ ∫₀¹ 𝓡(tθ + (1−t)θ_i) dt + λ p(θ, θ_i) ]
//! ```
//!
//! over a single free center `θ`, given feet `θ_1 .. θ_r`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::LossOracle;
use crate::error::{Error, Result};
use crate::optim::AdamState;
use crate::params::{interpolate, ngd_from_center, pairwise_sum, FlatParams, PiecewisePath};
use crate::rng::{Rng, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    None,
    /// `p(θ, θ') = ‖θ − θ'‖²`.
    SquaredDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CenterFindConfig {
    /// Feet drawn per step (`B_r`).
    pub batch_feet: usize,
    /// Interpolation times drawn per step (`B_t`).
    pub batch_t: usize,
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub penalty_kind: PenaltyKind,
    pub seed: RngSeed,
    /// Midpoint nodes for the deterministic objective.
    pub n_quad: usize,
    /// Overrides the oracle's own epoch length.
    pub steps_per_epoch: Option<usize>,
}

impl Default for CenterFindConfig {
    fn default() -> Self {
        CenterFindConfig {
            batch_feet: 1,
            batch_t: 3,
            lambda: 0.0,
            lr: 0.01,
            epochs: 100,
            penalty_kind: PenaltyKind::None,
            seed: RngSeed(0),
            n_quad: 33,
            steps_per_epoch: None,
        }
    }
}

impl CenterFindConfig {
    /// Defaults for NGD estimation: squared-distance penalty with `λ = 0.1`.
    pub fn for_ngd() -> Self {
        CenterFindConfig {
            lambda: 0.1,
            penalty_kind: PenaltyKind::SquaredDistance,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_feet == 0 || self.batch_t == 0 || self.n_quad == 0 {
            return Err(Error::NumericInput("batch sizes and n_quad must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::NumericInput(format!("lr = {}, λ = {}", self.lr, self.lambda)));
        }
        Ok(())
    }

    fn penalty_weight(&self) -> f64 {
        match self.penalty_kind {
            PenaltyKind::None => 0.0,
            PenaltyKind::SquaredDistance => self.lambda,
        }
    }
}

/// Indices of feet and interpolation times making up one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterDraws {
    pub feet: Vec<usize>,
    pub ts: Vec<f64>,
}

impl CenterDraws {
    /// `B_r` feet uniformly with replacement and `B_t` times in `[0, 1]`.
    pub fn sample(n_feet: usize, cfg: &CenterFindConfig, rng: &mut Rng) -> Self {
        CenterDraws {
            feet: (0..cfg.batch_feet).map(|_| rng.random_range(0..n_feet)).collect(),
            ts: (0..cfg.batch_t).map(|_| rng.random::<f64>()).collect(),
        }
    }

    /// Every foot once and the `n`-point midpoint grid.
    pub fn exhaustive(n_feet: usize, n: usize) -> Self {
        CenterDraws {
            feet: (0..n_feet).collect(),
            ts: midpoints(n),
        }
    }
}

fn midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect()
}

fn check_feet(theta: &FlatParams, feet: &[FlatParams]) -> Result<()> {
    if feet.is_empty() {
        return Err(Error::degenerate("no feet"));
    }
    for f in feet {
        if f.shape_tag() != theta.shape_tag() {
            return Err(Error::shape(format!("foot {:?} vs center {:?}", f.shape_tag(), theta.shape_tag())));
        }
    }
    Ok(())
}

fn squared_distance(a: &FlatParams, b: &FlatParams) -> Result<f64> {
    Ok(a.distance(b)?.powi(2))
}

/// `J` with the `t` integral replaced by `n_quad`-point midpoint quadrature.
pub fn center_objective(
    theta: &FlatParams,
    feet: &[FlatParams],
    oracle: &dyn LossOracle,
    cfg: &CenterFindConfig,
    n_quad: usize,
) -> Result<f64> {
    minibatch_center_objective(theta, feet, oracle, cfg, &CenterDraws::exhaustive(feet.len(), n_quad.max(1)))
}

/// Minibatch objective
/// `(1/(B_r B_t)) Σ_{k,j} 𝓡(t_j θ + (1−t_j) θ_{i_k}) + (λ/B_r) Σ_k p(θ, θ_{i_k})`.
pub fn minibatch_center_objective(
    theta: &FlatParams,
    feet: &[FlatParams],
    oracle: &dyn LossOracle,
    cfg: &CenterFindConfig,
    draws: &CenterDraws,
) -> Result<f64> {
    check_feet(theta, feet)?;
    let pairs: Vec<(usize, f64)> = draws
        .feet
        .iter()
        .flat_map(|&i| draws.ts.iter().map(move |&t| (i, t)))
        .collect();
    let losses = pairs
        .par_iter()
        .map(|&(i, t)| oracle.loss(&interpolate(theta, &feet[i], t)?))
        .collect::<Result<Vec<f64>>>()?;
    let path = pairwise_sum(&losses) / pairs.len() as f64;
    let weight = cfg.penalty_weight();
    let mut penalty = 0.0;
    if weight > 0.0 {
        for &i in &draws.feet {
            penalty += squared_distance(theta, &feet[i])?;
        }
        penalty *= weight / draws.feet.len() as f64;
    }
    Ok(path + penalty)
}

fn accumulate_grad(
    theta: &FlatParams,
    feet: &[FlatParams],
    cfg: &CenterFindConfig,
    draws: &CenterDraws,
    mut grad_at: impl FnMut(&FlatParams) -> Result<FlatParams>,
) -> Result<FlatParams> {
    check_feet(theta, feet)?;
    let scale = 1.0 / (draws.feet.len() * draws.ts.len()) as f64;
    let mut acc = vec![0.0; theta.len()];
    for &i in &draws.feet {
        for &t in &draws.ts {
            if t == 0.0 {
                continue;
            }
            let g = grad_at(&interpolate(theta, &feet[i], t)?)?;
            for (a, gk) in acc.iter_mut().zip(g.values()) {
                *a += scale * t * gk;
            }
        }
    }
    let weight = cfg.penalty_weight();
    if weight > 0.0 {
        let c = 2.0 * weight / draws.feet.len() as f64;
        for &i in &draws.feet {
            for ((a, x), y) in acc.iter_mut().zip(theta.values()).zip(feet[i].values()) {
                *a += c * (x - y);
            }
        }
    }
    FlatParams::new(acc, theta.shape_tag().clone())
}

/// Exact gradient of [`minibatch_center_objective`] for fixed draws.
pub fn minibatch_center_grad(
    theta: &FlatParams,
    feet: &[FlatParams],
    oracle: &dyn LossOracle,
    cfg: &CenterFindConfig,
    draws: &CenterDraws,
) -> Result<FlatParams> {
    accumulate_grad(theta, feet, cfg, draws, |p| oracle.loss_grad(p))
}

/// One draw of the minibatch gradient estimator: feet and times are sampled
/// from `rng`, and the oracle may subsample its data as well.
pub fn stochastic_center_grad(
    theta: &FlatParams,
    feet: &[FlatParams],
    oracle: &dyn LossOracle,
    cfg: &CenterFindConfig,
    rng: &mut Rng,
) -> Result<FlatParams> {
    let draws = CenterDraws::sample(feet.len(), cfg, rng);
    let oracle_seed = RngSeed(rng.random());
    let mut inner = oracle_seed.rng();
    accumulate_grad(theta, feet, cfg, &draws, |p| oracle.sample_grad(p, &mut inner))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub objective: f64,
    pub mean_foot_distance: f64,
    /// Fold-line length ratio, for exactly two distinct feet.
    pub ngd_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterRun {
    pub center: FlatParams,
    pub history: Vec<HistoryRow>,
}

fn history_row(
    epoch: usize,
    theta: &FlatParams,
    feet: &[FlatParams],
    oracle: &dyn LossOracle,
    cfg: &CenterFindConfig,
) -> Result<HistoryRow> {
    let objective = center_objective(theta, feet, oracle, cfg, cfg.n_quad)?;
    let dists = feet.iter().map(|f| theta.distance(f)).collect::<Result<Vec<f64>>>()?;
    let ngd_bound = match feet {
        [a, b] if a != b => Some(ngd_from_center(a, b, theta)?),
        _ => None,
    };
    Ok(HistoryRow {
        epoch,
        objective,
        mean_foot_distance: dists.iter().sum::<f64>() / dists.len() as f64,
        ngd_bound,
    })
}

/// Adam on the stochastic gradient, starting from the mean of the feet.
///
/// Records the deterministic objective before the first epoch and after
/// every epoch. A non-finite gradient, iterate or objective stops the run
/// with [`Error::Divergence`] holding the last finite iterate.
pub fn find_center(feet: &[FlatParams], oracle: &dyn LossOracle, cfg: &CenterFindConfig) -> Result<CenterRun> {
    cfg.validate()?;
    let mut theta = FlatParams::mean(feet)?;
    let tag = theta.shape_tag().clone();
    let steps = cfg.steps_per_epoch.unwrap_or_else(|| oracle.steps_per_epoch()).max(1);
    let mut rng = cfg.seed.rng();
    let mut adam = AdamState::new(theta.len());
    let mut history = vec![history_row(0, &theta, feet, oracle, cfg)?];
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        for _ in 0..steps {
            step += 1;
            let diverged = |last: &FlatParams| Error::Divergence {
                step,
                last_finite: Box::new(last.clone()),
            };
            let g = stochastic_center_grad(&theta, feet, oracle, cfg, &mut rng)?;
            if !g.is_finite() {
                return Err(diverged(&theta));
            }
            let mut next = theta.values().to_vec();
            adam.step(&mut next, g.values(), cfg.lr);
            let next = FlatParams::new(next, tag.clone())?;
            if !next.is_finite() {
                return Err(diverged(&theta));
            }
            theta = next;
        }
        let row = history_row(epoch, &theta, feet, oracle, cfg)?;
        if !row.objective.is_finite() {
            return Err(Error::Divergence {
                step,
                last_finite: Box::new(theta),
            });
        }
        history.push(row);
    }
    Ok(CenterRun { center: theta, history })
}

/// Penalty weight that makes `λ · mean ‖θ − θ_i‖²` equal the path term of
/// `J` at the mean of the feet.
pub fn balanced_lambda(feet: &[FlatParams], oracle: &dyn LossOracle, n_quad: usize) -> Result<f64> {
    let mean = FlatParams::mean(feet)?;
    let path = center_objective(&mean, feet, oracle, &CenterFindConfig::default(), n_quad)?;
    let msd = feet.iter().map(|f| squared_distance(&mean, f)).sum::<Result<f64>>()? / feet.len() as f64;
    if msd == 0.0 {
        return Err(Error::degenerate("all feet coincide"));
    }
    Ok(path / msd)
}

/// Upper estimate of the normalized geodesic distance between two minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgdReport {
    pub ngd: f64,
    pub center: FlatParams,
    pub endpoint_loss: [f64; 2],
    pub center_loss: f64,
    /// Largest loss on each spoke `θ_i → center`.
    pub spoke_max_loss: [f64; 2],
    pub history: Vec<HistoryRow>,
}

const SPOKE_GRID: usize = 33;

/// Penalized center search between `θ1` and `θ2`, reported as the fold-line
/// length ratio with barrier diagnostics along both spokes.
pub fn estimate_ngd(
    theta1: &FlatParams,
    theta2: &FlatParams,
    oracle: &dyn LossOracle,
    cfg: &CenterFindConfig,
) -> Result<NgdReport> {
    if theta1 == theta2 {
        return Err(Error::degenerate("NGD needs two distinct minima"));
    }
    let cfg = CenterFindConfig {
        penalty_kind: PenaltyKind::SquaredDistance,
        ..cfg.clone()
    };
    let feet = [theta1.clone(), theta2.clone()];
    let run = find_center(&feet, oracle, &cfg)?;
    let mut spoke_max_loss = [0.0; 2];
    for (k, foot) in feet.iter().enumerate() {
        let spoke = PiecewisePath::linear(foot.clone(), run.center.clone())?;
        let losses = spoke
            .sample(SPOKE_GRID)
            .par_iter()
            .map(|(_, p)| oracle.loss(p))
            .collect::<Result<Vec<f64>>>()?;
        spoke_max_loss[k] = losses.into_iter().fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(NgdReport {
        ngd: ngd_from_center(theta1, theta2, &run.center)?,
        endpoint_loss: [oracle.loss(theta1)?, oracle.loss(theta2)?],
        center_loss: oracle.loss(&run.center)?,
        center: run.center,
        spoke_max_loss,
        history: run.history,
    })
}
