//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria marked `known` are reported but do not fail the run; their
//! failure is a measured property of the construction, not a defect.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use modeconn::center::{
    balanced_lambda, directional_fd_error, estimate_ngd, find_center, minibatch_center_grad,
    minibatch_center_objective, CenterDraws, CenterFindConfig, LossOracle, PenaltyKind,
    ReluRiskOracle,
};
use modeconn::error::Result;
use modeconn::linear::counterexample::chart_objective;
use modeconn::linear::{
    counterexample_search, is_linear_minimum, lemma_instance, max_path_risk,
    sample_linear_minimum_with, star_center_linear, three_pl_path, two_pl_center_linear,
    LinearStack, TargetSpec,
};
use modeconn::params::{FlatParams, PiecewisePath};
use modeconn::relu::{
    four_pl_path, is_global_minimum, linearly_connected, risk_closed_form, risk_monte_carlo,
    sample_uniform_minimum_with, star_bound, star_center_2pl, two_pl_bound, ManifoldSpec,
    NeuronMatrix,
};
use modeconn::rng::RngSeed;
use modeconn::sweep::{connectivity_frequency, ngd_bound_stats, MinimaLaw};
use modeconn::train::{
    find_mnist, load_mnist_idx, measure_barrier, synthetic_digits, train_mlp, DataOracle,
    Dataset, LossKind, MlpArch, MlpModel, TrainConfig, EVAL_SUBSET,
};

const MEMBER_RISK_TOL: f64 = 1e-10;
const NONMEMBER_RISK_MIN: f64 = 1e-6;
const NONMEMBER_MARGIN: f64 = 0.05;
const MC_SIGMAS: f64 = 4.0;
const LINEAR_PATH_TOL: f64 = 1e-9;
const CONSTRUCTION_TOL: f64 = 1e-8;
const ANCHOR_TOL: f64 = 1e-9;
const GRID: usize = 101;
const COUNTEREXAMPLE_FLOOR: f64 = 4.0 / 15.0 - 0.01;
const SPARSE_NGD_CEILING: f64 = 1.05;
const FOLD_BARRIER_TOL: f64 = 0.05;
const LINEAR_BARRIER_RATIO: f64 = 5.0;
const NGD_CEILING: f64 = 1.2;
const FD_TOL: f64 = 1e-4;
const FD_PROBES: usize = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

#[derive(Default)]
struct Tally {
    failed: usize,
    known: usize,
}

impl Tally {
    fn run(&mut self, id: usize, name: &str, known_unattainable: bool, f: impl FnOnce() -> Result<Outcome>) {
        let start = Instant::now();
        let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let tag = match (o.pass, known_unattainable) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} [{id}] {name}: {} ({secs:.1} s)", o.detail);
        if !o.pass {
            if known_unattainable {
                self.known += 1;
            } else {
                self.failed += 1;
            }
        }
    }
}

fn relu_risk(p: &FlatParams) -> Result<f64> {
    risk_closed_form(&NeuronMatrix::from_flat(p)?)
}

/// Largest closed-form risk on `grid` points of every segment of `path`.
fn relu_path_risk(path: &PiecewisePath, grid: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (a, b) in path.segments() {
        let seg = PiecewisePath::linear(a.clone(), b.clone())?;
        for (_, p) in seg.sample(grid) {
            worst = worst.max(relu_risk(&p)?);
        }
    }
    Ok(worst)
}

fn relu_anchors_on_manifold(path: &PiecewisePath) -> Result<bool> {
    for a in path.anchors() {
        if !is_global_minimum(&NeuronMatrix::from_flat(a)?, ANCHOR_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A minimum pushed off the manifold by at least the margin, either in one
/// column sum or through an off-axis coordinate.
fn perturbed_nonmember(spec: ManifoldSpec, rng: &mut modeconn::rng::Rng) -> Result<NeuronMatrix> {
    let w = sample_uniform_minimum_with(spec, rng)?;
    let mut data = w.data().to_vec();
    let d = spec.d;
    let size = rng.random_range(NONMEMBER_MARGIN..0.5);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let i = rng.random_range(0..spec.m);
    let row = &data[i * d..(i + 1) * d];
    let axis = row.iter().position(|&v| v != 0.0);
    if rng.random_bool(0.5) {
        // column-sum violation on a teacher coordinate carried by some row
        let j = rng.random_range(0..spec.teachers);
        let carrier = (0..spec.m).find(|&k| data[k * d + j] > 0.0).expect("covered coordinate");
        data[carrier * d + j] += sign * size;
    } else {
        let j = loop {
            let j = rng.random_range(0..d);
            if Some(j) != axis {
                break j;
            }
        };
        data[i * d + j] += sign * size;
    }
    NeuronMatrix::from_data(spec.teachers, spec.m, d, data)
}

fn criterion_1() -> Result<Outcome> {
    let configs = [ManifoldSpec::new(2, 4, 4), ManifoldSpec::new(4, 8, 8), ManifoldSpec::new(4, 64, 8)];
    let members = 10_000;
    let nonmembers = 1_000;
    let worst_member = (0..members)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngSeed(1).derive(t as u64).rng();
            risk_closed_form(&sample_uniform_minimum_with(configs[t % 3], &mut rng)?)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let least_nonmember = (0..nonmembers)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngSeed(2).derive(t as u64).rng();
            risk_closed_form(&perturbed_nonmember(configs[t % 3], &mut rng)?)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(outcome(
        worst_member <= MEMBER_RISK_TOL && least_nonmember > NONMEMBER_RISK_MIN,
        format!(
            "max member risk {worst_member:.2e} (≤ {MEMBER_RISK_TOL:.0e}) over {members}, \
             min non-member risk {least_nonmember:.2e} (> {NONMEMBER_RISK_MIN:.0e}) over {nonmembers}"
        ),
    ))
}

fn criterion_2() -> Result<Outcome> {
    let configs = [(2, 3, 4), (3, 5, 3), (1, 2, 2), (4, 4, 6)];
    let mut rng = RngSeed(3).rng();
    let mut worst_z: f64 = 0.0;
    for trial in 0..100 {
        let (teachers, m, d) = configs[trial % configs.len()];
        let data: Vec<f64> = (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = NeuronMatrix::from_data(teachers, m, d, data)?;
        let exact = risk_closed_form(&w)?;
        let mc = risk_monte_carlo(&w, 1_000_000, RngSeed(1000 + trial as u64));
        worst_z = worst_z.max((exact - mc.mean).abs() / mc.stderr);
    }
    Ok(outcome(
        worst_z <= MC_SIGMAS,
        format!("max |closed form − MC| = {worst_z:.2} stderr (≤ {MC_SIGMAS}) over 100 matrices, n = 10⁶"),
    ))
}

/// Every `3 × 2` matrix whose rows are zero or `c·e_j` with `c` on the grid,
/// kept when it is a global minimum.
fn grid_minima() -> Result<Vec<NeuronMatrix>> {
    let grid = [0.2, 0.4, 0.6, 0.8, 1.0];
    let mut row_choices: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    for &c in &grid {
        row_choices.push([c, 0.0]);
        row_choices.push([0.0, c]);
    }
    let mut out = Vec::new();
    for a in &row_choices {
        for b in &row_choices {
            for c in &row_choices {
                let w = NeuronMatrix::new(2, vec![a.to_vec(), b.to_vec(), c.to_vec()])?;
                if is_global_minimum(&w, ANCHOR_TOL) {
                    out.push(w);
                }
            }
        }
    }
    Ok(out)
}

fn criterion_3() -> Result<Outcome> {
    let minima = grid_minima()?;
    let pairs: Vec<(usize, usize)> = (0..minima.len())
        .flat_map(|i| (0..minima.len()).map(move |j| (i, j)))
        .collect();
    let verdicts = pairs
        .par_iter()
        .map(|&(i, j)| {
            let predicate = linearly_connected(&minima[i], &minima[j], ANCHOR_TOL)?;
            let path = PiecewisePath::linear(minima[i].to_flat(), minima[j].to_flat())?;
            let flat = relu_path_risk(&path, GRID)? <= LINEAR_PATH_TOL;
            Ok((predicate, predicate == flat))
        })
        .collect::<Result<Vec<(bool, bool)>>>()?;
    let disagreements = verdicts.iter().filter(|v| !v.1).count();
    let connected = verdicts.iter().filter(|v| v.0).count();
    Ok(outcome(
        disagreements == 0,
        format!(
            "{} grid minima, {} ordered pairs ({connected} connected), {disagreements} disagreements",
            minima.len(),
            pairs.len()
        ),
    ))
}

fn criterion_4() -> Result<Outcome> {
    let n = 10_000;
    let mut pass = true;
    let mut cells = Vec::new();
    for (idx, &(teachers, m)) in [(2, 8), (2, 16), (4, 24), (4, 40)].iter().enumerate() {
        let est = connectivity_frequency(MinimaLaw::Uniform, ManifoldSpec::new(teachers, m, teachers), 2, n, RngSeed(40 + idx as u64))?;
        let bound = two_pl_bound(teachers, m);
        pass &= est.consistent_with_lower_bound(bound);
        cells.push(format!("({teachers},{m}) {:.4} vs {bound:.4}", est.frequency()));
    }
    let est = connectivity_frequency(MinimaLaw::Uniform, ManifoldSpec::new(2, 12, 2), 3, n, RngSeed(49))?;
    let bound = star_bound(2, 12, 3);
    pass &= est.consistent_with_lower_bound(bound);
    cells.push(format!("star k=3 (2,12) {:.4} vs {bound:.4}", est.frequency()));
    Ok(outcome(pass, format!("frequency vs bound (− 3·CI, N = {n}): {}", cells.join("; "))))
}

fn linear_spec(q: &[f64]) -> Result<TargetSpec> {
    TargetSpec::isotropic(DMatrix::from_row_slice(1, q.len(), q))
}

fn linear_anchors_on_manifold(path: &PiecewisePath, spec: &TargetSpec) -> Result<bool> {
    for a in path.anchors() {
        if !is_linear_minimum(&LinearStack::from_flat(a)?, spec, ANCHOR_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn linear_path_ok(path: &PiecewisePath, spec: &TargetSpec) -> Result<bool> {
    let mut worst: f64 = 0.0;
    for (a, b) in path.segments() {
        worst = worst.max(max_path_risk(&PiecewisePath::linear(a.clone(), b.clone())?, spec, GRID)?);
    }
    Ok(linear_anchors_on_manifold(path, spec)? && worst <= CONSTRUCTION_TOL)
}

/// Counts instances whose construction fails or violates a check.
fn count_failures(instances: usize, seed: RngSeed, check: impl Fn(&mut modeconn::rng::Rng, usize) -> Result<bool> + Sync) -> usize {
    (0..instances)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = seed.derive(t as u64).rng();
            !matches!(check(&mut rng, t), Ok(true))
        })
        .count()
}

fn criterion_5() -> Result<Outcome> {
    let n = 1_000;
    let relu_dims = [(2, 3), (3, 4), (4, 4)];
    let four_pl = count_failures(n, RngSeed(50), |rng, t| {
        let (teachers, d) = relu_dims[t % 3];
        let spec = ManifoldSpec::new(teachers, 2 * teachers - 1, d);
        let path = four_pl_path(&sample_uniform_minimum_with(spec, rng)?, &sample_uniform_minimum_with(spec, rng)?)?;
        Ok(relu_anchors_on_manifold(&path)? && relu_path_risk(&path, GRID)? <= CONSTRUCTION_TOL)
    });
    let relu_star = count_failures(n, RngSeed(51), |rng, t| {
        let (teachers, d) = relu_dims[t % 3];
        let k = 3;
        let spec = ManifoldSpec::new(teachers, k * teachers, d);
        let feet = (0..k).map(|_| sample_uniform_minimum_with(spec, rng)).collect::<Result<Vec<_>>>()?;
        let star = star_center_2pl(&feet)?;
        for spoke in &star.spokes {
            if !(relu_anchors_on_manifold(spoke)? && relu_path_risk(spoke, GRID)? <= CONSTRUCTION_TOL) {
                return Ok(false);
            }
        }
        Ok(true)
    });
    let specs = [linear_spec(&[1.0])?, linear_spec(&[1.0, -0.5])?];
    let depths = [2, 3];
    let two_pl = count_failures(n, RngSeed(52), |rng, t| {
        let (spec, depth) = (&specs[t % 2], depths[(t / 2) % 2]);
        let m = 2 * depth;
        let t1 = sample_linear_minimum_with(spec, depth, m, rng)?;
        let t2 = sample_linear_minimum_with(spec, depth, m, rng)?;
        let c = two_pl_center_linear(&t1, &t2, spec)?;
        linear_path_ok(&PiecewisePath::fold_line(t1.to_flat(), c.to_flat(), t2.to_flat())?, spec)
    });
    let three_pl = count_failures(n, RngSeed(53), |rng, t| {
        let (spec, depth) = (&specs[t % 2], depths[(t / 2) % 2]);
        let m = 2 * depth;
        let t1 = sample_linear_minimum_with(spec, depth, m, rng)?;
        let t2 = sample_linear_minimum_with(spec, depth, m, rng)?;
        linear_path_ok(&three_pl_path(&t1, &t2, spec, RngSeed(rng.random()))?, spec)
    });
    let linear_star = count_failures(n, RngSeed(54), |rng, t| {
        let (spec, depth) = (&specs[t % 2], depths[(t / 2) % 2]);
        let r = 3;
        let m = 2 + r * (depth - 1);
        let feet = (0..r).map(|_| sample_linear_minimum_with(spec, depth, m, rng)).collect::<Result<Vec<_>>>()?;
        let c = star_center_linear(&feet, spec)?;
        for f in &feet {
            if !linear_path_ok(&PiecewisePath::linear(f.to_flat(), c.to_flat())?, spec)? {
                return Ok(false);
            }
        }
        Ok(true)
    });
    let total = four_pl + relu_star + two_pl + three_pl + linear_star;
    Ok(outcome(
        total == 0,
        format!(
            "failures per {n} instances at minimal width: ReLU 4-piece {four_pl}, ReLU star {relu_star}, \
             linear 2-piece {two_pl}, linear 3-piece {three_pl}, linear star {linear_star}"
        ),
    ))
}

fn criterion_6() -> Result<Outcome> {
    let report = counterexample_search(1_000, RngSeed(60))?;
    let (t1, t2, spec) = lemma_instance();
    let path = three_pl_path(&t1, &t2, &spec, RngSeed(61))?;
    let risk = max_path_risk(&path, &spec, GRID)?;
    Ok(outcome(
        report.best_value >= COUNTEREXAMPLE_FLOOR && risk <= CONSTRUCTION_TOL,
        format!(
            "infimum over 1000 starts {:.6} (≥ {COUNTEREXAMPLE_FLOOR:.4}), quadrature error {:.1e}, \
             3-piece path max risk {risk:.1e}",
            report.best_value, report.quadrature_error
        ),
    ))
}

fn criterion_7() -> Result<Outcome> {
    let widths = [8, 16, 32, 64, 128, 256];
    let trials = 4_000;
    let mut pass_trend = true;
    let mut pass_ceiling = true;
    let mut lines = Vec::new();
    for teachers in [2, 4] {
        let mut means = Vec::new();
        for &m in &widths {
            let s = ngd_bound_stats(MinimaLaw::Sparse { r: 0.5 }, ManifoldSpec::new(teachers, m, teachers), trials, RngSeed(70 + m as u64))?;
            means.push(s.mean);
        }
        pass_trend &= means.windows(2).all(|w| w[1] < w[0]);
        pass_ceiling &= means[means.len() - 1] <= SPARSE_NGD_CEILING;
        let shown: Vec<String> = means.iter().map(|v| format!("{v:.4}")).collect();
        lines.push(format!("sparse M={teachers} means [{}]", shown.join(", ")));
    }
    let mut pass_uniform = true;
    for teachers in [2, 4] {
        let ceiling = 3.0 * (teachers as f64).sqrt();
        let mut worst: f64 = 0.0;
        for &m in &widths {
            let s = ngd_bound_stats(MinimaLaw::Uniform, ManifoldSpec::new(teachers, m, teachers), trials, RngSeed(80 + m as u64))?;
            worst = worst.max(s.max);
        }
        pass_uniform &= worst <= ceiling;
        lines.push(format!("uniform M={teachers} max {worst:.4} (≤ {ceiling:.3})"));
    }
    lines.push(format!(
        "decreasing {pass_trend}, m=256 mean ≤ {SPARSE_NGD_CEILING} {pass_ceiling}, uniform ceiling {pass_uniform}"
    ));
    Ok(outcome(pass_trend && pass_ceiling && pass_uniform, lines.join("; ")))
}

fn digits() -> Result<(Dataset, &'static str)> {
    let n = 8192;
    if let Some(dir) = std::env::var_os("MODECONN_MNIST_DIR") {
        if let Some((images, labels)) = find_mnist(&PathBuf::from(dir)) {
            let data = load_mnist_idx(&images, &labels)?;
            let idx: Vec<usize> = (0..n.min(data.len())).collect();
            return Ok((data.subset(&idx), "MNIST"));
        }
    }
    Ok((synthetic_digits(n, RngSeed(80))?, "synthetic digits"))
}

fn criterion_8() -> Result<Outcome> {
    let (data, source) = digits()?;
    let data = Arc::new(data);
    let arch = MlpArch::new(vec![784, 32, 16, 10], LossKind::CrossEntropy)?;
    let cfg = TrainConfig::default();
    let mut feet = Vec::new();
    for i in 0..3u64 {
        let init = MlpModel::he_init(arch.clone(), RngSeed(81 + i));
        let (model, out) = train_mlp(&init, &data, &cfg, RngSeed(91 + i))?;
        if !out.converged {
            return Ok(outcome(false, format!("model {i} stopped at loss {:.4}", out.final_loss)));
        }
        feet.push(model.params().clone());
    }
    let oracle = DataOracle::new(arch, data, EVAL_SUBSET, cfg.batch_size, RngSeed(88));

    let center_cfg = CenterFindConfig {
        epochs: 20,
        seed: RngSeed(89),
        ..CenterFindConfig::default()
    };
    let center = find_center(&feet, &oracle, &center_cfg)?.center;
    let mut worst_fold: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for i in 0..3 {
        for j in i + 1..3 {
            let linear = measure_barrier(&PiecewisePath::linear(feet[i].clone(), feet[j].clone())?, &oracle, GRID)?;
            let fold = measure_barrier(&PiecewisePath::fold_line(feet[i].clone(), center.clone(), feet[j].clone())?, &oracle, GRID)?;
            let endpoint = linear.endpoint_loss[0].max(linear.endpoint_loss[1]);
            worst_ratio = worst_ratio.min(linear.loss_barrier() / endpoint);
            worst_fold = worst_fold.max(fold.loss_barrier());
        }
    }

    let lambda = balanced_lambda(&feet[..2], &oracle, center_cfg.n_quad)?;
    let ngd_cfg = CenterFindConfig {
        lambda,
        penalty_kind: PenaltyKind::SquaredDistance,
        epochs: 60,
        seed: RngSeed(90),
        ..CenterFindConfig::default()
    };
    let ngd = estimate_ngd(&feet[0], &feet[1], &oracle, &ngd_cfg)?;
    let pass = worst_fold <= FOLD_BARRIER_TOL && worst_ratio > LINEAR_BARRIER_RATIO && ngd.ngd <= NGD_CEILING;
    Ok(outcome(
        pass,
        format!(
            "{source}; max fold-line barrier {worst_fold:.4} (≤ {FOLD_BARRIER_TOL}), min linear barrier / endpoint \
             loss {worst_ratio:.1} (> {LINEAR_BARRIER_RATIO}), NGD {:.4} (≤ {NGD_CEILING}) at λ = {lambda:.2e} \
             with spoke max losses {:.4}, {:.4}",
            ngd.ngd, ngd.spoke_max_loss[0], ngd.spoke_max_loss[1]
        ),
    ))
}

fn unit_direction(len: usize, rng: &mut modeconn::rng::Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Directional FD errors of an MLP oracle, skipping probes whose stencil
/// straddles a ReLU kink (the directional derivative jumps across it).
fn mlp_fd_errors(oracle: &dyn LossOracle, points: &[FlatParams], rng: &mut modeconn::rng::Rng) -> Result<Vec<f64>> {
    let h = 1e-5;
    let mut errs = Vec::new();
    for p in points {
        let g = oracle.loss_grad(p)?;
        let v = unit_direction(p.len(), rng);
        let dv = FlatParams::new(v.clone(), p.shape_tag().clone())?;
        let gp = oracle.loss_grad(&p.add(&dv.scale(h))?)?.dot(&dv)?;
        let gm = oracle.loss_grad(&p.sub(&dv.scale(h))?)?.dot(&dv)?;
        let g0 = g.dot(&dv)?;
        if (gp - gm).abs() > 1e-3 * g0.abs().max(1e-8) {
            continue;
        }
        let tag = p.shape_tag().clone();
        let f = |x: &[f64]| FlatParams::new(x.to_vec(), tag.clone()).and_then(|q| oracle.loss(&q)).unwrap_or(f64::NAN);
        errs.push(directional_fd_error(f, p.values(), g.values(), &v));
    }
    Ok(errs)
}

fn criterion_9() -> Result<Outcome> {
    let mut rng = RngSeed(100).rng();

    let (data, _) = digits()?;
    let arch = MlpArch::new(vec![784, 32, 16, 10], LossKind::CrossEntropy)?;
    let oracle = DataOracle::new(arch.clone(), Arc::new(data), 256, 64, RngSeed(101));
    let points: Vec<FlatParams> = (0..40).map(|s| MlpModel::he_init(arch.clone(), RngSeed(200 + s)).params().clone()).collect();
    let mlp = mlp_fd_errors(&oracle, &points, &mut rng)?;
    let mlp_worst = mlp.iter().copied().fold(0.0, f64::max);
    let mlp_ok = mlp.len() >= FD_PROBES && mlp_worst <= FD_TOL;

    let cfg = CenterFindConfig {
        batch_feet: 2,
        batch_t: 3,
        lambda: 0.1,
        penalty_kind: PenaltyKind::SquaredDistance,
        ..CenterFindConfig::default()
    };
    let mut center_worst: f64 = 0.0;
    for _ in 0..FD_PROBES {
        let gauss = |rng: &mut modeconn::rng::Rng| -> Result<FlatParams> {
            let data: Vec<f64> = (0..5 * 3).map(|_| rng.sample(StandardNormal)).collect();
            Ok(NeuronMatrix::from_data(2, 5, 3, data)?.to_flat())
        };
        let feet = vec![gauss(&mut rng)?, gauss(&mut rng)?, gauss(&mut rng)?];
        let theta = gauss(&mut rng)?;
        let draws = CenterDraws::sample(feet.len(), &cfg, &mut rng);
        let g = minibatch_center_grad(&theta, &feet, &ReluRiskOracle, &cfg, &draws)?;
        let v = unit_direction(theta.len(), &mut rng);
        let tag = theta.shape_tag().clone();
        let f = |x: &[f64]| {
            FlatParams::new(x.to_vec(), tag.clone())
                .and_then(|q| minibatch_center_objective(&q, &feet, &ReluRiskOracle, &cfg, &draws))
                .unwrap_or(f64::NAN)
        };
        center_worst = center_worst.max(directional_fd_error(f, theta.values(), g.values(), &v));
    }

    let quad = modeconn::linear::UnitQuadrature::gauss_legendre(64);
    let mut chart_worst: f64 = 0.0;
    for _ in 0..FD_PROBES {
        let a: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let (_, ga, gu) = chart_objective(&a, &u, &quad);
        let v = unit_direction(8, &mut rng);
        let g: Vec<f64> = ga.iter().chain(gu.iter()).copied().collect();
        let x: Vec<f64> = a.iter().chain(u.iter()).copied().collect();
        let f = |x: &[f64]| {
            let a: [f64; 4] = std::array::from_fn(|i| x[i]);
            let u: [f64; 4] = std::array::from_fn(|i| x[4 + i]);
            chart_objective(&a, &u, &quad).0
        };
        chart_worst = chart_worst.max(directional_fd_error(f, &x, &g, &v));
    }

    Ok(outcome(
        mlp_ok && center_worst <= FD_TOL && chart_worst <= FD_TOL,
        format!(
            "max relative FD error: MLP backprop {mlp_worst:.1e} over {} kink-free probes, \
             center estimator {center_worst:.1e}, counterexample objective {chart_worst:.1e} (≤ {FD_TOL:.0e}, {FD_PROBES} probes each)",
            mlp.len()
        ),
    ))
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: usize| only.as_ref().is_none_or(|o| o.contains(&id));
    let mut tally = Tally::default();
    let criteria: [(usize, &str, bool, fn() -> Result<Outcome>); 9] = [
        (1, "manifold correctness", false, criterion_1),
        (2, "kernel vs Monte Carlo", false, criterion_2),
        (3, "linear connectivity predicate vs brute force", false, criterion_3),
        (4, "connectivity frequencies vs bounds", false, criterion_4),
        (5, "constructive paths", false, criterion_5),
        (6, "depth-2 pair without a 2-piece path", false, criterion_6),
        (7, "two-piece NGD trends", true, criterion_7),
        (8, "trained-network centers and NGD", false, criterion_8),
        (9, "gradient hygiene", false, criterion_9),
    ];
    for (id, name, known, f) in criteria {
        if wanted(id) {
            tally.run(id, name, known, f);
        }
    }
    println!("acceptance: {} unexpected failure(s), {} known failure(s)", tally.failed, tally.known);
    if tally.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
