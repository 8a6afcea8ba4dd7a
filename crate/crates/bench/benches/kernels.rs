use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use modeconn::linear::{star_center_linear, three_pl_path};
use modeconn::relu::{find_shared_zero_center, four_pl_path, optimal_two_piece_center, risk_closed_form};
use modeconn::rng::RngSeed;
use modeconn_bench::{linear_feet, relu_pair};

fn relu(c: &mut Criterion) {
    let mut g = c.benchmark_group("relu");
    for m in [8, 64, 256] {
        let (w1, w2) = relu_pair(4, m, 8);
        g.bench_with_input(BenchmarkId::new("risk_closed_form", m), &w1, |b, w| b.iter(|| risk_closed_form(black_box(w))));
        let pair = [w1.clone(), w2.clone()];
        g.bench_with_input(BenchmarkId::new("shared_center", m), &pair, |b, p| b.iter(|| find_shared_zero_center(black_box(p))));
        g.bench_with_input(BenchmarkId::new("two_piece_center", m), &pair, |b, p| {
            b.iter(|| optimal_two_piece_center(black_box(&p[0]), black_box(&p[1])))
        });
    }
    let (w1, w2) = relu_pair(4, 7, 8);
    g.bench_function("four_pl_path_minimal_width", |b| b.iter(|| four_pl_path(black_box(&w1), black_box(&w2))));
    g.finish();
}

fn linear(c: &mut Criterion) {
    let mut g = c.benchmark_group("linear");
    let (feet, spec) = linear_feet(3, 3, 8);
    g.bench_function("star_center_r3_l3", |b| b.iter(|| star_center_linear(black_box(&feet), &spec)));
    g.bench_function("three_pl_path_l3", |b| b.iter(|| three_pl_path(black_box(&feet[0]), black_box(&feet[1]), &spec, RngSeed(0))));
    g.finish();
}

criterion_group!(benches, relu, linear);
criterion_main!(benches);
