//! Parallel vs single-thread Monte Carlo. Both variants produce identical
//! numbers; only the wall time differs. Without the `parallel` feature the
//! two groups measure the same sequential loop.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pnstein::experiments::{run_corollary_4_3, ExperimentConfig, PnReference};
use pnstein::par;
use pnstein::prodnormal::{mc_mean, PNParams};
use pnstein::testfns::TestFn;
use pnstein::zerobias::{zero_bias_n_samples, BaseDist, ZeroBiasSpec};

const MODES: [(&str, Option<usize>); 2] = [("parallel", None), ("sequential", Some(1))];

fn pn_mean(c: &mut Criterion) {
    let params = PNParams::new(3, 1.0).unwrap();
    let mut g = c.benchmark_group("pn3_cos_mean_1e6");
    g.sample_size(10);
    for (name, threads) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || mc_mean(&params, black_box(7), 1_000_000, |z| z.cos()).mean()))
        });
    }
    g.finish();
}

fn zero_bias(c: &mut Criterion) {
    let spec = ZeroBiasSpec::new(BaseDist::uniform(-1.0, 1.0).unwrap(), 2).unwrap();
    let mut g = c.benchmark_group("zero_bias_uniform_order2_1e6");
    g.sample_size(10);
    for (name, threads) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || zero_bias_n_samples(&spec, black_box(8), 1_000_000).unwrap().len()))
        });
    }
    g.finish();
}

fn corollary(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        m: 64,
        n: 64,
        base_x: BaseDist::rademacher(),
        base_y: BaseDist::rademacher(),
        h: TestFn::named("cos").unwrap(),
        reps: 1_000_000,
        seed: 9,
        pn_reference: PnReference::ClosedForm,
    };
    let mut g = c.benchmark_group("cor43_rademacher_m64_1e6");
    g.sample_size(10);
    for (name, threads) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || run_corollary_4_3(black_box(&cfg)).unwrap().lhs.mean))
        });
    }
    g.finish();
}

criterion_group!(benches, pn_mean, zero_bias, corollary);
criterion_main!(benches);
