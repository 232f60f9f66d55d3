use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use htl_core::convolve::{convolve_with, stopped_sum, Method, StoppingLaw};
use htl_core::{AnalyticDistribution, GridMeasure, GridSpec};
use std::hint::black_box;

fn pareto(cells: usize) -> GridMeasure {
    let spec = GridSpec::nonnegative(0.5, cells as f64 * 0.5).unwrap();
    AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec)
}

// where the direct kernel stops paying off
fn direct_vs_fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("square");
    for cells in [64, 256, 1024, 4096] {
        let m = pareto(cells);
        for (name, method) in [("direct", Method::Direct), ("fft", Method::Fft)] {
            g.bench_with_input(BenchmarkId::new(name, cells), &m, |b, m| {
                b.iter(|| convolve_with(black_box(m), black_box(m), method).unwrap())
            });
        }
    }
    g.finish();
}

fn stopped_sums(c: &mut Criterion) {
    let mut g = c.benchmark_group("stopped_sum");
    g.sample_size(20);
    let m = pareto(4096);
    for (name, law) in [
        ("poisson(2)", StoppingLaw::poisson(2.0).unwrap()),
        ("geometric(0.5)", StoppingLaw::geometric(0.5).unwrap()),
    ] {
        g.bench_function(name, |b| {
            b.iter(|| stopped_sum(black_box(&m), &law).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, direct_vs_fft, stopped_sums);
criterion_main!(benches);
