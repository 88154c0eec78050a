use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use gridopf_bench::split;
use gridopf_core::dopf::{macro_iterate, DopfOptions};
use gridopf_core::opf::{solve_copf, OpfOptions};
use gridopf_core::powerflow::{nominal_dispatch, solve_powerflow};

fn powerflow(c: &mut Criterion) {
    for name in ["feeder15.toml", "feeder123.toml"] {
        let (f, _) = split(name);
        let dispatch = nominal_dispatch(&f);
        c.bench_function(&format!("powerflow/{name}"), |b| {
            b.iter(|| solve_powerflow(black_box(&f), &dispatch, f.v_sub2).unwrap())
        });
    }
}

fn copf(c: &mut Criterion) {
    let (f, _) = split("feeder15.toml");
    c.bench_function("copf/feeder15", |b| {
        b.iter(|| solve_copf(black_box(&f), &OpfOptions::default()).unwrap())
    });
}

fn dopf(c: &mut Criterion) {
    let mut g = c.benchmark_group("dopf");
    g.sample_size(20);
    let (f, part) = split("feeder15.toml");
    for parallel in [false, true] {
        let opts = DopfOptions {
            parallel,
            ..DopfOptions::default()
        };
        let label = if parallel { "parallel" } else { "serial" };
        g.bench_function(format!("feeder15/{label}"), |b| {
            b.iter(|| macro_iterate(black_box(&f), &part, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, powerflow, copf, dopf);
criterion_main!(benches);
