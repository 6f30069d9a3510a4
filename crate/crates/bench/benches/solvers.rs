use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use homog_bench::{checkerboard_box, checkerboard_torus};
use homog_core::correctors::CorrectorSet;
use homog_core::pde::{assemble_operator, solve, Preconditioner, SolveOptions};

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble");
    for n in [64, 256] {
        let (a, dom) = checkerboard_torus(2, n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| assemble_operator(&a, &dom, 0.0).unwrap())
        });
    }
    g.finish();
}

fn pcg(c: &mut Criterion) {
    let mut g = c.benchmark_group("pcg_box");
    g.sample_size(10);
    let (a, dom, rhs) = checkerboard_box(129);
    let op = assemble_operator(&a, &dom, 0.0).unwrap();
    for (name, pre) in [
        ("jacobi", Preconditioner::Jacobi),
        ("spectral", Preconditioner::Spectral),
    ] {
        let opts = SolveOptions {
            preconditioner: pre,
            ..SolveOptions::default()
        };
        g.bench_function(name, |b| b.iter(|| solve(&op, &rhs, None, &opts).unwrap()));
    }
    g.finish();
}

fn correctors(c: &mut Criterion) {
    let mut g = c.benchmark_group("correctors");
    g.sample_size(10);
    let (a, _) = checkerboard_torus(2, 64);
    let opts = SolveOptions::default();
    g.bench_function("phi_64", |b| {
        b.iter(|| CorrectorSet::compute_phi(&a, &opts).unwrap())
    });
    g.bench_function("phi_sigma_64", |b| {
        b.iter(|| CorrectorSet::compute(&a, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, assembly, pcg, correctors);
criterion_main!(benches);
