use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use annular_dyn::covering::{bohr_analyze, BohrGrid};
use annular_dyn::function::builtin_catalog;
use annular_dyn::moduli::{radial_moduli, DEFAULT_TOL};
use annular_dyn::partition::build_partition;
use annular_dyn::realize::{realize_itinerary, RealizeOptions};
use annular_dyn::synthesis::{count_admissible, JumpRule};
use annular_dyn::{ExtLogReal, TransitionSystem};
use annular_dyn_bench::{flagship_chain, t_grid};

fn bench_moduli(c: &mut Criterion) {
    let mut group = c.benchmark_group("radial_moduli");
    for f in builtin_catalog() {
        group.bench_with_input(BenchmarkId::from_parameter(f.id()), &f, |b, f| {
            b.iter(|| {
                for t in t_grid() {
                    black_box(radial_moduli(f.as_ref(), &t, DEFAULT_TOL).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn bench_partition(c: &mut Criterion) {
    let exp = annular_dyn::function::ExpFn;
    c.bench_function("partition_exp_depth5", |b| {
        b.iter(|| build_partition(&exp, black_box(&ExtLogReal::from_f64(2.0)), 5).unwrap())
    });
}

fn bench_bohr(c: &mut Criterion) {
    let exp = annular_dyn::function::ExpFn;
    let grid = BohrGrid {
        n_mod: 32,
        n_arg: 32,
        ..BohrGrid::default()
    };
    let mut group = c.benchmark_group("bohr_grid");
    group.sample_size(10);
    group.bench_function("exp_r3_32x32", |b| {
        b.iter(|| bohr_analyze(&exp, &ExtLogReal::from_f64(3f64.ln()), &grid, 20.0, 50.0).unwrap())
    });
    group.finish();
}

fn bench_count(c: &mut Criterion) {
    let ts = TransitionSystem::new(vec![1, 3, 5], vec![vec![], vec![0], vec![]], 24, JumpRule::Level).unwrap();
    c.bench_function("count_admissible_len24", |b| b.iter(|| count_admissible(black_box(&ts), 24, 0, 8)));
}

fn bench_realize(c: &mut Criterion) {
    let exp = annular_dyn::function::ExpFn;
    let chain = flagship_chain();
    let mut group = c.benchmark_group("realize");
    group.sample_size(10);
    group.bench_function("flagship_period3_depth5", |b| {
        b.iter(|| realize_itinerary(&exp, &chain, None, &[0, 1, 2, 0, 1, 2], 5, &RealizeOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_moduli, bench_partition, bench_bohr, bench_count, bench_realize);
criterion_main!(benches);
