use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mlinbound_core::engine::{apply_atomsum, apply_dense, AtomSymbol, DenseSymbol};
use mlinbound_core::lattice::{split_columns, CoeffMap};
use mlinbound_core::wavelet::{analyze, AtomFamily, DyadicField, MotherWavelets};
use mlinbound_core::{Complex64, GridFunction, LatticeSet, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_function(grid: TorusGrid, rng: &mut ChaCha8Rng) -> GridFunction {
    let v = (0..grid.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    GridFunction::new(grid, v).unwrap()
}

fn dense(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("apply_dense_m2");
    for g in [64usize, 128, 256] {
        let grid = TorusGrid::new(1, g, 8.0).unwrap();
        let sigma = DenseSymbol::from_fn(grid, 2, |xi| Complex64::new((-(xi[0] * xi[0] + xi[1] * xi[1])).exp(), 0.0))
            .unwrap();
        let f = random_function(grid, &mut rng);
        let h = random_function(grid, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(g), &g, |b, _| {
            b.iter(|| apply_dense(black_box(&sigma), &[&f, &h]).unwrap())
        });
    }
    group.finish();
}

fn atomsum(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = TorusGrid::new(1, 400, 8.0).unwrap();
    let family = AtomFamily::bump(0.75).unwrap();
    let mut group = c.benchmark_group("apply_atomsum_m2");
    for side in [4i64, 8, 16] {
        let mut coeffs = CoeffMap::new(1, 2);
        for k1 in 0..side {
            for k2 in 0..side {
                let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                coeffs.coeffs.insert(vec![k1 - side / 2, k2 - side / 2], Complex64::new(s, 0.0));
            }
        }
        let sigma = AtomSymbol::bump(0, family.clone(), coeffs).unwrap();
        let f = random_function(grid, &mut rng);
        let h = random_function(grid, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(side * side), &side, |b, _| {
            b.iter(|| apply_atomsum(black_box(&sigma), &[&f, &h]).unwrap())
        });
    }
    group.finish();
}

fn split(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut group = c.benchmark_group("split_columns_m3");
    for size in [100usize, 500, 2000] {
        let mut u = LatticeSet::new(1, 3).unwrap();
        while u.len() < size {
            u.insert((0..3).map(|_| rng.gen_range(-12i64..=12)).collect()).unwrap();
        }
        group.bench_with_input(BenchmarkId::from_parameter(size), &size, |b, &n| {
            b.iter(|| split_columns(black_box(&u), n).unwrap())
        });
    }
    group.finish();
}

fn wavelet_analysis(c: &mut Criterion) {
    let w = MotherWavelets::build(3).unwrap();
    let mut field = DyadicField::cube(2, 7, -2.0, 2.0);
    field.fill(|x| Complex64::new((-4.0 * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
    c.bench_function("analyze_2d_lambda4", |b| b.iter(|| analyze(black_box(&field), &w, 4).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = dense, atomsum, split, wavelet_analysis
}
criterion_main!(benches);
