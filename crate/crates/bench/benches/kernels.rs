use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use nlcorr_core::groups::{sums_joint, DiscreteLaw, GroupSystem};
use nlcorr_core::hermite::{expand, gauss_hermite_rule};
use nlcorr_core::maxcorr::exact_extremes;
use nlcorr_core::rng::stream_rng;
use nlcorr_core::spectra::random::random_corr;
use nlcorr_core::spectra::{brownian_corr_kernel, extreme_eigs, nystrom_eigs, KernelGrid};
use nlcorr_core::WeightMatrix;

fn eigs(c: &mut Criterion) {
    let mut group = c.benchmark_group("extreme_eigs");
    for p in [50, 200, 400] {
        let sigma = random_corr(p, &mut stream_rng(1, p as u64));
        group.bench_with_input(BenchmarkId::from_parameter(p), &sigma, |b, s| {
            b.iter(|| extreme_eigs(black_box(s.as_sym())))
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_extremes");
    group.sample_size(20);
    for m in [vec![1, 2, 3], vec![2, 3, 5, 6]] {
        let g = GroupSystem::nested(&m).unwrap();
        let joint = sums_joint(&g, &DiscreteLaw::rademacher()).unwrap();
        let w = WeightMatrix::ones(m.len());
        let label = m.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| exact_extremes(black_box(&joint), &w).unwrap())
        });
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("quadrature");
    for n in [32, 96, 160] {
        group.bench_with_input(BenchmarkId::new("rule", n), &n, |b, &n| b.iter(|| gauss_hermite_rule(n).unwrap()));
    }
    let rule = gauss_hermite_rule(96).unwrap();
    group.bench_function("expand_sign_M16", |b| b.iter(|| expand(|x| x.signum(), 16, black_box(&rule)).unwrap()));
    group.finish();
}

fn nystrom(c: &mut Criterion) {
    let mut group = c.benchmark_group("nystrom_brownian");
    group.sample_size(10);
    for n in [200, 500, 1000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| nystrom_eigs(&KernelGrid::midpoint(n, brownian_corr_kernel).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, eigs, oracle, quadrature, nystrom);
criterion_main!(benches);
