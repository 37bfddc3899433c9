use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polispace_bench::{bimodal_sample, hexagon_network, labeled_positions};
use polispace_core::ca::{correspondence_analysis, CaConfig};
use polispace_core::model::filter_network;
use polispace_core::stats::{balanced_logistic_fit, dip_statistic, roc_auc};

fn ca(c: &mut Criterion) {
    let mut group = c.benchmark_group("correspondence_analysis");
    group.sample_size(10);
    for (n, m) in [(2_000, 100), (20_000, 400)] {
        let net = filter_network(&hexagon_network(n, m, 0), 3, None).unwrap().0;
        let cfg = CaConfig { k_dims: 5, ..CaConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{m}")), &net, |b, net| {
            b.iter(|| correspondence_analysis(net, &cfg).unwrap())
        });
    }
    group.finish();
}

fn dip(c: &mut Criterion) {
    let mut group = c.benchmark_group("dip_statistic");
    for n in [100, 10_000] {
        let x = bimodal_sample(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| b.iter(|| dip_statistic(x).unwrap()));
    }
    group.finish();
}

fn classification(c: &mut Criterion) {
    let (x, y) = labeled_positions(5_000, 2);
    c.bench_function("balanced_logistic_fit/5000", |b| b.iter(|| balanced_logistic_fit(&x, &y).unwrap()));
    c.bench_function("roc_auc/5000", |b| b.iter(|| roc_auc(&x, &y).unwrap()));
}

criterion_group!(benches, ca, dip, classification);
criterion_main!(benches);
