use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lyapcert::jump::{delta_search, gaussian_series, stationary_measure, BirthDeathChain};
use lyapcert::moments::{certify, recursion_bounds};
use lyapcert::parse;

fn expressions(c: &mut Criterion) {
    let e = parse("exp((x1^2 + x2^2)/4) * log(1 + x1^2) / (1 + x2^2)", 2).unwrap();
    c.bench_function("eval", |b| b.iter(|| e.eval(black_box(&[0.3, -1.2])).unwrap()));
    c.bench_function("differentiate", |b| b.iter(|| black_box(&e).differentiate(0)));
}

fn moments(c: &mut Criterion) {
    c.bench_function("recursion_bounds_64", |b| b.iter(|| recursion_bounds(black_box(0.25), 0.5, 64).unwrap()));
    c.bench_function("certify_ou", |b| b.iter(|| certify(black_box(0.25), 0.5, 0.4, 64).unwrap()));
}

fn jump(c: &mut Criterion) {
    let t = BirthDeathChain::log_family(2.0, 1.0).tabulate(100_000).unwrap();
    let mu = stationary_measure(&t).unwrap();
    c.bench_function("gaussian_series_1e5", |b| b.iter(|| gaussian_series(&t, &mu, black_box(0.2)).unwrap()));
    c.bench_function("delta_search", |b| b.iter(|| delta_search(black_box(1.0 / 16.0), 3.845).unwrap()));
}

criterion_group!(benches, expressions, moments, jump);
criterion_main!(benches);
