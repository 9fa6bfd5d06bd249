use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use waver_bench::{corpus, random_matrix, training_state, vocab};
use waver_core::distill::cross_attend;
use waver_core::eval::rank_targets;
use waver_core::train::train_step;
use waver_core::vcd::top_k_vocab;

fn bench_cross_attend(c: &mut Criterion) {
    let mut group = c.benchmark_group("cross_attend");
    for l in [64, 512, 2048] {
        let corpus = corpus(l, 512);
        let frames = random_matrix(5, 12, 512);
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            b.iter(|| cross_attend(black_box(&frames), &corpus).unwrap())
        });
    }
    group.finish();
}

fn bench_top_k(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_k_vocab");
    for u in [1_000, 10_000] {
        let vocab = vocab(u, 512);
        let e = random_matrix(6, 1, 512).into_vec();
        group.bench_with_input(BenchmarkId::from_parameter(u), &u, |b, _| {
            b.iter(|| top_k_vocab(black_box(&e), &vocab, 5).unwrap())
        });
    }
    group.finish();
}

fn bench_train_step(c: &mut Criterion) {
    let (mut model, mut optimizer, data) = training_state(126, 512);
    let batch = data.pairs.clone();
    c.bench_function("train_step/B126_D512", |b| {
        b.iter(|| train_step(&mut model, &mut optimizer, &data, black_box(&batch)).unwrap())
    });
}

fn bench_ranking(c: &mut Criterion) {
    let sim = random_matrix(7, 1000, 1000);
    let truth: Vec<usize> = (0..1000).collect();
    c.bench_function("rank_targets/1000x1000", |b| {
        b.iter(|| rank_targets(black_box(&sim), &truth).unwrap())
    });
}

criterion_group!(
    benches,
    bench_cross_attend,
    bench_top_k,
    bench_train_step,
    bench_ranking
);
criterion_main!(benches);
