//! Compares the rayon-backed data-parallel paths against the sequential
//! fallback within one build: feature assembly over a full snapshot,
//! batch gradient accumulation, and batch scoring.
//!
//! Run with `cargo bench -p streamsift`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use streamsift::batch::{chunked_fold, chunked_fold_seq, map_collect, map_collect_seq};
use streamsift::events::map_record;
use streamsift::features::{assemble_features, digest_snapshot, FeatureLayout, RecordDigest};
use streamsift::ingest::RawRecord;
use streamsift::mlp::{cross_entropy, gradient, init_network};
use streamsift::synth::{generate_records, SynthConfig};
use streamsift::window::{SlidingWindow, WindowSnapshot};

fn build_snapshot(n_records: usize) -> WindowSnapshot {
    let cfg = SynthConfig {
        rate: 100.0,
        duration_secs: n_records as f64 / 100.0,
        seed: 7,
        ..Default::default()
    };
    let mut window = SlidingWindow::new(3_600_000, 10_000);
    for record in generate_records(&cfg) {
        for event in map_record(&record) {
            window.insert_event(event).unwrap();
        }
    }
    let now = window.now_ms();
    window.snapshot(1, now)
}

fn bench_feature_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("feature_assembly");
    group.sample_size(10);
    for n in [1_000usize, 5_000] {
        let snap = build_snapshot(n);
        let digests = digest_snapshot(&snap);
        let layout = FeatureLayout::default();
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| {
                black_box(map_collect(&digests, |d: &RecordDigest| {
                    assemble_features(d, &snap, layout)
                }))
            })
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| {
                black_box(map_collect_seq(&digests, |d: &RecordDigest| {
                    assemble_features(d, &snap, layout)
                }))
            })
        });
    }
    group.finish();
}

fn random_batch(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let xs = (0..n).map(|_| (0..15).map(|_| rng.random()).collect()).collect();
    let ys = (0..n).map(|_| f64::from(rng.random::<bool>())).collect();
    (xs, ys)
}

fn bench_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_gradient");
    group.sample_size(10);
    let model = init_network(15, 10, 1);
    for n in [4_096usize, 16_384] {
        let (xs, ys) = random_batch(n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| black_box(gradient(&model, &xs, &ys)))
        });
        // The sequential path reuses the same chunking, so results are
        // bit-identical; only the scheduling differs.
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| {
                let n_params = model.params.len();
                black_box(chunked_fold_seq(
                    xs.len(),
                    |range| {
                        let sub_xs = &xs[range.clone()];
                        let sub_ys = &ys[range];
                        gradient(&model, sub_xs, sub_ys)
                    },
                    |mut a: Vec<f64>, b: Vec<f64>| {
                        for (ai, bi) in a.iter_mut().zip(&b) {
                            *ai += bi;
                        }
                        a
                    },
                    vec![0.0; n_params],
                ))
            })
        });
    }
    group.finish();
}

fn bench_scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_scoring");
    group.sample_size(10);
    let model = init_network(15, 10, 2);
    let (xs, _) = random_batch(20_000);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(map_collect(&xs, |x: &Vec<f64>| model.forward(x))))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(map_collect_seq(&xs, |x: &Vec<f64>| model.forward(x))))
    });
    group.finish();
}

fn bench_loss(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_loss");
    group.sample_size(10);
    let model = init_network(15, 10, 4);
    let (xs, ys) = random_batch(16_384);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(cross_entropy(&model, &xs, &ys)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            black_box(chunked_fold_seq(
                xs.len(),
                |range| cross_entropy(&model, &xs[range.clone()], &ys[range]),
                |a, b| a + b,
                0.0,
            ))
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_feature_assembly,
    bench_gradient,
    bench_scoring,
    bench_loss
);
criterion_main!(benches);
