//! Hot-path benchmarks: one period of SGNS training, a Procrustes fit, a
//! t-SNE run, and the three panel estimators.

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use semnova::align::{orthogonal_procrustes, random_orthogonal};
use semnova::corpus::PeriodCorpus;
use semnova::embedder::{build_vocab, train_sgns, Hyperparams};
use semnova::panel::{fixed_effects, pooled_ols, random_effects};
use semnova::synth::{simulated_panel, PanelSim};
use semnova::viz::{tsne_2d, TsneParams};

fn bench_sgns(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut corpus = PeriodCorpus { period: 2000, ..Default::default() };
    for _ in 0..400 {
        let doc: Vec<String> =
            (0..12).map(|_| format!("w{}", rng.random_range(0..60))).collect();
        corpus.push(doc);
    }
    let vocab = build_vocab(&corpus, 1).unwrap();
    let hp = Hyperparams { dim: 48, epochs: 1, min_count: 1, ..Default::default() };
    c.bench_function("sgns_train_one_epoch_4800_tokens", |b| {
        b.iter(|| black_box(train_sgns(&corpus, &vocab, &hp, 1).unwrap()))
    });
}

fn bench_procrustes(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = DMatrix::from_fn(2000, 100, |_, _| rng.random_range(-1.0..1.0));
    let q = random_orthogonal(100, &mut rng);
    let b_mat = &a * &q;
    c.bench_function("procrustes_2000x100", |b| {
        b.iter(|| black_box(orthogonal_procrustes(&a, &b_mat).unwrap()))
    });
}

fn bench_tsne(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vectors: Vec<Vec<f64>> = (0..80)
        .map(|_| (0..50).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let params = TsneParams { perplexity: 10.0, iterations: 250, seed: 3, ..Default::default() };
    c.bench_function("tsne_80_points_250_iters", |b| {
        b.iter(|| black_box(tsne_2d(&vectors, &params).unwrap()))
    });
}

fn bench_estimators(c: &mut Criterion) {
    let panel = simulated_panel(&PanelSim {
        n_topics: 300,
        n_years: 10,
        sigma_topic: 2.0,
        sigma_noise: 2.0,
        seed: 4,
        ..Default::default()
    });
    c.bench_function("pooled_ols_3000_rows", |b| {
        b.iter(|| black_box(pooled_ols(&panel).unwrap()))
    });
    c.bench_function("fixed_effects_3000_rows", |b| {
        b.iter(|| black_box(fixed_effects(&panel).unwrap()))
    });
    c.bench_function("random_effects_3000_rows", |b| {
        b.iter(|| black_box(random_effects(&panel).unwrap()))
    });
}

criterion_group!(benches, bench_sgns, bench_procrustes, bench_tsne, bench_estimators);
criterion_main!(benches);
