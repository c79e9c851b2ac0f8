//! Skip-gram with negative sampling, trained per period.
//!
//! One embedding model is trained per calendar year on that year's token
//! streams. Training minimizes, for every (center, context) pair inside a
//! dynamically shrunk window, the loss
//!
//! ```text
//! L = −log σ(u·v) − Σ_j log σ(−u·n_j)
//! ```
//!
//! where `u` is the center word's input vector, `v` the context word's output
//! vector, and `n_j` the output vectors of `k` sampled negatives.
//!
//! Concurrency model follows the classic lock-free scheme: workers share the
//! weight matrices through relaxed atomics and race benignly. `workers = 1`
//! is exactly reproducible for a fixed seed and is what the test suites use.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::PeriodCorpus;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vocabulary is empty after filtering at min_count {0}")]
    EmptyVocabulary(u64),
    #[error("invalid hyperparameter {field}: {reason}")]
    InvalidHyperparam { field: &'static str, reason: String },
    #[error("vocabulary does not match corpus: token {token:?} has corpus count {corpus}, vocab count {vocab}")]
    VocabCorpusMismatch { token: String, corpus: u64, vocab: u64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("vector length mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
}

/// Token inventory for one period: row ids are assigned by descending corpus
/// count, ties broken by token string, so vocabulary construction is
/// deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Assemble a vocabulary directly from (token, count) pairs. Counts below
    /// `min_count` are rejected by [`build_vocab`]; this constructor trusts
    /// its input (used when reloading persisted models, where counts may be
    /// unknown and recorded as zero).
    pub fn from_counts(pairs: Vec<(String, u64)>) -> Self {
        let mut pairs = pairs;
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut index = HashMap::with_capacity(pairs.len());
        let mut tokens = Vec::with_capacity(pairs.len());
        let mut counts = Vec::with_capacity(pairs.len());
        for (tok, c) in pairs {
            index.insert(tok.clone(), tokens.len());
            tokens.push(tok);
            counts.push(c);
        }
        Vocabulary { tokens, index, counts }
    }

    /// Preserve an explicit token order (trusted, e.g. from a model file).
    pub fn from_ordered(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        let index =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect::<HashMap<_, _>>();
        Vocabulary { tokens, index, counts }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn count_of(&self, token: &str) -> Option<u64> {
        self.id_of(token).map(|i| self.counts[i])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Build the vocabulary of a period corpus, dropping tokens seen fewer than
/// `min_count` times.
pub fn build_vocab(corpus: &PeriodCorpus, min_count: u64) -> Result<Vocabulary, EmbedError> {
    let pairs: Vec<(String, u64)> = corpus
        .token_counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(t, &c)| (t.clone(), c))
        .collect();
    if pairs.is_empty() {
        return Err(EmbedError::EmptyVocabulary(min_count));
    }
    Ok(Vocabulary::from_counts(pairs))
}

/// Training hyperparameters. Defaults: 100 dimensions, window 5, 5 negatives,
/// 5 epochs, learning rate 0.025 decaying linearly to 1e-4, min_count 5,
/// unigram distribution raised to 0.75 for negative sampling.
#[derive(Debug, Clone)]
pub struct Hyperparams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub min_count: u64,
    pub unigram_power: f64,
    pub seed: u64,
    /// Frequent-word subsampling threshold; off unless set.
    pub subsample: Option<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_learning_rate: 0.025,
            min_count: 5,
            unigram_power: 0.75,
            seed: 0,
            subsample: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let err = |field, reason: String| Err(EmbedError::InvalidHyperparam { field, reason });
        if self.dim == 0 {
            return err("dim", "must be > 0".into());
        }
        if self.window == 0 {
            return err("window", "must be > 0".into());
        }
        if !(self.initial_learning_rate > 0.0) {
            return err("initial_learning_rate", format!("{} not > 0", self.initial_learning_rate));
        }
        if !(0.0..=1.0).contains(&self.unigram_power) {
            return err("unigram_power", format!("{} outside [0, 1]", self.unigram_power));
        }
        Ok(())
    }
}

/// One classification example of the SGNS objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingPair {
    pub center: usize,
    pub context: usize,
    pub label: PairLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Positive,
    Negative,
}

/// Unigram^power sampling table. Slot allocation is cumulative, so each
/// token's realized probability is within 1/len of count^power / Σ count^power.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    slots: Vec<u32>,
}

impl NegativeTable {
    pub fn build(vocab: &Vocabulary, power: f64, size: usize) -> Self {
        assert!(!vocab.is_empty(), "negative table needs a nonempty vocabulary");
        assert!(size > 0, "negative table needs at least one slot");
        let weights: Vec<f64> = vocab.counts().iter().map(|&c| (c as f64).powf(power)).collect();
        let total: f64 = weights.iter().sum();
        let mut slots = Vec::with_capacity(size);
        let mut cum = 0.0;
        let mut prev_fill = 0usize;
        for (id, w) in weights.iter().enumerate() {
            cum += w / total;
            let fill = ((cum * size as f64) as usize).min(size);
            for _ in prev_fill..fill {
                slots.push(id as u32);
            }
            prev_fill = fill;
        }
        // cumulative rounding can undershoot by one slot at the end
        while slots.len() < size {
            slots.push((vocab.len() - 1) as u32);
        }
        NegativeTable { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        self.slots[rng.random_range(0..self.slots.len())] as usize
    }

    #[cfg(test)]
    fn frequency(&self, id: usize) -> f64 {
        let hits = self.slots.iter().filter(|&&s| s as usize == id).count();
        hits as f64 / self.slots.len() as f64
    }
}

/// Per-period embedding model: input vectors are the word embeddings proper,
/// output vectors are the context-side weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub period: i32,
    pub vocab: Vocabulary,
    pub dim: usize,
    /// |V|×dim, row-major.
    pub input: Vec<f32>,
    /// Context weights, same shape; absent when a persisted model omitted them.
    pub output: Option<Vec<f32>>,
}

impl EmbeddingMatrix {
    pub fn row(&self, id: usize) -> &[f32] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.vocab.id_of(token).map(|id| self.row(id))
    }

    pub fn assert_finite(&self) -> Result<(), EmbedError> {
        if self.input.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite("input vectors"));
        }
        if let Some(out) = &self.output {
            if out.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite("output vectors"));
            }
        }
        Ok(())
    }
}

/// Gradients of the pair loss with respect to each participating vector.
#[derive(Debug, Clone)]
pub struct PairGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss and exact gradients of one positive pair with its sampled negatives:
/// `L = −log σ(u·v) − Σ_j log σ(−u·n_j)`.
pub fn sgns_pair_objective(
    center: &[f64],
    context: &[f64],
    negatives: &[Vec<f64>],
) -> Result<(f64, PairGradients), EmbedError> {
    let d = center.len();
    if context.len() != d {
        return Err(EmbedError::DimMismatch { expected: d, got: context.len() });
    }
    for n in negatives {
        if n.len() != d {
            return Err(EmbedError::DimMismatch { expected: d, got: n.len() });
        }
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !finite(center) || !finite(context) || !negatives.iter().all(|n| finite(n)) {
        return Err(EmbedError::NonFinite("pair objective input"));
    }

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let uv = dot(center, context);
    let mut loss = -log_sigmoid(uv);
    let mut grad_center = vec![0.0; d];
    // ∂L/∂v = (σ(u·v) − 1)·u ; ∂L/∂u gets (σ(u·v) − 1)·v
    let coeff_pos = sigmoid(uv) - 1.0;
    let grad_context: Vec<f64> = center.iter().map(|&u| coeff_pos * u).collect();
    for (g, &v) in grad_center.iter_mut().zip(context) {
        *g += coeff_pos * v;
    }

    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for n in negatives {
        let un = dot(center, n);
        loss -= log_sigmoid(-un);
        // ∂L/∂n = σ(u·n)·u ; ∂L/∂u gets σ(u·n)·n
        let coeff = sigmoid(un);
        grad_negatives.push(center.iter().map(|&u| coeff * u).collect());
        for (g, &nv) in grad_center.iter_mut().zip(n) {
            *g += coeff * nv;
        }
    }

    Ok((loss, PairGradients { center: grad_center, context: grad_context, negatives: grad_negatives }))
}

/// f32 cell shared across workers without locks. Relaxed ordering: racing
/// updates may lose writes, which SGNS tolerates.
#[derive(Default)]
struct SharedCell {
    bits: AtomicU32,
}

impl SharedCell {
    fn get(&self) -> f32 {
        f32::from_bits(self.bits.load(Ordering::Relaxed))
    }

    fn set(&self, v: f32) {
        self.bits.store(v.to_bits(), Ordering::Relaxed);
    }

    fn add(&self, v: f32) {
        self.set(self.get() + v);
    }
}

struct SharedMatrix {
    cells: Vec<SharedCell>,
    dim: usize,
}

impl SharedMatrix {
    fn zeros(rows: usize, dim: usize) -> Self {
        let mut cells = Vec::with_capacity(rows * dim);
        cells.resize_with(rows * dim, SharedCell::default);
        for c in &cells {
            c.set(0.0);
        }
        SharedMatrix { cells, dim }
    }

    fn read_row(&self, row: usize, buf: &mut [f32]) {
        let base = row * self.dim;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = self.cells[base + i].get();
        }
    }

    fn add_scaled(&self, row: usize, coef: f32, src: &[f32]) {
        let base = row * self.dim;
        for (i, &s) in src.iter().enumerate() {
            self.cells[base + i].add(coef * s);
        }
    }

    fn dot_row(&self, row: usize, other: &[f32]) -> f32 {
        let base = row * self.dim;
        other.iter().enumerate().map(|(i, &o)| self.cells[base + i].get() * o).sum()
    }

    fn to_vec(&self) -> Vec<f32> {
        self.cells.iter().map(SharedCell::get).collect()
    }
}

const LEARNING_RATE_FLOOR: f64 = 1e-4;
const NEGATIVE_RESAMPLE_TRIES: usize = 8;

/// Emit every (center, context, negatives) group of one document in the order
/// training consumes them, drawing window sizes and negatives from `rng`.
/// Used by both the SGD loop and tests that replay an identical pair stream.
fn for_each_doc_pair(
    ids: &[usize],
    window: usize,
    k: usize,
    table: &NegativeTable,
    rng: &mut ChaCha8Rng,
    mut f: impl FnMut(usize, usize, usize, &[usize]),
) {
    let mut negs = Vec::with_capacity(k);
    for (pos, &center) in ids.iter().enumerate() {
        let b = rng.random_range(1..=window);
        let lo = pos.saturating_sub(b);
        let hi = (pos + b).min(ids.len() - 1);
        for j in lo..=hi {
            if j == pos {
                continue;
            }
            let context = ids[j];
            negs.clear();
            for _ in 0..k {
                let mut tries = 0;
                loop {
                    let cand = table.sample(rng);
                    if cand != context {
                        negs.push(cand);
                        break;
                    }
                    tries += 1;
                    if tries >= NEGATIVE_RESAMPLE_TRIES {
                        break;
                    }
                }
            }
            f(pos, center, context, &negs);
        }
    }
}

fn subsample_keep(rng: &mut ChaCha8Rng, threshold: f64, freq: f64) -> bool {
    if freq <= threshold {
        return true;
    }
    let keep = (threshold / freq).sqrt();
    rng.random_range(0.0..1.0) < keep
}

fn worker_seed(seed: u64, worker: usize) -> u64 {
    seed ^ (worker as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(worker as u64)
}

/// Train one period's embedding. `workers = 1` is deterministic for a fixed
/// seed; more workers trade reproducibility for speed.
pub fn train_sgns(
    corpus: &PeriodCorpus,
    vocab: &Vocabulary,
    hp: &Hyperparams,
    workers: usize,
) -> Result<EmbeddingMatrix, EmbedError> {
    hp.validate()?;
    for (id, token) in vocab.tokens().iter().enumerate() {
        let corpus_count = corpus.token_counts.get(token).copied().unwrap_or(0);
        if corpus_count != vocab.count(id) {
            return Err(EmbedError::VocabCorpusMismatch {
                token: token.clone(),
                corpus: corpus_count,
                vocab: vocab.count(id),
            });
        }
    }
    let workers = workers.max(1);
    let n = vocab.len();
    let d = hp.dim;

    // init: input rows uniform in [−0.5/d, 0.5/d], output all zero
    let input = SharedMatrix::zeros(n, d);
    let output = SharedMatrix::zeros(n, d);
    {
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let half = 0.5 / d as f32;
        for cell in &input.cells {
            cell.set(rng.random_range(-half..half));
        }
    }

    if hp.epochs > 0 && !corpus.documents.is_empty() {
        let table = NegativeTable::build(vocab, hp.unigram_power, negative_table_size(n));
        let doc_ids: Vec<Vec<usize>> = corpus
            .documents
            .iter()
            .map(|doc| doc.iter().filter_map(|t| vocab.id_of(t)).collect())
            .collect();
        let total_tokens: u64 = vocab.counts().iter().sum();
        let total_positions: u64 =
            doc_ids.iter().map(|d| d.len() as u64).sum::<u64>() * hp.epochs as u64;
        let progress = AtomicU64::new(0);
        let floor = LEARNING_RATE_FLOOR.min(hp.initial_learning_rate);

        let run_worker = |w: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(hp.seed, w));
            let mut center_buf = vec![0.0f32; d];
            let mut center_grad = vec![0.0f32; d];
            let mut target_buf = vec![0.0f32; d];
            let mut kept: Vec<usize> = Vec::new();
            for _epoch in 0..hp.epochs {
                for ids in doc_ids.iter().skip(w).step_by(workers) {
                    kept.clear();
                    match hp.subsample {
                        Some(t) => {
                            for &id in ids {
                                let freq = vocab.count(id) as f64 / total_tokens as f64;
                                if subsample_keep(&mut rng, t, freq) {
                                    kept.push(id);
                                }
                            }
                        }
                        None => kept.extend_from_slice(ids),
                    }
                    if kept.is_empty() {
                        continue;
                    }
                    let mut last_pos = usize::MAX;
                    let mut alpha = hp.initial_learning_rate as f32;
                    for_each_doc_pair(
                        &kept,
                        hp.window,
                        hp.negatives,
                        &table,
                        &mut rng,
                        |pos, center, context, negs| {
                            if pos != last_pos {
                                let done = progress.fetch_add(1, Ordering::Relaxed);
                                let frac = done as f64 / total_positions.max(1) as f64;
                                alpha = (hp.initial_learning_rate * (1.0 - frac)).max(floor)
                                    as f32;
                                last_pos = pos;
                            }
                            input.read_row(center, &mut center_buf);
                            center_grad.iter_mut().for_each(|g| *g = 0.0);
                            // positive pair: label 1
                            sgd_target(
                                &output,
                                context,
                                1.0,
                                alpha,
                                &center_buf,
                                &mut center_grad,
                                &mut target_buf,
                            );
                            for &neg in negs {
                                sgd_target(
                                    &output,
                                    neg,
                                    0.0,
                                    alpha,
                                    &center_buf,
                                    &mut center_grad,
                                    &mut target_buf,
                                );
                            }
                            input.add_scaled(center, 1.0, &center_grad);
                        },
                    );
                }
            }
        };

        if workers == 1 {
            run_worker(0);
        } else {
            let run_worker = &run_worker;
            std::thread::scope(|scope| {
                for w in 0..workers {
                    scope.spawn(move || run_worker(w));
                }
            });
        }
    }

    let matrix = EmbeddingMatrix {
        period: corpus.period,
        vocab: vocab.clone(),
        dim: d,
        input: input.to_vec(),
        output: Some(output.to_vec()),
    };
    matrix.assert_finite()?;
    Ok(matrix)
}

/// One output-side update: `v += α(label − σ(u·v))u`, accumulating the
/// matching share of the center gradient into `center_grad`.
fn sgd_target(
    output: &SharedMatrix,
    target: usize,
    label: f32,
    alpha: f32,
    center: &[f32],
    center_grad: &mut [f32],
    target_buf: &mut [f32],
) {
    output.read_row(target, target_buf);
    let dot = output.dot_row(target, center);
    let g = (label - sigmoid(dot as f64) as f32) * alpha;
    for (cg, &tv) in center_grad.iter_mut().zip(target_buf.iter()) {
        *cg += g * tv;
    }
    output.add_scaled(target, g, center);
}

fn negative_table_size(vocab_len: usize) -> usize {
    (vocab_len * 1000).clamp(10_000, 10_000_000)
}
