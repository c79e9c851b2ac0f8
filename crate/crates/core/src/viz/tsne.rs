//! Exact t-SNE for the small term sets a semantic-change map plots.
//!
//! Per-point Gaussian bandwidths are found by binary search so that each
//! conditional distribution's Shannon entropy (bits) matches log₂(perplexity)
//! within 1e-5. The joint P is the symmetrized average; the 2-D layout
//! minimizes KL(P‖Q) with a Student-t low-dimensional kernel by gradient
//! descent with momentum and a short early-exaggeration phase.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::VizError;

/// Bandwidth search precision on the entropy (bits).
const ENTROPY_TOL: f64 = 1e-5;
const MAX_BANDWIDTH_STEPS: usize = 200;

#[derive(Debug, Clone)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations that run with the exaggerated P.
    pub exaggeration_iters: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 10.0,
            iterations: 1000,
            seed: 0,
            learning_rate: 200.0,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
        }
    }
}

/// Pairwise squared Euclidean distances, row-major n×n.
fn squared_distances(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist: f64 =
                vectors[i].iter().zip(&vectors[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = dist;
            d[j * n + i] = dist;
        }
    }
    d
}

/// Conditional distribution of row i at precision beta, returning its
/// entropy in bits.
fn row_entropy_bits(dist_row: &[f64], i: usize, beta: f64, p_out: &mut [f64]) -> f64 {
    let n = dist_row.len();
    let mut sum = 0.0;
    for j in 0..n {
        p_out[j] = if j == i { 0.0 } else { (-beta * dist_row[j]).exp() };
        sum += p_out[j];
    }
    if sum <= 0.0 {
        // degenerate: all mass collapsed; entropy 0
        for p in p_out.iter_mut() {
            *p = 0.0;
        }
        return 0.0;
    }
    let mut entropy = 0.0;
    for p in p_out.iter_mut() {
        *p /= sum;
        if *p > 0.0 {
            entropy -= *p * p.log2();
        }
    }
    entropy
}

/// Conditional probabilities P(j|i) with per-row bandwidths matched to the
/// target perplexity. Row-major n×n, diagonal zero, rows sum to one.
pub(crate) fn conditional_probabilities(
    vectors: &[Vec<f64>],
    perplexity: f64,
) -> Result<Vec<f64>, VizError> {
    let n = vectors.len();
    if n < 4 {
        return Err(VizError::TooFewPoints(n));
    }
    if !(1.0 <= perplexity && perplexity < (n as f64 - 1.0) / 3.0) {
        return Err(VizError::InfeasiblePerplexity { n, perplexity });
    }
    let target = perplexity.log2();
    let distances = squared_distances(vectors);
    let mut p = vec![0.0; n * n];
    let mut row_buf = vec![0.0; n];
    for i in 0..n {
        let row = &distances[i * n..(i + 1) * n];
        let mut beta = 1.0;
        let mut beta_lo = f64::NEG_INFINITY;
        let mut beta_hi = f64::INFINITY;
        let mut entropy = row_entropy_bits(row, i, beta, &mut row_buf);
        for _ in 0..MAX_BANDWIDTH_STEPS {
            let diff = entropy - target;
            if diff.abs() <= ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                beta_lo = beta;
                beta = if beta_hi.is_infinite() { beta * 2.0 } else { (beta + beta_hi) / 2.0 };
            } else {
                beta_hi = beta;
                beta = if beta_lo.is_infinite() { beta / 2.0 } else { (beta + beta_lo) / 2.0 };
            }
            entropy = row_entropy_bits(row, i, beta, &mut row_buf);
        }
        p[i * n..(i + 1) * n].copy_from_slice(&row_buf);
    }
    Ok(p)
}

/// Symmetrized joint distribution `P_ij = (P(j|i) + P(i|j)) / 2n`.
pub(crate) fn joint_probabilities(conditional: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    let norm = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) / norm;
        }
    }
    p
}

/// Exact t-SNE to two dimensions; deterministic for a fixed seed.
pub fn tsne_2d(vectors: &[Vec<f64>], params: &TsneParams) -> Result<Vec<[f64; 2]>, VizError> {
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(VizError::NonFinite("t-SNE input"));
    }
    let n = vectors.len();
    let conditional = conditional_probabilities(vectors, params.perplexity)?;
    let p = joint_probabilities(&conditional, n);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut gauss = || {
        let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [gauss() * 1e-2, gauss() * 1e-2]).collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut q = vec![0.0; n * n];
    let mut grad = vec![[0.0f64; 2]; n];

    for iter in 0..params.iterations {
        let exaggeration =
            if iter < params.exaggeration_iters { params.early_exaggeration } else { 1.0 };
        // Student-t affinities in the embedding
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i * n + j] = w;
                q[j * n + i] = w;
                q_sum += 2.0 * w;
            }
        }
        // gradient: 4 Σ_j (p_ij·ex − q_ij) w_ij (y_i − y_j)
        for g in grad.iter_mut() {
            *g = [0.0, 0.0];
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = q[i * n + j];
                let q_ij = (w / q_sum).max(1e-12);
                let coef = 4.0 * (exaggeration * p[i * n + j] - q_ij) * w;
                grad[i][0] += coef * (y[i][0] - y[j][0]);
                grad[i][1] += coef * (y[i][1] - y[j][1]);
            }
        }
        let momentum = if iter < 250 { 0.5 } else { 0.8 };
        for i in 0..n {
            for c in 0..2 {
                velocity[i][c] = momentum * velocity[i][c] - params.learning_rate * grad[i][c];
                y[i][c] += velocity[i][c];
            }
        }
        // recentre to keep coordinates bounded
        let mean = y.iter().fold([0.0f64; 2], |m, p| [m[0] + p[0], m[1] + p[1]]);
        let mean = [mean[0] / n as f64, mean[1] / n as f64];
        for p in y.iter_mut() {
            p[0] -= mean[0];
            p[1] -= mean[1];
        }
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(VizError::NonFinite("t-SNE output"));
    }
    Ok(y)
}
