//! Alignment of per-period embeddings into one coordinate frame.
//!
//! Independently trained embedding spaces differ by an arbitrary rotation of
//! weight initialization, so vectors of the same token are not comparable
//! across periods. Each step fits the orthogonal matrix `R` minimizing
//! `‖A·R − B‖_F` over the vocabulary shared by adjacent periods (solved by
//! the SVD of `AᵀB`), then applies `R` to every row of the later period.
//! Steps chain left to right, so the earliest period anchors the frame.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::embedder::EmbeddingMatrix;
use crate::temb::RotationRecord;

/// Rotations must satisfy ‖RᵀR − I‖_max below this bound.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("shape mismatch: A is {a_rows}×{a_cols}, B is {b_rows}×{b_cols}")]
    ShapeMismatch { a_rows: usize, a_cols: usize, b_rows: usize, b_cols: usize },
    #[error("matrices must have at least one row")]
    Empty,
    #[error("non-finite value in input matrices")]
    NonFinite,
    #[error("need at least two periods to align, got {0}")]
    TooFewPeriods(usize),
    #[error("periods must be strictly increasing and dimensions equal across periods")]
    InconsistentSeries,
    #[error("no shared vocabulary between periods {from} and {to}")]
    EmptySharedVocab { from: i32, to: i32 },
    #[error("zero-norm vector in cosine similarity")]
    ZeroNorm,
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Solution of one Procrustes fit.
#[derive(Debug, Clone)]
pub struct ProcrustesResult {
    /// dim×dim orthogonal matrix (may include a reflection).
    pub rotation: DMatrix<f64>,
    /// AᵀB was rank-deficient: the minimizer is valid but not unique.
    pub rank_deficient: bool,
}

/// Fit `R = argmin_{QᵀQ=I} ‖A·Q − B‖_F` with rows as points.
///
/// Computed from the SVD `AᵀB = UΣVᵀ` as `R = U·Vᵀ`.
pub fn orthogonal_procrustes(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<ProcrustesResult, AlignError> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(AlignError::ShapeMismatch {
            a_rows: a.nrows(),
            a_cols: a.ncols(),
            b_rows: b.nrows(),
            b_cols: b.ncols(),
        });
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(AlignError::Empty);
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(AlignError::NonFinite);
    }
    let m = a.transpose() * b;
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u requested");
    let v_t = svd.v_t.as_ref().expect("svd with v_t requested");
    let rotation = u * v_t;
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let rank_deficient = smax <= 0.0 || smin / smax < 1e-12;
    Ok(ProcrustesResult { rotation, rank_deficient })
}

/// Max-norm of RᵀR − I.
pub fn orthogonality_residual(r: &DMatrix<f64>) -> f64 {
    let d = r.ncols();
    let gram = r.transpose() * r;
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// One chained alignment step.
#[derive(Debug, Clone)]
pub struct RotationStep {
    pub from_period: i32,
    pub to_period: i32,
    pub rotation: DMatrix<f64>,
    /// Tokens the rotation was fitted on (the vocabulary intersection).
    pub shared_vocab: Vec<String>,
    pub rank_deficient: bool,
    /// Fewer shared tokens than dimensions: the fit is underdetermined.
    pub underdetermined: bool,
}

/// Chronologically ordered, mutually aligned embedding matrices.
#[derive(Debug, Clone)]
pub struct AlignedSeries {
    pub periods: Vec<i32>,
    pub matrices: Vec<EmbeddingMatrix>,
    pub rotations: Vec<RotationStep>,
}

impl AlignedSeries {
    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.dim)
    }

    pub fn matrix_for(&self, period: i32) -> Option<&EmbeddingMatrix> {
        let idx = self.periods.iter().position(|&p| p == period)?;
        Some(&self.matrices[idx])
    }

    /// Token vector at a period; `None` when the period is absent, the token
    /// is out of vocabulary, or its vector is identically zero.
    pub fn vector(&self, token: &str, period: i32) -> Option<&[f32]> {
        let v = self.matrix_for(period)?.vector(token)?;
        if v.iter().all(|&x| x == 0.0) {
            return None;
        }
        Some(v)
    }

    pub fn rotation_records(&self) -> Vec<RotationRecord> {
        self.rotations
            .iter()
            .map(|s| RotationRecord {
                from_period: s.from_period,
                to_period: s.to_period,
                rotation: s.rotation.iter().map(|&v| v as f32).collect::<Vec<f32>>(),
            })
            .collect()
    }
}

/// Wrap already-mutually-comparable matrices (tests, reloaded artifacts)
/// without fitting any rotation.
pub fn series_from_aligned(matrices: Vec<EmbeddingMatrix>) -> Result<AlignedSeries, AlignError> {
    if matrices.windows(2).any(|w| w[0].period >= w[1].period || w[0].dim != w[1].dim) {
        return Err(AlignError::InconsistentSeries);
    }
    Ok(AlignedSeries {
        periods: matrices.iter().map(|m| m.period).collect(),
        matrices,
        rotations: Vec::new(),
    })
}

/// Align a chronological sequence of per-period embeddings.
///
/// Step `t`: fit the rotation on rows of the vocabulary intersection of the
/// already-aligned period `t` and the raw period `t+1`, then rotate every row
/// of period `t+1`, so tokens absent earlier still receive coordinates.
pub fn align_series(embeddings: Vec<EmbeddingMatrix>) -> Result<AlignedSeries, AlignError> {
    if embeddings.len() < 2 {
        return Err(AlignError::TooFewPeriods(embeddings.len()));
    }
    if embeddings
        .windows(2)
        .any(|w| w[0].period >= w[1].period || w[0].dim != w[1].dim)
    {
        return Err(AlignError::InconsistentSeries);
    }
    let dim = embeddings[0].dim;
    let mut aligned: Vec<EmbeddingMatrix> = vec![embeddings[0].clone()];
    let mut rotations = Vec::with_capacity(embeddings.len() - 1);

    for next in &embeddings[1..] {
        let prev = aligned.last().expect("seeded with the first period");
        let shared: Vec<String> = {
            let prev_tokens: BTreeSet<&str> =
                prev.vocab.tokens().iter().map(String::as_str).collect();
            next.vocab
                .tokens()
                .iter()
                .filter(|t| prev_tokens.contains(t.as_str()))
                .map(|t| t.to_string())
                .collect()
        };
        let mut shared = shared;
        shared.sort();
        if shared.is_empty() {
            return Err(AlignError::EmptySharedVocab { from: prev.period, to: next.period });
        }
        if shared.len() < dim {
            log::warn!(
                "alignment {}→{}: only {} shared tokens for {} dimensions; rotation is underdetermined",
                prev.period,
                next.period,
                shared.len(),
                dim
            );
        }

        let gather = |m: &EmbeddingMatrix| {
            DMatrix::from_fn(shared.len(), dim, |r, c| {
                let id = m.vocab.id_of(&shared[r]).expect("token in intersection");
                m.input[id * dim + c] as f64
            })
        };
        let a = gather(next);
        let b = gather(prev);
        let fit = orthogonal_procrustes(&a, &b)?;
        debug_assert!(orthogonality_residual(&fit.rotation) <= ORTHOGONALITY_TOL);

        let mut rotated = next.clone();
        rotated.input = rotate_rows(&next.input, dim, &fit.rotation);
        if let Some(out) = &next.output {
            rotated.output = Some(rotate_rows(out, dim, &fit.rotation));
        }

        rotations.push(RotationStep {
            from_period: prev.period,
            to_period: next.period,
            rotation: fit.rotation,
            underdetermined: shared.len() < dim,
            rank_deficient: fit.rank_deficient,
            shared_vocab: shared,
        });
        aligned.push(rotated);
    }

    Ok(AlignedSeries {
        periods: aligned.iter().map(|m| m.period).collect(),
        matrices: aligned,
        rotations,
    })
}

/// Apply `rows · R` in f64, storing back to f32.
fn rotate_rows(rows: &[f32], dim: usize, rotation: &DMatrix<f64>) -> Vec<f32> {
    let mut out = vec![0.0f32; rows.len()];
    for (row_in, row_out) in rows.chunks_exact(dim).zip(out.chunks_exact_mut(dim)) {
        for c in 0..dim {
            let mut acc = 0.0f64;
            for k in 0..dim {
                acc += row_in[k] as f64 * rotation[(k, c)];
            }
            row_out[c] = acc as f32;
        }
    }
    out
}

/// Cosine similarity, clamped to [−1, 1] against rounding. Accumulates in f64.
pub fn cos_sim(u: &[f32], v: &[f32]) -> Result<f64, AlignError> {
    if u.len() != v.len() {
        return Err(AlignError::LengthMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(AlignError::ZeroNorm);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// f64 variant used by oracles and rotation-level invariants.
pub fn cos_sim_f64(u: &[f64], v: &[f64]) -> Result<f64, AlignError> {
    if u.len() != v.len() {
        return Err(AlignError::LengthMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(AlignError::ZeroNorm);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Random orthogonal matrix from the QR factorization of a Gaussian-ish
/// matrix, with the sign fix that makes the distribution uniform.
pub fn random_orthogonal(dim: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let qr = m.qr();
        let r_diag: Vec<f64> = (0..dim).map(|i| qr.r()[(i, i)]).collect();
        if r_diag.iter().any(|&d| d.abs() < 1e-10) {
            continue; // nearly singular draw; try again
        }
        let mut q = qr.q();
        for (i, d) in r_diag.iter().enumerate() {
            if *d < 0.0 {
                for r in 0..dim {
                    q[(r, i)] = -q[(r, i)];
                }
            }
        }
        return q;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::Vocabulary;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix_with(period: i32, tokens: &[&str], dim: usize, values: Vec<f32>) -> EmbeddingMatrix {
        let vocab =
            Vocabulary::from_ordered(tokens.iter().map(|s| s.to_string()).collect(), vec![
                0;
                tokens.len()
            ]);
        EmbeddingMatrix { period, vocab, dim, input: values, output: None }
    }

    #[test]
    fn procrustes_identity_when_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(20, 5, |_, _| rng.random_range(-1.0..1.0));
        let fit = orthogonal_procrustes(&a, &a).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(fit.rotation[(i, j)], expected, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn procrustes_recovers_random_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = DMatrix::from_fn(50, 10, |_, _| rng.random_range(-1.0..1.0));
            let q0 = random_orthogonal(10, &mut rng);
            let b = &a * &q0;
            let fit = orthogonal_procrustes(&a, &b).unwrap();
            for i in 0..10 {
                for j in 0..10 {
                    assert_abs_diff_eq!(fit.rotation[(i, j)], q0[(i, j)], epsilon = 1e-6);
                }
            }
            assert!(orthogonality_residual(&fit.rotation) <= ORTHOGONALITY_TOL);
        }
    }

    #[test]
    fn procrustes_residual_beats_random_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(30, 6, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(30, 6, |_, _| rng.random_range(-1.0..1.0));
        let fit = orthogonal_procrustes(&a, &b).unwrap();
        let best = (&a * &fit.rotation - &b).norm();
        for _ in 0..100 {
            let q = random_orthogonal(6, &mut rng);
            let candidate = (&a * &q - &b).norm();
            assert!(best <= candidate + 1e-10, "candidate {candidate} beat optimal {best}");
        }
    }

    #[test]
    fn procrustes_shape_mismatch_rejected() {
        let a = DMatrix::zeros(3, 2);
        let b = DMatrix::zeros(4, 2);
        assert!(matches!(
            orthogonal_procrustes(&a, &b),
            Err(AlignError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn procrustes_rank_deficient_flagged_but_orthogonal() {
        // all rows identical → AᵀB has rank 1
        let a = DMatrix::from_fn(8, 4, |_, c| (c + 1) as f64);
        let b = a.clone();
        let fit = orthogonal_procrustes(&a, &b).unwrap();
        assert!(fit.rank_deficient);
        assert!(orthogonality_residual(&fit.rotation) <= ORTHOGONALITY_TOL);
    }

    #[test]
    fn cos_sim_basics() {
        assert_abs_diff_eq!(cos_sim(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cos_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            cos_sim(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(),
            0.974_631_846,
            epsilon = 1e-9
        );
        assert!(matches!(cos_sim(&[0.0, 0.0], &[1.0, 0.0]), Err(AlignError::ZeroNorm)));
    }

    #[test]
    fn align_identical_series_is_identity() {
        let values: Vec<f32> = (0..12).map(|i| i as f32 * 0.1 + 0.1).collect();
        let m1 = matrix_with(1991, &["a", "b", "c"], 4, values.clone());
        let m2 = matrix_with(1992, &["a", "b", "c"], 4, values.clone());
        let series = align_series(vec![m1, m2]).unwrap();
        for (got, want) in series.matrices[1].input.iter().zip(&values) {
            assert_abs_diff_eq!(*got as f64, *want as f64, epsilon = 1e-6);
        }
        assert!(orthogonality_residual(&series.rotations[0].rotation) <= 1e-8);
    }

    #[test]
    fn align_recovers_planted_rotations_three_periods() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dim = 6;
        let n = 30;
        let base = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
        let tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let token_refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let to_matrix = |period: i32, m: &DMatrix<f64>| {
            matrix_with(
                period,
                &token_refs,
                dim,
                (0..n).flat_map(|r| (0..dim).map(move |c| (r, c))).map(|(r, c)| m[(r, c)] as f32).collect(),
            )
        };
        let q0 = random_orthogonal(dim, &mut rng);
        let q1 = random_orthogonal(dim, &mut rng);
        let series = align_series(vec![
            to_matrix(1991, &base),
            to_matrix(1992, &(&base * &q0)),
            to_matrix(1993, &(&base * &q1)),
        ])
        .unwrap();
        for period in [1992, 1993] {
            let aligned = series.matrix_for(period).unwrap();
            for (row, token) in tokens.iter().enumerate() {
                let reference: Vec<f32> = series.matrices[0].vector(token).unwrap().to_vec();
                let got = aligned.row(row);
                let c = cos_sim(got, &reference).unwrap();
                assert!(c >= 0.999, "token {token} period {period}: cosine {c}");
            }
        }
    }

    #[test]
    fn align_fits_on_intersection_but_rotates_all_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = 3;
        let mut vals1 = Vec::new();
        let mut vals2 = Vec::new();
        for _ in 0..4 * dim {
            vals1.push(rng.random_range(-1.0f32..1.0));
        }
        for _ in 0..5 * dim {
            vals2.push(rng.random_range(-1.0f32..1.0));
        }
        let m1 = matrix_with(2000, &["a", "b", "c", "d"], dim, vals1);
        let m2 = matrix_with(2001, &["a", "b", "c", "d", "novel"], dim, vals2.clone());
        let series = align_series(vec![m1, m2]).unwrap();
        let step = &series.rotations[0];
        assert_eq!(step.shared_vocab, vec!["a", "b", "c", "d"]);
        assert!(!step.shared_vocab.contains(&"novel".to_string()));
        // the absent token's row was still rotated
        let raw_novel = &vals2[4 * dim..5 * dim];
        let rotated_novel = series.matrices[1].vector("novel").unwrap();
        let mut expected = vec![0.0f64; dim];
        for c in 0..dim {
            for k in 0..dim {
                expected[c] += raw_novel[k] as f64 * step.rotation[(k, c)];
            }
        }
        for (got, want) in rotated_novel.iter().zip(&expected) {
            assert_abs_diff_eq!(*got as f64, *want, epsilon = 1e-6);
        }
    }

    #[test]
    fn align_requires_shared_vocab() {
        let m1 = matrix_with(2000, &["a"], 2, vec![1.0, 0.0]);
        let m2 = matrix_with(2001, &["z"], 2, vec![0.0, 1.0]);
        match align_series(vec![m1, m2]) {
            Err(AlignError::EmptySharedVocab { from: 2000, to: 2001 }) => {}
            other => panic!("expected EmptySharedVocab, got {other:?}"),
        }
    }

    #[test]
    fn align_requires_two_periods() {
        let m1 = matrix_with(2000, &["a"], 2, vec![1.0, 0.0]);
        assert!(matches!(align_series(vec![m1]), Err(AlignError::TooFewPeriods(1))));
    }

    #[test]
    fn rotation_preserves_pairwise_cosines() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dim = 8;
        let q = random_orthogonal(dim, &mut rng);
        for _ in 0..50 {
            let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rotate = |x: &[f64]| {
                (0..dim)
                    .map(|c| (0..dim).map(|k| x[k] * q[(k, c)]).sum::<f64>())
                    .collect::<Vec<f64>>()
            };
            let before = cos_sim_f64(&u, &v).unwrap();
            let after = cos_sim_f64(&rotate(&u), &rotate(&v)).unwrap();
            assert_abs_diff_eq!(before, after, epsilon = 1e-10);
        }
    }
}
