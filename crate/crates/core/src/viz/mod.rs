//! Case-study artifacts: co-evolution curves and semantic-change maps.
//!
//! [`build_scene`] pulls the per-year display terms of a topic, embeds their
//! vectors in 2-D with exact t-SNE, and packages the result as a
//! [`SceneSpec`]; [`svg::emit_semantic_map`] renders it with a year color
//! ramp and collision-free labels. By default all years' terms are embedded
//! in a single t-SNE run so the geometry is comparable across years; the
//! per-year mode reruns t-SNE independently for each year.

pub mod layout;
pub mod svg;
pub mod tsne;

pub use layout::{resolve_overlaps, LabelBox, OverlapResolution};
pub use svg::{emit_coevolution, emit_semantic_map, year_color, ChartOutput};
pub use tsne::{tsne_2d, TsneParams};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::align::AlignedSeries;
use crate::novelty::select_display_terms;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("t-SNE needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} infeasible for {n} points (need 1 ≤ p < (n−1)/3)")]
    InfeasiblePerplexity { n: usize, perplexity: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("scene has no points")]
    EmptyScene,
    #[error("novelty and growth series do not overlap on the requested years")]
    EmptyOverlap,
    #[error(transparent)]
    Novelty(#[from] crate::novelty::NoveltyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labelled point of a semantic-change map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePoint {
    pub token: String,
    pub year: i32,
    pub x: f64,
    pub y: f64,
}

/// Everything a semantic-change map needs: one point per (token, year).
#[derive(Debug, Clone, Default)]
pub struct SceneSpec {
    pub points: Vec<ScenePoint>,
}

/// Select display terms for `topic` over `years`, embed their vectors, and
/// assemble the scene. Terms come from [`select_display_terms`] (top-`k`
/// neighbors per year, repeats kept only when their meaning drifted past
/// `threshold`); the topic itself is included for every covered year.
pub fn build_scene(
    series: &AlignedSeries,
    topic: &str,
    years: std::ops::RangeInclusive<i32>,
    k: usize,
    threshold: f64,
    params: &TsneParams,
    per_year: bool,
) -> Result<SceneSpec, VizError> {
    let terms = select_display_terms(series, topic, years.clone(), k, threshold)?;
    // (token, year) → vector, topic itself included per covered year
    let mut entries: BTreeMap<(i32, String), Vec<f64>> = BTreeMap::new();
    for (&year, tokens) in &terms {
        if let Some(v) = series.vector(topic, year) {
            entries.insert(
                (year, topic.to_string()),
                v.iter().map(|&x| x as f64).collect(),
            );
        }
        for token in tokens {
            if let Some(v) = series.vector(token, year) {
                entries
                    .insert((year, token.clone()), v.iter().map(|&x| x as f64).collect());
            }
        }
    }
    if entries.is_empty() {
        return Err(VizError::EmptyScene);
    }

    let mut points = Vec::with_capacity(entries.len());
    if per_year {
        let mut by_year: BTreeMap<i32, Vec<(&(i32, String), &Vec<f64>)>> = BTreeMap::new();
        for (key, vec) in &entries {
            by_year.entry(key.0).or_default().push((key, vec));
        }
        for (_, group) in by_year {
            let vectors: Vec<Vec<f64>> = group.iter().map(|(_, v)| (*v).clone()).collect();
            // a year can retain fewer terms than t-SNE supports; such years
            // get a plain ring layout
            let coords: Vec<[f64; 2]> = if vectors.len() < 4 {
                (0..vectors.len())
                    .map(|i| {
                        let angle =
                            i as f64 / vectors.len() as f64 * std::f64::consts::TAU;
                        [angle.cos(), angle.sin()]
                    })
                    .collect()
            } else {
                tsne_2d(&vectors, params)?
            };
            for ((key, _), xy) in group.iter().zip(coords) {
                points.push(ScenePoint { token: key.1.clone(), year: key.0, x: xy[0], y: xy[1] });
            }
        }
    } else {
        let keys: Vec<&(i32, String)> = entries.keys().collect();
        let vectors: Vec<Vec<f64>> = entries.values().cloned().collect();
        let coords = tsne_2d(&vectors, params)?;
        for (key, xy) in keys.iter().zip(coords) {
            points.push(ScenePoint { token: key.1.clone(), year: key.0, x: xy[0], y: xy[1] });
        }
    }
    Ok(SceneSpec { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::series_from_aligned;
    use crate::embedder::{EmbeddingMatrix, Vocabulary};

    fn toy_series() -> AlignedSeries {
        // 3 years, 12 tokens whose vectors rotate slowly; "topic" stays put
        let dim = 4;
        let mut matrices = Vec::new();
        for (yi, year) in (2000..=2002).enumerate() {
            let mut tokens = vec!["topic".to_string()];
            let mut values: Vec<f32> = vec![1.0, 0.0, 0.0, 0.0];
            for k in 0..12 {
                tokens.push(format!("w{k:02}"));
                let angle = k as f64 * 0.45 + yi as f64 * 0.25;
                values.extend_from_slice(&[
                    angle.cos() as f32,
                    angle.sin() as f32,
                    (k as f32) * 0.05,
                    0.1,
                ]);
            }
            let n = tokens.len();
            matrices.push(EmbeddingMatrix {
                period: year,
                vocab: Vocabulary::from_ordered(tokens, vec![0; n]),
                dim,
                input: values,
                output: None,
            });
        }
        series_from_aligned(matrices).unwrap()
    }

    #[test]
    fn scene_has_one_point_per_token_year() {
        let series = toy_series();
        let params = TsneParams { perplexity: 2.0, iterations: 60, seed: 1, ..Default::default() };
        let scene = build_scene(&series, "topic", 2000..=2002, 5, 0.5, &params, false).unwrap();
        let mut keys: Vec<(i32, &str)> =
            scene.points.iter().map(|p| (p.year, p.token.as_str())).collect();
        let before = keys.len();
        keys.sort();
        keys.dedup();
        assert_eq!(before, keys.len());
        assert!(scene.points.iter().all(|p| p.x.is_finite() && p.y.is_finite()));
        assert!(before >= 6);
    }

    #[test]
    fn per_year_mode_runs_independent_embeddings() {
        let series = toy_series();
        let params = TsneParams { perplexity: 1.5, iterations: 40, seed: 2, ..Default::default() };
        let scene = build_scene(&series, "topic", 2000..=2002, 5, 0.5, &params, true).unwrap();
        assert!(!scene.points.is_empty());
    }
}
