//! Panel assembly and estimation.
//!
//! A panel row pairs one topic-year observation of future growth with the
//! explanatory variables measured at `t`:
//!
//! ```text
//! growth(t+Δ) ~ novelty(t) + growth(t) + age(t) + field
//! ```
//!
//! Three estimators ([`pooled_ols`], [`fixed_effects`], [`random_effects`])
//! and three specification tests ([`f_test_time_effects`], [`lm_test`],
//! [`hausman`]) cover the usual model-selection workflow; [`window_sweep`]
//! repeats the random-effects fit over a grid of retrospective windows and
//! forecast leads.

mod design;
mod estimators;
mod inference;

pub use estimators::{fixed_effects, pooled_ols, random_effects};
pub use inference::{f_test_time_effects, hausman, lm_test};

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::novelty::NoveltySeries;
use crate::topics::{growth, DescriptorStats, TopicYearCounts};

/// Significance thresholds for star annotations, most permissive first.
pub const STARS_THRESHOLDS: [f64; 3] = [0.05, 0.01, 0.001];

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("duplicate panel observation (topic {topic:?}, t {t}, delta {delta})")]
    DuplicateObservation { topic: String, t: i32, delta: u32 },
    #[error("duplicate topic {0:?} in panel inputs")]
    DuplicateTopicInput(String),
    #[error("non-finite value in panel row (topic {topic:?}, t {t})")]
    NonFiniteRow { topic: String, t: i32 },
    #[error("panel is empty after assembly and outlier filtering")]
    EmptyPanel,
    #[error("panel mixes forecast leads; estimators need a single delta")]
    MixedDeltas,
    #[error("design is rank deficient; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },
    #[error("need more observations than regressors: n = {n_obs}, k = {k}")]
    InsufficientObservations { n_obs: usize, k: usize },
    #[error("every topic has a single observation; the within estimator is undefined")]
    NoWithinVariation,
    #[error("too few topics ({n_topics}) for the between regression ({k} regressors)")]
    InsufficientTopics { n_topics: usize, k: usize },
    #[error("test needs at least two distinct years")]
    SingleYear,
    #[error("test needs at least two topics with two or more observations")]
    InsufficientStructure,
    #[error("no common regressors between the two fits")]
    NoCommonRegressors,
    #[error("growth input: {0}")]
    Growth(#[from] crate::topics::TopicsError),
    #[error("panel csv line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One (topic, year) observation. `novelty` is stored ×100 (percent scale),
/// matching the reporting convention of the growth variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelRow {
    pub topic: String,
    pub t: i32,
    pub delta: u32,
    /// growth(t+delta), percent.
    pub y: f64,
    /// novelty(t) ×100.
    pub novelty: f64,
    /// growth(t), percent.
    pub growth_t: f64,
    /// years since the topic was established.
    pub age: f64,
    /// field category, 1..=17.
    pub field: u8,
}

/// Observations indexed by topic and year.
#[derive(Debug, Clone, Default)]
pub struct PanelDataset {
    pub rows: Vec<PanelRow>,
    topic_index: BTreeMap<String, Vec<usize>>,
    year_index: BTreeMap<i32, Vec<usize>>,
    pub balanced: bool,
}

impl PanelDataset {
    /// Validate and index rows: finite numerics, no duplicate (topic, t) per
    /// delta.
    pub fn from_rows(rows: Vec<PanelRow>) -> Result<Self, PanelError> {
        let mut topic_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut year_index: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            if ![row.y, row.novelty, row.growth_t, row.age].iter().all(|v| v.is_finite()) {
                return Err(PanelError::NonFiniteRow { topic: row.topic.clone(), t: row.t });
            }
            if !seen.insert((row.topic.clone(), row.t, row.delta)) {
                return Err(PanelError::DuplicateObservation {
                    topic: row.topic.clone(),
                    t: row.t,
                    delta: row.delta,
                });
            }
            topic_index.entry(row.topic.clone()).or_default().push(i);
            year_index.entry(row.t).or_default().push(i);
        }
        let balanced = {
            let mut year_sets = topic_index.values().map(|ids| {
                let mut years: Vec<i32> = ids.iter().map(|&i| rows[i].t).collect();
                years.sort_unstable();
                years
            });
            match year_sets.next() {
                None => true,
                Some(first) => year_sets.all(|ys| ys == first),
            }
        };
        Ok(PanelDataset { rows, topic_index, year_index, balanced })
    }

    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_topics(&self) -> usize {
        self.topic_index.len()
    }

    pub fn n_years(&self) -> usize {
        self.year_index.len()
    }

    /// Row indices per topic, topics in lexicographic order.
    pub(crate) fn topic_groups(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.topic_index
    }

    pub(crate) fn year_groups(&self) -> &BTreeMap<i32, Vec<usize>> {
        &self.year_index
    }

    /// The single forecast lead of this panel, or an error when mixed.
    pub(crate) fn single_delta(&self) -> Result<u32, PanelError> {
        let mut deltas = self.rows.iter().map(|r| r.delta);
        match deltas.next() {
            None => Err(PanelError::EmptyPanel),
            Some(first) => {
                if deltas.all(|d| d == first) {
                    Ok(first)
                } else {
                    Err(PanelError::MixedDeltas)
                }
            }
        }
    }

    /// Rows with the given forecast lead, as their own dataset.
    pub fn subset_delta(&self, delta: u32) -> Result<PanelDataset, PanelError> {
        let rows: Vec<PanelRow> =
            self.rows.iter().filter(|r| r.delta == delta).cloned().collect();
        if rows.is_empty() {
            return Err(PanelError::EmptyPanel);
        }
        PanelDataset::from_rows(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Pooled,
    Fixed,
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VarianceComponents {
    /// Between-topic variance σ²_u.
    pub sigma2_u: f64,
    /// Within-topic (idiosyncratic) variance σ²_ε.
    pub sigma2_e: f64,
    /// Quasi-demeaning weight; the mean over topics when the panel is
    /// unbalanced.
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult {
    pub model_kind: ModelKind,
    /// Slope coefficients in design order (field dummies last).
    pub coefficients: Vec<Coefficient>,
    /// Common intercept (pooled/random) or the average absorbed topic
    /// intercept (fixed effects).
    pub intercept: f64,
    pub variance_components: Option<VarianceComponents>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_value: f64,
    pub n_obs: usize,
    pub n_topics: usize,
    /// Regressors excluded from this model, with the reason.
    pub dropped: Vec<String>,
    pub notices: Vec<String>,
    /// Covariance of the slope coefficients, same order as `coefficients`.
    #[serde(skip)]
    pub(crate) cov: DMatrix<f64>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Covariance of the slope coefficients, in `coefficients` order.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Covariance submatrix over named coefficients, in the given order.
    pub(crate) fn cov_submatrix(&self, names: &[&str]) -> Option<DMatrix<f64>> {
        let idx: Option<Vec<usize>> = names
            .iter()
            .map(|n| self.coefficients.iter().position(|c| c.name == *n))
            .collect();
        let idx = idx?;
        Some(DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.cov[(idx[r], idx[c])]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestKind {
    #[serde(rename = "F-test")]
    FTest,
    #[serde(rename = "LM test")]
    LmTest,
    #[serde(rename = "Hausman")]
    Hausman,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub name: TestKind,
    pub statistic: f64,
    pub degrees_of_freedom: Vec<usize>,
    pub p_value: f64,
    /// Model preferred at the 5% level.
    pub decision_hint: ModelKind,
    pub notices: Vec<String>,
}

/// Star annotation for a p-value at the 0.05 / 0.01 / 0.001 thresholds.
pub fn stars(p: f64) -> &'static str {
    if p < STARS_THRESHOLDS[2] {
        "***"
    } else if p < STARS_THRESHOLDS[1] {
        "**"
    } else if p < STARS_THRESHOLDS[0] {
        "*"
    } else {
        ""
    }
}

/// Two-sided p-value of a z statistic.
pub(crate) fn p_from_z(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * (1.0 - normal.cdf(z.abs()))
}

/// Assemble the panel for one (win, delta) pair.
///
/// A row exists for (topic, t) when the novelty cell (t, win) is present,
/// growth exists at both t and t+delta, and the topic's descriptor metadata
/// covers t. Novelty is stored ×100. Rows whose dependent variable sits
/// `zmax` or more sample standard deviations from the mean are dropped
/// (no-op when the standard deviation is zero).
pub fn build_panel(
    novelties: &BTreeMap<String, NoveltySeries>,
    growths: &[TopicYearCounts],
    stats: &[DescriptorStats],
    delta: u32,
    win: u32,
    zmax: f64,
) -> Result<PanelDataset, PanelError> {
    let mut counts_by_topic: BTreeMap<&str, &TopicYearCounts> = BTreeMap::new();
    for g in growths {
        if counts_by_topic.insert(g.topic.as_str(), g).is_some() {
            return Err(PanelError::DuplicateTopicInput(g.topic.clone()));
        }
    }
    let mut stats_by_topic: BTreeMap<&str, &DescriptorStats> = BTreeMap::new();
    for s in stats {
        if stats_by_topic.insert(s.canonical_token.as_str(), s).is_some() {
            return Err(PanelError::DuplicateTopicInput(s.canonical_token.clone()));
        }
    }

    let mut rows = Vec::new();
    for (topic, series) in novelties {
        let (counts, stat) = match (
            counts_by_topic.get(topic.as_str()),
            stats_by_topic.get(topic.as_str()),
        ) {
            (Some(c), Some(s)) => (c, s),
            _ => continue,
        };
        let field = match stat.field_code() {
            Ok(f) => f,
            Err(_) => continue,
        };
        for (&(t, w), &value) in &series.values {
            if w != win || t < stat.established_year {
                continue;
            }
            let growth_t = match growth(counts, t) {
                Ok(g) => g,
                Err(_) => continue,
            };
            let y = match growth(counts, t + delta as i32) {
                Ok(g) => g,
                Err(_) => continue,
            };
            rows.push(PanelRow {
                topic: topic.clone(),
                t,
                delta,
                y,
                novelty: value * 100.0,
                growth_t,
                age: (t - stat.established_year) as f64,
                field,
            });
        }
    }
    if rows.is_empty() {
        return Err(PanelError::EmptyPanel);
    }
    let kept = z_filter(rows, zmax);
    if kept.is_empty() {
        return Err(PanelError::EmptyPanel);
    }
    PanelDataset::from_rows(kept)
}

/// Drop rows whose |y − mean| / sd ≥ zmax (sample standard deviation).
fn z_filter(rows: Vec<PanelRow>, zmax: f64) -> Vec<PanelRow> {
    let n = rows.len();
    if n < 2 {
        return rows;
    }
    let mean = rows.iter().map(|r| r.y).sum::<f64>() / n as f64;
    let var = rows.iter().map(|r| (r.y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return rows;
    }
    rows.into_iter().filter(|r| ((r.y - mean) / sd).abs() < zmax).collect()
}

/// One cell of the window-sweep grid: the random-effects novelty coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub stars: String,
}

/// Random-effects novelty coefficients over (win, delta) cells.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CoefficientGrid {
    /// (win, delta) → cell; absent cells could not be estimated.
    pub cells: BTreeMap<(u32, u32), GridCell>,
}

impl CoefficientGrid {
    pub fn cell(&self, win: u32, delta: u32) -> Option<&GridCell> {
        self.cells.get(&(win, delta))
    }

    /// For a fixed delta, the window whose coefficient is largest.
    pub fn argmax_win(&self, delta: u32) -> Option<u32> {
        self.cells
            .iter()
            .filter(|((_, d), _)| *d == delta)
            .max_by(|a, b| a.1.estimate.partial_cmp(&b.1.estimate).expect("finite estimates"))
            .map(|((w, _), _)| *w)
    }

    pub fn wins(&self) -> Vec<u32> {
        let mut w: Vec<u32> = self.cells.keys().map(|(win, _)| *win).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    pub fn deltas(&self) -> Vec<u32> {
        let mut d: Vec<u32> = self.cells.keys().map(|(_, delta)| *delta).collect();
        d.sort_unstable();
        d.dedup();
        d
    }
}

/// Run the random-effects model per (win, delta). `panels` maps each window
/// to a dataset that may carry several deltas; cells that cannot be estimated
/// are simply absent.
pub fn window_sweep(
    panels: &BTreeMap<u32, PanelDataset>,
    deltas: &[u32],
) -> CoefficientGrid {
    let mut grid = CoefficientGrid::default();
    for (&win, panel) in panels {
        for &delta in deltas {
            let subset = match panel.subset_delta(delta) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let fit = match random_effects(&subset) {
                Ok(f) => f,
                Err(_) => continue,
            };
            if let Some(c) = fit.coefficient("novelty") {
                if c.std_error > 0.0 {
                    let p = p_from_z(c.estimate / c.std_error);
                    grid.cells.insert(
                        (win, delta),
                        GridCell {
                            estimate: c.estimate,
                            std_error: c.std_error,
                            p_value: p,
                            stars: stars(p).to_string(),
                        },
                    );
                }
            }
        }
    }
    grid
}

/// Write the sweep grid in the wide table layout: one row per window, one
/// column per forecast lead, cells formatted `estimate stars (se)`.
pub fn write_grid_csv<W: Write>(w: &mut W, grid: &CoefficientGrid) -> Result<(), PanelError> {
    let mut wtr = csv::Writer::from_writer(w);
    let deltas = grid.deltas();
    let mut header = vec!["win".to_string()];
    header.extend(deltas.iter().map(|d| format!("delta_{d}")));
    wtr.write_record(&header).map_err(csv_io)?;
    for win in grid.wins() {
        let mut record = vec![win.to_string()];
        for &d in &deltas {
            record.push(match grid.cell(win, d) {
                Some(c) => format!("{:.3}{} ({:.3})", c.estimate, c.stars, c.std_error),
                None => String::new(),
            });
        }
        wtr.write_record(&record).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Panel CSV: `topic,t,delta,y,novelty,growth_t,age,field`.
pub fn write_panel_csv<W: Write>(w: &mut W, panel: &PanelDataset) -> Result<(), PanelError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["topic", "t", "delta", "y", "novelty", "growth_t", "age", "field"])
        .map_err(csv_io)?;
    for r in &panel.rows {
        wtr.write_record([
            r.topic.as_str(),
            &r.t.to_string(),
            &r.delta.to_string(),
            &format!("{}", r.y),
            &format!("{}", r.novelty),
            &format!("{}", r.growth_t),
            &format!("{}", r.age),
            &r.field.to_string(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_panel_csv<R: BufRead>(reader: R) -> Result<PanelDataset, PanelError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = record
            .map_err(|e| PanelError::MalformedCsv { line, reason: e.to_string() })?;
        let get = |idx: usize| -> Result<&str, PanelError> {
            rec.get(idx).ok_or_else(|| PanelError::MalformedCsv {
                line,
                reason: format!("missing column {idx}"),
            })
        };
        let parse_f = |s: &str| -> Result<f64, PanelError> {
            s.trim().parse().map_err(|_| PanelError::MalformedCsv {
                line,
                reason: format!("bad numeric {s:?}"),
            })
        };
        rows.push(PanelRow {
            topic: get(0)?.to_string(),
            t: get(1)?.trim().parse().map_err(|_| PanelError::MalformedCsv {
                line,
                reason: "bad year".into(),
            })?,
            delta: get(2)?.trim().parse().map_err(|_| PanelError::MalformedCsv {
                line,
                reason: "bad delta".into(),
            })?,
            y: parse_f(get(3)?)?,
            novelty: parse_f(get(4)?)?,
            growth_t: parse_f(get(5)?)?,
            age: parse_f(get(6)?)?,
            field: get(7)?.trim().parse().map_err(|_| PanelError::MalformedCsv {
                line,
                reason: "bad field".into(),
            })?,
        });
    }
    PanelDataset::from_rows(rows)
}

fn csv_io(e: csv::Error) -> PanelError {
    PanelError::Io(std::io::Error::other(e))
}
