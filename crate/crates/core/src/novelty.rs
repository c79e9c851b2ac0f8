//! Semantic-change scoring over an aligned series.
//!
//! A topic's score at year `t` with retrospective window `win` is one minus
//! the best cosine match between its vector at `t` and its vectors in the
//! previous `win` years:
//!
//! ```text
//! novelty(t, win) = 1 − max_{Δt ∈ [1, win]} cos(w(t−Δt), w(t))
//! ```
//!
//! Years inside the window where the topic is absent are skipped; the score
//! exists as long as at least one history year does. Values live in [0, 2].

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{cos_sim, AlignedSeries};

#[derive(Debug, Error)]
pub enum NoveltyError {
    #[error("topic {topic:?} has no vector in period {t}")]
    TopicMissingAtT { topic: String, t: i32 },
    #[error("topic {topic:?} has no history vector within {win} periods before {t}")]
    NoHistory { topic: String, t: i32, win: u32 },
    #[error("window must be ≥ 1")]
    ZeroWindow,
    #[error(transparent)]
    Cosine(#[from] crate::align::AlignError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a (year, win) cell could not be computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    MissingAtT,
    NoHistory,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::MissingAtT => "missing_at_t",
            SkipReason::NoHistory => "no_history",
        }
    }
}

/// Novelty scores of one topic across years and windows.
#[derive(Debug, Clone, Default)]
pub struct NoveltySeries {
    pub topic: String,
    /// (year, win) → score in [0, 2].
    pub values: BTreeMap<(i32, u32), f64>,
    /// Years where the topic has a usable vector.
    pub coverage: Vec<i32>,
    /// (year, win) cells that could not be computed, with the reason.
    pub skipped: BTreeMap<(i32, u32), SkipReason>,
}

impl NoveltySeries {
    pub fn value(&self, year: i32, win: u32) -> Option<f64> {
        self.values.get(&(year, win)).copied()
    }
}

/// Novelty of `topic` at year `t` looking back `win` periods.
pub fn novelty(
    series: &AlignedSeries,
    topic: &str,
    t: i32,
    win: u32,
) -> Result<f64, NoveltyError> {
    if win == 0 {
        return Err(NoveltyError::ZeroWindow);
    }
    let current = series
        .vector(topic, t)
        .ok_or_else(|| NoveltyError::TopicMissingAtT { topic: topic.to_string(), t })?;
    let mut best: Option<f64> = None;
    for dt in 1..=win as i32 {
        if let Some(past) = series.vector(topic, t - dt) {
            let c = cos_sim(past, current)?;
            best = Some(best.map_or(c, |b: f64| b.max(c)));
        }
    }
    match best {
        Some(max_cos) => Ok(1.0 - max_cos),
        None => Err(NoveltyError::NoHistory { topic: topic.to_string(), t, win }),
    }
}

/// Fill every computable (topic, year, win) cell; incomputable cells are
/// recorded with their reason instead of failing the whole table.
pub fn novelty_table(
    series: &AlignedSeries,
    topics: &BTreeSet<String>,
    wins: &BTreeSet<u32>,
) -> BTreeMap<String, NoveltySeries> {
    let mut out = BTreeMap::new();
    for topic in topics {
        let mut ns = NoveltySeries { topic: topic.clone(), ..Default::default() };
        ns.coverage = series
            .periods
            .iter()
            .copied()
            .filter(|&p| series.vector(topic, p).is_some())
            .collect();
        for &year in &series.periods {
            for &win in wins {
                if win == 0 {
                    continue;
                }
                match novelty(series, topic, year, win) {
                    Ok(v) => {
                        ns.values.insert((year, win), v);
                    }
                    Err(NoveltyError::TopicMissingAtT { .. }) => {
                        ns.skipped.insert((year, win), SkipReason::MissingAtT);
                    }
                    Err(NoveltyError::NoHistory { .. }) => {
                        ns.skipped.insert((year, win), SkipReason::NoHistory);
                    }
                    Err(_) => unreachable!("novelty only raises the two skip cases here"),
                }
            }
        }
        out.insert(topic.clone(), ns);
    }
    out
}

/// Top-k tokens by cosine similarity to `topic` at year `t`, topic excluded,
/// ties broken by token string.
pub fn neighbors(
    series: &AlignedSeries,
    topic: &str,
    t: i32,
    k: usize,
) -> Result<Vec<(String, f64)>, NoveltyError> {
    let current = series
        .vector(topic, t)
        .ok_or_else(|| NoveltyError::TopicMissingAtT { topic: topic.to_string(), t })?;
    let matrix = series.matrix_for(t).expect("vector() implies the period exists");
    let mut scored: Vec<(String, f64)> = Vec::new();
    for other in matrix.vocab.tokens() {
        if other == topic {
            continue;
        }
        if let Some(v) = series.vector(other, t) {
            scored.push((other.clone(), cos_sim(current, v)?));
        }
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("cosines are finite").then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Pick the display terms of each year for a semantic-change map.
///
/// Per year, the top-k neighbors are candidates; a term shown in an earlier
/// year is shown again only if its own vector drifted since then, i.e.
/// cos between its vectors at the two years is below `threshold` (0.5 by
/// default). The comparison year is the term's most recent appearance.
pub fn select_display_terms(
    series: &AlignedSeries,
    topic: &str,
    years: std::ops::RangeInclusive<i32>,
    k: usize,
    threshold: f64,
) -> Result<BTreeMap<i32, BTreeSet<String>>, NoveltyError> {
    let mut out: BTreeMap<i32, BTreeSet<String>> = BTreeMap::new();
    let mut last_shown: BTreeMap<String, i32> = BTreeMap::new();
    for t in years {
        if !series.periods.contains(&t) {
            continue;
        }
        let mut retained = BTreeSet::new();
        for (term, _) in neighbors(series, topic, t, k)? {
            let keep = match last_shown.get(&term) {
                None => true,
                Some(&t_prev) => {
                    match (series.vector(&term, t), series.vector(&term, t_prev)) {
                        (Some(now), Some(then)) => cos_sim(now, then)? < threshold,
                        _ => true,
                    }
                }
            };
            if keep {
                last_shown.insert(term.clone(), t);
                retained.insert(term);
            }
        }
        out.insert(t, retained);
    }
    Ok(out)
}

/// Export rows `topic,year,win,novelty,status`; skipped cells keep an empty
/// novelty field and carry their reason in `status`.
pub fn write_novelty_csv<W: Write>(
    w: &mut W,
    table: &BTreeMap<String, NoveltySeries>,
) -> Result<(), NoveltyError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["topic", "year", "win", "novelty", "status"])
        .map_err(csv_io)?;
    for (topic, ns) in table {
        for (&(year, win), &value) in &ns.values {
            wtr.write_record([
                topic.as_str(),
                &year.to_string(),
                &win.to_string(),
                &format!("{value}"),
                "ok",
            ])
            .map_err(csv_io)?;
        }
        for (&(year, win), reason) in &ns.skipped {
            wtr.write_record([
                topic.as_str(),
                &year.to_string(),
                &win.to_string(),
                "",
                reason.as_str(),
            ])
            .map_err(csv_io)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> NoveltyError {
    NoveltyError::Io(std::io::Error::other(e))
}

/// Reload a novelty table written by [`write_novelty_csv`]. Skipped cells
/// round-trip with their reason; unknown status strings are rejected.
pub fn read_novelty_csv<R: std::io::BufRead>(
    reader: R,
) -> Result<BTreeMap<String, NoveltySeries>, NoveltyError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out: BTreeMap<String, NoveltySeries> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let bad = |reason: String| {
            NoveltyError::Io(std::io::Error::other(format!("novelty csv line {line}: {reason}")))
        };
        let rec = record.map_err(|e| bad(e.to_string()))?;
        let get = |idx: usize| rec.get(idx).ok_or_else(|| bad(format!("missing column {idx}")));
        let topic = get(0)?.to_string();
        let year: i32 =
            get(1)?.trim().parse().map_err(|_| bad(format!("bad year {:?}", rec.get(1))))?;
        let win: u32 =
            get(2)?.trim().parse().map_err(|_| bad(format!("bad win {:?}", rec.get(2))))?;
        let entry = out
            .entry(topic.clone())
            .or_insert_with(|| NoveltySeries { topic, ..Default::default() });
        match get(4)? {
            "ok" => {
                let value: f64 = get(3)?
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad novelty {:?}", rec.get(3))))?;
                entry.values.insert((year, win), value);
                if !entry.coverage.contains(&year) {
                    entry.coverage.push(year);
                }
            }
            "missing_at_t" => {
                entry.skipped.insert((year, win), SkipReason::MissingAtT);
            }
            "no_history" => {
                entry.skipped.insert((year, win), SkipReason::NoHistory);
                if !entry.coverage.contains(&year) {
                    entry.coverage.push(year);
                }
            }
            other => return Err(bad(format!("unknown status {other:?}"))),
        }
    }
    Ok(out)
}
