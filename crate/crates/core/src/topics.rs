//! Topic selection and publication growth.
//!
//! A descriptor's capacity to name one specific research topic is scored as
//!
//! ```text
//! sid = n_major · ln(N / (n_major + n_nonmajor))
//! ```
//!
//! (natural log). Selection keeps descriptors whose score clears a threshold
//! and whose term is frequent enough in the training text for a long enough
//! consecutive run of years. Growth is the year-over-year percent change of
//! a topic's publication count.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Field code reserved for topics filed under more than one top-level branch.
pub const INTER_FIELD_CODE: u8 = 17;

#[derive(Debug, Error)]
pub enum TopicsError {
    #[error("sid: N must be > 0")]
    ZeroTotal,
    #[error("sid: indexed count {indexed} exceeds total publications {total}")]
    IndexedExceedsTotal { indexed: u64, total: u64 },
    #[error("growth at {t}: count for year {missing} is missing")]
    MissingYear { t: i32, missing: i32 },
    #[error("growth at {t}: previous-year count is zero, growth undefined")]
    UndefinedGrowth { t: i32 },
    #[error("age: year {t} precedes established year {established}")]
    BeforeEstablished { t: i32, established: i32 },
    #[error("descriptor {0:?} has no field codes")]
    NoFieldCodes(String),
    #[error("descriptor {id:?}: field code {code} outside 1..=16")]
    BadFieldCode { id: String, code: u8 },
    #[error("duplicate topic {0:?} in counts input")]
    DuplicateTopic(String),
    #[error("stats file line {line}: {reason}")]
    MalformedStats { line: usize, reason: String },
    #[error("counts file line {line}: {reason}")]
    MalformedCounts { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Indexing statistics of one descriptor, as supplied by the input tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorStats {
    pub descriptor_id: String,
    pub canonical_token: String,
    pub n_major: u64,
    pub n_nonmajor: u64,
    pub established_year: i32,
    /// Top-level branch codes, each in 1..=16.
    pub field_codes: BTreeSet<u8>,
}

impl DescriptorStats {
    /// Effective field category: the single branch code, or the dedicated
    /// inter-field code when the descriptor sits under several branches.
    pub fn field_code(&self) -> Result<u8, TopicsError> {
        match self.field_codes.len() {
            0 => Err(TopicsError::NoFieldCodes(self.descriptor_id.clone())),
            1 => Ok(*self.field_codes.iter().next().expect("len checked")),
            _ => Ok(INTER_FIELD_CODE),
        }
    }

    pub fn validate(&self) -> Result<(), TopicsError> {
        for &code in &self.field_codes {
            if !(1..=16).contains(&code) {
                return Err(TopicsError::BadFieldCode {
                    id: self.descriptor_id.clone(),
                    code,
                });
            }
        }
        Ok(())
    }
}

/// Publication counts of one topic by year.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TopicYearCounts {
    pub topic: String,
    pub counts: BTreeMap<i32, u64>,
}

/// Specific information of a descriptor, natural log.
pub fn sid(n_major: u64, n_nonmajor: u64, total: u64) -> Result<f64, TopicsError> {
    if total == 0 {
        return Err(TopicsError::ZeroTotal);
    }
    let indexed = n_major + n_nonmajor;
    if indexed > total {
        return Err(TopicsError::IndexedExceedsTotal { indexed, total });
    }
    if n_major == 0 {
        return Ok(0.0);
    }
    Ok(n_major as f64 * (total as f64 / indexed as f64).ln())
}

/// The three selection criteria over an observed year range:
/// 1. `sid > sid_threshold`;
/// 2. the topic's token count in the training text exceeds `min_token_count`
///    in an observed year;
/// 3. criterion 2 holds for a consecutive run of at least half the observed
///    range (⌈len/2⌉ years).
///
/// Criterion 2 enters the topic-level decision as "some observed year
/// qualifies", which criterion 3 subsumes whenever the range is nonempty.
pub fn select_topics(
    stats: &[DescriptorStats],
    period_token_counts: &HashMap<(String, i32), u64>,
    observed: std::ops::RangeInclusive<i32>,
    total_publications: u64,
    sid_threshold: f64,
    min_token_count: u64,
) -> Result<BTreeSet<String>, TopicsError> {
    let years: Vec<i32> = observed.clone().collect();
    let needed_run = years.len().div_ceil(2);
    let mut selected = BTreeSet::new();
    for s in stats {
        let score = sid(s.n_major, s.n_nonmajor, total_publications)?;
        if score <= sid_threshold {
            continue;
        }
        let qualifies: Vec<bool> = years
            .iter()
            .map(|&y| {
                period_token_counts
                    .get(&(s.canonical_token.clone(), y))
                    .is_some_and(|&c| c > min_token_count)
            })
            .collect();
        if !qualifies.iter().any(|&q| q) {
            continue;
        }
        if longest_run(&qualifies) >= needed_run {
            selected.insert(s.canonical_token.clone());
        }
    }
    Ok(selected)
}

fn longest_run(flags: &[bool]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for &f in flags {
        if f {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

/// Year-over-year publication growth in percent.
pub fn growth(counts: &TopicYearCounts, t: i32) -> Result<f64, TopicsError> {
    let current = *counts
        .counts
        .get(&t)
        .ok_or(TopicsError::MissingYear { t, missing: t })?;
    let previous = *counts
        .counts
        .get(&(t - 1))
        .ok_or(TopicsError::MissingYear { t, missing: t - 1 })?;
    if previous == 0 {
        return Err(TopicsError::UndefinedGrowth { t });
    }
    Ok((current as f64 - previous as f64) / previous as f64 * 100.0)
}

/// Years since the topic's descriptor was established.
pub fn topic_age(stats: &DescriptorStats, t: i32) -> Result<i32, TopicsError> {
    if t < stats.established_year {
        return Err(TopicsError::BeforeEstablished { t, established: stats.established_year });
    }
    Ok(t - stats.established_year)
}

/// Load the descriptor stats CSV:
/// `descriptor_id,canonical_token,n_major,n_nonmajor,established_year,field_codes`
/// where `field_codes` is `;`-separated branch codes.
pub fn load_descriptor_stats<R: BufRead>(reader: R) -> Result<Vec<DescriptorStats>, TopicsError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // header is line 1
        let rec = record.map_err(|e| TopicsError::MalformedStats { line, reason: e.to_string() })?;
        let field = |idx: usize| -> Result<&str, TopicsError> {
            rec.get(idx).ok_or_else(|| TopicsError::MalformedStats {
                line,
                reason: format!("missing column {idx}"),
            })
        };
        let parse_u64 = |s: &str| -> Result<u64, TopicsError> {
            s.trim().parse().map_err(|_| TopicsError::MalformedStats {
                line,
                reason: format!("bad count {s:?}"),
            })
        };
        let codes: BTreeSet<u8> = field(5)?
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim().parse().map_err(|_| TopicsError::MalformedStats {
                    line,
                    reason: format!("bad field code {s:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        let stats = DescriptorStats {
            descriptor_id: field(0)?.to_string(),
            canonical_token: field(1)?.to_string(),
            n_major: parse_u64(field(2)?)?,
            n_nonmajor: parse_u64(field(3)?)?,
            established_year: field(4)?.trim().parse().map_err(|_| {
                TopicsError::MalformedStats {
                    line,
                    reason: format!("bad established_year {:?}", field(4).unwrap_or_default()),
                }
            })?,
            field_codes: codes,
        };
        stats.validate()?;
        out.push(stats);
    }
    Ok(out)
}

pub fn load_descriptor_stats_file(path: &Path) -> Result<Vec<DescriptorStats>, TopicsError> {
    let f = std::fs::File::open(path)?;
    load_descriptor_stats(std::io::BufReader::new(f))
}

/// Load the topic-year counts CSV `topic,year,count`, one series per topic.
pub fn load_topic_counts<R: BufRead>(
    reader: R,
) -> Result<BTreeMap<String, TopicYearCounts>, TopicsError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out: BTreeMap<String, TopicYearCounts> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let rec =
            record.map_err(|e| TopicsError::MalformedCounts { line, reason: e.to_string() })?;
        let get = |idx: usize| -> Result<&str, TopicsError> {
            rec.get(idx).ok_or_else(|| TopicsError::MalformedCounts {
                line,
                reason: format!("missing column {idx}"),
            })
        };
        let topic = get(0)?.to_string();
        let year: i32 = get(1)?.trim().parse().map_err(|_| TopicsError::MalformedCounts {
            line,
            reason: format!("bad year {:?}", get(1).unwrap_or_default()),
        })?;
        let count: u64 = get(2)?.trim().parse().map_err(|_| TopicsError::MalformedCounts {
            line,
            reason: format!("bad count {:?}", get(2).unwrap_or_default()),
        })?;
        let entry = out
            .entry(topic.clone())
            .or_insert_with(|| TopicYearCounts { topic, ..Default::default() });
        if entry.counts.insert(year, count).is_some() {
            return Err(TopicsError::MalformedCounts {
                line,
                reason: format!("duplicate (topic, year) ({:?}, {year})", entry.topic),
            });
        }
    }
    Ok(out)
}

pub fn load_topic_counts_file(
    path: &Path,
) -> Result<BTreeMap<String, TopicYearCounts>, TopicsError> {
    let f = std::fs::File::open(path)?;
    load_topic_counts(std::io::BufReader::new(f))
}

pub fn write_topic_counts<W: Write>(
    w: &mut W,
    counts: &BTreeMap<String, TopicYearCounts>,
) -> Result<(), TopicsError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["topic", "year", "count"])
        .map_err(|e| TopicsError::Io(std::io::Error::other(e)))?;
    for tyc in counts.values() {
        for (year, count) in &tyc.counts {
            wtr.write_record([tyc.topic.as_str(), &year.to_string(), &count.to_string()])
                .map_err(|e| TopicsError::Io(std::io::Error::other(e)))?;
        }
    }
    wtr.flush()?;
    Ok(())
}
