//! Corpus preprocessing: text normalization, controlled-vocabulary phrase
//! merging, document-local acronym expansion, and bucketing by calendar year.
//!
//! The per-document order is [`normalize_text`] → [`apply_lexicon`] →
//! [`expand_acronyms`]; [`preprocess_document`] chains the three.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel token substituted for URL spans during normalization.
pub const URL_TOKEN: &str = "<url>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document {id:?} has year {year} outside configured range {lo}..={hi}")]
    YearOutOfRange { id: String, year: i32, lo: i32, hi: i32 },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?} has an empty title")]
    EmptyTitle(String),
    #[error("document with empty id")]
    EmptyId,
    #[error("lexicon surface phrase {0:?} maps to two canonical tokens ({1:?} and {2:?})")]
    AmbiguousSurface(String, String, String),
    #[error("canonical token {0:?} contains whitespace")]
    CanonicalWhitespace(String),
    #[error("lexicon line {line}: expected `surface<TAB>canonical<TAB>descriptor_id`")]
    MalformedLexiconLine { line: usize },
    #[error("documents file line {line}: {source}")]
    MalformedDocument { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One publication record: title text plus an optional abstract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub year: i32,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r#abstract: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, year: i32, title: impl Into<String>) -> Self {
        Document { id: id.into(), year, title: title.into(), r#abstract: None }
    }

    pub fn with_abstract(mut self, text: impl Into<String>) -> Self {
        self.r#abstract = Some(text.into());
        self
    }
}

/// A document after preprocessing: one flat token stream (title, then
/// abstract when present).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub id: String,
    pub year: i32,
    pub tokens: Vec<String>,
}

/// Controlled vocabulary mapping multi-word surface phrases to canonical
/// single tokens (underscore-joined), each tagged with its descriptor id.
///
/// Surface phrases are normalized with [`normalize_text`] at insertion, so
/// matching is case-insensitive and punctuation-insensitive by construction.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    /// first token of the surface phrase → candidate phrases, longest first
    by_head: HashMap<String, Vec<LexiconEntry>>,
    len: usize,
}

#[derive(Debug, Clone)]
struct LexiconEntry {
    surface: Vec<String>,
    canonical: String,
    descriptor_id: String,
}

impl Lexicon {
    pub fn new() -> Self {
        Lexicon::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Add one `surface phrase → canonical token` entry.
    pub fn insert(
        &mut self,
        surface: &str,
        canonical: &str,
        descriptor_id: &str,
    ) -> Result<(), CorpusError> {
        if canonical.chars().any(char::is_whitespace) {
            return Err(CorpusError::CanonicalWhitespace(canonical.to_string()));
        }
        let key = normalize_text(surface);
        if key.is_empty() {
            return Ok(());
        }
        let head = key[0].clone();
        let bucket = self.by_head.entry(head).or_default();
        if let Some(prev) = bucket.iter().find(|e| e.surface == key) {
            if prev.canonical != canonical {
                return Err(CorpusError::AmbiguousSurface(
                    surface.to_string(),
                    prev.canonical.clone(),
                    canonical.to_string(),
                ));
            }
            return Ok(());
        }
        bucket.push(LexiconEntry {
            surface: key,
            canonical: canonical.to_string(),
            descriptor_id: descriptor_id.to_string(),
        });
        bucket.sort_by(|a, b| b.surface.len().cmp(&a.surface.len()));
        self.len += 1;
        Ok(())
    }

    /// Load from the tab-separated lexicon file format:
    /// `surface_phrase<TAB>canonical_token<TAB>descriptor_id`.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut lex = Lexicon::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (surface, canonical, descriptor) =
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(s), Some(c), Some(d)) => (s, c, d),
                    _ => return Err(CorpusError::MalformedLexiconLine { line: i + 1 }),
                };
            lex.insert(surface, canonical, descriptor)?;
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    /// Descriptor id recorded for a canonical token, if any entry produced it.
    pub fn descriptor_of(&self, canonical: &str) -> Option<&str> {
        self.by_head
            .values()
            .flatten()
            .find(|e| e.canonical == canonical)
            .map(|e| e.descriptor_id.as_str())
    }
}

/// Token stream for one calendar year, with its token census.
#[derive(Debug, Clone, Default)]
pub struct PeriodCorpus {
    pub period: i32,
    pub documents: Vec<Vec<String>>,
    pub token_counts: HashMap<String, u64>,
}

impl PeriodCorpus {
    pub fn push(&mut self, tokens: Vec<String>) {
        for t in &tokens {
            *self.token_counts.entry(t.clone()).or_insert(0) += 1;
        }
        self.documents.push(tokens);
    }

    pub fn total_tokens(&self) -> u64 {
        self.token_counts.values().sum()
    }
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S+").expect("static regex"))
}

/// Normalize raw text into a lowercase token stream.
///
/// Rules, in order: URL spans become the [`URL_TOKEN`] sentinel; everything is
/// lowercased; a dash directly between alphanumerics is removed so the two
/// halves join (`anti-viral` → `antiviral`); remaining punctuation splits
/// tokens, except `_` which stays inside tokens and `(` / `)` which are kept
/// as standalone structural tokens so [`expand_acronyms`] can see parenthetical
/// boundaries. No token in the output is empty.
pub fn normalize_text(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in raw.split_whitespace() {
        let mut last = 0;
        for m in url_regex().find_iter(chunk) {
            scrub_into(&chunk[last..m.start()], &mut tokens);
            tokens.push(URL_TOKEN.to_string());
            last = m.end();
        }
        scrub_into(&chunk[last..], &mut tokens);
    }
    tokens
}

/// Lowercase, join intra-word dashes, then split on punctuation.
fn scrub_into(segment: &str, out: &mut Vec<String>) {
    let lower = segment.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        // a few symbols (math alphanumerics) have no lowercase mapping; they
        // act as boundaries so the no-uppercase guarantee holds
        if (c.is_alphanumeric() && !c.is_uppercase()) || c == '_' {
            current.push(c);
        } else if c == '-'
            && i > 0
            && i + 1 < chars.len()
            && chars[i - 1].is_alphanumeric()
            && chars[i + 1].is_alphanumeric()
        {
            // intra-word dash: drop it and keep building the same token
        } else {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            if c == '(' || c == ')' {
                out.push(c.to_string());
            }
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
}

/// Replace lexicon surface phrases with their canonical tokens.
///
/// Matching is longest-match, leftmost-first: at each position the longest
/// phrase starting there wins and the scan resumes after it.
pub fn apply_lexicon(tokens: &[String], lexicon: &Lexicon) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = false;
        if let Some(candidates) = lexicon.by_head.get(&tokens[i]) {
            for entry in candidates {
                let n = entry.surface.len();
                if i + n <= tokens.len() && tokens[i..i + n] == entry.surface[..] {
                    out.push(entry.canonical.clone());
                    i += n;
                    matched = true;
                    break;
                }
            }
        }
        if !matched {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}

/// Expand acronyms defined by a `phrase ( acr )` pattern within one document.
///
/// When the token right inside a parenthetical is a plausible acronym of the
/// words immediately preceding `(`: its letters, in order, are initials of a
/// contiguous run of those words ending right before the parenthesis, with
/// non-matching filler words allowed in between. Every later occurrence of the
/// acronym in the document is then replaced by the underscore-joined phrase.
/// The
/// defining `( acr )` group itself is dropped as redundant, and leftover
/// structural paren tokens are dropped too. Mappings never leak across
/// documents.
pub fn expand_acronyms(tokens: &[String]) -> Vec<String> {
    let mut mapping: HashMap<String, String> = HashMap::new();
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if tok == "(" {
            if i + 2 < tokens.len() && tokens[i + 2] == ")" {
                let acr = &tokens[i + 1];
                if let Some(phrase) = match_acronym_phrase(&out, acr) {
                    mapping.insert(acr.clone(), phrase);
                    i += 3;
                    continue;
                }
            }
            i += 1;
            continue;
        }
        if tok == ")" {
            i += 1;
            continue;
        }
        match mapping.get(tok) {
            Some(phrase) => out.push(phrase.clone()),
            None => out.push(tok.clone()),
        }
        i += 1;
    }
    out
}

/// Try to read `acr` as initials of a word run ending at the tail of `prior`.
fn match_acronym_phrase(prior: &[String], acr: &str) -> Option<String> {
    let letters: Vec<char> = acr.chars().collect();
    if letters.len() < 2 || letters.len() > 10 || !letters.iter().all(|c| c.is_alphabetic()) {
        return None;
    }
    // Anchor the last letter on the word immediately before `(`, then walk
    // backwards allowing skipped filler words, within a bounded window.
    let max_span = letters.len() * 2;
    let mut need = letters.len();
    let mut idx = prior.len();
    let mut start = None;
    while need > 0 && idx > 0 && prior.len() - idx < max_span {
        idx -= 1;
        let word = &prior[idx];
        if word == "(" || word == ")" {
            return None;
        }
        let initial = word.chars().next()?;
        if initial == letters[need - 1] {
            need -= 1;
            start = Some(idx);
        } else if need == letters.len() {
            // the word adjacent to `(` must carry the final letter
            return None;
        }
    }
    if need > 0 {
        return None;
    }
    let start = start?;
    Some(prior[start..].join("_"))
}

/// Run the full preprocessing chain on one document (title, then abstract).
pub fn preprocess_document(doc: &Document, lexicon: &Lexicon) -> TokenizedDocument {
    let mut tokens = normalize_text(&doc.title);
    if let Some(ref text) = doc.r#abstract {
        tokens.extend(normalize_text(text));
    }
    let tokens = apply_lexicon(&tokens, lexicon);
    let tokens = expand_acronyms(&tokens);
    TokenizedDocument { id: doc.id.clone(), year: doc.year, tokens }
}

/// Group tokenized documents into one [`PeriodCorpus`] per calendar year.
///
/// Any document dated outside `years` is rejected.
pub fn bucket_by_period(
    docs: &[TokenizedDocument],
    years: std::ops::RangeInclusive<i32>,
) -> Result<BTreeMap<i32, PeriodCorpus>, CorpusError> {
    let mut buckets: BTreeMap<i32, PeriodCorpus> = BTreeMap::new();
    for doc in docs {
        if !years.contains(&doc.year) {
            return Err(CorpusError::YearOutOfRange {
                id: doc.id.clone(),
                year: doc.year,
                lo: *years.start(),
                hi: *years.end(),
            });
        }
        let bucket = buckets.entry(doc.year).or_insert_with(|| PeriodCorpus {
            period: doc.year,
            ..PeriodCorpus::default()
        });
        bucket.push(doc.tokens.clone());
    }
    Ok(buckets)
}

/// Load documents from the line-delimited JSON file format (one object per
/// line with fields `id`, `year`, `title`, optional `abstract`), validating
/// id uniqueness and non-empty titles.
pub fn load_documents<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|source| CorpusError::MalformedDocument { line: i + 1, source })?;
        if doc.id.is_empty() {
            return Err(CorpusError::EmptyId);
        }
        if doc.title.trim().is_empty() {
            return Err(CorpusError::EmptyTitle(doc.id));
        }
        if seen.insert(doc.id.clone(), ()).is_some() {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_documents_file(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path)?;
    load_documents(std::io::BufReader::new(file))
}
