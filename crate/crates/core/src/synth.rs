//! Deterministic synthetic fixtures: a small five-period corpus with one
//! planted semantic drift, and simulated panels with known effect structure.
//!
//! The corpus drives the end-to-end pipeline runs and the drift-detection
//! checks; the panel generators drive the econometrics checks. Everything is
//! a pure function of its seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::panel::{PanelDataset, PanelRow};

/// A generated corpus bundle, including the sidecar tables the pipeline
/// stages consume.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    /// Tab-separated lexicon: `surface<TAB>canonical<TAB>descriptor`.
    pub lexicon_tsv: String,
    /// CSV: `descriptor_id,canonical_token,n_major,n_nonmajor,established_year,field_codes`.
    pub descriptor_stats_csv: String,
    /// CSV: `topic,year,count` publication counts per topic.
    pub topic_counts_csv: String,
    pub years: RangeInclusive<i32>,
    /// The canonical token whose context flips mid-series.
    pub drift_topic: String,
    /// First year the drift topic appears in its new context.
    pub flip_year: i32,
    pub stable_topics: Vec<String>,
    /// Total publication count backing the SID denominators.
    pub total_publications: u64,
}

const CLUSTER_SIZE: usize = 8;
const PURE_DOCS_PER_CLUSTER: usize = 60;
const TOPIC_DOCS_PER_PERIOD: usize = 60;
const DOC_LEN: usize = 9;

/// Five periods, two disjoint co-occurrence clusters, twelve stable topics
/// and one topic whose context flips from cluster A to cluster B at
/// `flip_year` (the third period). Topic mentions are frequent enough to
/// clear the default frequency criteria, and there are enough topics for the
/// random-effects between regression downstream.
pub fn planted_drift_corpus(seed: u64) -> SynthCorpus {
    let years = 2000..=2004;
    let flip_year = 2002;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let cluster_a: Vec<String> = (0..CLUSTER_SIZE).map(|i| format!("alpha{i}")).collect();
    let cluster_b: Vec<String> = (0..CLUSTER_SIZE).map(|i| format!("beta{i}")).collect();
    let stable_topics: Vec<String> =
        (0..12).map(|i| format!("Stable_Topic_{i}")).collect();
    let drift_topic = "Drift_Virus".to_string();

    // lexicon: each canonical topic has a two-word surface phrase, which the
    // generated titles use, so the pipeline exercises phrase merging
    let mut lexicon_tsv = String::new();
    let surface = |canonical: &str| canonical.to_lowercase().replace('_', " ");
    for (i, topic) in stable_topics.iter().enumerate() {
        let _ = writeln!(lexicon_tsv, "{}\t{}\tD1{i:05}", surface(topic), topic);
    }
    let _ = writeln!(lexicon_tsv, "{}\t{}\tD200000", surface(&drift_topic), drift_topic);

    let mut documents = Vec::new();
    let mut doc_id = 0usize;
    let mut push_doc = |year: i32, title: String, documents: &mut Vec<Document>| {
        documents.push(Document::new(format!("doc{doc_id:06}"), year, title));
        doc_id += 1;
    };
    let sample_words = |rng: &mut ChaCha8Rng, pool: &[String], n: usize| -> Vec<String> {
        (0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect()
    };

    for year in years.clone() {
        for pool in [&cluster_a, &cluster_b] {
            for _ in 0..PURE_DOCS_PER_CLUSTER {
                let words = sample_words(&mut rng, pool, DOC_LEN);
                push_doc(year, words.join(" "), &mut documents);
            }
        }
        // stable topics keep cluster A context in every period
        for topic in &stable_topics {
            for _ in 0..TOPIC_DOCS_PER_PERIOD {
                let mut words = sample_words(&mut rng, &cluster_a, DOC_LEN - 2);
                let pos = rng.random_range(0..=words.len());
                words.insert(pos, surface(topic));
                push_doc(year, words.join(" "), &mut documents);
            }
        }
        // the drift topic flips from cluster A to cluster B at flip_year
        let pool = if year < flip_year { &cluster_a } else { &cluster_b };
        for _ in 0..TOPIC_DOCS_PER_PERIOD {
            let mut words = sample_words(&mut rng, pool, DOC_LEN - 2);
            let pos = rng.random_range(0..=words.len());
            words.insert(pos, surface(&drift_topic));
            push_doc(year, words.join(" "), &mut documents);
        }
    }

    // descriptor stats: SID comfortably above the default threshold
    let total_publications = 1_000_000u64;
    let mut descriptor_stats_csv = String::from(
        "descriptor_id,canonical_token,n_major,n_nonmajor,established_year,field_codes\n",
    );
    for (i, topic) in stable_topics.iter().enumerate() {
        let _ = writeln!(
            descriptor_stats_csv,
            "D1{i:05},{topic},{},{},{},{}",
            800 + i * 50,
            300 + i * 20,
            1970 + i as i32 * 2,
            1 + (i % 3)
        );
    }
    let _ = writeln!(descriptor_stats_csv, "D200000,{drift_topic},1500,400,1995,2;5");

    // publication counts: stable topics grow gently; the drift topic gets a
    // growth burst after the flip. Coverage extends past the corpus years so
    // multi-year forecast leads still find growth values.
    let mut topic_counts_csv = String::from("topic,year,count\n");
    let mut all_topics: Vec<&String> = stable_topics.iter().collect();
    all_topics.push(&drift_topic);
    for (i, topic) in all_topics.iter().enumerate() {
        let base = 120 + 15 * i as u64;
        for (k, year) in (1999..=2008).enumerate() {
            let count = if **topic == drift_topic && year >= flip_year {
                base + 12 * k as u64 + 40 * (year - flip_year + 1) as u64
            } else {
                base + 6 * k as u64 + (i as u64 * 7 + k as u64 * 3) % 9
            };
            let _ = writeln!(topic_counts_csv, "{topic},{year},{count}");
        }
    }

    SynthCorpus {
        documents,
        lexicon_tsv,
        descriptor_stats_csv,
        topic_counts_csv,
        years,
        drift_topic,
        flip_year,
        stable_topics,
        total_publications,
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Knobs of the panel simulator.
#[derive(Debug, Clone)]
pub struct PanelSim {
    pub n_topics: usize,
    pub n_years: usize,
    /// Standard deviation of the per-topic effect.
    pub sigma_topic: f64,
    /// Standard deviation of the idiosyncratic noise.
    pub sigma_noise: f64,
    /// Linear year trend injected into y (zero under the time-effects null).
    pub year_shift: f64,
    /// Correlation between the topic effect and the topic's novelty level
    /// (nonzero breaks the random-effects orthogonality assumption).
    pub effect_novelty_corr: f64,
    pub seed: u64,
}

impl Default for PanelSim {
    fn default() -> Self {
        PanelSim {
            n_topics: 40,
            n_years: 8,
            sigma_topic: 0.0,
            sigma_noise: 2.0,
            year_shift: 0.0,
            effect_novelty_corr: 0.0,
            seed: 0,
        }
    }
}

/// Simulate a balanced panel `y = 1 + 0.4·novelty + 0.05·growth − 0.1·age +
/// effects + noise` with the requested effect structure.
pub fn simulated_panel(sim: &PanelSim) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut rows = Vec::new();
    for i in 0..sim.n_topics {
        let base_novelty = rng.random_range(5.0..20.0);
        let raw_effect = gaussian(&mut rng);
        let rho = sim.effect_novelty_corr;
        let effect = sim.sigma_topic
            * (rho * (base_novelty - 12.5) / 4.33 + (1.0 - rho * rho).sqrt() * raw_effect);
        let established = 1950 + (i as i32 % 25);
        for t in 0..sim.n_years {
            let year = 1996 + t as i32;
            let novelty = base_novelty + rng.random_range(-2.0..2.0);
            let growth_t = rng.random_range(-10.0..30.0);
            let age = (year - established) as f64;
            let y = 1.0 + 0.4 * novelty + 0.05 * growth_t - 0.1 * age
                + effect
                + sim.year_shift * t as f64
                + sim.sigma_noise * gaussian(&mut rng);
            rows.push(PanelRow {
                topic: format!("topic{i:03}"),
                t: year,
                delta: 1,
                y,
                novelty,
                growth_t,
                age,
                field: 1 + (i % 4) as u8,
            });
        }
    }
    PanelDataset::from_rows(rows).expect("simulated rows are unique")
}

/// Panels for a window sweep with the predictive signal planted at
/// `true_win`: every window's novelty column is the same latent signal plus
/// noise that grows with the distance |win − true_win|, so attenuation makes
/// the regression coefficient peak at `true_win` for every lead.
pub fn win_effect_panels(
    wins: RangeInclusive<u32>,
    deltas: RangeInclusive<u32>,
    true_win: u32,
    n_topics: usize,
    n_years: usize,
    seed: u64,
) -> BTreeMap<u32, PanelDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_deltas = deltas.clone().count();

    struct Cell {
        signal: f64,
        growth_t: f64,
        age: f64,
        ys: Vec<f64>,
    }
    let mut cells: Vec<Vec<Cell>> = Vec::with_capacity(n_topics);
    for i in 0..n_topics {
        let effect = 2.0 * gaussian(&mut rng);
        let established = 1950 + (i as i32 % 30);
        let mut topic_cells = Vec::with_capacity(n_years);
        for t in 0..n_years {
            let year = 1996 + t as i32;
            let signal = rng.random_range(5.0..20.0);
            let growth_t = rng.random_range(-10.0..30.0);
            let age = (year - established) as f64;
            let ys = (0..n_deltas)
                .map(|_| 3.0 + 0.8 * signal + effect + 1.5 * gaussian(&mut rng))
                .collect();
            topic_cells.push(Cell { signal, growth_t, age, ys });
        }
        cells.push(topic_cells);
    }

    let mut panels = BTreeMap::new();
    for win in wins {
        let noise_scale = 1.6 * (win as f64 - true_win as f64).abs();
        let mut rows = Vec::new();
        for (i, topic_cells) in cells.iter().enumerate() {
            for (t, cell) in topic_cells.iter().enumerate() {
                let novelty = cell.signal + noise_scale * gaussian(&mut rng);
                for (di, delta) in (deltas.clone()).enumerate() {
                    rows.push(PanelRow {
                        topic: format!("topic{i:03}"),
                        t: 1996 + t as i32,
                        delta,
                        y: cell.ys[di],
                        novelty,
                        growth_t: cell.growth_t,
                        age: cell.age,
                        field: 1 + (i % 4) as u8,
                    });
                }
            }
        }
        panels.insert(win, PanelDataset::from_rows(rows).expect("unique rows"));
    }
    panels
}
