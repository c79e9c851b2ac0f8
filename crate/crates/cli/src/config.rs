//! Run configuration: a plain key = value file plus command-line overrides
//! (flags win). Every validation error names the offending key.

use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub documents: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub descriptor_stats: Option<PathBuf>,
    pub topic_counts: Option<PathBuf>,
    pub out: PathBuf,
    pub years: Option<(i32, i32)>,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: u64,
    pub unigram_power: f64,
    pub subsample: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    /// Retrospective windows scored by the novelty stage and swept by the
    /// panel stage.
    pub wins: Vec<u32>,
    /// Headline window used by the panel models and the charts.
    pub win: u32,
    pub deltas: Vec<u32>,
    pub delta: u32,
    pub sid_threshold: f64,
    pub min_token_count: u64,
    pub total_publications: Option<u64>,
    pub zmax: f64,
    /// Topics to chart; empty means "first two selected".
    pub topics: Vec<String>,
    pub viz_k: usize,
    pub viz_threshold: f64,
    pub perplexity: f64,
    pub tsne_iterations: usize,
    pub per_year: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            documents: None,
            lexicon: None,
            descriptor_stats: None,
            topic_counts: None,
            out: PathBuf::from("out"),
            years: None,
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 5,
            unigram_power: 0.75,
            subsample: None,
            seed: 42,
            workers: 1,
            wins: (1..=10).collect(),
            win: 7,
            deltas: (1..=10).collect(),
            delta: 1,
            sid_threshold: 1000.0,
            min_token_count: 50,
            total_publications: None,
            zmax: 3.0,
            topics: Vec::new(),
            viz_k: 8,
            viz_threshold: 0.5,
            perplexity: 10.0,
            tsne_iterations: 1000,
            per_year: false,
        }
    }
}

/// Command-line overrides; `None` means "not given".
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for all stage artifacts
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Within-stage worker threads (1 = deterministic)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Corpus year range, inclusive, as A..B
    #[arg(long)]
    pub years: Option<String>,
    /// Headline retrospective window
    #[arg(long)]
    pub win: Option<u32>,
    /// Headline forecast lead
    #[arg(long)]
    pub delta: Option<u32>,
    /// Run t-SNE per year instead of one joint embedding across years
    #[arg(long)]
    pub per_year: bool,
}

fn bad_key(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config key {key:?}: {reason}"))
}

fn parse_range_i32(key: &str, value: &str) -> Result<(i32, i32), CliError> {
    let (a, b) = value
        .split_once("..")
        .ok_or_else(|| bad_key(key, "expected A..B"))?;
    let lo: i32 = a.trim().parse().map_err(|_| bad_key(key, format!("bad start {a:?}")))?;
    let hi: i32 = b.trim().parse().map_err(|_| bad_key(key, format!("bad end {b:?}")))?;
    if lo > hi {
        return Err(bad_key(key, "start exceeds end"));
    }
    Ok((lo, hi))
}

/// `A..B` (inclusive) or a comma list.
fn parse_u32_list(key: &str, value: &str) -> Result<Vec<u32>, CliError> {
    if let Some((a, b)) = value.split_once("..") {
        let lo: u32 = a.trim().parse().map_err(|_| bad_key(key, format!("bad start {a:?}")))?;
        let hi: u32 = b.trim().parse().map_err(|_| bad_key(key, format!("bad end {b:?}")))?;
        if lo > hi {
            return Err(bad_key(key, "start exceeds end"));
        }
        return Ok((lo..=hi).collect());
    }
    value
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad_key(key, format!("bad entry {s:?}"))))
        .collect()
}

impl RunConfig {
    pub fn load(args: &CommonArgs) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            cfg.apply_file(&text)?;
        }
        if let Some(out) = &args.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = args.workers {
            cfg.workers = workers;
        }
        if let Some(years) = &args.years {
            cfg.years = Some(parse_range_i32("years", years)?);
        }
        if let Some(win) = args.win {
            cfg.win = win;
        }
        if let Some(delta) = args.delta {
            cfg.delta = delta;
        }
        if args.per_year {
            cfg.per_year = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("config line {}: expected key = value", i + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            self.apply_kv(key, value)?;
        }
        Ok(())
    }

    fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        macro_rules! num {
            ($ty:ty) => {
                value.parse::<$ty>().map_err(|_| bad_key(key, format!("bad value {value:?}")))?
            };
        }
        match key {
            "documents" => self.documents = Some(PathBuf::from(value)),
            "lexicon" => self.lexicon = Some(PathBuf::from(value)),
            "descriptor_stats" => self.descriptor_stats = Some(PathBuf::from(value)),
            "topic_counts" => self.topic_counts = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "years" => self.years = Some(parse_range_i32(key, value)?),
            "dim" => self.dim = num!(usize),
            "window" => self.window = num!(usize),
            "negatives" => self.negatives = num!(usize),
            "epochs" => self.epochs = num!(usize),
            "learning_rate" => self.learning_rate = num!(f64),
            "min_count" => self.min_count = num!(u64),
            "unigram_power" => self.unigram_power = num!(f64),
            "subsample" => self.subsample = Some(num!(f64)),
            "seed" => self.seed = num!(u64),
            "workers" => self.workers = num!(usize),
            "wins" => self.wins = parse_u32_list(key, value)?,
            "win" => self.win = num!(u32),
            "deltas" => self.deltas = parse_u32_list(key, value)?,
            "delta" => self.delta = num!(u32),
            "sid_threshold" => self.sid_threshold = num!(f64),
            "min_token_count" => self.min_token_count = num!(u64),
            "total_publications" => self.total_publications = Some(num!(u64)),
            "zmax" => self.zmax = num!(f64),
            "topics" => {
                self.topics =
                    value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            }
            "viz_k" => self.viz_k = num!(usize),
            "viz_threshold" => self.viz_threshold = num!(f64),
            "perplexity" => self.perplexity = num!(f64),
            "tsne_iterations" => self.tsne_iterations = num!(usize),
            "per_year" => {
                self.per_year = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => return Err(bad_key(key, format!("bad boolean {other:?}"))),
                }
            }
            other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(bad_key("workers", "must be ≥ 1"));
        }
        if self.dim == 0 {
            return Err(bad_key("dim", "must be ≥ 1"));
        }
        if self.window == 0 {
            return Err(bad_key("window", "must be ≥ 1"));
        }
        if self.win == 0 {
            return Err(bad_key("win", "must be ≥ 1"));
        }
        if self.delta == 0 {
            return Err(bad_key("delta", "must be ≥ 1"));
        }
        if self.wins.contains(&0) {
            return Err(bad_key("wins", "windows must be ≥ 1"));
        }
        if self.deltas.contains(&0) {
            return Err(bad_key("deltas", "leads must be ≥ 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(bad_key("learning_rate", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.unigram_power) {
            return Err(bad_key("unigram_power", "must be in [0, 1]"));
        }
        for (key, path) in [
            ("documents", &self.documents),
            ("lexicon", &self.lexicon),
            ("descriptor_stats", &self.descriptor_stats),
            ("topic_counts", &self.topic_counts),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(bad_key(key, format!("path {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// A required input path, as a field-precise config error when unset.
    pub fn require_path<'a>(
        &self,
        key: &str,
        value: &'a Option<PathBuf>,
    ) -> Result<&'a Path, CliError> {
        value
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("config key {key:?} is required here")))
    }

    pub fn require_years(&self) -> Result<(i32, i32), CliError> {
        self.years
            .ok_or_else(|| CliError::Config("config key \"years\" is required here".into()))
    }

    pub fn hyperparams(&self) -> semnova::Hyperparams {
        semnova::Hyperparams {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            initial_learning_rate: self.learning_rate,
            min_count: self.min_count,
            unigram_power: self.unigram_power,
            seed: self.seed,
            subsample: self.subsample,
        }
    }
}
