//! The pipeline stages. Each stage reads its inputs (failing with the
//! prerequisite exit code when an upstream artifact is missing), writes its
//! products atomically, and leaves a digest report under `reports/`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use semnova::align::{align_series, series_from_aligned, AlignedSeries};
use semnova::corpus::{bucket_by_period, load_documents_file, preprocess_document, Lexicon, PeriodCorpus};
use semnova::embedder::{build_vocab, train_sgns};
use semnova::novelty::{novelty_table, read_novelty_csv, write_novelty_csv, NoveltySeries};
use semnova::panel::{
    build_panel, f_test_time_effects, fixed_effects, hausman, lm_test, pooled_ols,
    random_effects, window_sweep, write_grid_csv, write_panel_csv, PanelDataset,
    RegressionResult, TestResult, STARS_THRESHOLDS,
};
use semnova::synth::planted_drift_corpus;
use semnova::temb;
use semnova::topics::{
    growth, load_descriptor_stats_file, load_topic_counts_file, select_topics, DescriptorStats,
    TopicYearCounts,
};
use semnova::viz::{build_scene, emit_coevolution, emit_semantic_map, TsneParams};

use crate::config::RunConfig;
use crate::report::{write_atomic, StageReport, StageRun};
use crate::CliError;

fn preprocess_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("preprocess")
}

fn manifest_path(cfg: &RunConfig) -> PathBuf {
    preprocess_dir(cfg).join("manifest.json")
}

fn period_path(cfg: &RunConfig, year: i32) -> PathBuf {
    preprocess_dir(cfg).join(format!("period_{year}.txt"))
}

fn token_counts_path(cfg: &RunConfig) -> PathBuf {
    preprocess_dir(cfg).join("token_counts.csv")
}

fn embedding_path(cfg: &RunConfig, year: i32) -> PathBuf {
    cfg.out.join("embeddings").join(format!("emb_{year}.temb"))
}

fn aligned_path(cfg: &RunConfig, year: i32) -> PathBuf {
    cfg.out.join("aligned").join(format!("emb_{year}.temb"))
}

fn rotations_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("aligned").join("rotations.trot")
}

fn novelty_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("novelty").join("novelty.csv")
}

fn selected_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("topics").join("selected.txt")
}

fn growth_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("topics").join("growth.csv")
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PreprocessManifest {
    years: Vec<i32>,
    documents: usize,
}

/// Generate the bundled synthetic corpus and a ready-to-run config file.
pub fn stage_synth(cfg: &RunConfig) -> Result<StageReport, CliError> {
    let mut run = StageRun::new("synth");
    let synth = planted_drift_corpus(cfg.seed);
    let corpus_dir = cfg.out.join("corpus");

    let docs_path = corpus_dir.join("documents.jsonl");
    let mut jsonl = String::new();
    for doc in &synth.documents {
        let line = serde_json::to_string(doc)
            .map_err(|e| CliError::Other(format!("serialize document: {e}")))?;
        jsonl.push_str(&line);
        jsonl.push('\n');
    }
    write_atomic(&docs_path, jsonl.as_bytes())?;
    let lexicon_path = corpus_dir.join("lexicon.tsv");
    write_atomic(&lexicon_path, synth.lexicon_tsv.as_bytes())?;
    let stats_path = corpus_dir.join("descriptor_stats.csv");
    write_atomic(&stats_path, synth.descriptor_stats_csv.as_bytes())?;
    let counts_path = corpus_dir.join("topic_counts.csv");
    write_atomic(&counts_path, synth.topic_counts_csv.as_bytes())?;

    let conf_path = cfg.out.join("semnova.conf");
    let abs = |p: &Path| -> PathBuf {
        std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
    };
    let conf = format!(
        "# generated by `semnova synth`\n\
         documents = {}\n\
         lexicon = {}\n\
         descriptor_stats = {}\n\
         topic_counts = {}\n\
         out = {}\n\
         years = {}..{}\n\
         dim = 24\nwindow = 5\nnegatives = 5\nepochs = 3\nmin_count = 5\n\
         seed = {}\nworkers = {}\n\
         wins = 1..4\nwin = 2\ndeltas = 1..3\ndelta = 1\n\
         total_publications = {}\n\
         topics = {},{}\n\
         viz_k = 6\nperplexity = 3\ntsne_iterations = 400\n",
        abs(&docs_path).display(),
        abs(&lexicon_path).display(),
        abs(&stats_path).display(),
        abs(&counts_path).display(),
        abs(&cfg.out).display(),
        synth.years.start(),
        synth.years.end(),
        cfg.seed,
        cfg.workers,
        synth.total_publications,
        synth.drift_topic,
        synth.stable_topics[0],
    );
    write_atomic(&conf_path, conf.as_bytes())?;

    for p in [&docs_path, &lexicon_path, &stats_path, &counts_path, &conf_path] {
        run.output(p);
    }
    run.finish(&cfg.out)
}

/// Normalize, merge phrases, expand acronyms, and bucket by year.
pub fn stage_preprocess(cfg: &RunConfig) -> Result<StageReport, CliError> {
    let mut run = StageRun::new("preprocess");
    let docs_path = cfg.require_path("documents", &cfg.documents)?;
    let (lo, hi) = cfg.require_years()?;
    run.config_input(docs_path);

    let lexicon = match &cfg.lexicon {
        Some(path) => {
            run.config_input(path);
            Lexicon::load(path)?
        }
        None => {
            log::warn!("no lexicon configured; phrase merging is disabled");
            Lexicon::new()
        }
    };
    let documents = load_documents_file(docs_path)?;
    let tokenized: Vec<_> =
        documents.iter().map(|d| preprocess_document(d, &lexicon)).collect();
    let buckets = bucket_by_period(&tokenized, lo..=hi)?;

    for (year, bucket) in &buckets {
        let mut text = String::new();
        for doc in &bucket.documents {
            text.push_str(&doc.join(" "));
            text.push('\n');
        }
        let path = period_path(cfg, *year);
        write_atomic(&path, text.as_bytes())?;
        run.output(&path);
    }

    // per-period token census, sorted for stable output
    let mut counts_csv = String::from("token,year,count\n");
    for (year, bucket) in &buckets {
        let mut entries: Vec<(&String, &u64)> = bucket.token_counts.iter().collect();
        entries.sort();
        for (token, count) in entries {
            let _ = writeln!(counts_csv, "{token},{year},{count}");
        }
    }
    let counts_path = token_counts_path(cfg);
    write_atomic(&counts_path, counts_csv.as_bytes())?;
    run.output(&counts_path);

    let manifest = PreprocessManifest {
        years: buckets.keys().copied().collect(),
        documents: tokenized.len(),
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| CliError::Other(format!("serialize manifest: {e}")))?;
    write_atomic(&manifest_path(cfg), &manifest_bytes)?;
    run.output(&manifest_path(cfg));
    run.finish(&cfg.out)
}

fn load_manifest(cfg: &RunConfig, run: &mut StageRun) -> Result<PreprocessManifest, CliError> {
    let path = manifest_path(cfg);
    run.input(&path)?;
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Other(format!("corrupt manifest {}: {e}", path.display())))
}

fn load_period_corpus(path: &Path, year: i32) -> Result<PeriodCorpus, CliError> {
    let file = std::fs::File::open(path)?;
    let mut corpus = PeriodCorpus { period: year, ..Default::default() };
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        corpus.push(line.split_whitespace().map(str::to_string).collect());
    }
    Ok(corpus)
}

/// Train one embedding per period.
pub fn stage_train(cfg: &RunConfig) -> Result<StageReport, CliError> {
    let mut run = StageRun::new("train");
    let manifest = load_manifest(cfg, &mut run)?;
    let hp = cfg.hyperparams();
    for year in manifest.years {
        let in_path = period_path(cfg, year);
        run.input(&in_path)?;
        let corpus = load_period_corpus(&in_path, year)?;
        let vocab = build_vocab(&corpus, hp.min_count)?;
        // derive a distinct seed per period so matrices differ across years
        let mut period_hp = hp.clone();
        period_hp.seed = hp.seed.wrapping_add(year as u64);
        let matrix = train_sgns(&corpus, &vocab, &period_hp, cfg.workers)?;
        let out_path = embedding_path(cfg, year);
        let mut buf = Vec::new();
        temb::write_embedding(&mut buf, &matrix)?;
        write_atomic(&out_path, &buf)?;
        run.output(&out_path);
        log::info!("trained {year}: |V| = {}, dim = {}", vocab.len(), hp.dim);
    }
    run.finish(&cfg.out)
}

fn load_embeddings(
    cfg: &RunConfig,
    run: &mut StageRun,
    dir: impl Fn(&RunConfig, i32) -> PathBuf,
) -> Result<Vec<semnova::EmbeddingMatrix>, CliError> {
    let manifest = load_manifest(cfg, run)?;
    let mut out = Vec::new();
    for year in manifest.years {
        let path = dir(cfg, year);
        run.input(&path)?;
        out.push(temb::load_embedding(&path)?);
    }
    Ok(out)
}

/// Chain the periods into one frame with orthogonal Procrustes.
pub fn stage_align(cfg: &RunConfig) -> Result<StageReport, CliError> {
    let mut run = StageRun::new("align");
    let embeddings = load_embeddings(cfg, &mut run, embedding_path)?;
    let dim = embeddings.first().map_or(0, |m| m.dim);
    let series = align_series(embeddings)?;
    for matrix in &series.matrices {
        let path = aligned_path(cfg, matrix.period);
        let mut buf = Vec::new();
        temb::write_embedding(&mut buf, matrix)?;
        write_atomic(&path, &buf)?;
        run.output(&path);
    }
    let mut buf = Vec::new();
    temb::write_rotations(&mut buf, dim, &series.rotation_records())?;
    write_atomic(&rotations_path(cfg), &buf)?;
    run.output(&rotations_path(cfg));
    run.finish(&cfg.out)
}

fn load_aligned_series(cfg: &RunConfig, run: &mut StageRun) -> Result<AlignedSeries, CliError> {
    let matrices = load_embeddings(cfg, run, aligned_path)?;
    Ok(series_from_aligned(matrices)?)
}

/// Score semantic change for every candidate topic over the configured
/// windows.
pub fn stage_novelty(cfg: &RunConfig) -> Result<StageReport, CliError> {
    let mut run = StageRun::new("novelty");
    let series = load_aligned_series(cfg, &mut run)?;

    // candidates: descriptor tokens when available, otherwise the whole vocab
    let topics: BTreeSet<String> = match &cfg.descriptor_stats {
        Some(path) => {
            run.config_input(path);
            load_descriptor_stats_file(path)?
                .into_iter()
                .map(|s| s.canonical_token)
                .collect()
        }
        None => series
            .matrices
            .iter()
            .flat_map(|m| m.vocab.tokens().iter().cloned())
            .collect(),
    };
    let mut wins: BTreeSet<u32> = cfg.wins.iter().copied().collect();
    wins.insert(cfg.win);

    let table = novelty_table(&series, &topics, &wins);
    let mut buf = Vec::new();
    write_novelty_csv(&mut buf, &table)?;
    write_atomic(&novelty_path(cfg), &buf)?;
    run.output(&novelty_path(cfg));
    run.finish(&cfg.out)
}

/// Apply the descriptor-specificity and frequency criteria; emit the selected
/// topic list and their growth series.
pub fn stage_topics(cfg: &RunConfig) -> Result<StageReport, CliError> {
    let mut run = StageRun::new("topics");
    let stats_path = cfg.require_path("descriptor_stats", &cfg.descriptor_stats)?;
    let counts_path = cfg.require_path("topic_counts", &cfg.topic_counts)?;
    let total = cfg.total_publications.ok_or_else(|| {
        CliError::Config("config key \"total_publications\" is required here".into())
    })?;
    let (lo, hi) = cfg.require_years()?;
    run.config_input(stats_path);
    run.config_input(counts_path);
    let token_counts_file = token_counts_path(cfg);
    run.input(&token_counts_file)?;

    let stats = load_descriptor_stats_file(stats_path)?;
    let pub_counts = load_topic_counts_file(counts_path)?;
    let period_counts = load_period_token_counts(&token_counts_file)?;

    let selected = select_topics(
        &stats,
        &period_counts,
        lo..=hi,
        total,
        cfg.sid_threshold,
        cfg.min_token_count,
    )?;
    let mut listing = String::new();
    for topic in &selected {
        listing.push_str(topic);
        listing.push('\n');
    }
    write_atomic(&selected_path(cfg), listing.as_bytes())?;
    run.output(&selected_path(cfg));

    let mut growth_csv = String::from("topic,year,growth\n");
    for topic in &selected {
        if let Some(counts) = pub_counts.get(topic) {
            for &year in counts.counts.keys() {
                if let Ok(g) = growth(counts, year) {
                    let _ = writeln!(growth_csv, "{topic},{year},{g}");
                }
            }
        }
    }
    write_atomic(&growth_path(cfg), growth_csv.as_bytes())?;
    run.output(&growth_path(cfg));
    run.finish(&cfg.out)
}

fn load_period_token_counts(path: &Path) -> Result<HashMap<(String, i32), u64>, CliError> {
    let file = std::fs::File::open(path)?;
    let mut out = HashMap::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let mut parts = line.rsplitn(3, ',');
        let count = parts.next().and_then(|s| s.parse::<u64>().ok());
        let year = parts.next().and_then(|s| s.parse::<i32>().ok());
        let token = parts.next();
        match (token, year, count) {
            (Some(t), Some(y), Some(c)) => {
                out.insert((t.to_string(), y), c);
            }
            _ => {
                return Err(CliError::Other(format!(
                    "corrupt token counts at {} line {}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

fn load_selected(cfg: &RunConfig, run: &mut StageRun) -> Result<BTreeSet<String>, CliError> {
    let path = selected_path(cfg);
    run.input(&path)?;
    let text = std::fs::read_to_string(&path)?;
    Ok(text.lines().map(str::to_string).filter(|s| !s.is_empty()).collect())
}

#[derive(serde::Serialize)]
struct DeltaModels {
    pooled: RegressionResult,
    fixed: RegressionResult,
    random: RegressionResult,
    tests: BTreeMap<String, TestResult>,
    /// Compact stand-in for a single "field" table row: the first field
    /// dummy of the random-effects fit, when any is present.
    #[serde(skip_serializing_if = "Option::is_none")]
    field_summary: Option<semnova::panel::Coefficient>,
}

#[derive(serde::Serialize)]
struct PanelResults {
    win: u32,
    stars_thresholds: [f64; 3],
    models: BTreeMap<String, DeltaModels>,
}

/// Assemble panels, fit the three estimators with specification tests at the
/// headline window, and sweep the (win, delta) grid with random effects.
pub fn stage_panel(cfg: &RunConfig) -> Result<StageReport, CliError> {
    let mut run = StageRun::new("panel");
    let novelty_file = novelty_path(cfg);
    run.input(&novelty_file)?;
    let selected = load_selected(cfg, &mut run)?;
    let stats_path = cfg.require_path("descriptor_stats", &cfg.descriptor_stats)?;
    let counts_path = cfg.require_path("topic_counts", &cfg.topic_counts)?;
    run.config_input(stats_path);
    run.config_input(counts_path);

    let novelties: BTreeMap<String, NoveltySeries> = {
        let file = std::fs::File::open(&novelty_file)?;
        read_novelty_csv(std::io::BufReader::new(file))?
            .into_iter()
            .filter(|(topic, _)| selected.contains(topic))
            .collect()
    };
    let growths: Vec<TopicYearCounts> = load_topic_counts_file(counts_path)?
        .into_values()
        .filter(|c| selected.contains(&c.topic))
        .collect();
    let stats: Vec<DescriptorStats> = load_descriptor_stats_file(stats_path)?
        .into_iter()
        .filter(|s| selected.contains(&s.canonical_token))
        .collect();

    // headline window: full model suite per forecast lead
    let mut models = BTreeMap::new();
    for &delta in &cfg.deltas {
        let panel = build_panel(&novelties, &growths, &stats, delta, cfg.win, cfg.zmax)?;
        let csv_path = cfg
            .out
            .join("panel")
            .join(format!("panel_w{}_d{delta}.csv", cfg.win));
        let mut buf = Vec::new();
        write_panel_csv(&mut buf, &panel)?;
        write_atomic(&csv_path, &buf)?;
        run.output(&csv_path);

        let pooled = pooled_ols(&panel)?;
        let fixed = fixed_effects(&panel)?;
        let random = random_effects(&panel)?;
        let mut tests = BTreeMap::new();
        tests.insert("f_test".to_string(), f_test_time_effects(&panel)?);
        tests.insert("lm_test".to_string(), lm_test(&panel)?);
        tests.insert("hausman".to_string(), hausman(&fixed, &random)?);
        let field_summary = random
            .coefficients
            .iter()
            .find(|c| c.name.starts_with("field_"))
            .cloned();
        models.insert(
            format!("delta_{delta}"),
            DeltaModels { pooled, fixed, random, tests, field_summary },
        );
    }
    let results = PanelResults { win: cfg.win, stars_thresholds: STARS_THRESHOLDS, models };
    let results_path = cfg.out.join("panel").join("results.json");
    let json = serde_json::to_vec_pretty(&results)
        .map_err(|e| CliError::Other(format!("serialize results: {e}")))?;
    write_atomic(&results_path, &json)?;
    run.output(&results_path);

    // sweep: every configured window, all leads in one dataset per window
    let mut panels: BTreeMap<u32, PanelDataset> = BTreeMap::new();
    for &win in &cfg.wins {
        let mut rows = Vec::new();
        for &delta in &cfg.deltas {
            if let Ok(panel) = build_panel(&novelties, &growths, &stats, delta, win, cfg.zmax) {
                rows.extend(panel.rows);
            }
        }
        if !rows.is_empty() {
            panels.insert(win, PanelDataset::from_rows(rows)?);
        }
    }
    let grid = window_sweep(&panels, &cfg.deltas);
    let grid_path = cfg.out.join("panel").join("grid.csv");
    let mut buf = Vec::new();
    write_grid_csv(&mut buf, &grid)?;
    write_atomic(&grid_path, &buf)?;
    run.output(&grid_path);
    run.finish(&cfg.out)
}

/// Render the co-evolution curve and the semantic-change map per topic.
pub fn stage_viz(cfg: &RunConfig) -> Result<StageReport, CliError> {
    let mut run = StageRun::new("viz");
    let series = load_aligned_series(cfg, &mut run)?;
    let novelty_file = novelty_path(cfg);
    run.input(&novelty_file)?;
    let counts_path = cfg.require_path("topic_counts", &cfg.topic_counts)?;
    run.config_input(counts_path);
    let (lo, hi) = cfg.require_years()?;

    let table = {
        let file = std::fs::File::open(&novelty_file)?;
        read_novelty_csv(std::io::BufReader::new(file))?
    };
    let pub_counts = load_topic_counts_file(counts_path)?;
    let topics: Vec<String> = if cfg.topics.is_empty() {
        load_selected(cfg, &mut run)?.into_iter().take(2).collect()
    } else {
        cfg.topics.clone()
    };

    let tsne = TsneParams {
        perplexity: cfg.perplexity,
        iterations: cfg.tsne_iterations,
        seed: cfg.seed,
        ..Default::default()
    };
    for topic in &topics {
        let ns = table.get(topic).ok_or_else(|| {
            CliError::Numeric(format!("no novelty series for topic {topic:?}"))
        })?;
        let counts = pub_counts.get(topic).ok_or_else(|| {
            CliError::Numeric(format!("no publication counts for topic {topic:?}"))
        })?;
        let chart = emit_coevolution(ns, cfg.win, counts, lo..=hi)?;
        let svg_path = cfg.out.join("viz").join(format!("{topic}_coevolution.svg"));
        let csv_path = cfg.out.join("viz").join(format!("{topic}_coevolution.csv"));
        write_atomic(&svg_path, chart.svg.as_bytes())?;
        write_atomic(&csv_path, chart.csv.as_bytes())?;
        run.output(&svg_path);
        run.output(&csv_path);

        let scene = build_scene(
            &series,
            topic,
            lo..=hi,
            cfg.viz_k,
            cfg.viz_threshold,
            &tsne,
            cfg.per_year,
        )?;
        let map = emit_semantic_map(&scene)?;
        let svg_path = cfg.out.join("viz").join(format!("{topic}_map.svg"));
        let csv_path = cfg.out.join("viz").join(format!("{topic}_map.csv"));
        write_atomic(&svg_path, map.svg.as_bytes())?;
        write_atomic(&csv_path, map.csv.as_bytes())?;
        run.output(&svg_path);
        run.output(&csv_path);
    }
    run.finish(&cfg.out)
}

/// All stages in order.
pub fn stage_pipeline(cfg: &RunConfig) -> Result<Vec<StageReport>, CliError> {
    Ok(vec![
        stage_preprocess(cfg)?,
        stage_train(cfg)?,
        stage_align(cfg)?,
        stage_novelty(cfg)?,
        stage_topics(cfg)?,
        stage_panel(cfg)?,
        stage_viz(cfg)?,
    ])
}
