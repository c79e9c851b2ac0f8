//! `semnova`: drive the novelty pipeline end to end or stage by stage.
//!
//! Stages: `preprocess` → `train` → `align` → `novelty` → `topics` → `panel`
//! → `viz`; `pipeline` runs them all; `synth` writes the bundled demo corpus.
//!
//! Exit codes: 0 success, 2 configuration error, 3 missing prerequisite
//! artifact, 4 numeric failure, 1 anything else.

mod config;
mod report;
mod stages;

use clap::{Parser, Subcommand};

use config::{CommonArgs, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Missing(String),
    Numeric(String),
    Io(std::io::Error),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Missing(m) => write!(f, "missing prerequisite: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<semnova::corpus::CorpusError> for CliError {
    fn from(e: semnova::corpus::CorpusError) -> Self {
        match e {
            semnova::corpus::CorpusError::Io(io) => CliError::Io(io),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<semnova::embedder::EmbedError> for CliError {
    fn from(e: semnova::embedder::EmbedError) -> Self {
        use semnova::embedder::EmbedError::*;
        match e {
            InvalidHyperparam { .. } | EmptyVocabulary(_) => CliError::Config(e.to_string()),
            NonFinite(_) | DimMismatch { .. } | VocabCorpusMismatch { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<semnova::align::AlignError> for CliError {
    fn from(e: semnova::align::AlignError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<semnova::novelty::NoveltyError> for CliError {
    fn from(e: semnova::novelty::NoveltyError) -> Self {
        match e {
            semnova::novelty::NoveltyError::Io(io) => CliError::Io(io),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<semnova::topics::TopicsError> for CliError {
    fn from(e: semnova::topics::TopicsError) -> Self {
        use semnova::topics::TopicsError::*;
        match e {
            Io(io) => CliError::Io(io),
            MalformedStats { .. } | MalformedCounts { .. } => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<semnova::panel::PanelError> for CliError {
    fn from(e: semnova::panel::PanelError) -> Self {
        use semnova::panel::PanelError::*;
        match e {
            Io(io) => CliError::Io(io),
            MalformedCsv { .. } => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<semnova::viz::VizError> for CliError {
    fn from(e: semnova::viz::VizError) -> Self {
        match e {
            semnova::viz::VizError::Io(io) => CliError::Io(io),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<semnova::temb::TembError> for CliError {
    fn from(e: semnova::temb::TembError) -> Self {
        match e {
            semnova::temb::TembError::Io(io) => CliError::Io(io),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "semnova",
    version,
    about = "Topic novelty from temporal embeddings, with growth regressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the bundled synthetic corpus and a ready-to-run config
    Synth(CommonArgs),
    /// Normalize documents, merge phrases, expand acronyms, bucket by year
    Preprocess(CommonArgs),
    /// Train one embedding per period
    Train(CommonArgs),
    /// Align periods into one frame with orthogonal Procrustes
    Align(CommonArgs),
    /// Score semantic change per topic and window
    Novelty(CommonArgs),
    /// Select analysis topics and compute publication growth
    Topics(CommonArgs),
    /// Fit pooled/fixed/random models with specification tests, sweep windows
    Panel(CommonArgs),
    /// Render co-evolution curves and semantic-change maps
    Viz(CommonArgs),
    /// Run every stage in order
    Pipeline(CommonArgs),
}

fn run(command: &Command) -> Result<(), CliError> {
    let args = match command {
        Command::Synth(a)
        | Command::Preprocess(a)
        | Command::Train(a)
        | Command::Align(a)
        | Command::Novelty(a)
        | Command::Topics(a)
        | Command::Panel(a)
        | Command::Viz(a)
        | Command::Pipeline(a) => a,
    };
    let cfg = RunConfig::load(args)?;
    match command {
        Command::Synth(_) => stages::stage_synth(&cfg).map(|_| ()),
        Command::Preprocess(_) => stages::stage_preprocess(&cfg).map(|_| ()),
        Command::Train(_) => stages::stage_train(&cfg).map(|_| ()),
        Command::Align(_) => stages::stage_align(&cfg).map(|_| ()),
        Command::Novelty(_) => stages::stage_novelty(&cfg).map(|_| ()),
        Command::Topics(_) => stages::stage_topics(&cfg).map(|_| ()),
        Command::Panel(_) => stages::stage_panel(&cfg).map(|_| ()),
        Command::Viz(_) => stages::stage_viz(&cfg).map(|_| ()),
        Command::Pipeline(_) => stages::stage_pipeline(&cfg).map(|_| ()),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(err) = run(&cli.command) {
        eprintln!("semnova: {err}");
        std::process::exit(err.exit_code());
    }
}
