//! Measure how much the meaning of research topics shifts over time and
//! relate that shift to future publication growth.
//!
//! The pipeline, end to end:
//!
//! 1. [`corpus`]: normalize time-stamped documents, merge controlled-vocabulary
//!    phrases into single tokens, expand document-local acronyms, and bucket
//!    token streams by calendar year.
//! 2. [`embedder`]: train one skip-gram negative-sampling embedding per year.
//! 3. [`align`]: chain the yearly embeddings into one coordinate frame with
//!    orthogonal Procrustes rotations.
//! 4. [`novelty`]: score semantic change per topic and year as one minus the
//!    best cosine match against a retrospective window of past vectors.
//! 5. [`topics`]: select analysis topics by descriptor specificity and term
//!    frequency, and compute year-over-year publication growth.
//! 6. [`panel`]: assemble (topic, year) panels and fit pooled OLS, fixed-effects
//!    and random-effects models with F, LM and Hausman specification tests.
//! 7. [`viz`]: novelty/growth co-evolution charts and t-SNE semantic-change
//!    maps with label collision removal.
//!
//! [`synth`] generates the small deterministic corpora and panels the test
//! suites and the CLI demo run on.

pub mod align;
pub mod corpus;
pub mod embedder;
pub mod novelty;
pub mod panel;
pub mod synth;
pub mod temb;
pub mod topics;
pub mod viz;

pub use align::{cos_sim, orthogonal_procrustes, AlignedSeries, RotationStep};
pub use corpus::{Document, Lexicon, PeriodCorpus, TokenizedDocument};
pub use embedder::{EmbeddingMatrix, Hyperparams, Vocabulary};
pub use novelty::NoveltySeries;
pub use panel::{PanelDataset, PanelRow, RegressionResult, TestResult};
pub use topics::{DescriptorStats, TopicYearCounts};
