//! Round-trip translation consistency: generate forward-translation
//! candidates with a temperature schedule, translate each back to the
//! source language, score how well the round trip preserves the original
//! (summed ROUGE-1/2/L components, 9.0 = perfect), and keep the candidate
//! that cycles best. A benchmark harness runs the same procedure over
//! any-to-any language-pair matrices and compute scaling curves without
//! needing parallel corpora.

pub mod backend;
pub mod benchmark;
pub mod config;
pub mod error;
pub mod lang;
pub mod metrics;
pub mod pipeline;
pub mod tokenize;

pub use backend::{
    CachedBackend, CountingBackend, DecodeParams, HttpBackend, HttpConfig, MockBackend,
    ModelInfo, NoiseConfig, TranslationBackend, TranslationRequest,
};
pub use benchmark::{
    emit_report, load_dataset, run_matrix, run_scaling, BenchmarkConfig, BenchmarkMatrix,
    DatasetRecord, MatrixCell, Report, ReportFormat, ScalingPoint,
};
pub use config::{BackendKind, Config};
pub use error::{BackendError, Error, Result};
pub use lang::{LanguageRegistry, LanguageTag, Segmentation};
pub use metrics::{bleu, consistency, lcs_length, rouge_l, rouge_n, BleuScore, ConsistencyScore, RougeComponent};
pub use pipeline::{
    score_cycle, select_best, temperature_schedule, CandidateReport, ComputeCost, Pipeline,
    PipelineConfig, SelectionMetric, SelectionResult,
};
pub use tokenize::{ngrams, TokenSequence};
