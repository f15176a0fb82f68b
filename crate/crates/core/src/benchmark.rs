//! Benchmark harness: any-to-any language-pair matrices and
//! consistency-versus-compute scaling curves over a paragraph dataset,
//! with JSON and CSV report emission.
//!
//! Runs are deterministic by construction: every (language pair, record)
//! combination derives its own pipeline seed from the global benchmark
//! seed, so results do not depend on execution order.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{ModelInfo, TranslationBackend};
use crate::error::{Error, Result};
use crate::lang::{LanguageRegistry, LanguageTag};
use crate::pipeline::{ComputeCost, Pipeline, PipelineConfig};

pub const REPORT_VERSION: u32 = 1;

/// One paragraph of the evaluation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub language: LanguageTag,
    pub text: String,
    pub topic: String,
}

#[derive(Deserialize)]
struct RawDatasetRecord {
    id: String,
    language: String,
    text: String,
    #[serde(default)]
    topic: String,
}

/// Parses a line-delimited JSON dataset, resolving language codes against
/// the registry. Errors carry the offending line number; duplicate ids are
/// rejected by name. An empty file is a valid empty dataset.
pub fn load_dataset(path: &Path, registry: &LanguageRegistry) -> Result<Vec<DatasetRecord>> {
    let file = File::open(path).map_err(|e| {
        Error::Usage(format!("cannot open dataset '{}': {e}", path.display()))
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (index, line) in reader.lines().enumerate() {
        let lineno = index + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDatasetRecord = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: lineno,
            message: e.to_string(),
        })?;
        if raw.id.is_empty() {
            return Err(Error::Dataset {
                line: lineno,
                message: "record id must be non-empty".into(),
            });
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::Dataset {
                line: lineno,
                message: format!("duplicate record id '{}'", raw.id),
            });
        }
        if raw.text.is_empty() {
            return Err(Error::Dataset {
                line: lineno,
                message: format!("record '{}' has empty text", raw.id),
            });
        }
        let language = registry.get(&raw.language).map_err(|_| Error::Dataset {
            line: lineno,
            message: format!(
                "record '{}' uses unregistered language '{}'",
                raw.id, raw.language
            ),
        })?;
        records.push(DatasetRecord {
            id: raw.id,
            language: language.clone(),
            text: raw.text,
            topic: raw.topic,
        });
    }
    Ok(records)
}

/// Benchmark-level knobs on top of the pipeline configuration. The global
/// seed feeds the per-(pair, record) seed derivation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub pipeline: PipelineConfig,
    pub seed: u64,
}

/// Outcome for a single dataset record within one cell, persisted in the
/// JSON report so the aggregates are auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceOutcome {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_index: Option<usize>,
    pub total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Aggregates for one ordered language pair. `mean_total`/`std_total` are
/// None when the source language has no records. Failed sentences score 0
/// and are counted in `n_failures` rather than excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub source: String,
    pub target: String,
    pub mean_total: Option<f64>,
    pub std_total: Option<f64>,
    pub n_sentences: usize,
    pub n_failures: usize,
    pub sentences: Vec<SentenceOutcome>,
}

/// Mean consistency for every ordered language pair, plus the compute
/// bookkeeping shared by all cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMatrix {
    pub languages: Vec<LanguageTag>,
    pub cells: Vec<MatrixCell>,
    pub model: ModelInfo,
    pub n_candidates: usize,
    pub compute_per_sentence: ComputeCost,
}

impl BenchmarkMatrix {
    pub fn cell(&self, source: &str, target: &str) -> Option<&MatrixCell> {
        self.cells
            .iter()
            .find(|c| c.source == source && c.target == target)
    }
}

/// One point of a consistency-versus-compute curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub model: ModelInfo,
    pub n_candidates: usize,
    /// parameter_count * n_candidates, in parameter-passes.
    pub compute: f64,
    pub mean_total: f64,
    pub n_sentences: usize,
    pub n_failures: usize,
}

/// Stable per-(pair, record) seed so results are independent of execution
/// order and reproducible across processes.
fn derive_seed(global: u64, source: &str, target: &str, record_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    for part in [source, target, record_id] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[0..8].try_into().expect("digest is long enough"))
}

struct PairOutcome {
    sentences: Vec<SentenceOutcome>,
    n_failures: usize,
}

/// Shared state for running one (backend, model) over language pairs.
struct PairRunner<'a> {
    backend: &'a dyn TranslationBackend,
    model: &'a ModelInfo,
    registry: &'a LanguageRegistry,
    config: &'a BenchmarkConfig,
}

impl PairRunner<'_> {
    fn run(
        &self,
        records: &[&DatasetRecord],
        source: &LanguageTag,
        target: &LanguageTag,
        n_candidates: usize,
    ) -> Result<PairOutcome> {
        let mut sentences = Vec::with_capacity(records.len());
        let mut n_failures = 0;
        for record in records {
            let mut pipeline_config = self.config.pipeline.clone();
            pipeline_config.base_seed = Some(derive_seed(
                self.config.seed,
                source.code(),
                target.code(),
                &record.id,
            ));
            let pipeline =
                Pipeline::new(self.backend, self.registry, self.model.clone(), pipeline_config)?;
            match pipeline.translate_n(&record.text, source, target, n_candidates) {
                Ok(result) => sentences.push(SentenceOutcome {
                    id: record.id.clone(),
                    selected_index: Some(result.selected_index),
                    total: result.selected().score.total,
                    error: None,
                }),
                // A sentence whose candidates all failed scores zero;
                // anything else (bad config, unknown language) aborts.
                Err(Error::AllCandidatesFailed { failures }) => {
                    n_failures += 1;
                    sentences.push(SentenceOutcome {
                        id: record.id.clone(),
                        selected_index: None,
                        total: 0.0,
                        error: Some(format!(
                            "all {} candidate(s) failed: {}",
                            failures.len(),
                            failures
                                .first()
                                .map(|(_, m)| m.as_str())
                                .unwrap_or("unknown cause")
                        )),
                    });
                }
                Err(other) => return Err(other),
            }
        }
        Ok(PairOutcome {
            sentences,
            n_failures,
        })
    }
}

fn mean_and_std(totals: &[f64]) -> (Option<f64>, Option<f64>) {
    if totals.is_empty() {
        return (None, None);
    }
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let variance = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(variance.sqrt()))
}

/// Runs the self-reflective pipeline for every ordered pair of `languages`
/// over the records whose language matches the pair's source, and
/// aggregates per-cell statistics.
pub fn run_matrix(
    dataset: &[DatasetRecord],
    languages: &[LanguageTag],
    backend: &dyn TranslationBackend,
    model: &ModelInfo,
    n_candidates: usize,
    registry: &LanguageRegistry,
    config: &BenchmarkConfig,
) -> Result<BenchmarkMatrix> {
    let runner = PairRunner {
        backend,
        model,
        registry,
        config,
    };
    let mut cells = Vec::new();
    for source in languages {
        let records: Vec<&DatasetRecord> = dataset
            .iter()
            .filter(|r| r.language.code() == source.code())
            .collect();
        for target in languages {
            if source.code() == target.code() {
                continue;
            }
            let outcome = runner.run(&records, source, target, n_candidates)?;
            let totals: Vec<f64> = outcome.sentences.iter().map(|s| s.total).collect();
            let (mean_total, std_total) = mean_and_std(&totals);
            cells.push(MatrixCell {
                source: source.code().to_string(),
                target: target.code().to_string(),
                mean_total,
                std_total,
                n_sentences: outcome.sentences.len(),
                n_failures: outcome.n_failures,
                sentences: outcome.sentences,
            });
        }
    }
    Ok(BenchmarkMatrix {
        languages: languages.to_vec(),
        cells,
        model: model.clone(),
        n_candidates,
        compute_per_sentence: ComputeCost::new(model.parameter_count, n_candidates as u64),
    })
}

/// Runs one language pair across every (backend, candidate count)
/// combination and returns the points sorted by compute.
///
/// `candidate_counts` must be non-empty and ascending. The pair's source
/// language must have records; scaling over nothing is a usage error.
pub fn run_scaling(
    dataset: &[DatasetRecord],
    pair: (&LanguageTag, &LanguageTag),
    backends: &[(&dyn TranslationBackend, ModelInfo)],
    candidate_counts: &[usize],
    registry: &LanguageRegistry,
    config: &BenchmarkConfig,
) -> Result<Vec<ScalingPoint>> {
    if candidate_counts.is_empty() {
        return Err(Error::Usage("candidate_counts must be non-empty".into()));
    }
    if candidate_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage(
            "candidate_counts must be strictly ascending".into(),
        ));
    }
    if backends.is_empty() {
        return Err(Error::Usage("at least one backend is required".into()));
    }
    let (source, target) = pair;
    let records: Vec<&DatasetRecord> = dataset
        .iter()
        .filter(|r| r.language.code() == source.code())
        .collect();
    if records.is_empty() {
        return Err(Error::Usage(format!(
            "no dataset records in source language '{}'",
            source.code()
        )));
    }

    let mut points = Vec::with_capacity(backends.len() * candidate_counts.len());
    for (backend, model) in backends {
        let runner = PairRunner {
            backend: *backend,
            model,
            registry,
            config,
        };
        for &n in candidate_counts {
            let outcome = runner.run(&records, source, target, n)?;
            let totals: Vec<f64> = outcome.sentences.iter().map(|s| s.total).collect();
            let (mean_total, _) = mean_and_std(&totals);
            points.push(ScalingPoint {
                model: model.clone(),
                n_candidates: n,
                compute: model.parameter_count * n as f64,
                mean_total: mean_total.expect("records is non-empty"),
                n_sentences: outcome.sentences.len(),
                n_failures: outcome.n_failures,
            });
        }
    }
    points.sort_by(|a, b| a.compute.total_cmp(&b.compute));
    Ok(points)
}

/// A report ready for emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    Matrix(BenchmarkMatrix),
    Scaling { points: Vec<ScalingPoint> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub report_version: u32,
    #[serde(flatten)]
    pub body: ReportBody,
}

impl Report {
    pub fn matrix(matrix: BenchmarkMatrix) -> Self {
        Self {
            report_version: REPORT_VERSION,
            body: ReportBody::Matrix(matrix),
        }
    }

    pub fn scaling(points: Vec<ScalingPoint>) -> Self {
        Self {
            report_version: REPORT_VERSION,
            body: ReportBody::Scaling { points },
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut out = serde_json::to_string_pretty(self)?;
        out.push('\n');
        Ok(out)
    }

    pub fn to_csv_string(&self) -> String {
        match &self.body {
            ReportBody::Matrix(matrix) => matrix_csv(matrix),
            ReportBody::Scaling { points } => scaling_csv(points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes the report to `path` in the requested format.
pub fn emit_report(report: &Report, format: ReportFormat, path: &Path) -> Result<()> {
    let contents = match format {
        ReportFormat::Json => report.to_json_string()?,
        ReportFormat::Csv => report.to_csv_string(),
    };
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    writer.write_all(contents.as_bytes())?;
    writer.flush()?;
    Ok(())
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Header row of target languages, one row per source language, cell =
/// mean_total to 4 decimals, empty for the diagonal and for empty cells.
fn matrix_csv(matrix: &BenchmarkMatrix) -> String {
    let codes: Vec<&str> = matrix.languages.iter().map(|l| l.code()).collect();
    let mut out = String::from("source");
    for code in &codes {
        out.push(',');
        out.push_str(&csv_escape(code));
    }
    out.push('\n');
    for source in &codes {
        out.push_str(&csv_escape(source));
        for target in &codes {
            out.push(',');
            if let Some(mean) = matrix
                .cell(source, target)
                .and_then(|cell| cell.mean_total)
            {
                out.push_str(&format!("{mean:.4}"));
            }
        }
        out.push('\n');
    }
    out
}

fn scaling_csv(points: &[ScalingPoint]) -> String {
    let mut out = String::from("model,params,n_candidates,compute,mean_total\n");
    for point in points {
        out.push_str(&format!(
            "{},{},{},{},{:.4}\n",
            csv_escape(&point.model.name),
            point.model.parameter_count,
            point.n_candidates,
            point.compute,
            point.mean_total
        ));
    }
    out
}
