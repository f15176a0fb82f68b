//! Subcommand implementations. Machine-readable payloads go to stdout,
//! everything diagnostic to stderr.

use std::io::Write;
use std::path::Path;

use cyclemt_core::backend::{clear_store, store_stats, ModelInfo, TranslationBackend};
use cyclemt_core::benchmark::{
    emit_report, load_dataset, run_matrix, run_scaling, BenchmarkConfig, Report, ReportFormat,
};
use cyclemt_core::config::{BackendKind, Config};
use cyclemt_core::error::Error;
use cyclemt_core::metrics::bleu;
use cyclemt_core::pipeline::{tokenize_pair, Pipeline};

use crate::{BenchmarkArgs, CacheArgs, CacheAction, ScoreArgs, TranslateArgs};

fn text_from(
    inline: Option<String>,
    file: Option<&Path>,
    what: &str,
) -> Result<String, Error> {
    match (inline, file) {
        (Some(text), None) => Ok(text),
        (None, Some(path)) => {
            let raw = std::fs::read_to_string(path).map_err(|e| {
                Error::Usage(format!("cannot read {what} file '{}': {e}", path.display()))
            })?;
            Ok(raw.trim_end_matches('\n').to_string())
        }
        (None, None) => Err(Error::Usage(format!(
            "provide {what} either inline or as a file"
        ))),
        (Some(_), Some(_)) => Err(Error::Usage(format!(
            "provide {what} either inline or as a file, not both"
        ))),
    }
}

pub fn translate(config: &Config, args: TranslateArgs) -> Result<i32, Error> {
    if args.candidates == Some(0) {
        return Err(Error::Usage("--candidates must satisfy N >= 1".into()));
    }
    let text = text_from(args.text, args.file.as_deref(), "--text")?;
    let registry = config.registry()?;
    let source = registry.get(&args.src)?.clone();
    let target = registry.get(&args.tgt)?.clone();

    let backend = config.build_backend()?;
    let model = config.model_info()?;
    let mut pipeline_config = config.pipeline_config();
    if let Some(n) = args.candidates {
        pipeline_config.n_candidates = n;
    }
    let pipeline = Pipeline::new(&backend, &registry, model, pipeline_config)?;
    let result = pipeline.translate(&text, &source, &target)?;

    if args.verbose {
        eprintln!("index  temp    score  error");
        for candidate in &result.candidates {
            eprintln!(
                "{:>5}  {:<6} {:>6.4}  {}",
                candidate.index,
                format!("{:.2}", candidate.forward_params.temperature),
                candidate.score.total,
                candidate.error.as_deref().unwrap_or("-")
            );
        }
        eprintln!(
            "selected index {} (compute {} parameter-passes)",
            result.selected_index, result.compute_cost.total
        );
    }

    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&result).map_err(Error::Serialize)?;
        std::fs::write(path, json + "\n")?;
    }

    println!("{}", result.selected_text());
    Ok(0)
}

pub fn score(config: &Config, args: ScoreArgs) -> Result<i32, Error> {
    let original = text_from(args.original, args.original_file.as_deref(), "--original")?;
    let cycled = text_from(args.cycled, args.cycled_file.as_deref(), "--cycled")?;
    let registry = config.registry()?;
    let language = registry.get(&args.lang)?.clone();

    let (original_seq, cycled_seq) = tokenize_pair(&original, &cycled, &language, &registry)?;
    let score = cyclemt_core::metrics::consistency(&original_seq, &cycled_seq)?;

    if args.json {
        println!("{}", serde_json::to_string_pretty(&score)?);
        return Ok(0);
    }

    for (name, component) in [
        ("rouge-1", &score.rouge1),
        ("rouge-2", &score.rouge2),
        ("rouge-l", &score.rouge_l),
    ] {
        println!(
            "{name}  r={:.4} p={:.4} f1={:.4}",
            component.recall, component.precision, component.f1
        );
    }
    println!("total    {:.4}", score.total);
    // BLEU rides along as a secondary signal; ROUGE drives everything else.
    let bleu_score = bleu(&original_seq, &cycled_seq, 4);
    eprintln!("bleu-4   {:.4} (bp {:.4})", bleu_score.value, bleu_score.brevity_penalty);
    Ok(0)
}

fn parse_model_spec(spec: &str, default_rho: f64) -> Result<(String, f64, f64), Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(Error::Usage(format!(
            "model spec '{spec}' must be name:params[:rho]"
        )));
    }
    let params: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Usage(format!("bad parameter count in '{spec}'")))?;
    let rho = if parts.len() == 3 {
        parts[2]
            .parse()
            .map_err(|_| Error::Usage(format!("bad rho in '{spec}'")))?
    } else {
        default_rho
    };
    Ok((parts[0].to_string(), params, rho))
}

pub fn benchmark(config: &Config, args: BenchmarkArgs) -> Result<i32, Error> {
    if args.langs.len() < 2 && !args.scaling {
        return Err(Error::Usage(
            "--langs needs at least two languages for a matrix".into(),
        ));
    }
    let registry = config.registry()?;
    let languages = args
        .langs
        .iter()
        .map(|code| registry.get(code).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    let dataset = load_dataset(&args.dataset, &registry)?;

    let benchmark_config = BenchmarkConfig {
        pipeline: config.pipeline_config(),
        seed: config.seed.unwrap_or(0),
    };
    std::fs::create_dir_all(&args.out)?;

    let matrix_n = match args.candidates.as_slice() {
        [] => config.pipeline.n_candidates,
        [n] => *n,
        many => many[0],
    };
    if matrix_n == 0 {
        return Err(Error::Usage("--candidates must satisfy N >= 1".into()));
    }

    let backend = config.build_backend()?;
    let model = config.model_info()?;
    let matrix = run_matrix(
        &dataset,
        &languages,
        &backend,
        &model,
        matrix_n,
        &registry,
        &benchmark_config,
    )?;

    let attempted: usize = matrix.cells.iter().map(|c| c.n_sentences).sum();
    let failed: usize = matrix.cells.iter().map(|c| c.n_failures).sum();

    let json_path = args.out.join("matrix.json");
    let csv_path = args.out.join("matrix.csv");
    let report = Report::matrix(matrix.clone());
    emit_report(&report, ReportFormat::Json, &json_path)?;
    emit_report(&report, ReportFormat::Csv, &csv_path)?;

    println!("wrote {} and {}", json_path.display(), csv_path.display());
    println!("pair     mean    std     n  failures");
    for cell in &matrix.cells {
        match (cell.mean_total, cell.std_total) {
            (Some(mean), Some(std)) => println!(
                "{}->{}  {:>6.4}  {:>6.4}  {:>2}  {}",
                cell.source, cell.target, mean, std, cell.n_sentences, cell.n_failures
            ),
            _ => println!("{}->{}  (no records)", cell.source, cell.target),
        }
    }

    if args.scaling {
        run_scaling_command(config, &args, &dataset, &registry, &benchmark_config)?;
    }

    if attempted > 0 && failed == attempted {
        eprintln!("error: every sentence failed; check the backend configuration");
        return Ok(2);
    }
    if failed > 0 {
        eprintln!("warning: {failed}/{attempted} sentences failed and were zero-scored");
    }
    Ok(0)
}

fn run_scaling_command(
    config: &Config,
    args: &BenchmarkArgs,
    dataset: &[cyclemt_core::benchmark::DatasetRecord],
    registry: &cyclemt_core::lang::LanguageRegistry,
    benchmark_config: &BenchmarkConfig,
) -> Result<(), Error> {
    if args.models.is_empty() {
        return Err(Error::Usage("--scaling requires --models".into()));
    }
    if args.candidates.is_empty() {
        return Err(Error::Usage(
            "--scaling requires --candidates as an ascending list".into(),
        ));
    }
    let (src_code, tgt_code) = match &args.pair {
        Some(pair) => pair
            .split_once(':')
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .ok_or_else(|| Error::Usage(format!("--pair '{pair}' must be SRC:TGT")))?,
        None => {
            if args.langs.len() < 2 {
                return Err(Error::Usage(
                    "--pair or at least two --langs entries required for scaling".into(),
                ));
            }
            (args.langs[0].clone(), args.langs[1].clone())
        }
    };
    let source = registry.get(&src_code)?.clone();
    let target = registry.get(&tgt_code)?.clone();

    // Mock models may carry their own corruption rate; HTTP models share
    // the configured endpoint and differ only in the model field.
    let mut owned: Vec<(Box<dyn TranslationBackend>, ModelInfo)> = Vec::new();
    for spec in &args.models {
        let (name, params, rho) = parse_model_spec(spec, config.mock.rho)?;
        let model = ModelInfo::new(name, params)?;
        let backend: Box<dyn TranslationBackend> = match config.backend.kind {
            BackendKind::Mock => Box::new(config.build_mock_with_rho(rho)?),
            BackendKind::Http => Box::new(
                cyclemt_core::backend::HttpBackend::new(config.backend.http_config())?,
            ),
        };
        owned.push((backend, model));
    }
    let backends: Vec<(&dyn TranslationBackend, ModelInfo)> = owned
        .iter()
        .map(|(b, m)| (b.as_ref(), m.clone()))
        .collect();

    let points = run_scaling(
        dataset,
        (&source, &target),
        &backends,
        &args.candidates,
        registry,
        benchmark_config,
    )?;

    let json_path = args.out.join("scaling.json");
    let csv_path = args.out.join("scaling.csv");
    let report = Report::scaling(points.clone());
    emit_report(&report, ReportFormat::Json, &json_path)?;
    emit_report(&report, ReportFormat::Csv, &csv_path)?;
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    println!("model            n  compute       mean");
    for point in &points {
        println!(
            "{:<14} {:>3}  {:<12} {:>6.4}",
            point.model.name, point.n_candidates, point.compute, point.mean_total
        );
    }
    Ok(())
}

pub fn cache(config: &Config, args: CacheArgs) -> Result<i32, Error> {
    if !config.cache.enabled {
        return Err(Error::Usage(
            "cache is disabled; set [cache] enabled = true in the config".into(),
        ));
    }
    let dir = &config.cache.dir;
    match args.action {
        CacheAction::Stats => {
            let (entries, bytes) = store_stats(dir)?;
            println!("{entries} entries");
            println!("{bytes} bytes in {}", dir.display());
            Ok(0)
        }
        CacheAction::Clear { yes } => {
            let (entries, _) = store_stats(dir)?;
            if !yes {
                eprint!("clear {entries} cache entr{} from {}? [y/N] ",
                    if entries == 1 { "y" } else { "ies" }, dir.display());
                std::io::stderr().flush().ok();
                let mut answer = String::new();
                std::io::stdin().read_line(&mut answer)?;
                if !matches!(answer.trim(), "y" | "Y" | "yes") {
                    eprintln!("aborted");
                    return Ok(0);
                }
            }
            clear_store(dir)?;
            println!("cleared {entries} entries");
            Ok(0)
        }
    }
}
