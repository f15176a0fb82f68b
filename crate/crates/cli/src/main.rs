//! `cyclemt` — translate with self-reflective candidate selection, score
//! round-trip consistency, run benchmarks, and manage the translation cache.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 backend or other
//! runtime failure.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cyclemt_core::config::{self, Config};
use cyclemt_core::error::Error;

#[derive(Parser)]
#[command(name = "cyclemt", version, about = "Self-reflective machine translation via cycle consistency")]
struct Cli {
    /// TOML config file (falls back to $CYCLEMT_CONFIG, then defaults)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Backend override: http or mock
    #[arg(long, global = true, value_name = "KIND")]
    backend: Option<String>,
    /// Global seed for candidate generation and benchmarks
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Maximum concurrent backend calls
    #[arg(long, global = true, value_name = "INT")]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate text, generating N candidates and keeping the one that
    /// back-translates most consistently
    Translate(TranslateArgs),
    /// Score the cycle consistency of an original / back-translated pair
    Score(ScoreArgs),
    /// Run language-pair matrix (and optionally scaling) benchmarks
    Benchmark(BenchmarkArgs),
    /// Inspect or clear the persistent translation cache
    Cache(CacheArgs),
}

#[derive(Args)]
struct TranslateArgs {
    /// Source language code
    #[arg(long, value_name = "LANG")]
    src: String,
    /// Target language code
    #[arg(long, value_name = "LANG")]
    tgt: String,
    /// Text to translate
    #[arg(long, conflicts_with = "file")]
    text: Option<String>,
    /// Read the text from a file instead
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,
    /// Number of forward candidates (default from config)
    #[arg(long, value_name = "N")]
    candidates: Option<usize>,
    /// Write the full selection result as JSON
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Print a per-candidate table to stderr
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Original text
    #[arg(long, conflicts_with = "original_file")]
    original: Option<String>,
    /// Original text from a file
    #[arg(long, value_name = "PATH")]
    original_file: Option<PathBuf>,
    /// Back-translated text
    #[arg(long, conflicts_with = "cycled_file")]
    cycled: Option<String>,
    /// Back-translated text from a file
    #[arg(long, value_name = "PATH")]
    cycled_file: Option<PathBuf>,
    /// Language code of both texts
    #[arg(long, value_name = "LANG")]
    lang: String,
    /// Emit the score as JSON on stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Line-delimited JSON dataset
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    /// Comma-separated language codes for the matrix
    #[arg(long, value_name = "CODES", value_delimiter = ',')]
    langs: Vec<String>,
    /// Candidate count for the matrix, or an ascending list for --scaling
    #[arg(long, value_name = "N[,N...]", value_delimiter = ',')]
    candidates: Vec<usize>,
    /// Output directory for report files
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Also run scaling curves over --models x --candidates
    #[arg(long)]
    scaling: bool,
    /// Models for scaling, as name:params[:rho] entries
    #[arg(long, value_name = "SPEC[,SPEC...]", value_delimiter = ',')]
    models: Vec<String>,
    /// Language pair for scaling, as src:tgt (default: first two of --langs)
    #[arg(long, value_name = "SRC:TGT")]
    pair: Option<String>,
}

#[derive(Args)]
struct CacheArgs {
    #[command(subcommand)]
    action: CacheAction,
}

#[derive(Subcommand)]
enum CacheAction {
    /// Print entry count and store size
    Stats,
    /// Remove all cache entries
    Clear {
        /// Skip the confirmation prompt
        #[arg(long)]
        yes: bool,
    },
}

fn main() {
    env_logger::init();
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };

    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

/// Builds the effective configuration (flag > env > file > default) and
/// dispatches the subcommand.
fn run(cli: Cli) -> Result<i32, Error> {
    let config_path = cli
        .config
        .clone()
        .or_else(|| std::env::var(config::CONFIG_ENV).ok().map(PathBuf::from));
    let mut config = match config_path {
        Some(path) => Config::load(&path)?,
        None => Config::default(),
    };
    config.apply_env_overrides()?;
    if let Some(kind) = &cli.backend {
        config.backend.kind = config::parse_backend_kind(kind)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(parallelism) = cli.parallelism {
        if parallelism == 0 {
            return Err(Error::Usage("parallelism must be >= 1".into()));
        }
        config.pipeline.parallelism = parallelism;
    }
    config.validate()?;

    match cli.command {
        Command::Translate(args) => commands::translate(&config, args),
        Command::Score(args) => commands::score(&config, args),
        Command::Benchmark(args) => commands::benchmark(&config, args),
        Command::Cache(args) => commands::cache(&config, args),
    }
}
