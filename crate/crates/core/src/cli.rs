//! Command-line pipeline: `index`, `genqueries`, `findability`,
//! `retrievability`, `report` and `correlate`.
//!
//! Every command accepts `--config <file.json>`, a flat JSON object whose keys
//! are the long flag names (`"model"`, `"bm25.k1"`, `"min-len"`, …). Flags given
//! on the command line override config values.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::accessibility::{
    findability_all, retrievability_all, retrievability_query_set, ConvenienceForm,
    ConvenienceSpec, Progress, RetrievabilityQueryConfig,
};
use crate::analysis::{load_stopwords, AnalysisConfig};
use crate::corpus::{load_corpus, CorpusFormat};
use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;
use crate::index::{write_stats_sidecar, Index};
use crate::metrics::AccessReport;
use crate::querygen::{generate_all, QueryGenConfig, QuerySet, SelectionStrategy};
use crate::report::{correlate_scores, lorenz_csv, lorenz_svg, ExperimentSummary};
use crate::retrieval::{ModelKind, RetrievalModel};
use crate::scores::{to_csv, write_score_file, Provenance, ScoreFile};

#[derive(Parser, Debug)]
#[command(name = "findability", version, about = "Measure how easily documents can be found")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an inverted index from a JSONL or TSV corpus.
    Index(IndexArgs),
    /// Generate simulated known-item queries for every document.
    Genqueries(GenQueriesArgs),
    /// Score per-document findability.
    Findability(FindabilityArgs),
    /// Score per-document retrievability over a frequency-based query set.
    Retrievability(RetrievabilityArgs),
    /// Gini coefficient, mean score and Lorenz curve of score files.
    Report(ReportArgs),
    /// Pearson and Kendall correlation between two score files.
    Correlate(CorrelateArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Flat JSON config file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "FINDABILITY_THREADS")]
    pub threads: Option<usize>,
    /// Suppress progress output on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug, Default)]
pub struct IndexArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// jsonl or tsv; inferred from the file extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
    /// Stopword file (one term per line), or "none".
    #[arg(long)]
    pub stopwords: Option<String>,
    #[arg(long)]
    pub lowercase: Option<bool>,
    #[arg(long = "min-len")]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub stem: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct GenQueriesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Average query length.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub floor: Option<usize>,
    /// popular, disc or popdisc.
    #[arg(long)]
    pub strategy: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    /// bm25, lmdir or pl2.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "bm25.k1")]
    pub bm25_k1: Option<f64>,
    #[arg(long = "bm25.b")]
    pub bm25_b: Option<f64>,
    #[arg(long = "lmdir.mu")]
    pub lmdir_mu: Option<f64>,
    #[arg(long = "pl2.c")]
    pub pl2_c: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct FindabilityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Rank cutoff.
    #[arg(long)]
    pub c: Option<usize>,
    /// Convenience function: inverse or exponential.
    #[arg(long)]
    pub xi: Option<String>,
    /// Decay denominator of the exponential form.
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the score CSV to stdout.
    #[arg(long)]
    pub stdout: bool,
    /// Accept a query file generated from a different index.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug, Default)]
pub struct RetrievabilityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long = "unigram-min-cf")]
    pub unigram_min_cf: Option<u64>,
    #[arg(long = "bigram-min-cf")]
    pub bigram_min_cf: Option<u64>,
    #[arg(long = "max-queries")]
    pub max_queries: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub stdout: bool,
}

#[derive(Args, Debug, Default)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Score CSV; repeat together with --summary for a multi-run table.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Report JSON for a single score file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lorenz: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Summary JSON with one row per score file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Correlation JSON to embed in the summary.
    #[arg(long)]
    pub correlation: Option<PathBuf>,
    #[arg(long)]
    pub stdout: bool,
    /// Skip sidecar fingerprint checks.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug, Default)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub stdout: bool,
    #[arg(long)]
    pub force: bool,
}

/// Flat parameter record loaded from `--config`. Keys mirror the long flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub format: Option<String>,
    pub stopwords: Option<String>,
    pub lowercase: Option<bool>,
    #[serde(rename = "min-len")]
    pub min_len: Option<usize>,
    pub stem: Option<bool>,
    pub index: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub k: Option<f64>,
    pub lambda: Option<f64>,
    pub fraction: Option<f64>,
    pub cap: Option<usize>,
    pub floor: Option<usize>,
    pub strategy: Option<String>,
    pub model: Option<String>,
    #[serde(rename = "bm25.k1")]
    pub bm25_k1: Option<f64>,
    #[serde(rename = "bm25.b")]
    pub bm25_b: Option<f64>,
    #[serde(rename = "lmdir.mu")]
    pub lmdir_mu: Option<f64>,
    #[serde(rename = "pl2.c")]
    pub pl2_c: Option<f64>,
    pub c: Option<usize>,
    pub xi: Option<String>,
    pub decay: Option<f64>,
    #[serde(rename = "unigram-min-cf")]
    pub unigram_min_cf: Option<u64>,
    #[serde(rename = "bigram-min-cf")]
    pub bigram_min_cf: Option<u64>,
    #[serde(rename = "max-queries")]
    pub max_queries: Option<usize>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn for_common(common: &CommonArgs) -> Result<Self> {
        match &common.config {
            Some(path) => Self::load(path),
            None => Ok(RunConfig::default()),
        }
    }
}

fn required<T>(cli: Option<T>, config: Option<T>, key: &str) -> Result<T> {
    cli.or(config)
        .ok_or_else(|| Error::Config(format!("missing required parameter --{key}")))
}

fn fingerprint_json(value: &serde_json::Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

fn resolve_model(args: &ModelArgs, cfg: &RunConfig) -> Result<RetrievalModel> {
    let kind: ModelKind = args
        .model
        .clone()
        .or_else(|| cfg.model.clone())
        .unwrap_or_else(|| "bm25".into())
        .parse()?;
    let model = match kind.default_model() {
        RetrievalModel::Bm25 { k1, b } => RetrievalModel::Bm25 {
            k1: args.bm25_k1.or(cfg.bm25_k1).unwrap_or(k1),
            b: args.bm25_b.or(cfg.bm25_b).unwrap_or(b),
        },
        RetrievalModel::LmDirichlet { mu } => RetrievalModel::LmDirichlet {
            mu: args.lmdir_mu.or(cfg.lmdir_mu).unwrap_or(mu),
        },
        RetrievalModel::DfrPl2 { c } => RetrievalModel::DfrPl2 {
            c: args.pl2_c.or(cfg.pl2_c).unwrap_or(c),
        },
    };
    model.validate()?;
    Ok(model)
}

fn with_pool<T: Send>(
    common: &CommonArgs,
    cfg: &RunConfig,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    let threads = common.threads.or(cfg.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn progress(common: &CommonArgs, label: &'static str) -> Progress {
    if common.quiet {
        Progress::silent()
    } else {
        Progress::stderr(label)
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn emit_stdout(bytes: &[u8]) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn note(common: &CommonArgs, message: impl AsRef<str>) {
    if !common.quiet {
        eprintln!("{}", message.as_ref());
    }
}

fn cmd_index(args: IndexArgs) -> Result<()> {
    let cfg = RunConfig::for_common(&args.common)?;
    let corpus_path = required(args.corpus, cfg.corpus.clone(), "corpus")?;
    let out = required(args.out, cfg.out.clone(), "out")?;
    let format = match args.format.or(cfg.format.clone()) {
        Some(f) => f.parse()?,
        None if corpus_path.extension().is_some_and(|e| e == "tsv") => CorpusFormat::Tsv,
        None => CorpusFormat::Jsonl,
    };
    let mut analysis = AnalysisConfig::default();
    match args.stopwords.or(cfg.stopwords.clone()).as_deref() {
        None => {}
        Some("none") => analysis.stopwords.clear(),
        Some(path) => analysis.stopwords = load_stopwords(Path::new(path))?,
    }
    analysis.lowercase = args.lowercase.or(cfg.lowercase).unwrap_or(analysis.lowercase);
    analysis.min_token_length = args.min_len.or(cfg.min_len).unwrap_or(analysis.min_token_length);
    analysis.stemming = args.stem.or(cfg.stem).unwrap_or(analysis.stemming);
    analysis.validate()?;

    let corpus = load_corpus(&corpus_path, format, &analysis)?;
    let index = Index::build(&corpus)?;
    index.save(&out)?;
    write_stats_sidecar(&index, &out)?;
    let stats = index.stats();
    note(
        &args.common,
        format!(
            "indexed {} documents, {} terms, {} tokens",
            stats.num_docs, stats.num_distinct_terms, stats.total_tokens
        ),
    );
    Ok(())
}

fn cmd_genqueries(args: GenQueriesArgs) -> Result<()> {
    let cfg = RunConfig::for_common(&args.common)?;
    let index_path = required(args.index, cfg.index.clone(), "index")?;
    let out = required(args.out, cfg.out.clone(), "out")?;
    let defaults = QueryGenConfig::default();
    let strategy: SelectionStrategy = match args.strategy.or(cfg.strategy.clone()) {
        Some(s) => s.parse()?,
        None => defaults.strategy,
    };
    let config = QueryGenConfig {
        avg_query_length: args.k.or(cfg.k).unwrap_or(defaults.avg_query_length),
        lambda: args.lambda.or(cfg.lambda).unwrap_or(defaults.lambda),
        fraction: args.fraction.or(cfg.fraction).unwrap_or(defaults.fraction),
        cap: args.cap.or(cfg.cap).unwrap_or(defaults.cap),
        floor: args.floor.or(cfg.floor).unwrap_or(defaults.floor),
        strategy,
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
    };
    config.validate()?;
    let index = Index::load(&index_path)?;
    let set = with_pool(&args.common, &cfg, || generate_all(&index, &config))?;
    set.save(&out)?;
    note(
        &args.common,
        format!(
            "generated {} queries for {} documents ({} skipped)",
            set.total_queries(),
            set.len(),
            set.summary.skipped.len()
        ),
    );
    Ok(())
}

fn cmd_findability(args: FindabilityArgs) -> Result<()> {
    let cfg = RunConfig::for_common(&args.common)?;
    let index_path = required(args.index, cfg.index.clone(), "index")?;
    let queries_path = required(args.queries, cfg.queries.clone(), "queries")?;
    let out = args.out.or(cfg.out.clone());
    if out.is_none() && !args.stdout {
        return Err(Error::Config("missing required parameter --out".into()));
    }
    let model = resolve_model(&args.model, &cfg)?;
    let form: ConvenienceForm = match args.xi.or(cfg.xi.clone()) {
        Some(s) => s.parse()?,
        None => ConvenienceForm::Inverse,
    };
    let spec = ConvenienceSpec {
        form,
        cutoff: args.c.or(cfg.c).unwrap_or(100),
        decay: args.decay.or(cfg.decay).unwrap_or(3.0),
    };
    spec.validate()?;

    let index = Index::load(&index_path)?;
    let query_bytes = fs::read(&queries_path).map_err(|e| Error::io(&queries_path, e))?;
    let query_set = QuerySet::read_jsonl(&query_bytes[..])?;
    if let Some(fp) = &query_set.summary.index_fingerprint {
        if fp != index.fingerprint() && !args.force {
            return Err(Error::FingerprintMismatch {
                key: "index_fingerprint".into(),
                left: fp.clone(),
                right: index.fingerprint().to_owned(),
            });
        }
    }
    let query_source = sha256_hex(&query_bytes);
    let progress = progress(&args.common, "findability");
    let scores = with_pool(&args.common, &cfg, || {
        findability_all(&model, &index, &query_set, &spec, &progress)
    })?;

    if args.stdout {
        emit_stdout(&to_csv(&scores.scores))?;
    }
    if let Some(out) = out {
        let config_fingerprint = fingerprint_json(&json!({
            "command": "findability",
            "model": model,
            "convenience": spec,
            "index": index.fingerprint(),
            "queries": query_source,
        }));
        let provenance = Provenance {
            seed: query_set.summary.config.as_ref().map(|c| c.seed),
            query_source,
            index_fingerprint: index.fingerprint().to_owned(),
            config_fingerprint,
        };
        write_score_file(&out, &scores, provenance)?;
    }
    note(
        &args.common,
        format!(
            "scored {} documents over {} queries ({} skipped)",
            scores.scores.len(),
            scores.num_queries,
            scores.skipped.len()
        ),
    );
    Ok(())
}

fn cmd_retrievability(args: RetrievabilityArgs) -> Result<()> {
    let cfg = RunConfig::for_common(&args.common)?;
    let index_path = required(args.index, cfg.index.clone(), "index")?;
    let out = args.out.or(cfg.out.clone());
    if out.is_none() && !args.stdout {
        return Err(Error::Config("missing required parameter --out".into()));
    }
    let model = resolve_model(&args.model, &cfg)?;
    let cutoff = args.c.or(cfg.c).unwrap_or(100);
    let defaults = RetrievabilityQueryConfig::default();
    let query_config = RetrievabilityQueryConfig {
        unigram_min_cf: args.unigram_min_cf.or(cfg.unigram_min_cf).unwrap_or(defaults.unigram_min_cf),
        bigram_min_cf: args.bigram_min_cf.or(cfg.bigram_min_cf).unwrap_or(defaults.bigram_min_cf),
        max_queries: args.max_queries.or(cfg.max_queries).unwrap_or(defaults.max_queries),
    };

    let index = Index::load(&index_path)?;
    let queries = retrievability_query_set(
        &index,
        query_config.unigram_min_cf,
        query_config.bigram_min_cf,
        query_config.max_queries,
    )?;
    let query_source = fingerprint_json(&json!(queries));
    let progress = progress(&args.common, "retrievability");
    let scores = with_pool(&args.common, &cfg, || {
        retrievability_all(&model, &index, &queries, cutoff, &progress)
    })?;

    if args.stdout {
        emit_stdout(&to_csv(&scores.scores))?;
    }
    if let Some(out) = out {
        let config_fingerprint = fingerprint_json(&json!({
            "command": "retrievability",
            "model": model,
            "c": cutoff,
            "queries": query_config,
            "index": index.fingerprint(),
        }));
        let provenance = Provenance {
            seed: None,
            query_source,
            index_fingerprint: index.fingerprint().to_owned(),
            config_fingerprint,
        };
        write_score_file(&out, &scores, provenance)?;
    }
    note(
        &args.common,
        format!("{} retrievability queries over {} documents", queries.len(), scores.scores.len()),
    );
    Ok(())
}

fn load_checked(path: &Path, force: bool) -> Result<ScoreFile> {
    let file = ScoreFile::load(path)?;
    if !force {
        file.verify()?;
    }
    Ok(file)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let files = args
        .scores
        .iter()
        .map(|p| load_checked(p, args.force))
        .collect::<Result<Vec<_>>>()?;

    if let Some(summary_path) = &args.summary {
        let mut summary = ExperimentSummary::from_files(&files)?;
        if let Some(corr) = &args.correlation {
            let text = fs::read_to_string(corr).map_err(|e| Error::io(corr, e))?;
            summary.correlation =
                Some(serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", corr.display())))?);
        }
        write_file(summary_path, pretty_json(&summary))?;
    }

    let wants_single = args.out.is_some() || args.stdout || args.lorenz.is_some() || args.svg.is_some();
    if !wants_single {
        if args.summary.is_none() {
            return Err(Error::Config("missing required parameter --out".into()));
        }
        return Ok(());
    }
    let [file] = files.as_slice() else {
        return Err(Error::Config(
            "--out, --lorenz and --svg take exactly one --scores file; use --summary for several".into(),
        ));
    };
    let values: Vec<f64> = file.scores.values().copied().collect();
    let metadata = json!({
        "source": file.path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "scores_fingerprint": file.fingerprint,
        "scores": file.metadata,
    });
    let report = AccessReport::from_scores(&values, metadata)?;
    let json = pretty_json(&report);
    if let Some(out) = &args.out {
        write_file(out, &json)?;
    }
    if args.stdout {
        emit_stdout(json.as_bytes())?;
    }
    if let Some(path) = &args.lorenz {
        write_file(path, lorenz_csv(&report.lorenz_points))?;
    }
    if let Some(path) = &args.svg {
        let title = match &file.metadata {
            Some(m) => format!("{} {} (G = {:.4})", m.model.kind(), m.metric, report.gini),
            None => format!("G = {:.4}", report.gini),
        };
        write_file(path, lorenz_svg(&report.lorenz_points, &title))?;
    }
    Ok(())
}

fn cmd_correlate(args: CorrelateArgs) -> Result<()> {
    if args.out.is_none() && !args.stdout {
        return Err(Error::Config("missing required parameter --out".into()));
    }
    let a = load_checked(&args.a, args.force)?;
    let b = load_checked(&args.b, args.force)?;
    if !args.force {
        let (ma, mb) = (a.verify()?, b.verify()?);
        if ma.index_fingerprint != mb.index_fingerprint {
            return Err(Error::FingerprintMismatch {
                key: "index_fingerprint".into(),
                left: ma.index_fingerprint.clone(),
                right: mb.index_fingerprint.clone(),
            });
        }
    }
    let report = correlate_scores(&a.scores, &b.scores)?;
    let json = pretty_json(&report);
    if let Some(out) = &args.out {
        write_file(out, &json)?;
    }
    if args.stdout {
        emit_stdout(json.as_bytes())?;
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(args) => cmd_index(args),
        Command::Genqueries(args) => cmd_genqueries(args),
        Command::Findability(args) => cmd_findability(args),
        Command::Retrievability(args) => cmd_retrievability(args),
        Command::Report(args) => cmd_report(args),
        Command::Correlate(args) => cmd_correlate(args),
    }
}

/// Parse `argv` (including the program name) and run the command.
pub fn run_command<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Config(e.to_string()))?;
    execute(cli)
}
