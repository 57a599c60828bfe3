//! docmill — every pipeline stage as a subcommand, plus `run` for the
//! whole sequence.
//!
//! Settings layer three deep: command-line flags beat `DOCMILL_*`
//! environment variables, which beat the `--config` TOML file. Logs are
//! one JSON record per line on stderr; command output lands on stdout as
//! JSON (or the chosen stats format). Exit codes: 0 success, 1 stage or
//! verification failure, 2 bad usage or configuration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use docmill::extract::ChainSet;
use docmill::gate::{LicenseRegistry, LicenseTag, Origin, SourceMeta};
use docmill::ingest::{self, Politeness};
use docmill::key::{Stage, StorageKey};
use docmill::pipeline::{self, PipelineConfig, PipelineError};
use docmill::provenance::verify_provenance;
use docmill::quality::build_profile_from_store;
use docmill::stats;
use docmill::store::{open_store, ObjectStore};
use docmill::tokenizer;

// ---------------------------------------------------------------------------
// Command surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "docmill",
    version,
    about = "Document pipeline: gated ingestion, extraction, tokenized shards"
)]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Globals {
    /// Store root: a directory or an http(s) base URL (config: store.root).
    #[arg(long, global = true)]
    store: Option<String>,
    /// Extraction worker threads; 0 means one per logical CPU.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// TOML config file supplying defaults for every flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run ingest, audit, extract, quality, tokenize, and stats in order.
    Run(RunArgs),
    /// Seal documents from a directory or URL into the store.
    Ingest(IngestArgs),
    /// License decisions: audit a stored dataset or check one license id.
    #[command(subcommand)]
    Gate(GateCommand),
    /// Extract text representations for every stored document.
    Parse(DatasetArgs),
    /// Quality scoring against a control profile.
    #[command(subcommand)]
    Quality(QualityCommand),
    /// Tokenize successful records into Parquet shards.
    Tokenize(TokenizeArgs),
    /// Corpus statistics reports.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Walk shard rows back to records and documents, reporting breaks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DatasetArgs {
    /// Dataset id (config: dataset.id).
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Directory to ingest before the other stages (config: dataset.source).
    #[arg(long)]
    source: Option<PathBuf>,
    #[command(flatten)]
    rights: RightsArgs,
    /// Tokenizer spec: "byte" or a path to a BPE tokenizer JSON file.
    #[arg(long)]
    tokenizer: Option<String>,
    /// Number of stage-3 shards.
    #[arg(long)]
    shards: Option<u32>,
    /// Control profile file; omitted means self-profile from the corpus.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// License registry file replacing the built-in registry.
    #[arg(long)]
    registry: Option<PathBuf>,
}

/// Declared rights for sources being ingested.
#[derive(Args)]
struct RightsArgs {
    /// Declared license id, e.g. CC0-1.0 (config: dataset.license).
    #[arg(long)]
    license: Option<String>,
    /// Attest that attribution obligations can be met downstream.
    #[arg(long)]
    attribution: bool,
    /// Work origin for the copyright test.
    #[arg(long, value_enum)]
    origin: Option<OriginArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OriginArg {
    Private,
    UsFederalWork,
    GovernmentEdict,
}

impl From<OriginArg> for Origin {
    fn from(o: OriginArg) -> Origin {
        match o {
            OriginArg::Private => Origin::Private,
            OriginArg::UsFederalWork => Origin::UsFederalWork,
            OriginArg::GovernmentEdict => Origin::GovernmentEdict,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// A local directory or an http(s) URL.
    source: String,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    rights: RightsArgs,
    /// License registry file replacing the built-in registry.
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GateCommand {
    /// Re-evaluate every stored document; nonzero exit on any exclusion.
    Audit {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Attest that attribution obligations can be met downstream.
        #[arg(long)]
        attribution: bool,
        /// License registry file replacing the built-in registry.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Decide one license id; exit 0 on include, 1 on exclude.
    Check {
        /// License id to evaluate, e.g. CC-BY-4.0.
        license: String,
        /// Attest that attribution obligations can be met downstream.
        #[arg(long)]
        attribution: bool,
        /// License registry file replacing the built-in registry.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum QualityCommand {
    /// Score every successful record; writes the report into the store.
    Score {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Tokenizer spec: "byte" or a path to a BPE tokenizer JSON file.
        #[arg(long)]
        tokenizer: Option<String>,
        /// Control profile file; omitted means self-profile from the corpus.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Build a control profile from the stored corpus.
    Profile {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Tokenizer spec: "byte" or a path to a BPE tokenizer JSON file.
        #[arg(long)]
        tokenizer: Option<String>,
        /// Also write the profile to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TokenizeArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Tokenizer spec: "byte" or a path to a BPE tokenizer JSON file.
    #[arg(long)]
    tokenizer: Option<String>,
    /// Number of stage-3 shards.
    #[arg(long)]
    shards: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Character and token length distribution for one MIME type.
    Length {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Representation type to measure.
        #[arg(long, default_value = "text/markdown")]
        mime: String,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Token entropy distribution over the dataset.
    Entropy {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Document, record, and shard-row counts per stage.
    Counts {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

// ---------------------------------------------------------------------------
// Error handling and exit codes
// ---------------------------------------------------------------------------

enum CliError {
    /// Bad usage or configuration; exit 2.
    Config(String),
    /// A stage or verification failed; exit 1.
    Failure(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> CliError {
        match e {
            PipelineError::ConfigInvalid(_) | PipelineError::ConfigUnreadable { .. } => {
                CliError::Config(e.to_string())
            }
            PipelineError::Stage { .. } => CliError::Failure(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failure(msg)) => {
            eprintln!("docmill: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("docmill: {msg}");
            ExitCode::from(2)
        }
    }
}

/// One JSON record per line on stderr; `RUST_LOG` filters, default info.
fn init_logging() {
    use tracing_subscriber::EnvFilter;
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
}

// ---------------------------------------------------------------------------
// Settings resolution: flags > environment > config file
// ---------------------------------------------------------------------------

fn base_config(globals: &Globals) -> Result<PipelineConfig, CliError> {
    let mut config = match &globals.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::new("", ""),
    };
    config.apply_env()?;
    if let Some(store) = &globals.store {
        config.store = store.clone();
    }
    if let Some(workers) = globals.workers {
        config.workers = workers;
    }
    Ok(config)
}

fn require_store(config: &PipelineConfig) -> Result<Box<dyn ObjectStore>, CliError> {
    if config.store.is_empty() {
        return Err(CliError::Config(
            "no store configured: pass --store, set DOCMILL_STORE, or set store.root".into(),
        ));
    }
    open_store(&config.store).map_err(|e| CliError::Failure(e.to_string()))
}

fn require_dataset(config: &PipelineConfig, flag: &DatasetArgs) -> Result<String, CliError> {
    let id = flag.dataset.clone().unwrap_or_else(|| config.dataset_id.clone());
    if id.is_empty() {
        return Err(CliError::Config(
            "no dataset configured: pass --dataset or set dataset.id".into(),
        ));
    }
    Ok(id)
}

/// `None` means the built-in registry; callers borrow from this slot.
fn load_registry(path: Option<&Path>) -> Result<Option<LicenseRegistry>, CliError> {
    match path {
        None => Ok(None),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("registry {}: {e}", path.display())))?;
            let registry = LicenseRegistry::parse(&text)
                .map_err(|e| CliError::Config(format!("registry {}: {e}", path.display())))?;
            Ok(Some(registry))
        }
    }
}

fn load_tokenizer(spec: &str) -> Result<Box<dyn docmill::Tokenizer>, CliError> {
    tokenizer::load(spec).map_err(|e| CliError::Config(format!("tokenizer {spec:?}: {e}")))
}

fn source_meta(rights: &RightsArgs, config: &PipelineConfig) -> SourceMeta {
    let license = rights.license.clone().or_else(|| config.license.clone());
    let attribution = rights.attribution || config.attribution_satisfiable;
    SourceMeta {
        origin: rights.origin.map(Origin::from).unwrap_or(config.origin),
        license: license.map(|id| LicenseTag {
            id,
            attribution_satisfiable: attribution,
        }),
        ..SourceMeta::default()
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("reports serialize")
    );
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = base_config(&cli.globals)?;
    match cli.command {
        Command::Run(args) => cmd_run(config, args),
        Command::Ingest(args) => cmd_ingest(&config, args),
        Command::Gate(cmd) => cmd_gate(&config, cmd),
        Command::Parse(args) => cmd_parse(&config, &args),
        Command::Quality(cmd) => cmd_quality(&config, cmd),
        Command::Tokenize(args) => cmd_tokenize(&config, &args),
        Command::Stats(cmd) => cmd_stats(&config, cmd),
        Command::Verify(args) => cmd_verify(&config, &args),
    }
}

fn cmd_run(mut config: PipelineConfig, args: RunArgs) -> Result<(), CliError> {
    if let Some(dataset) = args.dataset.dataset {
        config.dataset_id = dataset;
    }
    if let Some(source) = args.source {
        config.source = Some(source);
    }
    if let Some(license) = args.rights.license {
        config.license = Some(license);
    }
    if args.rights.attribution {
        config.attribution_satisfiable = true;
    }
    if let Some(origin) = args.rights.origin {
        config.origin = origin.into();
    }
    if let Some(tokenizer) = args.tokenizer {
        config.tokenizer = tokenizer;
    }
    if let Some(shards) = args.shards {
        config.shards = shards;
    }
    if let Some(profile) = args.profile {
        config.profile = Some(profile);
    }
    if let Some(registry) = args.registry {
        config.registry = Some(registry);
    }
    if config.dataset_id.is_empty() {
        return Err(CliError::Config(
            "no dataset configured: pass --dataset or set dataset.id".into(),
        ));
    }
    if config.store.is_empty() {
        return Err(CliError::Config(
            "no store configured: pass --store, set DOCMILL_STORE, or set store.root".into(),
        ));
    }
    let report = pipeline::run_pipeline(&config)?;
    print_json(&report);
    Ok(())
}

fn cmd_ingest(config: &PipelineConfig, args: IngestArgs) -> Result<(), CliError> {
    let store = require_store(config)?;
    let dataset = require_dataset(config, &args.dataset)?;
    let owned = load_registry(args.registry.as_deref().or(config.registry.as_deref()))?;
    let registry = owned.as_ref().unwrap_or_else(|| LicenseRegistry::builtin());
    let meta = source_meta(&args.rights, config);

    if args.source.starts_with("http://") || args.source.starts_with("https://") {
        let key = ingest::fetch_url(
            store.as_ref(),
            registry,
            &args.source,
            &dataset,
            &meta,
            &Politeness::default(),
        )
        .map_err(|e| CliError::Failure(e.to_string()))?;
        print_json(&serde_json::json!({ "sealed": key.render() }));
    } else {
        let summary = ingest::ingest_path(
            store.as_ref(),
            registry,
            Path::new(&args.source),
            &dataset,
            &meta,
        )
        .map_err(|e| CliError::Failure(e.to_string()))?;
        print_json(&summary);
    }
    Ok(())
}

fn cmd_gate(config: &PipelineConfig, cmd: GateCommand) -> Result<(), CliError> {
    match cmd {
        GateCommand::Audit {
            dataset,
            attribution,
            registry,
        } => {
            let store = require_store(config)?;
            let dataset = require_dataset(config, &dataset)?;
            let owned = load_registry(registry.as_deref().or(config.registry.as_deref()))?;
            let registry = owned.as_ref().unwrap_or_else(|| LicenseRegistry::builtin());
            let attribution = attribution || config.attribution_satisfiable;
            let summary =
                pipeline::audit_stage(store.as_ref(), registry, &dataset, attribution)?;
            print_json(&summary);
            Ok(())
        }
        GateCommand::Check {
            license,
            attribution,
            registry,
        } => {
            let owned = load_registry(registry.as_deref().or(config.registry.as_deref()))?;
            let registry = owned.as_ref().unwrap_or_else(|| LicenseRegistry::builtin());
            let decision = registry
                .evaluate_tag(&license, attribution)
                .map_err(|e| CliError::Failure(e.to_string()))?;
            print_json(&decision);
            if decision.is_include() {
                Ok(())
            } else {
                Err(CliError::Failure(format!(
                    "{license} excluded: {}",
                    decision.reason
                )))
            }
        }
    }
}

fn cmd_parse(config: &PipelineConfig, args: &DatasetArgs) -> Result<(), CliError> {
    let store = require_store(config)?;
    let dataset = require_dataset(config, args)?;
    let summary = pipeline::extract_stage(
        store.as_ref(),
        &dataset,
        ChainSet::builtin(),
        config.workers,
    )?;
    print_json(&summary);
    Ok(())
}

fn cmd_quality(config: &PipelineConfig, cmd: QualityCommand) -> Result<(), CliError> {
    match cmd {
        QualityCommand::Score {
            dataset,
            tokenizer,
            profile,
        } => {
            let store = require_store(config)?;
            let dataset = require_dataset(config, &dataset)?;
            let tok = load_tokenizer(tokenizer.as_deref().unwrap_or(&config.tokenizer))?;
            let profile = profile.or_else(|| config.profile.clone());
            let summary = pipeline::quality_stage(
                store.as_ref(),
                &dataset,
                tok.as_ref(),
                profile.as_deref(),
            )?;
            print_json(&summary);
            Ok(())
        }
        QualityCommand::Profile {
            dataset,
            tokenizer,
            out,
        } => {
            let store = require_store(config)?;
            let dataset = require_dataset(config, &dataset)?;
            let tok = load_tokenizer(tokenizer.as_deref().unwrap_or(&config.tokenizer))?;
            let profile = build_profile_from_store(store.as_ref(), &dataset, tok.as_ref())
                .map_err(|e| CliError::Failure(e.to_string()))?;
            let key = StorageKey::new(Stage::Db, &dataset, "quality_profile.json")
                .map_err(|e| CliError::Failure(e.to_string()))?;
            store
                .put(&key, profile.to_json().as_bytes(), true)
                .map_err(|e| CliError::Failure(e.to_string()))?;
            if let Some(path) = &out {
                profile
                    .save(path)
                    .map_err(|e| CliError::Failure(e.to_string()))?;
            }
            print_json(&serde_json::json!({
                "written": key.render(),
                "copy": out.map(|p| p.display().to_string()),
            }));
            Ok(())
        }
    }
}

fn cmd_tokenize(config: &PipelineConfig, args: &TokenizeArgs) -> Result<(), CliError> {
    let store = require_store(config)?;
    let dataset = require_dataset(config, &args.dataset)?;
    let tok = load_tokenizer(args.tokenizer.as_deref().unwrap_or(&config.tokenizer))?;
    let shards = args.shards.unwrap_or(config.shards);
    let summary = pipeline::tokenize_stage(store.as_ref(), &dataset, tok.as_ref(), shards)?;
    print_json(&summary);
    Ok(())
}

fn cmd_stats(config: &PipelineConfig, cmd: StatsCommand) -> Result<(), CliError> {
    let store = require_store(config)?;
    let failure = |e: stats::StatsError| CliError::Failure(e.to_string());
    let (text, format) = match cmd {
        StatsCommand::Length {
            dataset,
            mime,
            format,
        } => {
            let dataset = require_dataset(config, &dataset)?;
            let report = stats::length_stats(store.as_ref(), &dataset, &mime).map_err(failure)?;
            (
                match format {
                    Format::Json => report.to_json(),
                    Format::Table => report.to_table(),
                    Format::Csv => report.to_csv(),
                },
                format,
            )
        }
        StatsCommand::Entropy { dataset, format } => {
            let dataset = require_dataset(config, &dataset)?;
            let report = stats::entropy_stats(store.as_ref(), &dataset).map_err(failure)?;
            (
                match format {
                    Format::Json => report.to_json(),
                    Format::Table => report.to_table(),
                    Format::Csv => report.to_csv(),
                },
                format,
            )
        }
        StatsCommand::Counts { dataset, format } => {
            let dataset = require_dataset(config, &dataset)?;
            let report = stats::stage_counts(store.as_ref(), &dataset).map_err(failure)?;
            (
                match format {
                    Format::Json => report.to_json(),
                    Format::Table => report.to_table(),
                    Format::Csv => report.to_csv(),
                },
                format,
            )
        }
    };
    let _ = format;
    println!("{}", text.trim_end());
    Ok(())
}

fn cmd_verify(config: &PipelineConfig, args: &VerifyArgs) -> Result<(), CliError> {
    let store = require_store(config)?;
    let dataset = require_dataset(config, &args.dataset)?;
    let report = verify_provenance(store.as_ref(), &dataset)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let text = match args.format {
        Format::Json => report.to_json(),
        Format::Table | Format::Csv => report.to_table(),
    };
    println!("{}", text.trim_end());
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "{} broken provenance link(s) in {dataset}",
            report.broken.len()
        )))
    }
}
