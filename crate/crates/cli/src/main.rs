use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use graftsurv::coxnet::CoxnetConfig;
use graftsurv::ensemble::{GbConfig, RsfConfig};
use graftsurv::eval::{c_index, mean_dynamic_auc};
use graftsurv::features::{encode_dataset, fit_encoder, EncoderRequest, FeatureSet};
use graftsurv::hla::BroadSplitTable;
use graftsurv::model::{ModelArtifact, ModelConfig, ModelKind};
use graftsurv::pipeline::{
    self, ingest, read_records, run_experiment, run_target_encoding_comparison, synthesize, write_atomic,
    write_records, ExperimentConfig, ExperimentReport, IngestConfig, KeyValues, SynthConfig,
};
use graftsurv::survival::censoring_survival;
use graftsurv::record::TransplantRecord;

const THREADS_ENV: &str = "GRAFTSURV_THREADS";

#[derive(Parser, Debug)]
#[command(name = "graftsurv", version, about = "Kidney graft survival models with HLA feature encodings")]
struct Cli {
    /// Seed for synthesis, splits and model randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Abort on the first failing experiment cell (default).
    #[arg(long, global = true, conflicts_with = "permissive")]
    strict: bool,
    /// Record failing experiment cells as missing and continue.
    #[arg(long, global = true)]
    permissive: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Apply the cohort inclusion filters to a registry CSV.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the attrition log here.
        #[arg(long)]
        attrition: Option<PathBuf>,
    },
    /// Generate a synthetic cohort in the registry CSV schema.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        n_records: Option<usize>,
        #[arg(long)]
        mm_log_hazard: Option<f64>,
        #[arg(long)]
        censor_rate: Option<f64>,
    },
    /// Fit an encoder on a cohort and write the encoded feature matrix.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        encoding: EncodingArgs,
        /// Write the fitted encoder as JSON.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Fit one model configuration and save it as an artifact.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        encoding: EncodingArgs,
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        #[arg(long, default_value_t = 1e-3)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        l1_ratio: f64,
        #[arg(long, default_value_t = 500)]
        trees: usize,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
    },
    /// Score a cohort with a saved artifact and print C-index and mean AUC.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the repeated-split comparison of feature sets and models.
    Experiment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated feature sets (default: the seven main sets).
        #[arg(long, value_delimiter = ',', value_parser = parse_feature_set)]
        feature_sets: Option<Vec<FeatureSet>>,
    },
    /// Compare binary type encoding with target encodings.
    TargetEncCompare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render a saved experiment report.
    Report {
        /// `report.json` written by `experiment`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct EncodingArgs {
    #[arg(long, value_parser = parse_feature_set, default_value = "basic")]
    feature_set: FeatureSet,
    /// Include the post-transplant covariates.
    #[arg(long)]
    post: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Comma-separated models (coxnet, rsf, gb).
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    n_splits: Option<usize>,
    #[arg(long)]
    post: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportFormat {
    Csv,
    Detail,
    Markdown,
}

fn parse_feature_set(s: &str) -> Result<FeatureSet, String> {
    s.parse().map_err(|e: graftsurv::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: graftsurv::Error| e.to_string())
}

enum Failure {
    Usage(String),
    Core(graftsurv::Error),
}

impl From<graftsurv::Error> for Failure {
    fn from(e: graftsurv::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

struct Context {
    seed: Option<u64>,
    config: KeyValues,
    strict: Option<bool>,
    table: BroadSplitTable,
}

impl Context {
    fn experiment_config(&self, run: &RunArgs) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        self.config.apply_experiment(&mut cfg)?;
        if let Some(models) = &run.models {
            cfg.models = models.clone();
        }
        if let Some(n) = run.n_splits {
            cfg.n_splits = n;
        }
        if run.post {
            cfg.include_post = true;
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(strict) = self.strict {
            cfg.strict = strict;
        }
        Ok(cfg)
    }
}

fn load_table(config: &KeyValues) -> CliResult<BroadSplitTable> {
    match config.get_raw("broadsplit_path") {
        Some(path) => Ok(BroadSplitTable::from_path(path)?),
        None => Ok(BroadSplitTable::standard()),
    }
}

fn load_records(path: &Path) -> CliResult<Vec<TransplantRecord>> {
    let file = File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
    let (records, log) = read_records(BufReader::new(file), &IngestConfig::unfiltered(path))?;
    if log.retained < log.input_rows {
        log::warn!("{} rows with missing values skipped", log.input_rows - log.retained);
    }
    Ok(records)
}

fn write_report(report: &ExperimentReport, dir: &Path) -> CliResult<()> {
    report.write_dir(dir)?;
    let json = serde_json::to_string_pretty(report).map_err(graftsurv::Error::from)?;
    write_atomic(&dir.join("report.json"), json.as_bytes())?;
    print!("{}", report.markdown());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => KeyValues::from_path(path)
            .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?,
        None => KeyValues::default(),
    };
    let strict = if cli.permissive { Some(false) } else if cli.strict { Some(true) } else { None };
    let ctx = Context { seed: cli.seed, table: load_table(&config)?, config, strict };

    match cli.command {
        Command::Ingest { input, output, attrition } => {
            let mut cfg = IngestConfig::new(input);
            ctx.config.apply_ingest(&mut cfg)?;
            let (records, log) = ingest(&cfg)?;
            eprintln!("{log}");
            if let Some(path) = attrition {
                write_atomic(&path, format!("{log}\n").as_bytes())?;
            }
            let mut buf = Vec::new();
            write_records(&records, &mut buf)?;
            write_atomic(&output, &buf)?;
        }
        Command::Synth { output, n_records, mm_log_hazard, censor_rate } => {
            let mut cfg = SynthConfig::default();
            ctx.config.apply_synth(&mut cfg)?;
            if let Some(n) = n_records {
                cfg.n_records = n;
            }
            if let Some(x) = mm_log_hazard {
                cfg.mm_log_hazard = x;
            }
            if let Some(x) = censor_rate {
                cfg.censor_rate = x;
            }
            if let Some(seed) = ctx.seed {
                cfg.seed = seed;
            }
            let records = synthesize(&cfg, &ctx.table)?;
            let mut buf = Vec::new();
            write_records(&records, &mut buf)?;
            write_atomic(&output, &buf)?;
            let censored = records.iter().filter(|r| !r.target.event).count();
            eprintln!("wrote {} records ({censored} censored)", records.len());
        }
        Command::Encode { input, output, encoding, plan } => {
            let records = load_records(&input)?;
            let request = EncoderRequest::new(encoding.feature_set, encoding.post);
            let encoder = fit_encoder(&records, request, &ctx.table)?;
            let data = encode_dataset(&records, &encoder, &ctx.table)?;
            let mut buf = Vec::new();
            pipeline::write_dataset(&data, &mut buf)?;
            write_atomic(&output, &buf)?;
            if let Some(path) = plan {
                let json = serde_json::to_string_pretty(&encoder).map_err(graftsurv::Error::from)?;
                write_atomic(&path, json.as_bytes())?;
            }
            eprintln!("encoded {} rows x {} columns", data.n_rows(), data.features.n_cols());
        }
        Command::Train { input, output, encoding, model, lambda, l1_ratio, trees, depth, learning_rate } => {
            let records = load_records(&input)?;
            let request = EncoderRequest::new(encoding.feature_set, encoding.post);
            let encoder = fit_encoder(&records, request, &ctx.table)?;
            let data = encode_dataset(&records, &encoder, &ctx.table)?;
            let seed = ctx.seed.unwrap_or(0);
            let cfg = match model {
                ModelKind::Coxnet => ModelConfig::Coxnet(CoxnetConfig::new(lambda, l1_ratio)),
                ModelKind::Rsf => ModelConfig::Rsf(RsfConfig {
                    n_trees: trees,
                    max_depth: depth.unwrap_or(RsfConfig::default().max_depth),
                    seed,
                    ..RsfConfig::default()
                }),
                ModelKind::GradientBoost => ModelConfig::GradientBoost(GbConfig {
                    n_trees: trees,
                    max_depth: depth.unwrap_or(GbConfig::default().max_depth),
                    learning_rate,
                    seed,
                    ..GbConfig::default()
                }),
            };
            let fitted = cfg.fit(&data)?;
            let artifact = ModelArtifact::new(fitted, Some(encoder), Some(censoring_survival(&data.targets)));
            artifact.save(&output)?;
            eprintln!("trained {} ({}) on {} rows", model, cfg.describe(), data.n_rows());
        }
        Command::Eval { model, input } => {
            let artifact = ModelArtifact::load(&model)?;
            let encoder = artifact
                .encoder
                .as_ref()
                .ok_or_else(|| graftsurv::Error::InvalidInput("artifact carries no encoder".into()))?;
            let records = load_records(&input)?;
            let data = encode_dataset(&records, encoder, &ctx.table)?;
            let risk = artifact.model.predict_risk(&data.features)?;
            let c = c_index(&risk, &data.targets)?;
            println!("c_index\t{}", c.value);
            if let Some(g) = &artifact.censoring {
                let auc = mean_dynamic_auc(&risk, &data.targets, g)?;
                println!("mean_auc\t{}", auc.value);
            }
        }
        Command::Experiment { input, out_dir, run, feature_sets } => {
            let records = load_records(&input)?;
            let mut cfg = ctx.experiment_config(&run)?;
            if let Some(sets) = feature_sets {
                cfg.feature_sets = sets;
            }
            let report = run_experiment(&records, &cfg, &ctx.table)?;
            write_report(&report, &out_dir)?;
        }
        Command::TargetEncCompare { input, out_dir, run } => {
            let records = load_records(&input)?;
            let mut cfg = ctx.experiment_config(&run)?;
            if run.models.is_none() && ctx.config.get_raw("models").is_none() {
                cfg.models = vec![ModelKind::Rsf];
            }
            let report = run_target_encoding_comparison(&records, &cfg, &ctx.table)?;
            write_report(&report, &out_dir)?;
        }
        Command::Report { input, format, output } => {
            let text = std::fs::read_to_string(&input)?;
            let report: ExperimentReport = serde_json::from_str(&text).map_err(graftsurv::Error::from)?;
            let rendered = match format {
                ReportFormat::Csv => report.summary_csv()?,
                ReportFormat::Detail => report.detail_csv()?,
                ReportFormat::Markdown => report.markdown(),
            };
            match output {
                Some(path) => write_atomic(&path, rendered.as_bytes())?,
                None => {
                    let mut out = BufWriter::new(std::io::stdout());
                    out.write_all(rendered.as_bytes())?;
                    out.flush()?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("ignoring {THREADS_ENV}: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
