//! `ccral` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccral_core::classifier::{LossKind, TrainConfig};
use ccral_core::experiment::{
    read_report, render_report, run_experiment, write_report, ExperimentConfig, ExperimentError, Method,
    SplitFractions,
};
use ccral_core::tabular::{synthetic_schema, SyntheticDraw, SyntheticParams};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccral", version, about = "Counterfactual augmentation experiments for tabular classifiers")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the repeated-split comparison and write a JSON report.
    Run(RunArgs),
    /// Write a synthetic dataset and its schema.
    GenSynth(GenSynthArgs),
    /// Print a report as a table.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Comma-separated subset of standard,counterfactual,ccral.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Number of non-zero margins in the grid.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train,validation,test fractions, e.g. 0.6,0.2,0.2.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    split: Option<Vec<f64>>,
    /// `logistic`, `hinge`, or a JSON training config file.
    #[arg(long)]
    classifier: Option<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long)]
    n: usize,
    /// Number of continuous columns.
    #[arg(long, default_value_t = 5)]
    dims: usize,
    /// Strength of the treatment interaction.
    #[arg(long, default_value_t = 2.0)]
    effect: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Schema output path (default: the CSV path with a `.schema.json` extension).
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
    fn data(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn resolve_classifier(value: &str, base: TrainConfig) -> Result<TrainConfig, Failure> {
    match value {
        "logistic" => Ok(TrainConfig { loss_kind: LossKind::Logistic, ..base }),
        "hinge" => Ok(TrainConfig { loss_kind: LossKind::Hinge, ..base }),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("--classifier `{path}`: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("--classifier `{path}`: {e}")))
        }
    }
}

fn resolve_config(args: RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("config `{}`: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let (Some(data), Some(schema)) = (&args.data, &args.schema) else {
                return Err(Failure::usage("--data and --schema are required without --config"));
            };
            ExperimentConfig::new(data, schema)
        }
    };
    if let Some(v) = args.data {
        cfg.data_path = v;
    }
    if let Some(v) = args.schema {
        cfg.schema_path = v;
    }
    if let Some(v) = args.methods {
        cfg.methods = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.repeats {
        cfg.repeats = v;
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = args.split {
        let [train, val, test] = v[..] else {
            return Err(Failure::usage("--split takes three comma-separated fractions"));
        };
        cfg.split = SplitFractions { train, val, test };
    }
    if let Some(v) = args.classifier {
        cfg.classifier = resolve_classifier(&v, cfg.classifier)?;
    }
    if let Some(v) = args.out {
        cfg.output_path = Some(v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = resolve_config(args)?;
    let report = run_experiment(&cfg)?;
    match &cfg.output_path {
        Some(path) => write_report(&report, path)?,
        None => print!("{}", report.to_json()),
    }
    if !report.failures.is_empty() {
        let lines: Vec<String> = report
            .failures
            .iter()
            .map(|f| format!("repeat {}: {}", f.repeat, f.error))
            .collect();
        return Err(Failure {
            code: 3,
            message: format!("{} of {} repeats failed\n{}", lines.len(), cfg.repeats, lines.join("\n")),
        });
    }
    Ok(())
}

fn default_schema_path(csv: &Path) -> PathBuf {
    csv.with_extension("schema.json")
}

fn cmd_gen_synth(args: GenSynthArgs) -> Result<(), Failure> {
    let params = SyntheticParams::new(args.n, args.dims, args.effect, args.noise, args.seed);
    let draw = SyntheticDraw::sample(params).map_err(|e| Failure::usage(e.to_string()))?;
    draw.to_table().save_csv(&args.out).map_err(|e| Failure::data(e.to_string()))?;
    let schema_path = args.schema_out.unwrap_or_else(|| default_schema_path(&args.out));
    let mut json = synthetic_schema(args.dims).to_json();
    json.push('\n');
    std::fs::write(&schema_path, json)
        .map_err(|e| Failure::data(format!("cannot write `{}`: {e}", schema_path.display())))?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let report = read_report(&args.input)?;
    print!("{}", render_report(&report)?);
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
    if let Some(n) = cli.threads {
        if let Err(e) = rayon_pool(n) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::GenSynth(a) => cmd_gen_synth(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn rayon_pool(threads: usize) -> Result<(), String> {
    if threads == 0 {
        return Err("--threads must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}
