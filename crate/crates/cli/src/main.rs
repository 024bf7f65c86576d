//! `mbimpute` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mbimpute::eval;
use mbimpute::impute::{self, FittedImputer, ImputerSpec, Method, RegressorKind};
use mbimpute::ingest::{self, FileFormat, Inventory};
use mbimpute::runner::{self, EvalReport, ExperimentConfig, RunOptions, TableFormat};
use mbimpute::scenarios::{self, Scenario, ScenarioKind};
use mbimpute::synth::{self, SynthSpec};
use mbimpute::{split_by_probe, ModalitySet, ScoreTable};

#[derive(Parser)]
#[command(name = "mbimpute", version, about = "Missing-score imputation and evaluation for multibiometric score tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between long CSV, wide CSV and BSSR1-style matrix sets.
    Convert(ConvertArgs),
    /// Generate a synthetic score table from a JSON spec.
    Synth(SynthArgs),
    /// Blank scores following a missing-data scenario.
    Mask(MaskArgs),
    /// Fill missing scores.
    Impute(ImputeArgs),
    /// Fuse each row's scores by their mean.
    Fuse(FuseArgs),
    /// ROC and CMC curves of fused scores.
    Eval(EvalArgs),
    /// Run an experiment grid from a JSON config.
    Run(RunArgs),
    /// Render the tables of a report.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Input file; for matrix sets repeat as `modality=path` (or just `path`,
    /// naming the modality after the file stem).
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<String>,
    /// long_csv, wide_csv or bssr1_matrix_set; CSV kinds are detected when omitted.
    #[arg(long)]
    in_format: Option<FileFormat>,
    /// Output file, or directory for a matrix set.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "long_csv")]
    out_format: FileFormat,
    /// Check the score inventory against BSSR1 Set 1.
    #[arg(long)]
    validate_bssr1: bool,
    /// Comma-separated modality order for long CSV input.
    #[arg(long, value_delimiter = ',')]
    modalities: Option<Vec<String>>,
    /// Matrix side length for matrix-set input.
    #[arg(long, default_value_t = 517)]
    gallery_size: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "wide_csv")]
    out_format: FileFormat,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    scenario: ScenarioKind,
    #[arg(long)]
    level: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    target_modality: Option<String>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "wide_csv")]
    out_format: FileFormat,
    /// Write the blanked cells as `row_index,modality`.
    #[arg(long)]
    plan_out: Option<PathBuf>,
    /// Training fraction of the probe split (retire only).
    #[arg(long, default_value_t = 0.8)]
    split_fraction: f64,
    /// Seed of the probe split (retire only); defaults to `--seed`.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct ImputeArgs {
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    regressor: Option<RegressorKind>,
    /// Table to fit on (every row is a training row).
    #[arg(long, required_unless_present = "model_in")]
    train: Option<PathBuf>,
    /// Table whose missing cells are filled.
    #[arg(long)]
    apply: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "wide_csv")]
    out_format: FileFormat,
    #[arg(long, conflicts_with = "model_in")]
    model_out: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["train", "method", "regressor"])]
    model_in: Option<PathBuf>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Average the present scores of incomplete rows instead of failing.
    #[arg(long)]
    skip_missing: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Fused scores CSV (`probe_id,gallery_id,label,score`).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    roc_out: PathBuf,
    #[arg(long)]
    cmc_out: PathBuf,
    #[arg(long, default_value_t = 10)]
    max_rank: usize,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads for grid cells (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "text")]
    format: TableFormat,
}

enum Failure {
    Usage(String),
    Data(String),
}

type Outcome = Result<(), Failure>;

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Data(format!("{context}: {e}"))
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read_table(path: &Path, modalities: Option<&ModalitySet>) -> Result<ScoreTable, Failure> {
    ingest::read_csv_auto(path, modalities).map_err(data(path.display()))
}

fn write_table(table: &ScoreTable, format: FileFormat, path: &Path) -> Outcome {
    ingest::write_table(table, format, path).map_err(data(path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, bytes).map_err(data(path.display()))
}

fn warn_if_unnormalized(table: &ScoreTable, path: &Path) {
    let outside = table
        .rows()
        .iter()
        .flat_map(|r| r.scores.iter().flatten())
        .any(|v| !(0.0..=1.0).contains(v));
    if outside {
        eprintln!(
            "warning: {} has scores outside [0, 1]; normalize before imputing or fusing",
            path.display()
        );
    }
}

fn convert(args: ConvertArgs) -> Outcome {
    let modalities = args
        .modalities
        .map(ModalitySet::new)
        .transpose()
        .map_err(|e| usage(format!("--modalities: {e}")))?;
    let format = args.in_format;
    let table = if format == Some(FileFormat::Bssr1MatrixSet) {
        let files: Vec<(String, PathBuf)> = args
            .inputs
            .iter()
            .map(|spec| match spec.split_once('=') {
                Some((name, path)) => (name.to_string(), PathBuf::from(path)),
                None => {
                    let path = PathBuf::from(spec);
                    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    (stem, path)
                }
            })
            .collect();
        ingest::read_bssr1_matrix_set(&files, args.gallery_size).map_err(data("matrix set"))?
    } else {
        let [path] = args.inputs.as_slice() else {
            return Err(usage("CSV input takes exactly one --in"));
        };
        let path = Path::new(path);
        match format {
            Some(FileFormat::LongCsv) => ingest::read_long_csv(path, modalities.as_ref()),
            Some(FileFormat::WideCsv) => ingest::read_wide_csv(path),
            _ => ingest::read_csv_auto(path, modalities.as_ref()),
        }
        .map_err(data(path.display()))?
    };
    if args.validate_bssr1 {
        ingest::validate_inventory(&table, &Inventory::BSSR1_SET1).map_err(data("inventory"))?;
        eprintln!("inventory matches BSSR1 Set 1");
    }
    write_table(&table, args.out_format, &args.out)
}

fn synth_cmd(args: SynthArgs) -> Outcome {
    let text = fs::read_to_string(&args.spec).map_err(data(args.spec.display()))?;
    let spec: SynthSpec = serde_json::from_str(&text).map_err(data(args.spec.display()))?;
    let table = synth::generate(&spec).map_err(data(args.spec.display()))?;
    write_table(&table, args.out_format, &args.out)
}

fn mask(args: MaskArgs) -> Outcome {
    if !(0.0..=1.0).contains(&args.level) {
        return Err(usage(format!("--level {} is outside [0, 1]", args.level)));
    }
    let scenario = match (args.scenario.needs_target(), args.target_modality) {
        (true, None) => return Err(usage(format!("--scenario {} needs --target-modality", args.scenario.as_str()))),
        (false, Some(_)) => return Err(usage("--scenario merge takes no --target-modality")),
        (_, target) => Scenario {
            tag: args.scenario,
            target_modality: target,
        },
    };
    let table = read_table(&args.input, None)?;
    let split = if args.scenario == ScenarioKind::Retire {
        Some(
            split_by_probe(&table, args.split_fraction, args.split_seed.unwrap_or(args.seed))
                .map_err(data(args.input.display()))?,
        )
    } else {
        None
    };
    let plan = scenarios::plan(&table, &scenario, split.as_ref(), args.level, args.seed)
        .map_err(data(args.input.display()))?;
    let masked = scenarios::apply(&table, &plan).map_err(data(args.input.display()))?;
    if let Some(path) = &args.plan_out {
        let mut buf = Vec::new();
        plan.write_csv(&table, &mut buf).map_err(data(path.display()))?;
        write_file(path, buf)?;
    }
    eprintln!("blanked {} of {} cells", plan.cells.len(), table.len() * table.n_modalities());
    write_table(&masked, args.out_format, &args.out)
}

fn impute_cmd(args: ImputeArgs) -> Outcome {
    let fitted = match &args.model_in {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(data(path.display()))?;
            FittedImputer::from_json(&text).map_err(data(path.display()))?
        }
        None => {
            let method = args.method.ok_or_else(|| usage("--method is required unless --model-in is given"))?;
            let mut spec = ImputerSpec::new(method);
            spec.regressor = args.regressor;
            if let Some(k) = args.knn_k {
                spec.knn_k = k;
            }
            if let Some(n) = args.max_iterations {
                spec.max_iterations = n;
            }
            spec.validate().map_err(|e| usage(e.to_string()))?;
            let train_path = args.train.as_ref().expect("clap requires --train");
            let train = read_table(train_path, None)?;
            warn_if_unnormalized(&train, train_path);
            let rows: Vec<usize> = (0..train.len()).collect();
            impute::fit(&train, &rows, &spec).map_err(data(train_path.display()))?
        }
    };
    let target = read_table(&args.apply, None)?;
    let filled = fitted.apply(&target).map_err(data(args.apply.display()))?;
    if let Some(c) = fitted.convergence {
        if !c.converged {
            eprintln!(
                "warning: stopped after {} sweeps with max change {:.3e}",
                c.iterations_run, c.final_max_delta
            );
        }
    }
    if let Some(path) = &args.model_out {
        write_file(path, fitted.to_json())?;
    }
    write_table(&filled, args.out_format, &args.out)
}

fn fuse(args: FuseArgs) -> Outcome {
    let table = read_table(&args.input, None)?;
    warn_if_unnormalized(&table, &args.input);
    let fused = eval::fuse_simple_sum(&table, args.skip_missing).map_err(data(args.input.display()))?;
    let mut buf = Vec::new();
    eval::write_fused_csv(&fused, &mut buf).map_err(data(args.out.display()))?;
    write_file(&args.out, buf)
}

fn eval_cmd(args: EvalArgs) -> Outcome {
    if args.max_rank == 0 {
        return Err(usage("--max-rank must be at least 1"));
    }
    let file = fs::File::open(&args.input).map_err(data(args.input.display()))?;
    let fused = eval::read_fused_csv(io::BufReader::new(file)).map_err(data(args.input.display()))?;
    let curve = eval::roc(&fused).map_err(data(args.input.display()))?;
    let cmc = eval::cmc(&fused, args.max_rank).map_err(data(args.input.display()))?;
    let mut buf = Vec::new();
    eval::write_roc_csv(&curve, &mut buf).map_err(data(args.roc_out.display()))?;
    write_file(&args.roc_out, buf)?;
    let mut buf = Vec::new();
    eval::write_cmc_csv(&cmc, &mut buf).map_err(data(args.cmc_out.display()))?;
    write_file(&args.cmc_out, buf)?;
    let summary = serde_json::json!({
        "auc": curve.auc,
        "eer": curve.eer,
        "rank_accuracy": cmc.accuracy,
        "n_genuine": curve.n_genuine,
        "n_impostor": curve.n_impostor,
    });
    println!("{summary}");
    Ok(())
}

fn run_cmd(args: RunArgs) -> Outcome {
    if args.jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    let config = ExperimentConfig::from_file(&args.config).map_err(data(args.config.display()))?;
    let options = RunOptions {
        out_dir: Some(args.out_dir.clone()),
        jobs: args.jobs,
    };
    let report = runner::run(&config, &options).map_err(data(args.config.display()))?;
    eprintln!("wrote {}", args.out_dir.join("report.json").display());
    print!("{}", runner::summarize(&report, TableFormat::Text));
    Ok(())
}

fn summarize_cmd(args: SummarizeArgs) -> Outcome {
    let text = fs::read_to_string(&args.report).map_err(data(args.report.display()))?;
    let report = EvalReport::from_json(&text).map_err(data(args.report.display()))?;
    print!("{}", runner::summarize(&report, args.format));
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
    let outcome = match cli.command {
        Command::Convert(a) => convert(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Mask(a) => mask(a),
        Command::Impute(a) => impute_cmd(a),
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::Summarize(a) => summarize_cmd(a),
    };
    let _ = io::stdout().flush();
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
