//! `disdf` command-line tool: train, predict and benchmark cascades.
//!
//! Exit codes: 0 success, 1 internal error, 2 I/O error, 3 invalid input
//! or configuration.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use disdf::cascade::{train_cascade_with_report, TrainReport};
use disdf::data::{load_csv, load_feature_csv, LabelColumn};
use disdf::eval::{run_grid, ExperimentGrid};
use disdf::persist::{load_model, save_model};
use disdf::{par, rng, Error, Mode, TrainConfig};

#[derive(Parser)]
#[command(name = "disdf", version, about = "Discriminative deep forest")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DISDF_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a cascade and write a model file.
    Train(TrainArgs),
    /// Predict class indices for a feature CSV.
    Predict(PredictArgs),
    /// Run the repeated hold-out grid comparing baseline and DisDF.
    Bench(BenchArgs),
}

/// Training options. Flags override values read from `--config`.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    /// Trees per forest.
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    fw_iterations: Option<usize>,
    #[arg(long)]
    max_levels: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    random_forests: Option<usize>,
    #[arg(long)]
    completely_random_forests: Option<usize>,
    /// Maximum number of pairs per forest (`none` for all).
    #[arg(long)]
    pair_budget: Option<String>,
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Maximum tree depth (`none` for unlimited).
    #[arg(long)]
    max_depth: Option<String>,
    #[arg(long)]
    stratified_split: Option<bool>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            cfg.apply_text(&text)?;
        }
        let overrides: [(&str, Option<String>); 15] = [
            ("mode", self.mode.clone()),
            ("trees", self.trees.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("tau", self.tau.map(|v| format!("{v:?}"))),
            ("lambda", self.lambda.map(|v| format!("{v:?}"))),
            ("fw_iterations", self.fw_iterations.map(|v| v.to_string())),
            ("max_levels", self.max_levels.map(|v| v.to_string())),
            ("patience", self.patience.map(|v| v.to_string())),
            ("folds", self.folds.map(|v| v.to_string())),
            ("random_forests", self.random_forests.map(|v| v.to_string())),
            (
                "completely_random_forests",
                self.completely_random_forests.map(|v| v.to_string()),
            ),
            ("pair_budget", self.pair_budget.clone()),
            ("min_leaf", self.min_leaf.map(|v| v.to_string())),
            ("max_depth", self.max_depth.clone()),
            ("stratified_split", self.stratified_split.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(value) = value {
                cfg.set(key, &value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Label column: 1-based number, header name, or `last`.
    #[arg(long, default_value = "last")]
    label_col: String,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV.
    #[arg(long)]
    data: PathBuf,
    /// Column to drop before predicting (1-based number, name or `last`).
    #[arg(long)]
    label_col: Option<String>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "last")]
    label_col: String,
    /// Training sizes, comma separated.
    #[arg(long = "N-list", alias = "n-list", value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// Trees per forest, comma separated.
    #[arg(long = "T-list", alias = "t-list", value_delimiter = ',', required = true)]
    t_list: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Directory for `reps.csv` and `summary.csv`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Dataset name in the CSV output (default: file stem).
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    config: ConfigArgs,
}

fn label_column(spec: &str) -> anyhow::Result<LabelColumn> {
    match LabelColumn::parse(spec) {
        LabelColumn::Index(0) => bail!(Error::InvalidConfig("--label-col numbers start at 1".into())),
        LabelColumn::Index(i) => Ok(LabelColumn::Index(i - 1)),
        other => Ok(other),
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn print_report(report: &TrainReport, mode: Mode) {
    for (q, level) in report.levels.iter().enumerate() {
        let kept = if q < report.kept_levels { "" } else { " (discarded)" };
        println!("level {}: out-of-fold accuracy {:.4}{kept}", q + 1, level.score);
        if mode == Mode::DisDf {
            for (k, f) in level.forests.iter().enumerate() {
                if let (Some(u), Some(t)) = (f.objective_uniform, f.objective_trained) {
                    println!(
                        "  forest {} ({}): J uniform {u:.6}, J trained {t:.6}{}",
                        k + 1,
                        f.kind.name(),
                        if f.kept_uniform { " (kept uniform)" } else { "" }
                    );
                }
            }
        }
    }
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    let cfg = args.config.resolve()?;
    let ds = load_csv(&args.data, &label_column(&args.label_col)?)?;
    let start = Instant::now();
    let (model, report) = train_cascade_with_report(&ds, &cfg, &mut rng::from_seed(cfg.seed))?;
    save_model(&model, &args.out)?;
    println!(
        "trained {} level(s) in {} mode on {} rows, {} features, {} classes ({:.1}s)",
        model.levels().len(),
        cfg.mode,
        ds.len(),
        ds.feature_dim(),
        ds.num_classes(),
        start.elapsed().as_secs_f64()
    );
    print_report(&report, cfg.mode);
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> anyhow::Result<()> {
    let model = load_model(&args.model)?;
    let drop = args.label_col.as_deref().map(label_column).transpose()?;
    let (values, width) = load_feature_csv(&args.data, drop.as_ref())?;
    let predictions = if values.is_empty() {
        Vec::new()
    } else {
        model.predict_rows(&values, width)?
    };
    let mut text = String::with_capacity(predictions.len() * 2);
    for p in predictions {
        text.push_str(&p.to_string());
        text.push('\n');
    }
    match &args.out {
        Some(path) => write_file(path, &text),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .context("writing predictions to stdout"),
    }
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let cfg = args.config.resolve()?;
    let ds = load_csv(&args.data, &label_column(&args.label_col)?)?;
    let name = args.name.clone().unwrap_or_else(|| {
        args.data
            .file_stem()
            .map_or("dataset".into(), |s| s.to_string_lossy().into_owned())
    });
    let grid = ExperimentGrid {
        ns: args.n_list.clone(),
        ts: args.t_list.clone(),
        reps: args.reps,
        seed: cfg.seed,
        base: cfg,
    };
    grid.validate(ds.len())?;
    let result = run_grid(&ds, &name, &grid)?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        write_file(&dir.join("reps.csv"), &result.reps_csv())?;
        write_file(&dir.join("summary.csv"), &result.summary_csv())?;
    }
    println!("{name}: mean accuracy over {} repetitions", args.reps);
    print!("{}", result.table());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::Io { .. } => 2,
            Error::OffSimplex { .. } | Error::NanGradient | Error::NonConvergence { .. } => 1,
            _ => 3,
        };
    }
    if err.downcast_ref::<io::Error>().is_some() {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(3);
        }
        par::set_threads(threads);
    }
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
