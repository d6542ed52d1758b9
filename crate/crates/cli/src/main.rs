//! Command-line front end: machine validation, training runs, the exact
//! office oracle, curve plotting and Q-value heatmaps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prmrl::dsl::{parse_prm, validate_prm, SourceDocument};
use prmrl::harness::{
    aggregate, curve_svg, export_heatmap, heatmap_svg, mode_selection, office_product, oracle_product_vi, read_metrics_csv,
    run_experiment, write_heatmap_csv, write_oracle_csv, ExperimentConfig,
};
use prmrl::tabular::QTable;
use prmrl::Error;

#[derive(Parser)]
#[command(name = "prmrl", version, about = "Physics-informed reward machine experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a `.prm` machine.
    Validate { file: PathBuf },
    /// Run every trial of an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Solve the office product exactly and write `oracle.csv`.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render the median and quartile band of a `metrics.csv`.
    Plot {
        metrics: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Max-Q grid of a finished office run for one machine mode.
    Heatmap {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        mode: String,
    },
}

/// Exit status and message of a failed command.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) | Error::Definition(_) | Error::Json(_) => Self::config(e.to_string()),
            _ => Self::runtime(e.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| Failure::config(e.to_string()))
}

fn validate(file: &Path) -> Result<(), Failure> {
    let doc = SourceDocument::read(file).map_err(|e| Failure::config(format!("cannot read {}: {e}", file.display())))?;
    let prm = match parse_prm(&doc) {
        Ok(p) => p,
        Err(diags) => {
            for d in &diags {
                eprintln!("{}: {d}", file.display());
            }
            return Err(Failure::config(format!("{}: {} parse error(s)", file.display(), diags.len())));
        }
    };
    let diags = validate_prm(&prm);
    for d in &diags {
        eprintln!("{}: {d}", file.display());
    }
    let errors = diags.iter().filter(|d| d.is_error()).count();
    if errors > 0 {
        return Err(Failure::config(format!("{}: {errors} validation error(s)", file.display())));
    }
    println!(
        "{}: machine `{}` is valid ({} modes, {} variables, {} warning(s))",
        file.display(),
        prm.name,
        prm.modes.len(),
        prm.vars.len(),
        diags.len()
    );
    Ok(())
}

fn train(config: &Path, jobs: Option<usize>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let run = run_experiment(&cfg, jobs)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    let done = run.trials.iter().filter(|t| t.completed()).count();
    println!("{done}/{} trials completed; artifacts in {}", run.trials.len(), cfg.output_dir.display());
    if let Some(last) = run.aggregate.last() {
        println!(
            "step {}: median {:.4} (p25 {:.4}, p75 {:.4})",
            last.step, last.median, last.p25, last.p75
        );
    }
    if let Some(o) = &run.oracle {
        println!("oracle: V* {:.6}, optimal reward per step {:.6}", o.value, o.reward_rate);
    }
    Ok(())
}

fn oracle(config: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let report = oracle_product_vi(&cfg)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Failure::runtime(e.to_string()))?;
    let path = cfg.output_dir.join("oracle.csv");
    write_oracle_csv(&report, fs::File::create(&path).map_err(|e| Failure::runtime(e.to_string()))?)?;
    let summary = serde_json::to_string_pretty(&report).map_err(|e| Failure::runtime(e.to_string()))?;
    println!("{summary}");
    eprintln!("greedy-action sets written to {}", path.display());
    Ok(())
}

fn plot(metrics: &Path, output: &Path) -> Result<(), Failure> {
    let file = fs::File::open(metrics).map_err(|e| Failure::config(format!("cannot read {}: {e}", metrics.display())))?;
    let series = read_metrics_csv(file).map_err(|e| Failure::config(e.to_string()))?;
    let rows = aggregate(&series);
    let title = format!("{}: median and 25th to 75th percentile", metrics.display());
    fs::write(output, curve_svg(&rows, &title, None)).map_err(|e| Failure::runtime(e.to_string()))?;
    println!("{} checkpoints from {} trial(s) plotted to {}", rows.len(), series.len(), output.display());
    Ok(())
}

fn heatmap(run: &Path, mode: &str) -> Result<(), Failure> {
    let meta_path = run.join("run.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Failure::config(format!("cannot read {}: {e}", meta_path.display())))?;
    let meta: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::config(e.to_string()))?;
    let cfg: ExperimentConfig =
        serde_json::from_value(meta["config"].clone()).map_err(|e| Failure::config(format!("{}: {e}", meta_path.display())))?;
    if !cfg.algorithm.is_tabular() || cfg.env.name != prmrl::harness::EnvName::Office {
        return Err(Failure::config("heatmaps need a tabular run on the office environment"));
    }
    let q_path = run.join("qtable.csv");
    let q = QTable::read_csv(fs::File::open(&q_path).map_err(|e| Failure::config(format!("cannot read {}: {e}", q_path.display())))?)?;
    let product = office_product(&cfg)?;
    let joint = mode_selection(&product, mode).map_err(|e| Failure::config(e.to_string()))?;
    let grid = export_heatmap(&q, &product.env, joint)?;
    let csv_path = run.join(format!("heatmap_{mode}.csv"));
    let svg_path = run.join(format!("heatmap_{mode}.svg"));
    write_heatmap_csv(&grid, fs::File::create(&csv_path).map_err(|e| Failure::runtime(e.to_string()))?)?;
    fs::write(&svg_path, heatmap_svg(&grid, 24.0)).map_err(|e| Failure::runtime(e.to_string()))?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { file } => validate(file),
        Command::Train { config, jobs } => train(config, *jobs),
        Command::Oracle { config } => oracle(config),
        Command::Plot { metrics, output } => plot(metrics, output),
        Command::Heatmap { run, mode } => heatmap(run, mode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
