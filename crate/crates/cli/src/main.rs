use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mpsbench::analysis::ClassifyOptions;
use mpsbench_cli::classify::{cmd_classify, ClassifyArgs};
use mpsbench_cli::config::{RunConfig, SweepConfig};
use mpsbench_cli::plot::{cmd_plot, PlotArgs, PlotKind};
use mpsbench_cli::runner::{cmd_run, Engine};
use mpsbench_cli::sweep::cmd_sweep;

#[derive(Parser)]
#[command(name = "mpsbench", version, about = "MPS ground states and dynamics for benchmark models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Line,
    Heatmap,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured job.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a cartesian parameter grid and write an aggregate table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_parallel: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Label every trajectory of a sweep aggregate and bracket the boundary.
    Classify {
        /// Aggregate CSV written by `sweep`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "sz")]
        observable: String,
        #[arg(long, default_value = "model.spinboson.alpha")]
        alpha_column: String,
        #[arg(long, default_value = "model.spinboson.s")]
        s_column: String,
        #[arg(long, default_value_t = 0.01)]
        prominence: f64,
        /// Minimal spacing of extrema; defaults to two time steps.
        #[arg(long)]
        min_separation: Option<f64>,
    },
    /// Render CSV data as an SVG file.
    Plot {
        /// One or more CSV files; each becomes its own series group.
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "line")]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Vec<String>,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        value: Option<String>,
        /// Legend labels for the data files, in order.
        #[arg(long)]
        label: Vec<String>,
        #[arg(long)]
        title: Option<String>,
    },
    /// Same job through exact diagonalization or exact propagation.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_run(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig, fallback: &str) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| {
        let tag = if cfg.tag.is_empty() { cfg.model_name() } else { cfg.tag.as_str() };
        PathBuf::from("out").join(format!("{fallback}-{tag}"))
    })
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let cfg = load_run(&config, seed)?;
            let dir = out_dir(out, &cfg, "run");
            let o = cmd_run(&cfg, &dir, Engine::Mps)?;
            println!("wrote {}", o.result_file.map(|p| p.display().to_string()).unwrap_or_default());
        }
        Command::Oracle { config, out, seed } => {
            let cfg = load_run(&config, seed)?;
            let dir = out_dir(out, &cfg, "oracle");
            let o = cmd_run(&cfg, &dir, Engine::Oracle)?;
            println!("wrote {}", o.result_file.map(|p| p.display().to_string()).unwrap_or_default());
        }
        Command::Sweep { config, out, max_parallel, seed } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut sweep = SweepConfig::from_json(&text)?;
            if let Some(n) = max_parallel {
                anyhow::ensure!(n >= 1, "--max-parallel must be >= 1");
                sweep.max_parallel = n;
            }
            let dir = out.unwrap_or_else(|| PathBuf::from("out").join("sweep"));
            let report = cmd_sweep(&sweep, &dir, seed)?;
            println!("wrote {}", report.aggregate.display());
            anyhow::ensure!(report.failed.is_empty(), "{} job(s) failed: {:?}", report.failed.len(), report.failed);
        }
        Command::Classify { data, out, observable, alpha_column, s_column, prominence, min_separation } => {
            let args = ClassifyArgs {
                observable,
                alpha_column,
                s_column,
                options: ClassifyOptions { prominence, min_separation },
            };
            let dir = out.unwrap_or_else(|| data.parent().unwrap_or(Path::new(".")).to_path_buf());
            let r = cmd_classify(&data, &dir, &args)?;
            println!("wrote {} and {}", r.phases_file.display(), r.boundary_file.display());
        }
        Command::Plot { data, kind, out, x, y, group, value, label, title } => {
            let kind = match kind {
                Kind::Line => PlotKind::Line,
                Kind::Heatmap => PlotKind::Heatmap,
            };
            cmd_plot(&data, &label, kind, &PlotArgs { x, y, group, value, title }, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
