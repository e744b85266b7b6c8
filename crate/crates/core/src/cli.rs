//! The `subspace-lab` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{parse_dims, FeatureConfig, RunConfig};
use crate::dataset::{make_splits, pca_preprocess};
use crate::error::{Error, Result};
use crate::eval::{
    class_mean_points, curves_csv, export_scatter, fit_on, run_scores, sweep_beta, to_csv, EvalData, FittedModel,
    DEFAULT_BETA_GRID,
};
use crate::graph::{mean_graph, within_class_graph, WeightGraph};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "SUBSPACE_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "subspace-lab", version, about = "Graph-based linear subspace learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured protocol and write report.json, curves.csv and model.json.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat the protocol over a grid of dimensions or beta values; writes sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated grid values.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Write the feature vectors of the configured dataset, one labelled sample per row.
    Features {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Dim,
    Beta,
}

/// Process exit status for an error: 1 input/config, 2 fitting/protocol, 3 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 3,
        Error::Fold { source, .. } => exit_code(source).max(2),
        Error::EmptyInput
        | Error::Format { .. }
        | Error::Parse { .. }
        | Error::Decode { .. }
        | Error::Config(_)
        | Error::Domain(_) => 1,
        Error::Shape(_)
        | Error::Protocol(_)
        | Error::DegenerateData(_)
        | Error::DegenerateConstraint(_)
        | Error::InsufficientRank { .. } => 2,
    }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents.as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
    Ok(target)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dense_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn dump_graphs(cfg: &RunConfig, data: &EvalData) -> Result<()> {
    let Some(scheme) = cfg.method.method.scheme() else {
        log::warn!("method {} builds no graph; nothing to dump", cfg.method.method.name());
        return Ok(());
    };
    let vectors = data.vectors()?;
    let space = if cfg.method.method.is_2d() {
        vectors.into_owned()
    } else {
        pca_preprocess(&vectors, cfg.method.pca_ratio)?.1
    };
    let (within, _): (WeightGraph, _) = within_class_graph(&space, &scheme)?;
    let means = mean_graph(&crate::dataset::class_means(&space), &scheme)?;
    write_atomic(&cfg.output.dir, "graph_within.csv", &dense_csv(&within.weights))?;
    write_atomic(&cfg.output.dir, "graph_means.csv", &dense_csv(&means.weights))?;
    Ok(())
}

pub fn cmd_run(config: &Path) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    let dir = &cfg.output.dir;
    write_atomic(dir, "config.echo.json", &cfg.to_json())?;
    let data = cfg.load_data()?;
    let plan = make_splits(data.labels(), cfg.protocol.scheme, cfg.protocol.seed)?;
    let scores = run_scores(&data, &cfg.method, &plan, &cfg.protocol.dims)?;
    let report = scores.report();

    let d_max = *scores.dims.last().expect("grid is nonempty");
    let all: Vec<usize> = (0..data.len()).collect();
    let model = fit_on(&data, &cfg.method, &all, d_max)?;

    write_atomic(dir, "report.json", &report.to_json())?;
    write_atomic(dir, "curves.csv", &curves_csv(&report)?)?;
    write_atomic(dir, "model.json", &model.to_json())?;
    if let FittedModel::OneD(m) = &model {
        if m.components() >= 2 {
            let vectors = data.vectors()?;
            let (means, labels) = class_mean_points(&vectors);
            write_atomic(dir, "scatter.csv", &to_csv(&export_scatter(m, &means, &labels)?)?)?;
        }
    }
    if cfg.output.dump_graph {
        dump_graphs(&cfg, &data)?;
    }

    println!(
        "{}: ARA {:.2}% ± {:.2}%, top rate {:.2}% at dim {} ({} folds)",
        report.method,
        100.0 * report.ara,
        100.0 * report.std,
        100.0 * report.top_rate,
        report.best_dim,
        report.per_fold_accuracy.len()
    );
    eprintln!(
        "fit {:.3} s, classify {:.3} s (summed over folds)",
        report.wall_time_s.fit_s, report.wall_time_s.classify_s
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    value: String,
    ara: f64,
    std: f64,
    top_rate: f64,
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|b| *b > 0.0 && b.is_finite())
                .ok_or_else(|| Error::Config(format!("bad beta {t:?} in grid {s:?}")))
        })
        .collect()
}

pub fn cmd_sweep(config: &Path, axis: Axis, grid: Option<&str>) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    if axis == Axis::Beta {
        cfg.method.method.with_beta(1.0)?;
    }
    let dir = &cfg.output.dir;
    write_atomic(dir, "config.echo.json", &cfg.to_json())?;
    let data = cfg.load_data()?;
    let plan = make_splits(data.labels(), cfg.protocol.scheme, cfg.protocol.seed)?;

    let rows: Vec<SweepRow> = match axis {
        Axis::Dim => {
            let dims = match grid {
                Some(g) => parse_dims(g)?,
                None => cfg.protocol.dims.clone(),
            };
            let scores = run_scores(&data, &cfg.method, &plan, &dims)?;
            (0..scores.dims.len())
                .map(|k| {
                    let s = scores.at(k);
                    SweepRow {
                        value: s.dim.to_string(),
                        ara: s.ara,
                        std: s.std,
                        top_rate: s.top_rate,
                    }
                })
                .collect()
        }
        Axis::Beta => {
            let betas = match grid {
                Some(g) => parse_grid(g)?,
                None => DEFAULT_BETA_GRID.to_vec(),
            };
            sweep_beta(&data, &cfg.method, &plan, &betas, &cfg.protocol.dims)?
                .into_iter()
                .map(|(b, r)| SweepRow {
                    value: b.to_string(),
                    ara: r.ara,
                    std: r.std,
                    top_rate: r.top_rate,
                })
                .collect()
        }
    };
    let path = write_atomic(dir, "sweep.csv", &to_csv(&rows)?)?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

pub fn cmd_features(config: &Path, out: &Path) -> Result<()> {
    let cfg = RunConfig::from_path(config)?;
    if cfg.features == FeatureConfig::Raw {
        log::info!("features.kind is raw; writing the flattened samples");
    }
    let data = cfg.load_data()?;
    let vectors = data.vectors()?;
    let mut text = String::new();
    for (j, label) in vectors.labels().iter().enumerate() {
        text.push_str(&label.to_string());
        for v in vectors.features().column(j).iter() {
            text.push(',');
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = out
        .file_name()
        .ok_or_else(|| Error::Config(format!("--out {} is not a file path", out.display())))?;
    write_atomic(dir, &name.to_string_lossy(), &text)?;
    Ok(())
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Sweep { config, axis, grid } => cmd_sweep(config, *axis, grid.as_deref()),
        Command::Features { config, out } => cmd_features(config, out),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
