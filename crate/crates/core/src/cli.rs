//! The `ddg` command-line tool.
//!
//! Every command writes its outputs plus `resolved_config.json` into `--out`.
//! Failures print one JSON line on stderr and exit with 1 (configuration),
//! 2 (data or format) or 3 (numeric).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::data::{
    export_dataset, generate_glyphs, load_exported, load_idx, rotated_domains, Dataset,
};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::experiment::{aggregate, comparison_csv, fold, ledger_csv, parse_ledger, run_id};
use crate::manipulate::{
    default_steps, encode_grid, grid_filename, interpolate_semantic, interpolate_variation,
    swap_grid,
};
use crate::runconfig::RunConfig;
use crate::tensor::Tensor;
use crate::trainer::{metrics_to_csv, train};

pub const CHECKPOINT_FILE: &str = "checkpoint.ddgc";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const RESOLVED_FILE: &str = "resolved_config.json";

#[derive(Debug, Parser)]
#[command(
    name = "ddg",
    version,
    about = "Disentanglement-constrained domain generalization lab"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ManipulateMode {
    Swap,
    InterpV,
    InterpS,
}

impl ManipulateMode {
    fn tag(self) -> &'static str {
        match self {
            ManipulateMode::Swap => "swap",
            ManipulateMode::InterpV => "interp-v",
            ManipulateMode::InterpS => "interp-s",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the synthetic glyph domains (or rotate an IDX pair) into a dataset directory.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// IDX image file; rotated into one domain per configured angle.
        #[arg(long, requires = "idx_labels")]
        idx_images: Option<PathBuf>,
        #[arg(long, requires = "idx_images")]
        idx_labels: Option<PathBuf>,
    },
    /// Train with one domain held out; writes a checkpoint and the metrics CSV.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        holdout_domain: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on its fold; writes a key=value report and a ledger row.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        holdout_domain: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Export latent swap or interpolation grids as PGM.
    Manipulate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        mode: ManipulateMode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Aggregate every ledger.csv under --runs into per-holdout, per-mode medians.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn echo(out: &Path, value: serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&value).expect("json value serializes");
    write(&out.join(RESOLVED_FILE), text + "\n")
}

fn gamma_json(g: f64) -> serde_json::Value {
    if g.is_finite() {
        json!(g)
    } else {
        json!("inf")
    }
}

fn load_data(dir: &Path) -> Result<Dataset> {
    let ds = load_exported(dir)?;
    if ds.is_empty() {
        return Err(Error::Consistency(format!(
            "{} holds no examples",
            dir.display()
        )));
    }
    Ok(ds)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            config,
            out,
            idx_images,
            idx_labels,
        } => {
            let cfg = load_config(config.as_deref())?;
            let ds = match (&idx_images, &idx_labels) {
                (Some(i), Some(l)) => rotated_domains(
                    &load_idx(i, l)?,
                    &cfg.dataset.angles,
                    cfg.dataset.n_per_domain,
                )?,
                _ => generate_glyphs(&cfg.dataset)?,
            };
            ensure_dir(&out)?;
            export_dataset(&ds, &out)?;
            echo(
                &out,
                json!({
                    "command": "gen-data",
                    "config": cfg,
                    "idx_images": idx_images,
                    "idx_labels": idx_labels,
                    "examples": ds.len(),
                }),
            )
        }
        Command::Train {
            config,
            data,
            holdout_domain,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let ds = load_data(&data)?;
            let f = fold(
                &ds,
                holdout_domain,
                cfg.protocol.train_fraction,
                cfg.train.seed,
            )?;
            let outcome = train(&cfg.train, &f.train, &f.target)?;
            ensure_dir(&out)?;
            let ckpt = Checkpoint {
                config: cfg.train.clone(),
                gamma: outcome.gamma,
                lambda: outcome.selected.lambda,
                step: outcome.selected.step,
                model: outcome.model,
            };
            ckpt.save(&out.join(CHECKPOINT_FILE))?;
            write(&out.join(METRICS_FILE), metrics_to_csv(&outcome.metrics))?;
            echo(
                &out,
                json!({
                    "command": "train",
                    "config": cfg,
                    "data": data,
                    "holdout_domain": holdout_domain,
                    "resolved_gamma": gamma_json(outcome.gamma),
                    "train_examples": f.train.len(),
                    "steps": outcome.steps,
                    "selected_epoch": outcome.selected.epoch,
                    "selected_step": outcome.selected.step,
                    "selected_val_acc": outcome.selected.val_acc,
                }),
            )
        }
        Command::Eval {
            checkpoint,
            data,
            holdout_domain,
            out,
            config,
            run_id: id,
        } => {
            let cfg = load_config(config.as_deref())?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let ds = load_data(&data)?;
            let f = fold(
                &ds,
                holdout_domain,
                cfg.protocol.train_fraction,
                ckpt.config.seed,
            )?;
            let report = evaluate(
                &ckpt.model,
                &f.source_holdout,
                &f.target,
                holdout_domain,
                ckpt.gamma,
                &cfg.eval,
            )?;
            let label = ckpt.config.label();
            let id = id.unwrap_or_else(|| run_id(label, ckpt.config.seed, holdout_domain));
            ensure_dir(&out)?;
            write(&out.join(REPORT_FILE), report.to_kv())?;
            write(
                &out.join(LEDGER_FILE),
                ledger_csv(&[report.ledger_row(&id, label, ckpt.config.seed)])?,
            )?;
            echo(
                &out,
                json!({
                    "command": "eval",
                    "checkpoint": checkpoint,
                    "data": data,
                    "holdout_domain": holdout_domain,
                    "run_id": id,
                    "train": ckpt.config,
                    "eval": cfg.eval,
                    "protocol": cfg.protocol,
                    "resolved_gamma": gamma_json(ckpt.gamma),
                }),
            )
        }
        Command::Manipulate {
            checkpoint,
            data,
            mode,
            out,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let ds = load_data(&data)?;
            let steps = cfg.manipulate.steps.clone().unwrap_or_else(default_steps);
            let grid = manipulation_grid(
                &ckpt,
                &ds,
                mode,
                cfg.manipulate.n_semantic,
                cfg.manipulate.n_variation,
                &steps,
            )?;
            ensure_dir(&out)?;
            let name = grid_filename(mode.tag(), ckpt.config.seed, ckpt.step);
            write(&out.join(&name), encode_grid(&grid)?)?;
            echo(
                &out,
                json!({
                    "command": "manipulate",
                    "checkpoint": checkpoint,
                    "data": data,
                    "mode": mode.tag(),
                    "manipulate": cfg.manipulate,
                    "steps": steps,
                    "file": name,
                }),
            )
        }
        Command::Report { runs, out } => {
            let mut files = Vec::new();
            find_ledgers(&runs, &mut files)?;
            files.sort();
            let mut rows = Vec::new();
            for f in &files {
                let text = fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
                rows.extend(parse_ledger(&text)?);
            }
            if rows.is_empty() {
                return Err(Error::Consistency(format!(
                    "no ledger rows under {}",
                    runs.display()
                )));
            }
            ensure_dir(&out)?;
            write(&out.join(LEDGER_FILE), ledger_csv(&rows)?)?;
            write(
                &out.join(COMPARISON_FILE),
                comparison_csv(&aggregate(&rows))?,
            )?;
            echo(
                &out,
                json!({
                    "command": "report",
                    "runs": runs,
                    "ledgers": files,
                    "rows": rows.len(),
                }),
            )
        }
    }
}

fn find_ledgers(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            find_ledgers(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == LEDGER_FILE) {
            found.push(path);
        }
    }
    Ok(())
}

/// Builds the grid for `mode`.
///
/// Swap: rows are the first example of each class, columns the first example
/// of each domain. Interpolation: one row per class `c`, pairing the first
/// class-`c` example of domain 0 with the first example of the next class in
/// the last domain; columns are `x`, `x_tilde`, then one image per step.
pub fn manipulation_grid(
    ckpt: &Checkpoint,
    ds: &Dataset,
    mode: ManipulateMode,
    n_semantic: usize,
    n_variation: usize,
    steps: &[f64],
) -> Result<Vec<Vec<Tensor>>> {
    let first = |keep: &dyn Fn(usize, usize) -> bool| -> Option<&Tensor> {
        ds.examples
            .iter()
            .find(|e| keep(e.label, e.domain_id))
            .map(|e| &e.image)
    };
    let classes = n_semantic.min(ds.num_classes);
    let model = &ckpt.model;
    match mode {
        ManipulateMode::Swap => {
            let sem: Vec<&Tensor> = (0..classes).filter_map(|c| first(&|l, _| l == c)).collect();
            let var: Vec<&Tensor> = (0..n_variation.min(ds.domains.len()))
                .filter_map(|d| first(&|_, dd| dd == d))
                .collect();
            swap_grid(model, &sem, &var)
        }
        ManipulateMode::InterpV | ManipulateMode::InterpS => {
            let last = ds.domains.len() - 1;
            let mut grid = Vec::new();
            for c in 0..classes {
                let other = (c + 1) % ds.num_classes;
                let (Some(x), Some(xt)) = (
                    first(&|l, d| l == c && d == 0),
                    first(&|l, d| l == other && d == last),
                ) else {
                    continue;
                };
                let imgs = if mode == ManipulateMode::InterpV {
                    interpolate_variation(model, x, xt, steps)?
                } else {
                    interpolate_semantic(model, x, xt, steps)?
                };
                let mut row = vec![x.clone(), xt.clone()];
                row.extend(imgs);
                grid.push(row);
            }
            if grid.is_empty() {
                return Err(Error::Consistency(
                    "no source pairs for interpolation".into(),
                ));
            }
            Ok(grid)
        }
    }
}

/// Machine-readable error line.
pub fn error_line(e: &Error) -> String {
    json!({"error": {"kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string()}})
        .to_string()
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let err = Error::Config(
                e.to_string()
                    .lines()
                    .next()
                    .unwrap_or("bad arguments")
                    .to_string(),
            );
            let _ = e.print();
            eprintln!("{}", error_line(&err));
            return err.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}
