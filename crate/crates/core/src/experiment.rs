//! Leave-one-domain-out runs and cross-run comparison tables.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{split, Dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, median, EvalConfig, EvalReport, LedgerRow};
use crate::trainer::{train, TrainConfig, TrainOutcome};

/// Datasets of one leave-one-domain-out fold.
#[derive(Clone, Debug)]
pub struct Fold {
    pub holdout: usize,
    /// Training share of every source domain.
    pub train: Dataset,
    /// Remaining share of every source domain.
    pub source_holdout: Dataset,
    /// All examples of the held-out domain.
    pub target: Dataset,
}

pub fn fold(dataset: &Dataset, holdout: usize, train_fraction: f64, seed: u64) -> Result<Fold> {
    if holdout >= dataset.domains.len() {
        return Err(Error::Config(format!(
            "holdout domain {holdout} out of range for {} domains",
            dataset.domains.len()
        )));
    }
    let target = dataset.domain(holdout);
    if target.is_empty() {
        return Err(Error::Consistency(format!(
            "holdout domain {holdout} has no examples"
        )));
    }
    let (train, source_holdout) = split(&dataset.without_domain(holdout), train_fraction, seed)?;
    Ok(Fold {
        holdout,
        train,
        source_holdout,
        target,
    })
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: TrainOutcome,
    pub report: EvalReport,
}

/// Trains on the fold's training share, validating on the held-out domain, then evaluates.
pub fn run_fold(fold: &Fold, train_cfg: &TrainConfig, eval_cfg: &EvalConfig) -> Result<RunResult> {
    let outcome = train(train_cfg, &fold.train, &fold.target)?;
    let report = evaluate(
        &outcome.model,
        &fold.source_holdout,
        &fold.target,
        fold.holdout,
        outcome.gamma,
        eval_cfg,
    )?;
    Ok(RunResult { outcome, report })
}

pub fn run_id(mode: &str, seed: u64, holdout: usize) -> String {
    format!("{mode}-s{seed}-h{holdout}")
}

/// Median of every ledger metric for one (holdout, mode) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub holdout: usize,
    pub mode: String,
    pub runs: usize,
    pub avg_acc: f64,
    pub worst_acc: f64,
    pub a_dist_raw: f64,
    pub a_dist_sem: f64,
    pub sat_rate: f64,
}

pub const COMPARISON_HEADER: &str =
    "holdout,mode,runs,avg_acc,worst_acc,a_dist_raw,a_dist_sem,sat_rate";

/// Groups rows by holdout then mode (both ascending) and takes medians over seeds.
pub fn aggregate(rows: &[LedgerRow]) -> Vec<ComparisonRow> {
    let mut cells: BTreeMap<(usize, &str), Vec<&LedgerRow>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((r.holdout, r.mode.as_str()))
            .or_default()
            .push(r);
    }
    cells
        .into_iter()
        .map(|((holdout, mode), rs)| {
            let med = |f: fn(&LedgerRow) -> f64| {
                let mut v: Vec<f64> = rs.iter().map(|r| f(r)).collect();
                median(&mut v).expect("nonempty cell")
            };
            ComparisonRow {
                holdout,
                mode: mode.to_string(),
                runs: rs.len(),
                avg_acc: med(|r| r.avg_acc),
                worst_acc: med(|r| r.worst_acc),
                a_dist_raw: med(|r| r.a_dist_raw),
                a_dist_sem: med(|r| r.a_dist_sem),
                sat_rate: med(|r| r.sat_rate),
            }
        })
        .collect()
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    write_csv(rows)
}

pub fn ledger_csv(rows: &[LedgerRow]) -> Result<String> {
    write_csv(rows)
}

fn write_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Parses ledger CSV text; the header must match [`crate::eval::LEDGER_HEADER`].
pub fn parse_ledger(text: &str) -> Result<Vec<LedgerRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Format(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != crate::eval::LEDGER_HEADER {
        return Err(Error::Format(format!(
            "ledger header must be {}",
            crate::eval::LEDGER_HEADER
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(format!("ledger row: {e}"))))
        .collect()
}
