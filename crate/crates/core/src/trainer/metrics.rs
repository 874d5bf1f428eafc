//! Per-step training log and its CSV form.

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "step,epoch,L_erm,L_con,L_aug,L_cyc,lagrangian,lambda,val_acc";

/// One primal-dual iteration. `lambda` is the multiplier used in that step's
/// Lagrangian, before the dual update.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub step: u64,
    pub epoch: usize,
    pub l_erm: f64,
    pub l_con: f64,
    pub l_aug: f64,
    pub l_cyc: f64,
    pub lagrangian: f64,
    pub lambda: f64,
    /// Set on the last step of each epoch when a validation set is given.
    pub val_acc: Option<f64>,
}

impl MetricsRecord {
    fn csv_line(&self) -> String {
        let val = self.val_acc.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}\n",
            self.step,
            self.epoch,
            self.l_erm,
            self.l_con,
            self.l_aug,
            self.l_cyc,
            self.lagrangian,
            self.lambda,
            val
        )
    }
}

pub fn metrics_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_line());
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == METRICS_HEADER => {}
        Some(h) => return Err(Error::Format(format!("unexpected metrics header {h:?}"))),
        None => return Err(Error::Format("empty metrics log".into())),
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(Error::Format(format!(
                "metrics line {line_no}: expected 9 columns, got {}",
                cols.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            cols[i].trim().parse::<f64>().map_err(|_| {
                Error::Format(format!("metrics line {line_no}: bad number {:?}", cols[i]))
            })
        };
        let int = |i: usize| -> Result<u64> {
            cols[i].trim().parse::<u64>().map_err(|_| {
                Error::Format(format!("metrics line {line_no}: bad integer {:?}", cols[i]))
            })
        };
        out.push(MetricsRecord {
            step: int(0)?,
            epoch: int(1)? as usize,
            l_erm: num(2)?,
            l_con: num(3)?,
            l_aug: num(4)?,
            l_cyc: num(5)?,
            lagrangian: num(6)?,
            lambda: num(7)?,
            val_acc: if cols[8].trim().is_empty() {
                None
            } else {
                Some(num(8)?)
            },
        });
    }
    Ok(out)
}
