//! Leave-one-domain-out comparison of the ERM baseline and the constrained model.

use ddg::data::{generate_glyphs, DatasetConfig};
use ddg::eval::EvalConfig;
use ddg::experiment::{aggregate, comparison_csv, fold, run_fold, run_id};
use ddg::trainer::{Mode, TrainConfig};
use ddg::Result;

fn main() -> Result<()> {
    let ds = generate_glyphs(&DatasetConfig {
        n_per_domain: 100,
        ..Default::default()
    })?;
    let eval = EvalConfig {
        a_distance_samples: 80,
        n_pairs: 200,
        ..Default::default()
    };
    let base = TrainConfig {
        epochs: 4,
        hidden: 64,
        ..Default::default()
    };
    let variants = [
        TrainConfig {
            mode: Mode::Erm,
            ..base.clone()
        },
        base.clone(),
        TrainConfig {
            augment: true,
            ..base.clone()
        },
    ];
    let mut rows = Vec::new();
    for holdout in [0, 5] {
        let f = fold(&ds, holdout, 0.8, 0)?;
        for cfg in &variants {
            let r = run_fold(&f, cfg, &eval)?;
            println!(
                "{:<8} holdout {holdout}: target acc {:.3}",
                cfg.label(),
                r.report.holdout_acc
            );
            rows.push(r.report.ledger_row(
                &run_id(cfg.label(), cfg.seed, holdout),
                cfg.label(),
                cfg.seed,
            ));
        }
    }
    print!("{}", comparison_csv(&aggregate(&rows))?);
    Ok(())
}
