//! A short primal-dual run on a small glyph set, printing per-epoch loss means and the multiplier.

use ddg::data::{generate_glyphs, split, DatasetConfig};
use ddg::eval::{accuracy, dual_diagnostics, epoch_means};
use ddg::trainer::{train, TrainConfig};
use ddg::Result;

fn main() -> Result<()> {
    let ds = generate_glyphs(&DatasetConfig {
        n_per_domain: 100,
        ..Default::default()
    })?;
    let target = ds.domain(5);
    let (train_set, _) = split(&ds.without_domain(5), 0.8, 0)?;
    let cfg = TrainConfig {
        epochs: 5,
        hidden: 64,
        ..Default::default()
    };
    let out = train(&cfg, &train_set, &target)?;

    println!("gamma = {:.3}", out.gamma);
    let erm = epoch_means(&out.metrics, |r| r.l_erm);
    let con = epoch_means(&out.metrics, |r| r.l_con);
    let lam = epoch_means(&out.metrics, |r| r.lambda);
    for ((e, a), ((_, b), (_, l))) in erm.iter().zip(con.iter().zip(&lam)) {
        println!("epoch {e}: L_erm {a:.4}  L_con {b:.4}  lambda {l:.4}");
    }
    let d = dual_diagnostics(&out.metrics)?;
    println!(
        "lambda final {:.4}, L_con trend {:.3}",
        d.lambda_final, d.l_con_trend
    );
    println!(
        "held-out domain accuracy {:.3}",
        accuracy(&out.model, &target)?
    );
    Ok(())
}
