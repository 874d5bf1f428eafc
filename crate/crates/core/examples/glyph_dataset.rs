//! Renders the rotated-glyph domains, splits them and writes them to disk.

use ddg::data::{export_dataset, generate_glyphs, load_exported, split, DatasetConfig};
use ddg::Result;

fn main() -> Result<()> {
    let cfg = DatasetConfig {
        n_per_domain: 50,
        ..Default::default()
    };
    let ds = generate_glyphs(&cfg)?;
    for (d, info) in ds.domains.iter().enumerate() {
        let dom = ds.domain(d);
        let mass = dom.examples.iter().map(|e| e.image.sum()).sum::<f64>() / dom.len() as f64;
        println!(
            "domain {d}: angle {:>4} deg, {} examples, mean mass {mass:.2}",
            info.angle_deg,
            dom.len()
        );
    }
    let (train, holdout) = split(&ds, 0.8, cfg.seed)?;
    println!("split 80/20: {} / {}", train.len(), holdout.len());

    let dir = std::env::temp_dir().join("ddg-glyphs-example");
    export_dataset(&ds, &dir)?;
    let back = load_exported(&dir)?;
    println!(
        "exported to {} and reloaded {} examples",
        dir.display(),
        back.len()
    );
    Ok(())
}
