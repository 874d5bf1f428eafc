//! Swaps and interpolates latent codes of a briefly trained model and writes the grids as PGM.

use ddg::data::{generate_glyphs, DatasetConfig};
use ddg::manipulate::{
    default_steps, export_grid, grid_filename, interpolate_variation, swap_grid, variation_path,
};
use ddg::model::Model;
use ddg::trainer::{train, TrainConfig};
use ddg::{Result, Tensor};

fn main() -> Result<()> {
    let ds = generate_glyphs(&DatasetConfig {
        n_per_domain: 60,
        ..Default::default()
    })?;
    let cfg = TrainConfig {
        epochs: 3,
        hidden: 64,
        ..Default::default()
    };
    let out = train(&cfg, &ds, &ds.domain(0))?;
    let model = &out.model;

    let by_class: Vec<&Tensor> = (0..5)
        .map(|c| &ds.examples.iter().find(|e| e.label == c).unwrap().image)
        .collect();
    let by_domain: Vec<&Tensor> = (0..6)
        .map(|d| &ds.examples.iter().find(|e| e.domain_id == d).unwrap().image)
        .collect();
    let grid = swap_grid(model, &by_class, &by_domain)?;
    println!("swap grid {} x {}", grid.len(), grid[0].len());

    let (x, xt) = (by_domain[0], by_domain[5]);
    let steps = default_steps();
    let row = interpolate_variation(model, x, xt, &steps)?;
    let path = variation_path(model, x, xt, &[0.5])?;
    let codes = model.variation_codes(&[x, xt])?;
    let mid: Vec<f64> = codes
        .row(0)?
        .iter()
        .zip(codes.row(1)?)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let gap = path
        .data()
        .iter()
        .zip(&mid)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "interpolation: {} frames, midpoint code gap {gap:.1e}",
        row.len()
    );

    let dir = std::env::temp_dir();
    let swap_path = dir.join(grid_filename("swap", cfg.seed, out.selected.step));
    export_grid(&grid, &swap_path)?;
    let interp_path = dir.join(grid_filename("interp-v", cfg.seed, out.selected.step));
    export_grid(&[row], &interp_path)?;
    println!(
        "wrote {} and {}",
        swap_path.display(),
        interp_path.display()
    );
    Ok(())
}
