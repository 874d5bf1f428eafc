//! Latent swapping, interpolation and image-grid export.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::pgm::{encode_pgm, quantize};
use crate::tensor::Tensor;

/// `1.0, 0.9, ..., 0.1`.
pub fn default_steps() -> Vec<f64> {
    (0..10).map(|k| (10 - k) as f64 / 10.0).collect()
}

/// `[n+1][m+1]` grid. Row 0 holds the variation sources, column 0 the
/// semantic sources, cell `(i, j)` the decode of `h_s(sem[i-1]) ++ h_v(var[j-1])`
/// and the corner is blank.
pub fn swap_grid<M: Model>(
    model: &M,
    semantic: &[&Tensor],
    variation: &[&Tensor],
) -> Result<Vec<Vec<Tensor>>> {
    if semantic.is_empty() || variation.is_empty() {
        return Err(Error::Config(
            "swap grid needs at least one source of each kind".into(),
        ));
    }
    let s = model.semantic_codes(semantic)?;
    let v = model.variation_codes(variation)?;
    let (n, sd) = s.dims2("swap_grid")?;
    let (m, vd) = v.dims2("swap_grid")?;
    let mut s_rows = Vec::with_capacity(n * m * sd);
    let mut v_rows = Vec::with_capacity(n * m * vd);
    for i in 0..n {
        for j in 0..m {
            s_rows.extend_from_slice(s.row(i)?);
            v_rows.extend_from_slice(v.row(j)?);
        }
    }
    let mut cells = model
        .decode_codes(
            &Tensor::matrix(n * m, sd, s_rows)?,
            &Tensor::matrix(n * m, vd, v_rows)?,
        )?
        .into_iter();
    let side = model.dims().image_size;
    let mut grid = Vec::with_capacity(n + 1);
    let mut header = vec![Tensor::zeros(&[side, side])];
    header.extend(variation.iter().map(|&x| x.clone()));
    grid.push(header);
    for src in semantic {
        let mut row = vec![(*src).clone()];
        row.extend(cells.by_ref().take(m));
        grid.push(row);
    }
    Ok(grid)
}

fn check_steps(steps: &[f64]) -> Result<()> {
    match steps.iter().find(|i| !(0.0..=1.0).contains(*i)) {
        Some(i) => Err(Error::Config(format!(
            "interpolation step {i} outside [0, 1]"
        ))),
        None => Ok(()),
    }
}

/// `i * a + (1 - i) * b` per row, returning `a` and `b` untouched at the endpoints.
pub fn mix_codes(a: &[f64], b: &[f64], i: f64) -> Vec<f64> {
    if i == 1.0 {
        a.to_vec()
    } else if i == 0.0 {
        b.to_vec()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| i * x + (1.0 - i) * y)
            .collect()
    }
}

fn codes_of<M: Model>(model: &M, x: &Tensor, x_tilde: &Tensor) -> Result<(Tensor, Tensor)> {
    Ok((
        model.semantic_codes(&[x, x_tilde])?,
        model.variation_codes(&[x, x_tilde])?,
    ))
}

/// Variation codes decoded by [`interpolate_variation`], `[steps, v_dim]`.
pub fn variation_path<M: Model>(
    model: &M,
    x: &Tensor,
    x_tilde: &Tensor,
    steps: &[f64],
) -> Result<Tensor> {
    check_steps(steps)?;
    let v = model.variation_codes(&[x, x_tilde])?;
    path(&v, steps)
}

/// Semantic codes decoded by [`interpolate_semantic`], `[steps, s_dim]`.
pub fn semantic_path<M: Model>(
    model: &M,
    x: &Tensor,
    x_tilde: &Tensor,
    steps: &[f64],
) -> Result<Tensor> {
    check_steps(steps)?;
    let s = model.semantic_codes(&[x, x_tilde])?;
    path(&s, steps)
}

fn path(codes: &Tensor, steps: &[f64]) -> Result<Tensor> {
    if steps.is_empty() {
        return Err(Error::Config("no interpolation steps".into()));
    }
    let (_, d) = codes.dims2("interpolate")?;
    let (a, b) = (codes.row(0)?, codes.row(1)?);
    let data = steps.iter().flat_map(|&i| mix_codes(a, b, i)).collect();
    Tensor::matrix(steps.len(), d, data)
}

fn repeat_row(codes: &Tensor, row: usize, times: usize) -> Result<Tensor> {
    let (_, d) = codes.dims2("interpolate")?;
    let r = codes.row(row)?;
    Tensor::matrix(
        times,
        d,
        (0..times).flat_map(|_| r.iter().copied()).collect(),
    )
}

/// `D(h_s(x) ++ (i h_v(x) + (1 - i) h_v(x_tilde)))` for each step `i`.
pub fn interpolate_variation<M: Model>(
    model: &M,
    x: &Tensor,
    x_tilde: &Tensor,
    steps: &[f64],
) -> Result<Vec<Tensor>> {
    check_steps(steps)?;
    let (s, _) = codes_of(model, x, x_tilde)?;
    let v = variation_path(model, x, x_tilde, steps)?;
    model.decode_codes(&repeat_row(&s, 0, steps.len())?, &v)
}

/// `D((i h_s(x) + (1 - i) h_s(x_tilde)) ++ h_v(x))` for each step `i`.
pub fn interpolate_semantic<M: Model>(
    model: &M,
    x: &Tensor,
    x_tilde: &Tensor,
    steps: &[f64],
) -> Result<Vec<Tensor>> {
    check_steps(steps)?;
    let (_, v) = codes_of(model, x, x_tilde)?;
    let s = semantic_path(model, x, x_tilde, steps)?;
    model.decode_codes(&s, &repeat_row(&v, 0, steps.len())?)
}

/// Tiles a grid of equally sized images with 1-px separators at full white.
pub fn encode_grid(grid: &[Vec<Tensor>]) -> Result<Vec<u8>> {
    let first = grid
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| Error::Config("empty image grid".into()))?;
    let (h, w) = first.dims2("export_grid")?;
    let rows = grid.len();
    let cols = grid[0].len();
    if grid.iter().any(|r| r.len() != cols) {
        return Err(Error::shape("export_grid", "grid rows differ in length"));
    }
    let height = rows * h + rows - 1;
    let width = cols * w + cols - 1;
    let mut px = vec![255u8; width * height];
    for (r, row) in grid.iter().enumerate() {
        for (c, img) in row.iter().enumerate() {
            if img.shape() != [h, w] {
                return Err(Error::shape(
                    "export_grid",
                    format!(
                        "cell ({r}, {c}) has shape {:?}, expected [{h}, {w}]",
                        img.shape()
                    ),
                ));
            }
            if let Some(v) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Consistency(format!(
                    "cell ({r}, {c}) has value {v} outside [0, 1]"
                )));
            }
            let (y0, x0) = (r * (h + 1), c * (w + 1));
            for y in 0..h {
                for x in 0..w {
                    px[(y0 + y) * width + x0 + x] = quantize(img.data()[y * w + x]);
                }
            }
        }
    }
    encode_pgm(width, height, &px)
}

pub fn export_grid(grid: &[Vec<Tensor>], path: &Path) -> Result<()> {
    let bytes = encode_grid(grid)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// `{tag}_{seed}_{step}.pgm`.
pub fn grid_filename(tag: &str, seed: u64, step: u64) -> String {
    format!("{tag}_{seed}_{step}.pgm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::stubs::IdentityAutoencoder;
    use crate::pgm::decode_pgm;

    fn img(v: f64) -> Tensor {
        Tensor::full(&[4, 4], v)
    }

    #[test]
    fn default_steps_descend() {
        let s = default_steps();
        assert_eq!(s.len(), 10);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[9], 0.1);
    }

    #[test]
    fn grid_layout() {
        let m = IdentityAutoencoder::new(4, 2);
        let (a, b, c) = (img(0.1), img(0.2), img(0.3));
        let g = swap_grid(&m, &[&a, &b], &[&c, &a, &b]).unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.iter().all(|r| r.len() == 4));
        assert!(g[0][0].data().iter().all(|&v| v == 0.0));
        assert!(g[1][0].bits_eq(&a));
        assert!(g[0][1].bits_eq(&c));
        assert!(g[1][2].bits_eq(&m.reconstruct_pair(&a, &a).unwrap()));
    }

    #[test]
    fn out_of_range_step() {
        let m = IdentityAutoencoder::new(4, 2);
        assert!(interpolate_variation(&m, &img(0.1), &img(0.2), &[1.2]).is_err());
        assert!(interpolate_semantic(&m, &img(0.1), &img(0.2), &[-0.1]).is_err());
    }

    #[test]
    fn tiling_arithmetic() {
        let row = vec![img(1.0), img(0.0), img(0.5)];
        let bytes = encode_grid(&[row.clone(), row]).unwrap();
        let p = decode_pgm(&bytes).unwrap();
        assert_eq!((p.height, p.width), (2 * 4 + 1, 3 * 4 + 2));
        assert_eq!(p.pixels[0], 255);
        assert_eq!(p.pixels[5], 0);
        assert_eq!(p.pixels[4], 255);
        assert!(bytes.starts_with(b"P5\n14 9\n255\n"));
    }

    #[test]
    fn filename_pattern() {
        assert_eq!(grid_filename("swap", 3, 1200), "swap_3_1200.pgm");
    }
}
