use super::{Dataset, DomainSpec, Example, Factors};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Rotates a square image counter-clockwise (as displayed, rows growing
/// downward) about its center.
///
/// Multiples of 90 degrees are exact index permutations. Other angles use
/// bilinear interpolation, reading samples outside the canvas as 0. Output
/// is clamped to `[0, 1]`.
pub fn rotate_image(img: &Tensor, angle_deg: f64) -> Result<Tensor> {
    let (h, w) = img.dims2("rotate_image")?;
    if h != w {
        return Err(Error::shape(
            "rotate_image",
            format!("image must be square, got [{h}, {w}]"),
        ));
    }
    if !angle_deg.is_finite() {
        return Err(Error::Numeric {
            op: "rotate_image".into(),
        });
    }
    let n = h;
    let src = img.data();
    let quarter = angle_deg / 90.0;
    let k = quarter.round();
    if (quarter - k).abs() < 1e-12 {
        let k = (k as i64).rem_euclid(4);
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let (sr, sc) = match k {
                    0 => (r, c),
                    1 => (c, n - 1 - r),
                    2 => (n - 1 - r, n - 1 - c),
                    _ => (n - 1 - c, r),
                };
                out[r * n + c] = src[sr * n + sc].clamp(0.0, 1.0);
            }
        }
        return Tensor::new(vec![n, n], out);
    }

    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let center = (n as f64 - 1.0) / 2.0;
    let at = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= n as i64 || c >= n as i64 {
            0.0
        } else {
            src[r as usize * n + c as usize]
        }
    };
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let u = c as f64 - center;
            let v = r as f64 - center;
            let sx = center + u * cos - v * sin;
            let sy = center + u * sin + v * cos;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let val = at(y0, x0) * (1.0 - fx) * (1.0 - fy)
                + at(y0, x0 + 1) * fx * (1.0 - fy)
                + at(y0 + 1, x0) * (1.0 - fx) * fy
                + at(y0 + 1, x0 + 1) * fx * fy;
            out[r * n + c] = val.clamp(0.0, 1.0);
        }
    }
    Tensor::new(vec![n, n], out)
}

/// One domain per angle, each holding the first `n_per_domain` examples of
/// `base` rotated by that angle.
pub fn rotated_domains(base: &Dataset, angles: &[f64], n_per_domain: usize) -> Result<Dataset> {
    if n_per_domain == 0 || n_per_domain > base.len() {
        return Err(Error::Config(format!(
            "n_per_domain must be in [1, {}], got {n_per_domain}",
            base.len()
        )));
    }
    let mut domains = Vec::with_capacity(angles.len());
    let mut examples = Vec::with_capacity(angles.len() * n_per_domain);
    for (d, &angle_deg) in angles.iter().enumerate() {
        if domains
            .iter()
            .any(|s: &DomainSpec| s.angle_deg == angle_deg)
        {
            return Err(Error::Config(format!("duplicate angle {angle_deg}")));
        }
        domains.push(DomainSpec { angle_deg });
        for e in &base.examples[..n_per_domain] {
            examples.push(Example {
                image: rotate_image(&e.image, angle_deg)?,
                label: e.label,
                domain_id: d,
                factors: Factors {
                    angle_deg,
                    ..e.factors
                },
            });
        }
    }
    Ok(Dataset {
        domains,
        num_classes: base.num_classes,
        image_size: base.image_size,
        examples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(n: usize, r: usize, c: usize) -> Tensor {
        let mut d = vec![0.0; n * n];
        d[r * n + c] = 1.0;
        Tensor::new(vec![n, n], d).unwrap()
    }

    #[test]
    fn zero_angle_is_identity() {
        let img = lit(5, 1, 3);
        assert!(rotate_image(&img, 0.0).unwrap().bits_eq(&img));
        assert!(rotate_image(&img, 360.0).unwrap().bits_eq(&img));
    }

    #[test]
    fn quarter_turn_moves_top_pixel_to_left_column() {
        // A point right of the top-left corner ends up on the left edge,
        // below center (counter-clockwise as displayed).
        let out = rotate_image(&lit(4, 0, 1), 90.0).unwrap();
        assert!(out.bits_eq(&lit(4, 2, 0)));
    }

    #[test]
    fn half_turn_is_involution() {
        let data: Vec<f64> = (0..36).map(|i| (i as f64 * 0.37).fract()).collect();
        let img = Tensor::new(vec![6, 6], data).unwrap();
        let twice = rotate_image(&rotate_image(&img, 180.0).unwrap(), 180.0).unwrap();
        assert!(twice.bits_eq(&img));
    }

    #[test]
    fn bilinear_near_right_angle_agrees_with_permutation() {
        let data: Vec<f64> = (0..64).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let img = Tensor::new(vec![8, 8], data).unwrap();
        let exact = rotate_image(&img, 90.0).unwrap();
        let near = rotate_image(&img, 90.0 + 1e-7).unwrap();
        for (a, b) in exact.data().iter().zip(near.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn non_square_rejected() {
        let img = Tensor::zeros(&[3, 4]);
        assert!(matches!(rotate_image(&img, 10.0), Err(Error::Shape { .. })));
    }
}
