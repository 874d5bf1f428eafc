//! Synthetic rotated-glyph domains with known generative factors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rotate_image, Dataset, DomainSpec, Example, Factors};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tensor::Tensor;

type Segment = ((f64, f64), (f64, f64));

/// Stroke templates in unit coordinates (x right, y down), all inside the unit disc.
const TEMPLATES: [&[Segment]; 10] = [
    // box
    &[
        ((-0.7, -0.7), (0.7, -0.7)),
        ((0.7, -0.7), (0.7, 0.7)),
        ((0.7, 0.7), (-0.7, 0.7)),
        ((-0.7, 0.7), (-0.7, -0.7)),
    ],
    // one
    &[((0.0, -0.9), (0.0, 0.9)), ((-0.35, -0.55), (0.0, -0.9))],
    // zed
    &[
        ((-0.6, -0.7), (0.6, -0.7)),
        ((0.6, -0.7), (-0.6, 0.7)),
        ((-0.6, 0.7), (0.6, 0.7)),
    ],
    // triangle
    &[
        ((0.0, -0.85), (0.75, 0.5)),
        ((0.75, 0.5), (-0.75, 0.5)),
        ((-0.75, 0.5), (0.0, -0.85)),
    ],
    // ell
    &[((-0.5, -0.8), (-0.5, 0.7)), ((-0.5, 0.7), (0.6, 0.7))],
    // tee
    &[((-0.7, -0.7), (0.7, -0.7)), ((0.0, -0.7), (0.0, 0.8))],
    // eff
    &[
        ((-0.4, -0.8), (-0.4, 0.8)),
        ((-0.4, -0.8), (0.6, -0.8)),
        ((-0.4, 0.0), (0.4, 0.0)),
    ],
    // four
    &[
        ((0.3, -0.8), (0.3, 0.8)),
        ((0.3, -0.8), (-0.6, 0.3)),
        ((-0.6, 0.3), (0.6, 0.3)),
    ],
    // aitch
    &[
        ((-0.6, -0.7), (-0.6, 0.7)),
        ((0.6, -0.7), (0.6, 0.7)),
        ((-0.6, 0.0), (0.6, 0.0)),
    ],
    // pee
    &[
        ((-0.4, -0.8), (-0.4, 0.8)),
        ((-0.4, -0.8), (0.4, -0.8)),
        ((0.4, -0.8), (0.4, 0.0)),
        ((0.4, 0.0), (-0.4, 0.0)),
    ],
];

/// Glyph half-extent as a fraction of the image side.
const GLYPH_SCALE: f64 = 0.3;

/// Width in pixels of the linear anti-aliasing ramp at stroke edges.
const EDGE: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub seed: u64,
    pub n_per_domain: usize,
    pub image_size: usize,
    pub glyph_classes: usize,
    pub angles: Vec<f64>,
    pub thickness_range: [f64; 2],
    pub jitter_px: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 0,
            n_per_domain: 500,
            image_size: 16,
            glyph_classes: 5,
            angles: vec![0.0, 15.0, 30.0, 45.0, 60.0, 75.0],
            thickness_range: [1.0, 2.0],
            jitter_px: 1.0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_per_domain == 0 {
            return fail("n_per_domain must be at least 1".into());
        }
        if self.image_size < 4 {
            return fail(format!(
                "image_size must be at least 4, got {}",
                self.image_size
            ));
        }
        if !(2..=10).contains(&self.glyph_classes) {
            return fail(format!(
                "glyph_classes must be in [2,10], got {}",
                self.glyph_classes
            ));
        }
        if self.angles.is_empty() {
            return fail("at least one domain angle is required".into());
        }
        for (i, a) in self.angles.iter().enumerate() {
            if !a.is_finite() {
                return fail(format!("angle {a} is not finite"));
            }
            if self.angles[..i].contains(a) {
                return fail(format!("duplicate domain angle {a}"));
            }
        }
        let [lo, hi] = self.thickness_range;
        if !(lo > 0.0) || !(lo <= hi) || !hi.is_finite() {
            return fail(format!(
                "thickness_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            ));
        }
        if !(self.jitter_px >= 0.0) || self.jitter_px >= self.image_size as f64 / 4.0 {
            return fail(format!(
                "jitter_px must lie in [0, image_size/4), got {}",
                self.jitter_px
            ));
        }
        Ok(())
    }
}

fn segment_distance(p: (f64, f64), seg: ((f64, f64), (f64, f64))) -> f64 {
    let ((ax, ay), (bx, by)) = seg;
    let (vx, vy) = (bx - ax, by - ay);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - ax) * vx + (p.1 - ay) * vy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * vx, ay + t * vy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Draws the upright glyph for `label` with the given stroke width and offset.
fn stroke(label: usize, size: usize, thickness: f64, dx: f64, dy: f64) -> Tensor {
    let center = (size as f64 - 1.0) / 2.0;
    let scale = GLYPH_SCALE * size as f64;
    let segs: Vec<Segment> = TEMPLATES[label]
        .iter()
        .map(|&((ax, ay), (bx, by))| {
            (
                (center + dx + ax * scale, center + dy + ay * scale),
                (center + dx + bx * scale, center + dy + by * scale),
            )
        })
        .collect();
    let mut data = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let p = (c as f64, r as f64);
            let d = segs
                .iter()
                .map(|&s| segment_distance(p, s))
                .fold(f64::INFINITY, f64::min);
            data[r * size + c] = ((thickness / 2.0 + EDGE / 2.0 - d) / EDGE).clamp(0.0, 1.0);
        }
    }
    Tensor::from_parts(vec![size, size], data)
}

/// Renders example `index` of `domain_id` from its own derived random stream.
pub fn render_example(config: &DatasetConfig, domain_id: usize, index: usize) -> Result<Example> {
    let angle = *config
        .angles
        .get(domain_id)
        .ok_or_else(|| Error::Config(format!("domain {domain_id} out of range")))?;
    let label = index % config.glyph_classes;
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, domain_id as u64, index as u64));
    let [lo, hi] = config.thickness_range;
    let thickness = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let (dx, dy) = if config.jitter_px > 0.0 {
        (
            rng.gen_range(-config.jitter_px..config.jitter_px),
            rng.gen_range(-config.jitter_px..config.jitter_px),
        )
    } else {
        (0.0, 0.0)
    };
    let upright = stroke(label, config.image_size, thickness, dx, dy);
    let image = rotate_image(&upright, angle)?;
    Ok(Example {
        image,
        label,
        domain_id,
        factors: Factors {
            angle_deg: angle,
            thickness,
            dx,
            dy,
        },
    })
}

/// Generates `n_per_domain` examples for every angle, ordered by `(domain, index)`.
/// Classes cycle round-robin within each domain.
pub fn generate_glyphs(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.angles.len())
        .flat_map(|d| (0..config.n_per_domain).map(move |i| (d, i)))
        .collect();
    let examples = jobs
        .par_iter()
        .map(|&(d, i)| render_example(config, d, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        domains: config
            .angles
            .iter()
            .map(|&angle_deg| DomainSpec { angle_deg })
            .collect(),
        num_classes: config.glyph_classes,
        image_size: config.image_size,
        examples,
    })
}
