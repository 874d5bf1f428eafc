//! Datasets of labelled, domain-tagged images.

mod export;
mod glyphs;
mod idx;
mod rotate;
mod split;

pub use export::{export_dataset, load_exported, MANIFEST_HEADER};
pub use glyphs::{generate_glyphs, render_example, DatasetConfig};
pub use idx::{
    load_idx, parse_idx_images, parse_idx_labels, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use rotate::{rotate_image, rotated_domains};
pub use split::split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Ground-truth generative factors of one example.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    pub angle_deg: f64,
    pub thickness: f64,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    /// `[H, W]`, values in `[0, 1]`.
    pub image: Tensor,
    pub label: usize,
    pub domain_id: usize,
    pub factors: Factors,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub angle_deg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub domains: Vec<DomainSpec>,
    pub num_classes: usize,
    pub image_size: usize,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.image_size * self.image_size
    }

    /// A dataset with the same metadata and the given examples.
    pub fn with_examples(&self, examples: Vec<Example>) -> Dataset {
        Dataset {
            domains: self.domains.clone(),
            num_classes: self.num_classes,
            image_size: self.image_size,
            examples,
        }
    }

    pub fn filter(&self, keep: impl Fn(&Example) -> bool) -> Dataset {
        self.with_examples(self.examples.iter().filter(|e| keep(e)).cloned().collect())
    }

    pub fn domain(&self, domain_id: usize) -> Dataset {
        self.filter(|e| e.domain_id == domain_id)
    }

    /// Everything except `domain_id`.
    pub fn without_domain(&self, domain_id: usize) -> Dataset {
        self.filter(|e| e.domain_id != domain_id)
    }

    /// Checks image shapes, pixel range, labels and domain ids.
    pub fn validate(&self) -> Result<()> {
        let mut seen = Vec::new();
        for d in &self.domains {
            if seen.contains(&d.angle_deg) {
                return Err(Error::Consistency(format!(
                    "duplicate domain angle {}",
                    d.angle_deg
                )));
            }
            seen.push(d.angle_deg);
        }
        for (i, e) in self.examples.iter().enumerate() {
            if e.image.shape() != [self.image_size, self.image_size] {
                return Err(Error::Consistency(format!(
                    "example {i} has shape {:?}, expected [{s}, {s}]",
                    e.image.shape(),
                    s = self.image_size
                )));
            }
            if e.image.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Consistency(format!(
                    "example {i} has pixels outside [0,1]"
                )));
            }
            if e.label >= self.num_classes {
                return Err(Error::Consistency(format!(
                    "example {i} label {} >= {} classes",
                    e.label, self.num_classes
                )));
            }
            let Some(dom) = self.domains.get(e.domain_id) else {
                return Err(Error::Consistency(format!(
                    "example {i} has unknown domain {}",
                    e.domain_id
                )));
            };
            if dom.angle_deg != e.factors.angle_deg {
                return Err(Error::Consistency(format!(
                    "example {i} angle {} differs from domain angle {}",
                    e.factors.angle_deg, dom.angle_deg
                )));
            }
        }
        Ok(())
    }
}
