//! IDX binary files (the MNIST distribution format): big-endian `u32` magic
//! and dimensions followed by a `u8` payload.

use std::fs;
use std::path::Path;

use super::{Dataset, DomainSpec, Example, Factors};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    let chunk = bytes.get(offset..end).ok_or_else(|| {
        Error::Format(format!(
            "truncated {what} header: expected at least {end} bytes, got {}",
            bytes.len()
        ))
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
}

fn check_magic(observed: u32, expected: u32, what: &str) -> Result<()> {
    if observed != expected {
        return Err(Error::Format(format!(
            "bad {what} magic 0x{observed:08x}, expected 0x{expected:08x}"
        )));
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], header: usize, count: usize, what: &str) -> Result<&'a [u8]> {
    let expected = header + count;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{what} payload size mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    Ok(&bytes[header..])
}

/// Parses an image file into `(rows, cols, images)` with pixels scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Tensor>)> {
    check_magic(read_u32(bytes, 0, "image")?, IDX_IMAGES_MAGIC, "image")?;
    let n = read_u32(bytes, 4, "image")? as usize;
    let rows = read_u32(bytes, 8, "image")? as usize;
    let cols = read_u32(bytes, 12, "image")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!(
            "image dimensions must be positive, got {rows}x{cols}"
        )));
    }
    let px = rows * cols;
    let data = payload(bytes, 16, n * px, "image")?;
    let images = data
        .chunks(px)
        .map(|c| {
            Tensor::from_parts(
                vec![rows, cols],
                c.iter().map(|&b| b as f64 / 255.0).collect(),
            )
        })
        .collect();
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    check_magic(read_u32(bytes, 0, "label")?, IDX_LABELS_MAGIC, "label")?;
    let n = read_u32(bytes, 4, "label")? as usize;
    let data = payload(bytes, 8, n, "label")?;
    Ok(data.iter().map(|&b| b as usize).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an image/label file pair as a single domain at angle 0.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (rows, cols, images) = parse_idx_images(&read(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read(labels_path.as_ref())?)?;
    if images.len() != labels.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    if rows != cols {
        return Err(Error::Format(format!(
            "images must be square, got {rows}x{cols}"
        )));
    }
    let num_classes = labels.iter().copied().max().map_or(2, |m| (m + 1).max(2));
    let examples = images
        .into_iter()
        .zip(labels)
        .map(|(image, label)| Example {
            image,
            label,
            domain_id: 0,
            factors: Factors {
                angle_deg: 0.0,
                thickness: 0.0,
                dx: 0.0,
                dy: 0.0,
            },
        })
        .collect();
    Ok(Dataset {
        domains: vec![DomainSpec { angle_deg: 0.0 }],
        num_classes,
        image_size: rows,
        examples,
    })
}

/// Encodes a dataset as `(image file bytes, label file bytes)`, quantizing
/// pixels with `round(v * 255)`.
pub fn write_idx(dataset: &Dataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let n = dataset.len() as u32;
    let s = dataset.image_size as u32;
    let mut images = Vec::with_capacity(16 + dataset.len() * dataset.pixels());
    for v in [IDX_IMAGES_MAGIC, n, s, s] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    let mut labels = Vec::with_capacity(8 + dataset.len());
    for v in [IDX_LABELS_MAGIC, n] {
        labels.extend_from_slice(&v.to_be_bytes());
    }
    for e in &dataset.examples {
        if e.image.len() != dataset.pixels() {
            return Err(Error::shape(
                "write_idx",
                format!("image shape {:?}", e.image.shape()),
            ));
        }
        let label = u8::try_from(e.label)
            .map_err(|_| Error::Format(format!("label {} does not fit in u8", e.label)))?;
        images.extend(
            e.image
                .data()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        labels.push(label);
    }
    Ok((images, labels))
}
