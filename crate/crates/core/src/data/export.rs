//! On-disk dataset layout: one directory per domain holding PGM images, plus
//! a CSV manifest at the root.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Dataset, DomainSpec, Example, Factors};
use crate::error::{Error, Result};
use crate::pgm;

pub const MANIFEST_HEADER: &str = "file,label,domain_id,angle_deg,thickness,dx,dy";
const MANIFEST: &str = "manifest.csv";

fn domain_dir(id: usize) -> String {
    format!("domain_{id:02}")
}

/// Writes `dataset` under `dir`, creating it if needed.
pub fn export_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    let mut counters = vec![0usize; dataset.domains.len()];
    for id in 0..dataset.domains.len() {
        let sub = dir.join(domain_dir(id));
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for e in &dataset.examples {
        let k = counters
            .get_mut(e.domain_id)
            .ok_or_else(|| Error::Consistency(format!("unknown domain {}", e.domain_id)))?;
        let rel = format!("{}/{:05}.pgm", domain_dir(e.domain_id), *k);
        *k += 1;
        let path = dir.join(&rel);
        fs::write(&path, pgm::encode_image(&e.image)?).map_err(|err| Error::io(&path, err))?;
        let f = &e.factors;
        manifest.push_str(&format!(
            "{rel},{},{},{},{},{},{}\n",
            e.label, e.domain_id, f.angle_deg, f.thickness, f.dx, f.dy
        ));
    }
    let path = dir.join(MANIFEST);
    let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    file.write_all(manifest.as_bytes())
        .map_err(|e| Error::io(&path, e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("manifest line {line}: bad column {i}")))
}

/// Reads a directory written by [`export_dataset`].
pub fn load_exported(dir: &Path) -> Result<Dataset> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Format(format!("manifest header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != MANIFEST_HEADER {
        return Err(Error::Format(format!(
            "unexpected manifest header {header:?}"
        )));
    }
    let mut examples = Vec::new();
    let mut angles: BTreeMap<usize, f64> = BTreeMap::new();
    let mut image_size = None;
    for (line, rec) in reader.records().enumerate() {
        let line = line + 2;
        let rec = rec.map_err(|e| Error::Format(format!("manifest line {line}: {e}")))?;
        let file: String = field(&rec, 0, line)?;
        let img_path = dir.join(&file);
        let bytes = fs::read(&img_path).map_err(|e| Error::io(&img_path, e))?;
        let image = pgm::decode_pgm(&bytes)?.to_tensor()?;
        let (h, w) = image.dims2("load_exported")?;
        if h != w || image_size.is_some_and(|s| s != h) {
            return Err(Error::Consistency(format!(
                "{file}: unexpected image size {h}x{w}"
            )));
        }
        image_size = Some(h);
        let factors = Factors {
            angle_deg: field(&rec, 3, line)?,
            thickness: field(&rec, 4, line)?,
            dx: field(&rec, 5, line)?,
            dy: field(&rec, 6, line)?,
        };
        let domain_id: usize = field(&rec, 2, line)?;
        if *angles.entry(domain_id).or_insert(factors.angle_deg) != factors.angle_deg {
            return Err(Error::Consistency(format!(
                "domain {domain_id} has mixed angles"
            )));
        }
        examples.push(Example {
            image,
            label: field(&rec, 1, line)?,
            domain_id,
            factors,
        });
    }
    let image_size =
        image_size.ok_or_else(|| Error::Consistency("manifest lists no examples".into()))?;
    if angles.keys().copied().ne(0..angles.len()) {
        return Err(Error::Consistency(
            "domain ids must be contiguous from 0".into(),
        ));
    }
    let num_classes = examples
        .iter()
        .map(|e| e.label + 1)
        .max()
        .unwrap_or(2)
        .max(2);
    let ds = Dataset {
        domains: angles
            .values()
            .map(|&angle_deg| DomainSpec { angle_deg })
            .collect(),
        num_classes,
        image_size,
        examples,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_glyphs, DatasetConfig};

    #[test]
    fn export_then_load_matches_quantized_source() {
        let ds = generate_glyphs(&DatasetConfig {
            n_per_domain: 5,
            angles: vec![0.0, 45.0],
            image_size: 8,
            ..DatasetConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_dataset(&ds, dir.path()).unwrap();
        let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert!(manifest.starts_with("file,label,domain_id,angle_deg,thickness,dx,dy\n"));
        assert!(dir.path().join("domain_01/00004.pgm").exists());
        let back = load_exported(dir.path()).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.domains, ds.domains);
        for (a, b) in ds.examples.iter().zip(&back.examples) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.factors, b.factors);
            for (x, y) in a.image.data().iter().zip(b.image.data()) {
                assert!((x - y).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}
