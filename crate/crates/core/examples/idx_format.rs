//! Writes a dataset as an IDX image/label pair, reads it back and builds rotated domains from it.

use ddg::data::{
    generate_glyphs, load_idx, parse_idx_images, rotated_domains, write_idx, DatasetConfig,
};
use ddg::Result;

fn main() -> Result<()> {
    let glyphs = generate_glyphs(&DatasetConfig {
        n_per_domain: 20,
        angles: vec![0.0],
        ..Default::default()
    })?;
    let (images, labels) = write_idx(&glyphs)?;
    println!(
        "images: {} bytes, magic {:02x?}",
        images.len(),
        &images[..4]
    );
    println!(
        "labels: {} bytes, magic {:02x?}",
        labels.len(),
        &labels[..4]
    );

    let dir = std::env::temp_dir().join("ddg-idx-example");
    std::fs::create_dir_all(&dir).map_err(|e| ddg::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let (ip, lp) = (dir.join("images.idx"), dir.join("labels.idx"));
    for (p, b) in [(&ip, &images), (&lp, &labels)] {
        std::fs::write(p, b).map_err(|e| ddg::Error::Io {
            path: p.clone(),
            source: e,
        })?;
    }
    let base = load_idx(&ip, &lp)?;
    println!(
        "loaded {} examples of {}x{}",
        base.len(),
        base.image_size,
        base.image_size
    );

    let rotated = rotated_domains(&base, &[0.0, 30.0, 60.0], 10)?;
    println!(
        "rotated copy: {} domains x 10 = {}",
        rotated.domains.len(),
        rotated.len()
    );

    let mut bad = images.clone();
    bad[..4].copy_from_slice(&0x1234_5678u32.to_be_bytes());
    println!("bad magic -> {}", parse_idx_images(&bad).unwrap_err());
    println!(
        "truncated -> {}",
        parse_idx_images(&images[..images.len() - 3]).unwrap_err()
    );
    Ok(())
}
