//! Proxy A-distance on synthetic blobs, then between two glyph domains in pixel space.

use ddg::data::{generate_glyphs, DatasetConfig};
use ddg::eval::a_distance;
use ddg::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blob(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> Result<Vec<Tensor>> {
    (0..n)
        .map(|_| Tensor::vector((0..4).map(|_| mean + rng.gen_range(-1.0..1.0)).collect()))
        .collect()
}

fn r(v: &[Tensor]) -> Vec<&Tensor> {
    v.iter().collect()
}

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let far_a = blob(&mut rng, 200, -10.0)?;
    let far_b = blob(&mut rng, 200, 10.0)?;
    let same_b = blob(&mut rng, 200, -10.0)?;
    println!(
        "separated blobs: {:.3}",
        a_distance(&r(&far_a), &r(&far_b), 0)?
    );
    println!(
        "same blob:       {:.3}",
        a_distance(&r(&far_a), &r(&same_b), 0)?
    );

    let ds = generate_glyphs(&DatasetConfig {
        n_per_domain: 200,
        ..Default::default()
    })?;
    let px = |d: usize| {
        ds.domain(d)
            .examples
            .into_iter()
            .map(|e| e.image)
            .collect::<Vec<_>>()
    };
    let (d0, d1, d5) = (px(0), px(1), px(5));
    println!(
        "pixels 0 vs 15 deg: {:.3}",
        a_distance(&r(&d0), &r(&d1), 0)?
    );
    println!(
        "pixels 0 vs 75 deg: {:.3}",
        a_distance(&r(&d0), &r(&d5), 0)?
    );
    Ok(())
}
