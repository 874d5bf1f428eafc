use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Stratified split per `(domain, class)` cell into `(train, holdout)`.
///
/// Each cell keeps `round(fraction * n)` examples for training, clamped so
/// both sides get at least one. Both outputs preserve input order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, e) in dataset.examples.iter().enumerate() {
        cells.entry((e.domain_id, e.label)).or_default().push(i);
    }
    let mut in_train = vec![false; dataset.len()];
    for (&(domain, label), members) in &cells {
        let n = members.len();
        if n < 2 {
            return Err(Error::Stratification {
                domain,
                label,
                count: n,
            });
        }
        let mut order = members.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain as u64, label as u64));
        order.shuffle(&mut rng);
        let k = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        for &i in &order[..k] {
            in_train[i] = true;
        }
    }
    let (mut train, mut holdout) = (Vec::new(), Vec::new());
    for (e, keep) in dataset.examples.iter().zip(in_train) {
        if keep {
            train.push(e.clone());
        } else {
            holdout.push(e.clone());
        }
    }
    Ok((dataset.with_examples(train), dataset.with_examples(holdout)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_glyphs, DatasetConfig};

    fn ds(n: usize) -> Dataset {
        generate_glyphs(&DatasetConfig {
            n_per_domain: n,
            angles: vec![0.0, 30.0],
            image_size: 8,
            ..DatasetConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn eighty_twenty_per_cell() {
        let d = ds(500);
        let (train, hold) = split(&d, 0.8, 3).unwrap();
        for dom in 0..2 {
            for c in 0..5 {
                let count = |s: &Dataset| {
                    s.examples
                        .iter()
                        .filter(|e| e.domain_id == dom && e.label == c)
                        .count()
                };
                assert_eq!((count(&train), count(&hold)), (80, 20));
            }
        }
    }

    #[test]
    fn same_seed_same_split() {
        let d = ds(40);
        assert_eq!(split(&d, 0.8, 9).unwrap(), split(&d, 0.8, 9).unwrap());
        assert_ne!(split(&d, 0.8, 9).unwrap().0, split(&d, 0.8, 10).unwrap().0);
    }

    #[test]
    fn small_cell_is_stratification_error() {
        let d = ds(6); // class 0 has 2, classes 2..5 have 1
        assert!(matches!(
            split(&d, 0.8, 0),
            Err(Error::Stratification { count: 1, .. })
        ));
    }

    #[test]
    fn bad_fraction_rejected() {
        let d = ds(20);
        assert!(split(&d, 0.0, 0).is_err());
        assert!(split(&d, 1.0, 0).is_err());
    }
}
