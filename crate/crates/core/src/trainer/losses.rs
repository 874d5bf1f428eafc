//! Per-example loss terms of the constrained objective, built on a [`Graph`].

use super::config::{ConstraintMode, Pairing, CYCLE_WEIGHT};
use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::model::{Model, Network};
use crate::tensor::Tensor;

/// Anchor/partner row indices into a batch, anchor-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairIndex {
    pub anchors: Vec<usize>,
    pub partners: Vec<usize>,
}

impl PairIndex {
    pub fn new(batch: usize, pairing: Pairing) -> Result<Self> {
        if batch < 2 {
            return Err(Error::Config(format!(
                "need at least 2 examples to form a pair, got {batch}"
            )));
        }
        Ok(match pairing {
            Pairing::Shift => PairIndex {
                anchors: (0..batch).collect(),
                partners: (0..batch).map(|i| (i + 1) % batch).collect(),
            },
            Pairing::AllPairs => {
                let (mut anchors, mut partners) = (Vec::new(), Vec::new());
                for i in 0..batch {
                    for j in (0..batch).filter(|&j| j != i) {
                        anchors.push(i);
                        partners.push(j);
                    }
                }
                PairIndex { anchors, partners }
            }
        })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Row-wise l1 distance, `[m,n],[m,n] -> [m]`.
pub fn l1_rows(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    let d = g.sub(a, b)?;
    let d = g.abs(d)?;
    g.row_sum(d)
}

/// Margin applied to a distance vector.
pub fn apply_margin(g: &mut Graph, dist: Var, gamma: f64, mode: ConstraintMode) -> Result<Var> {
    match mode {
        ConstraintMode::Hinge => g.hinge(dist, gamma),
        ConstraintMode::Raw => g.add_scalar(dist, -gamma),
    }
}

/// Graph handles of every per-example term for one batch.
#[derive(Clone, Copy, Debug)]
pub struct BatchTerms {
    /// Cross-entropy per example, `[B]`.
    pub erm: Var,
    /// Reconstruction l1 distance per pair, `[P]`.
    pub distance: Var,
    /// Constraint per pair after the margin, `[P]`.
    pub con: Var,
    /// Cross-entropy of the generated samples per pair, `[P]`.
    pub aug: Option<Var>,
    /// Cycle reconstruction l1 per pair, `[P]`.
    pub cyc: Option<Var>,
}

pub struct TermOptions {
    pub gamma: f64,
    pub mode: ConstraintMode,
    pub augment: bool,
    pub cycle: bool,
}

/// Builds every loss term for a batch `x` (`[B, pixels]`) with `labels`.
///
/// Encodings are computed once per batch and gathered per pair, so the
/// reconstruction for pair `(i, j)` is `D(h_s(x_i) ++ h_v(x_j))`. Generated
/// samples for augmentation are detached before re-encoding, so that term
/// only reaches the semantic encoder and head through `h_s(x*)`.
pub fn batch_terms<N: Network>(
    net: &N,
    g: &mut Graph,
    x: Var,
    labels: &[usize],
    pairs: &PairIndex,
    opts: &TermOptions,
) -> Result<BatchTerms> {
    let s_all = net.semantic(g, x)?;
    let v_all = net.variation(g, x)?;
    let logits = net.logits(g, s_all)?;
    let erm = g.softmax_cross_entropy(logits, labels)?;

    let x_anchor = g.gather_rows(x, &pairs.anchors)?;
    let s_anchor = g.gather_rows(s_all, &pairs.anchors)?;
    let v_partner = g.gather_rows(v_all, &pairs.partners)?;
    let swapped = net.decode(g, s_anchor, v_partner)?;
    let distance = l1_rows(g, x_anchor, swapped)?;
    let con = apply_margin(g, distance, opts.gamma, opts.mode)?;

    let aug = if opts.augment {
        let anchor_labels: Vec<usize> = pairs.anchors.iter().map(|&i| labels[i]).collect();
        let generated = g.detach(swapped)?;
        let s_gen = net.semantic(g, generated)?;
        let l = net.logits(g, s_gen)?;
        Some(g.softmax_cross_entropy(l, &anchor_labels)?)
    } else {
        None
    };

    let cyc = if opts.cycle {
        let s_partner = g.gather_rows(s_all, &pairs.partners)?;
        let v_anchor = g.gather_rows(v_all, &pairs.anchors)?;
        let reverse = net.decode(g, s_partner, v_anchor)?;
        let s_back = net.semantic(g, swapped)?;
        let v_back = net.variation(g, reverse)?;
        let cycled = net.decode(g, s_back, v_back)?;
        Some(l1_rows(g, cycled, x_anchor)?)
    } else {
        None
    };

    Ok(BatchTerms {
        erm,
        distance,
        con,
        aug,
        cyc,
    })
}

/// Batch means of each term, as scalar graph nodes.
#[derive(Clone, Copy, Debug)]
pub struct MeanTerms {
    pub erm: Var,
    pub con: Var,
    pub aug: Option<Var>,
    pub cyc: Option<Var>,
}

impl BatchTerms {
    pub fn means(&self, g: &mut Graph) -> Result<MeanTerms> {
        Ok(MeanTerms {
            erm: g.mean(self.erm)?,
            con: g.mean(self.con)?,
            aug: self.aug.map(|a| g.mean(a)).transpose()?,
            cyc: self.cyc.map(|c| g.mean(c)).transpose()?,
        })
    }
}

impl MeanTerms {
    /// `L_erm + lambda * L_con (+ L_aug) (+ w * L_cyc)`.
    pub fn lagrangian(&self, g: &mut Graph, lambda: f64) -> Result<Var> {
        let weighted = g.scale(self.con, lambda)?;
        let mut total = g.add(self.erm, weighted)?;
        if let Some(a) = self.aug {
            total = g.add(total, a)?;
        }
        if let Some(c) = self.cyc {
            let c = g.scale(c, CYCLE_WEIGHT)?;
            total = g.add(total, c)?;
        }
        Ok(total)
    }

    /// `L_con (+ w * L_cyc)`: the objective of the variation encoder and decoder.
    pub fn generator_objective(&self, g: &mut Graph) -> Result<Var> {
        match self.cyc {
            Some(c) => {
                let c = g.scale(c, CYCLE_WEIGHT)?;
                g.add(self.con, c)
            }
            None => Ok(self.con),
        }
    }
}

fn single<M: Model>(
    model: &M,
    images: &[&Tensor],
    labels: &[usize],
    opts: &TermOptions,
    pick: impl Fn(&BatchTerms) -> Option<Var>,
) -> Result<f64> {
    let mut g = Graph::new();
    let net = model.bind(&mut g)?;
    let x = g.constant(model.batch(images)?)?;
    let pairs = PairIndex {
        anchors: vec![0],
        partners: vec![images.len() - 1],
    };
    let terms = batch_terms(&net, &mut g, x, labels, &pairs, opts)?;
    let v = pick(&terms).ok_or(Error::Tape("term not built"))?;
    Ok(g.value(v).data()[0])
}

/// Constraint value for one pair: margin applied to `||x_i - D(h_s(x_i), h_v(x_j))||_1`.
pub fn constraint_loss<M: Model>(
    model: &M,
    x_i: &Tensor,
    x_j: &Tensor,
    gamma: f64,
    mode: ConstraintMode,
) -> Result<f64> {
    let opts = TermOptions {
        gamma,
        mode,
        augment: false,
        cycle: false,
    };
    single(model, &[x_i, x_j], &[0, 0], &opts, |t| Some(t.con))
}

/// Cross-entropy of the classifier on one image.
pub fn erm_loss<M: Model>(model: &M, x: &Tensor, y: usize) -> Result<f64> {
    check_label(model, y)?;
    let opts = TermOptions {
        gamma: 0.0,
        mode: ConstraintMode::Hinge,
        augment: false,
        cycle: false,
    };
    single(model, &[x, x], &[y, y], &opts, |t| Some(t.erm))
}

/// Cross-entropy of the classifier on `D(h_s(x_i), h_v(x_j))` under label `y_i`.
pub fn augmented_loss<M: Model>(model: &M, x_i: &Tensor, x_j: &Tensor, y_i: usize) -> Result<f64> {
    check_label(model, y_i)?;
    let opts = TermOptions {
        gamma: 0.0,
        mode: ConstraintMode::Hinge,
        augment: true,
        cycle: false,
    };
    single(model, &[x_i, x_j], &[y_i, 0], &opts, |t| t.aug)
}

/// l1 between `x` and its reconstruction after swapping variation codes with
/// `x_tilde` twice.
pub fn cycle_loss<M: Model>(model: &M, x: &Tensor, x_tilde: &Tensor) -> Result<f64> {
    let opts = TermOptions {
        gamma: 0.0,
        mode: ConstraintMode::Hinge,
        augment: false,
        cycle: true,
    };
    single(model, &[x, x_tilde], &[0, 0], &opts, |t| t.cyc)
}

fn check_label<M: Model>(model: &M, y: usize) -> Result<()> {
    let c = model.dims().classes;
    if y >= c {
        return Err(Error::Config(format!(
            "label {y} out of range for {c} classes"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::stubs::IdentityAutoencoder;

    fn img(n: usize, f: impl Fn(usize) -> f64) -> Tensor {
        Tensor::new(vec![n, n], (0..n * n).map(f).collect()).unwrap()
    }

    #[test]
    fn pair_indices() {
        let s = PairIndex::new(3, Pairing::Shift).unwrap();
        assert_eq!((s.anchors, s.partners), (vec![0, 1, 2], vec![1, 2, 0]));
        let a = PairIndex::new(3, Pairing::AllPairs).unwrap();
        assert_eq!(a.anchors, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(a.partners, vec![1, 2, 0, 2, 0, 1]);
        assert_eq!(
            PairIndex::new(2, Pairing::Shift).unwrap(),
            PairIndex::new(2, Pairing::AllPairs).unwrap()
        );
        assert!(PairIndex::new(1, Pairing::Shift).is_err());
    }

    #[test]
    fn perfect_reconstruction_satisfies_constraint() {
        let m = IdentityAutoencoder::new(4, 3);
        let a = img(4, |i| i as f64 / 16.0);
        let b = img(4, |i| 1.0 - i as f64 / 16.0);
        assert_eq!(
            constraint_loss(&m, &a, &b, 0.1, ConstraintMode::Hinge).unwrap(),
            0.0
        );
    }

    #[test]
    fn hinge_arithmetic() {
        // 256 pixels each off by 0.01 -> l1 = 2.56.
        let m = IdentityAutoencoder::new(16, 2).with_offset(0.01);
        let a = img(16, |i| (i % 7) as f64 / 10.0);
        let v = constraint_loss(&m, &a, &a, 1.0, ConstraintMode::Hinge).unwrap();
        assert!((v - 1.56).abs() < 1e-12, "{v}");
        let raw = constraint_loss(&m, &a, &a, 3.0, ConstraintMode::Raw).unwrap();
        assert!((raw + 0.44).abs() < 1e-12, "{raw}");
        let hinged = constraint_loss(&m, &a, &a, 3.0, ConstraintMode::Hinge).unwrap();
        assert_eq!(hinged, 0.0);
    }

    #[test]
    fn hinge_boundary_is_zero() {
        let m = IdentityAutoencoder::new(2, 2).with_offset(0.25);
        let a = img(2, |_| 0.5);
        assert_eq!(
            constraint_loss(&m, &a, &a, 1.0, ConstraintMode::Hinge).unwrap(),
            0.0
        );
    }

    #[test]
    fn three_class_cross_entropy_fixture() {
        // Logits are s @ head; a one-hot image selects a head row.
        let mut m = IdentityAutoencoder::new(1, 3);
        m.head = Tensor::new(vec![1, 3], vec![2.0, 1.0, 0.1]).unwrap();
        let x = img(1, |_| 1.0);
        let z: f64 = [2.0f64, 1.0, 0.1].iter().map(|v| v.exp()).sum();
        for (y, logit) in [(0, 2.0), (1, 1.0), (2, 0.1)] {
            let expected = z.ln() - logit;
            assert!((erm_loss(&m, &x, y).unwrap() - expected).abs() < 1e-14);
        }
        assert!(erm_loss(&m, &x, 3).is_err());
    }

    #[test]
    fn self_pair_augmentation_equals_erm() {
        let m = IdentityAutoencoder::new(3, 4);
        let x = img(3, |i| (i * 3 % 5) as f64 / 5.0);
        let aug = augmented_loss(&m, &x, &x, 2).unwrap();
        assert_eq!(aug, erm_loss(&m, &x, 2).unwrap());
    }

    #[test]
    fn augmentation_uses_anchor_label() {
        let m = IdentityAutoencoder::new(3, 4);
        let x = img(3, |i| (i * 3 % 5) as f64 / 5.0);
        let other = img(3, |i| (i % 2) as f64);
        // Identity decoder reproduces x_i, so the label that matters is y_i's.
        assert_eq!(
            augmented_loss(&m, &x, &other, 1).unwrap(),
            erm_loss(&m, &x, 1).unwrap()
        );
    }

    #[test]
    fn identity_cycle_is_zero() {
        let m = IdentityAutoencoder::new(3, 2);
        let x = img(3, |i| i as f64 / 9.0);
        let t = img(3, |i| 1.0 - i as f64 / 9.0);
        assert_eq!(cycle_loss(&m, &x, &t).unwrap(), 0.0);
    }
}
