//! Accuracy, worst-domain accuracy, proxy A-distance and constraint diagnostics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{argmax, Model};
use crate::optim::{adam_step, AdamConfig, AdamState, Param};
use crate::seed::derive_seed;
use crate::tensor::Tensor;
use crate::trainer::{parse_metrics_csv, MetricsRecord};

/// Two-sample probe repeats averaged inside one [`a_distance`] call.
pub const PROBE_REPEATS: u64 = 3;
pub const PROBE_STEPS: usize = 200;
pub const PROBE_LR: f64 = 0.01;

const PREDICT_CHUNK: usize = 512;

/// Predicted class of every example, in dataset order.
pub fn predictions<M: Model>(model: &M, dataset: &Dataset) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(dataset.len());
    for chunk in dataset.examples.chunks(PREDICT_CHUNK) {
        let images: Vec<&Tensor> = chunk.iter().map(|e| &e.image).collect();
        out.extend(model.predict(&images)?);
    }
    Ok(out)
}

pub fn accuracy<M: Model>(model: &M, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Consistency("accuracy of an empty dataset".into()));
    }
    let pred = predictions(model, dataset)?;
    let hits = pred
        .iter()
        .zip(&dataset.examples)
        .filter(|(p, e)| **p == e.label)
        .count();
    Ok(hits as f64 / dataset.len() as f64)
}

/// Lowest accuracy; the first domain in the list wins ties.
pub fn worst_of(accs: &[(usize, f64)]) -> Result<(usize, f64)> {
    let mut it = accs.iter().copied();
    let first = it.next().ok_or_else(|| {
        Error::Consistency("worst-domain accuracy needs at least one domain".into())
    })?;
    Ok(it.fold(first, |best, cur| if cur.1 < best.1 { cur } else { best }))
}

pub fn worst_domain_accuracy<M: Model>(
    model: &M,
    domains: &[(usize, &Dataset)],
) -> Result<(usize, f64)> {
    let mut accs: Vec<(usize, f64)> = Vec::with_capacity(domains.len());
    for (id, ds) in domains {
        accs.push((*id, accuracy(model, ds)?));
    }
    accs.sort_by_key(|a| a.0);
    worst_of(&accs)
}

/// `clamp(2 (1 - 2 sigma), 0, 2)`.
pub fn a_distance_from_error(sigma: f64) -> f64 {
    (2.0 * (1.0 - 2.0 * sigma)).clamp(0.0, 2.0)
}

fn stack(features: &[&Tensor]) -> Result<Tensor> {
    let flat: Vec<Tensor> = features
        .iter()
        .map(|f| f.reshape(vec![f.len()]))
        .collect::<Result<_>>()?;
    let refs: Vec<&Tensor> = flat.iter().collect();
    Tensor::stack_rows(&refs)
}

/// Per-column mean and standard deviation of `x`; constant columns get scale 1.
fn zscore_stats(x: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, d) = x.dims2("zscore")?;
    let data = x.data();
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for c in 0..d {
            mean[c] += data[r * d + c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for r in 0..n {
        for c in 0..d {
            let z = data[r * d + c] - mean[c];
            var[c] += z * z;
        }
    }
    let sd = var
        .iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Ok((mean, sd))
}

fn standardize(x: &Tensor, mean: &[f64], sd: &[f64]) -> Result<Tensor> {
    let (n, d) = x.dims2("zscore")?;
    let data = x.data();
    let out = (0..n * d)
        .map(|i| (data[i] - mean[i % d]) / sd[i % d])
        .collect();
    Tensor::matrix(n, d, out)
}

/// Softmax-regression probe trained full batch with Adam.
#[derive(Clone, Debug)]
pub struct LinearProbe {
    weight: Param,
    bias: Param,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl LinearProbe {
    /// Fits on `[n, d]` features after z-scoring them with their own statistics.
    pub fn fit(
        x: &Tensor,
        labels: &[usize],
        classes: usize,
        seed: u64,
        steps: usize,
        lr: f64,
    ) -> Result<Self> {
        let (n, d) = x.dims2("probe")?;
        if n != labels.len() {
            return Err(Error::shape(
                "probe",
                format!("{n} rows but {} labels", labels.len()),
            ));
        }
        let (mean, sd) = zscore_stats(x)?;
        let xs = standardize(x, &mean, &sd)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (d as f64).sqrt();
        let w: Vec<f64> = (0..d * classes)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let mut weight = Param::new("probe.weight", Tensor::matrix(d, classes, w)?);
        let mut bias = Param::new("probe.bias", Tensor::zeros(&[classes]));
        let mut sw = AdamState::for_param(&weight, AdamConfig::default());
        let mut sb = AdamState::for_param(&bias, AdamConfig::default());
        for _ in 0..steps {
            let mut g = Graph::new();
            let xv = g.constant(xs.clone())?;
            let wv = g.param(&weight)?;
            let bv = g.param(&bias)?;
            let z = g.matmul(xv, wv)?;
            let logits = g.add_bias(z, bv)?;
            let ce = g.softmax_cross_entropy(logits, labels)?;
            let loss = g.mean(ce)?;
            let grads = g.backward(loss)?;
            grads.accumulate_into(wv, &mut weight)?;
            grads.accumulate_into(bv, &mut bias)?;
            adam_step(&mut weight, &mut sw, lr)?;
            adam_step(&mut bias, &mut sb, lr)?;
        }
        Ok(LinearProbe {
            weight,
            bias,
            mean,
            sd,
        })
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let xs = standardize(x, &self.mean, &self.sd)?;
        let mut g = Graph::new();
        let xv = g.constant(xs)?;
        let wv = g.constant(self.weight.value.clone())?;
        let bv = g.constant(self.bias.value.clone())?;
        let z = g.matmul(xv, wv)?;
        let logits = g.add_bias(z, bv)?;
        let out = g.value(logits);
        let (n, c) = out.dims2("probe")?;
        Ok((0..n)
            .map(|r| argmax(&out.data()[r * c..(r + 1) * c]))
            .collect())
    }

    pub fn error_rate(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        let pred = self.predict(x)?;
        let wrong = pred.iter().zip(labels).filter(|(p, y)| p != y).count();
        Ok(wrong as f64 / labels.len().max(1) as f64)
    }
}

/// Splits each class 50/50 after a seeded shuffle. Returns (train, test) row indices.
fn stratified_halves(labels: &[usize], classes: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            seed, c as u64, 0,
        )));
        let k = idx.len() / 2;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    (train, test)
}

fn rows(x: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let (_, d) = x.dims2("rows")?;
    let mut out = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        out.extend_from_slice(x.row(i)?);
    }
    Tensor::matrix(idx.len(), d, out)
}

/// Mean held-out error of a probe that tells `a` (label 0) from `b` (label 1),
/// over [`PROBE_REPEATS`] seeds derived from `probe_seed`.
pub fn two_sample_error(
    features_a: &[&Tensor],
    features_b: &[&Tensor],
    probe_seed: u64,
) -> Result<f64> {
    if features_a.len() < 2 || features_b.len() < 2 {
        return Err(Error::Consistency(
            "two-sample probe needs at least 2 features per side".into(),
        ));
    }
    let width = features_a[0].len();
    if let Some(f) = features_a
        .iter()
        .chain(features_b)
        .find(|f| f.len() != width)
    {
        return Err(Error::shape(
            "a_distance",
            format!("feature width {} differs from {width}", f.len()),
        ));
    }
    let all: Vec<&Tensor> = features_a.iter().chain(features_b).copied().collect();
    let x = stack(&all)?;
    let labels: Vec<usize> = (0..all.len())
        .map(|i| usize::from(i >= features_a.len()))
        .collect();
    let mut total = 0.0;
    for rep in 0..PROBE_REPEATS {
        let seed = derive_seed(probe_seed, 0xA_D15, rep);
        let (tr, te) = stratified_halves(&labels, 2, seed);
        let ytr: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
        let yte: Vec<usize> = te.iter().map(|&i| labels[i]).collect();
        let probe = LinearProbe::fit(
            &rows(&x, &tr)?,
            &ytr,
            2,
            derive_seed(seed, 1, 0),
            PROBE_STEPS,
            PROBE_LR,
        )?;
        total += probe.error_rate(&rows(&x, &te)?, &yte)?;
    }
    Ok(total / PROBE_REPEATS as f64)
}

/// Proxy A-distance between two feature sets.
pub fn a_distance(features_a: &[&Tensor], features_b: &[&Tensor], probe_seed: u64) -> Result<f64> {
    Ok(a_distance_from_error(two_sample_error(
        features_a, features_b, probe_seed,
    )?))
}

/// Median of [`a_distance`] over the given probe seeds.
pub fn a_distance_median(
    features_a: &[&Tensor],
    features_b: &[&Tensor],
    probe_seeds: &[u64],
) -> Result<f64> {
    let mut vals = probe_seeds
        .iter()
        .map(|&s| a_distance(features_a, features_b, s))
        .collect::<Result<Vec<_>>>()?;
    median(&mut vals).ok_or_else(|| Error::Config("no probe seeds".into()))
}

pub fn median(vals: &mut [f64]) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    Some(if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    })
}

/// Seeded random ordered pairs `(i, j)` with `i != j`.
pub fn random_pairs(n: usize, n_pairs: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n < 2 {
        return Err(Error::Consistency("pairs need at least 2 examples".into()));
    }
    if n_pairs == 0 {
        return Err(Error::Config("n_pairs must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_pairs)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            (i, j)
        })
        .collect())
}

/// `l1(x_i, D(h_s(x_i) ++ h_v(x_j)))` for each pair.
pub fn pair_distances<M: Model>(
    model: &M,
    dataset: &Dataset,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(PREDICT_CHUNK) {
        let xi: Vec<&Tensor> = chunk
            .iter()
            .map(|&(i, _)| &dataset.examples[i].image)
            .collect();
        let xj: Vec<&Tensor> = chunk
            .iter()
            .map(|&(_, j)| &dataset.examples[j].image)
            .collect();
        let recon = model.reconstruct_pairs(&xi, &xj)?;
        for (x, r) in xi.iter().zip(&recon) {
            out.push(x.l1_distance(r)?);
        }
    }
    Ok(out)
}

/// Fraction of distances at or below `gamma`.
pub fn satisfied_fraction(distances: &[f64], gamma: f64) -> f64 {
    let ok = distances.iter().filter(|&&d| d <= gamma).count();
    ok as f64 / distances.len().max(1) as f64
}

pub fn constraint_satisfaction_rate<M: Model>(
    model: &M,
    dataset: &Dataset,
    gamma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let pairs = random_pairs(dataset.len(), n_pairs, seed)?;
    Ok(satisfied_fraction(
        &pair_distances(model, dataset, &pairs)?,
        gamma,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DualDiagnostics {
    pub lambda_final: f64,
    pub lambda_max: f64,
    /// Last-epoch mean `L_con` over first-epoch mean.
    pub l_con_trend: f64,
    /// Last-epoch mean Lagrangian over first-epoch mean.
    pub lagrangian_trend: f64,
}

fn ratio(last: f64, first: f64) -> f64 {
    if first == 0.0 {
        if last == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        last / first
    }
}

/// Mean of `field` over the rows of each epoch, in epoch order.
pub fn epoch_means(
    log: &[MetricsRecord],
    field: impl Fn(&MetricsRecord) -> f64,
) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in log {
        let e = acc.entry(r.epoch).or_insert((0.0, 0));
        e.0 += field(r);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

pub fn dual_diagnostics(log: &[MetricsRecord]) -> Result<DualDiagnostics> {
    let last = log
        .last()
        .ok_or_else(|| Error::Format("metrics log has no rows".into()))?;
    for w in log.windows(2) {
        if w[1].step <= w[0].step || w[1].epoch < w[0].epoch {
            return Err(Error::Format(format!(
                "metrics log out of order at step {}",
                w[1].step
            )));
        }
    }
    let con = epoch_means(log, |r| r.l_con);
    let lag = epoch_means(log, |r| r.lagrangian);
    Ok(DualDiagnostics {
        lambda_final: last.lambda,
        lambda_max: log
            .iter()
            .map(|r| r.lambda)
            .fold(f64::NEG_INFINITY, f64::max),
        l_con_trend: ratio(con[con.len() - 1].1, con[0].1),
        lagrangian_trend: ratio(lag[lag.len() - 1].1, lag[0].1),
    })
}

pub fn dual_diagnostics_csv(text: &str) -> Result<DualDiagnostics> {
    dual_diagnostics(&parse_metrics_csv(text)?)
}

pub const LEDGER_HEADER: &str =
    "run_id,mode,seed,holdout,avg_acc,worst_acc,a_dist_raw,a_dist_sem,sat_rate";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub run_id: String,
    pub mode: String,
    pub seed: u64,
    pub holdout: usize,
    pub avg_acc: f64,
    pub worst_acc: f64,
    pub a_dist_raw: f64,
    pub a_dist_sem: f64,
    pub sat_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub holdout_domain: usize,
    pub holdout_acc: f64,
    pub per_domain_acc: BTreeMap<usize, f64>,
    pub worst_domain: (usize, f64),
    pub avg_acc: f64,
    pub a_distance_raw: f64,
    pub a_distance_semantic: f64,
    pub gamma: f64,
    pub constraint_sat_rate: f64,
    pub mean_l1_recon: f64,
}

impl EvalReport {
    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "holdout_domain={}", self.holdout_domain);
        let _ = writeln!(s, "holdout_acc={}", self.holdout_acc);
        for (d, a) in &self.per_domain_acc {
            let _ = writeln!(s, "acc_domain_{d}={a}");
        }
        let _ = writeln!(s, "worst_domain={}", self.worst_domain.0);
        let _ = writeln!(s, "worst_acc={}", self.worst_domain.1);
        let _ = writeln!(s, "avg_acc={}", self.avg_acc);
        let _ = writeln!(s, "a_distance_raw={}", self.a_distance_raw);
        let _ = writeln!(s, "a_distance_semantic={}", self.a_distance_semantic);
        let _ = writeln!(s, "gamma={}", self.gamma);
        let _ = writeln!(s, "constraint_sat_rate={}", self.constraint_sat_rate);
        let _ = writeln!(s, "mean_l1_recon={}", self.mean_l1_recon);
        s
    }

    pub fn ledger_row(&self, run_id: &str, mode: &str, seed: u64) -> LedgerRow {
        LedgerRow {
            run_id: run_id.to_string(),
            mode: mode.to_string(),
            seed,
            holdout: self.holdout_domain,
            avg_acc: self.avg_acc,
            worst_acc: self.worst_domain.1,
            a_dist_raw: self.a_distance_raw,
            a_dist_sem: self.a_distance_semantic,
            sat_rate: self.constraint_sat_rate,
        }
    }
}

/// Knobs of [`evaluate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Features per side for the two-sample probes.
    pub a_distance_samples: usize,
    pub probe_seeds: Vec<u64>,
    pub n_pairs: usize,
    pub pair_seed: u64,
    /// Multiplier on the margin when counting satisfied pairs.
    pub gamma_slack: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            a_distance_samples: 500,
            probe_seeds: vec![0, 1, 2],
            n_pairs: 1000,
            pair_seed: 0,
            gamma_slack: 1.05,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a_distance_samples < 4 {
            return Err(Error::Config("a_distance_samples must be >= 4".into()));
        }
        if self.probe_seeds.is_empty() {
            return Err(Error::Config("probe_seeds must not be empty".into()));
        }
        if self.n_pairs == 0 {
            return Err(Error::Config("n_pairs must be >= 1".into()));
        }
        if !(self.gamma_slack >= 1.0) {
            return Err(Error::Config("gamma_slack must be >= 1".into()));
        }
        Ok(())
    }
}

/// An evenly spaced subsample of at most `n` examples.
fn spread(ds: &Dataset, n: usize) -> Vec<&Tensor> {
    let len = ds.len();
    let k = n.min(len);
    (0..k).map(|i| &ds.examples[i * len / k].image).collect()
}

/// Leave-one-domain-out report.
///
/// `source_holdout` holds the unseen examples of the training domains and
/// `target` the held-out domain. Per-domain accuracies cover both, and
/// satisfaction is measured on pairs drawn from `source_holdout` against
/// `gamma * gamma_slack`.
pub fn evaluate<M: Model>(
    model: &M,
    source_holdout: &Dataset,
    target: &Dataset,
    holdout_domain: usize,
    gamma: f64,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let mut per_domain = BTreeMap::new();
    let mut ids: Vec<usize> = source_holdout
        .examples
        .iter()
        .map(|e| e.domain_id)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    for d in ids {
        per_domain.insert(d, accuracy(model, &source_holdout.domain(d))?);
    }
    let holdout_acc = accuracy(model, target)?;
    per_domain.insert(holdout_domain, holdout_acc);
    let accs: Vec<(usize, f64)> = per_domain.iter().map(|(k, v)| (*k, *v)).collect();
    let worst_domain = worst_of(&accs)?;
    let avg_acc = accs.iter().map(|a| a.1).sum::<f64>() / accs.len() as f64;

    let raw_a = spread(source_holdout, cfg.a_distance_samples);
    let raw_b = spread(target, cfg.a_distance_samples);
    let a_distance_raw = a_distance_median(&raw_a, &raw_b, &cfg.probe_seeds)?;
    let sem_a = code_rows(&model.semantic_codes(&raw_a)?)?;
    let sem_b = code_rows(&model.semantic_codes(&raw_b)?)?;
    let sa: Vec<&Tensor> = sem_a.iter().collect();
    let sb: Vec<&Tensor> = sem_b.iter().collect();
    let a_distance_semantic = a_distance_median(&sa, &sb, &cfg.probe_seeds)?;

    let pairs = random_pairs(source_holdout.len(), cfg.n_pairs, cfg.pair_seed)?;
    let dist = pair_distances(model, source_holdout, &pairs)?;
    let mean_l1_recon = dist.iter().sum::<f64>() / dist.len() as f64;
    Ok(EvalReport {
        holdout_domain,
        holdout_acc,
        per_domain_acc: per_domain,
        worst_domain,
        avg_acc,
        a_distance_raw,
        a_distance_semantic,
        gamma,
        constraint_sat_rate: satisfied_fraction(&dist, gamma * cfg.gamma_slack),
        mean_l1_recon,
    })
}

/// Splits a `[n, d]` matrix into `n` row vectors.
pub fn code_rows(codes: &Tensor) -> Result<Vec<Tensor>> {
    let (n, _) = codes.dims2("codes")?;
    (0..n)
        .map(|i| Tensor::vector(codes.row(i)?.to_vec()))
        .collect()
}

/// Linear-probe accuracies for recovering the class and the domain from each code.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FactorProbe {
    pub class_from_semantic: f64,
    pub class_from_variation: f64,
    pub domain_from_semantic: f64,
    pub domain_from_variation: f64,
}

/// Reported only. Trains softmax probes on half of `dataset` and scores the other half.
pub fn factor_probe<M: Model>(model: &M, dataset: &Dataset, seed: u64) -> Result<FactorProbe> {
    let images: Vec<&Tensor> = dataset.examples.iter().map(|e| &e.image).collect();
    let s = model.semantic_codes(&images)?;
    let v = model.variation_codes(&images)?;
    let classes: Vec<usize> = dataset.examples.iter().map(|e| e.label).collect();
    let domains: Vec<usize> = dataset.examples.iter().map(|e| e.domain_id).collect();
    let n_dom = dataset.domains.len();
    let score = |x: &Tensor, y: &[usize], k: usize| -> Result<f64> {
        let (tr, te) = stratified_halves(y, k, seed);
        let ytr: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
        let yte: Vec<usize> = te.iter().map(|&i| y[i]).collect();
        let p = LinearProbe::fit(
            &rows(x, &tr)?,
            &ytr,
            k,
            derive_seed(seed, 7, 0),
            PROBE_STEPS,
            PROBE_LR,
        )?;
        Ok(1.0 - p.error_rate(&rows(x, &te)?, &yte)?)
    };
    Ok(FactorProbe {
        class_from_semantic: score(&s, &classes, dataset.num_classes)?,
        class_from_variation: score(&v, &classes, dataset.num_classes)?,
        domain_from_semantic: score(&s, &domains, n_dom)?,
        domain_from_variation: score(&v, &domains, n_dom)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_domain_rules() {
        assert_eq!(
            worst_of(&[(0, 0.9), (1, 0.8), (2, 0.95)]).unwrap(),
            (1, 0.8)
        );
        assert_eq!(worst_of(&[(3, 0.5)]).unwrap(), (3, 0.5));
        assert_eq!(worst_of(&[(0, 0.8), (1, 0.9), (2, 0.8)]).unwrap(), (0, 0.8));
        assert!(worst_of(&[]).is_err());
    }

    #[test]
    fn clamp_rule() {
        assert_eq!(a_distance_from_error(0.6), 0.0);
        assert_eq!(a_distance_from_error(0.0), 2.0);
        assert!((a_distance_from_error(0.25) - 1.0).abs() < 1e-15);
    }

    fn rec(step: u64, epoch: usize, l_con: f64, lagrangian: f64, lambda: f64) -> MetricsRecord {
        MetricsRecord {
            step,
            epoch,
            l_erm: 0.0,
            l_con,
            l_aug: 0.0,
            l_cyc: 0.0,
            lagrangian,
            lambda,
            val_acc: None,
        }
    }

    #[test]
    fn diagnostics_fixture() {
        let log = [
            rec(0, 0, 4.0, 2.0, 0.1),
            rec(1, 0, 2.0, 1.0, 0.3),
            rec(2, 1, 1.5, 0.75, 0.2),
        ];
        let d = dual_diagnostics(&log).unwrap();
        assert_eq!(d.lambda_final, 0.2);
        assert_eq!(d.lambda_max, 0.3);
        assert!((d.l_con_trend - 0.5).abs() < 1e-15);
        assert!((d.lagrangian_trend - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_lambda_final_is_max() {
        let log: Vec<_> = (0..4).map(|i| rec(i, i as usize, 1.0, 1.0, 0.1)).collect();
        let d = dual_diagnostics(&log).unwrap();
        assert_eq!(d.lambda_final, d.lambda_max);
    }

    #[test]
    fn malformed_logs() {
        assert!(matches!(dual_diagnostics(&[]), Err(Error::Format(_))));
        let log = [rec(1, 0, 1.0, 1.0, 0.1), rec(1, 0, 1.0, 1.0, 0.1)];
        assert!(matches!(dual_diagnostics(&log), Err(Error::Format(_))));
        assert!(matches!(
            dual_diagnostics_csv("nope"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn pairs_are_distinct_and_seeded() {
        let p = random_pairs(5, 200, 9).unwrap();
        assert!(p.iter().all(|(i, j)| i != j && *i < 5 && *j < 5));
        assert_eq!(p, random_pairs(5, 200, 9).unwrap());
        assert!(random_pairs(1, 3, 0).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
