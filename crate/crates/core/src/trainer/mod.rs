//! Primal-dual training of the constrained objective.
//!
//! Each iteration takes one Adam step on the classifier parameters against
//! the batch Lagrangian `L_erm + lambda * L_con (+ L_aug) (+ L_cyc)`, one Adam
//! step on the variation encoder and decoder against `L_con (+ L_cyc)`, then
//! projects `lambda + eta2 * mean(L_con)` onto `[0, inf)`.

mod config;
mod losses;
mod metrics;

pub use config::{
    ConstraintMode, Gamma, Mode, Pairing, TrainConfig, AUTO_GAMMA_FRACTION, AUTO_GAMMA_IMAGES,
    CYCLE_WEIGHT,
};
pub use losses::{
    apply_margin, augmented_loss, batch_terms, constraint_loss, cycle_loss, erm_loss, l1_rows,
    BatchTerms, MeanTerms, PairIndex, TermOptions,
};
pub use metrics::{metrics_to_csv, parse_metrics_csv, MetricsRecord, METRICS_HEADER};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Graph;
use crate::data::{Dataset, Example};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::model::{ModelBundle, ModelDims, ParamGroup};
use crate::optim::{adam_step, AdamState};
use crate::seed::derive_seed;
use crate::tensor::Tensor;

/// Batch means reported by one primal step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l_erm: f64,
    pub l_con: f64,
    pub l_aug: f64,
    pub l_cyc: f64,
    pub lagrangian: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualRecord {
    pub step: u64,
    pub lambda: f64,
    pub mean_l_con: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub lambda: f64,
    pub history: Vec<DualRecord>,
}

impl DualState {
    pub fn new(lambda0: f64) -> Self {
        DualState {
            lambda: lambda0.max(0.0),
            history: Vec::new(),
        }
    }
}

/// Projected dual ascent: `lambda <- max(lambda + eta2 * mean_l_con, 0)`.
pub fn dual_step(dual: &mut DualState, mean_l_con: f64, eta2: f64, step: u64) {
    dual.lambda = (dual.lambda + eta2 * mean_l_con).max(0.0);
    dual.history.push(DualRecord {
        step,
        lambda: dual.lambda,
        mean_l_con,
    });
}

/// `AUTO_GAMMA_FRACTION` times the mean l1 mass of the first
/// `AUTO_GAMMA_IMAGES` images.
pub fn auto_gamma(examples: &[Example]) -> Result<f64> {
    let warm = &examples[..examples.len().min(AUTO_GAMMA_IMAGES)];
    if warm.is_empty() {
        return Err(Error::Config(
            "cannot resolve gamma=auto without training images".into(),
        ));
    }
    let total = warm.iter().fold(0.0, |acc, e| acc + e.image.sum());
    Ok(AUTO_GAMMA_FRACTION * total / warm.len() as f64)
}

pub fn resolve_gamma(gamma: Gamma, train: &Dataset) -> Result<f64> {
    match gamma {
        Gamma::Fixed(g) => Ok(g),
        Gamma::Auto => auto_gamma(&train.examples),
    }
}

pub fn model_dims(config: &TrainConfig, image_size: usize, classes: usize) -> ModelDims {
    ModelDims {
        image_size,
        classes,
        s_dim: config.s_dim,
        v_dim: config.v_dim,
        hidden: config.hidden,
    }
}

/// Model, optimizer and dual state for one training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    /// Resolved margin.
    pub gamma: f64,
    pub model: ModelBundle,
    pub adam: Vec<AdamState>,
    pub dual: DualState,
    /// Completed iterations.
    pub step: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig, dims: ModelDims, gamma: f64) -> Result<Self> {
        config.validate()?;
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::Config(format!(
                "resolved gamma must be >= 0, got {gamma}"
            )));
        }
        let model = ModelBundle::new(dims, derive_seed(config.seed, 1, 0))?;
        Ok(Self::from_model(config, model, gamma))
    }

    pub fn from_model(config: TrainConfig, model: ModelBundle, gamma: f64) -> Self {
        let adam = model
            .params()
            .iter()
            .map(|(_, p)| AdamState::for_param(p, config.adam()))
            .collect();
        let dual = DualState::new(config.lambda0);
        Trainer {
            config,
            gamma,
            model,
            adam,
            dual,
            step: 0,
        }
    }

    fn term_options(&self) -> TermOptions {
        let ddg = self.config.mode == Mode::Ddg;
        TermOptions {
            gamma: self.gamma,
            mode: self.config.constraint_mode,
            augment: ddg && self.config.augment,
            cycle: ddg && self.config.cycle,
        }
    }

    /// Evaluates the batch loss terms at the current parameters without updating.
    pub fn evaluate_batch(&self, batch: &[&Example]) -> Result<LossBreakdown> {
        let mut g = Graph::new();
        let net = self.model.bind_params(&mut g)?;
        let (x, labels) = self.inputs(batch)?;
        let x = g.constant(x)?;
        let pairs = PairIndex::new(batch.len(), self.config.pairing)?;
        let terms = batch_terms(&net, &mut g, x, &labels, &pairs, &self.term_options())?;
        let means = terms.means(&mut g)?;
        Ok(self.breakdown(&g, &means))
    }

    fn inputs(&self, batch: &[&Example]) -> Result<(Tensor, Vec<usize>)> {
        let images: Vec<&Tensor> = batch.iter().map(|e| &e.image).collect();
        let x = crate::model::Model::batch(&self.model, &images)?;
        Ok((x, batch.iter().map(|e| e.label).collect()))
    }

    fn breakdown(&self, g: &Graph, m: &MeanTerms) -> LossBreakdown {
        let val = |v| g.value(v).data()[0];
        let l_erm = val(m.erm);
        let l_con = val(m.con);
        let l_aug = m.aug.map_or(0.0, val);
        let l_cyc = m.cyc.map_or(0.0, val);
        let lagrangian = match self.config.mode {
            Mode::Erm => l_erm,
            Mode::Ddg => l_erm + self.dual.lambda * l_con + l_aug + CYCLE_WEIGHT * l_cyc,
        };
        LossBreakdown {
            l_erm,
            l_con,
            l_aug,
            l_cyc,
            lagrangian,
        }
    }

    /// One primal update with `lambda` held fixed.
    pub fn primal_step(&mut self, batch: &[&Example]) -> Result<LossBreakdown> {
        if batch.len() != self.config.batch_size {
            return Err(Error::Config(format!(
                "batch has {} examples, configured batch_size is {}",
                batch.len(),
                self.config.batch_size
            )));
        }
        let pairs = PairIndex::new(batch.len(), self.config.pairing)?;
        let (x, labels) = self.inputs(batch)?;
        let opts = self.term_options();

        let mut g = Graph::new();
        let net = self.model.bind_params(&mut g)?;
        let vars = net.param_vars();
        let x = g.constant(x)?;
        let terms = batch_terms(&net, &mut g, x, &labels, &pairs, &opts)?;
        let means = terms.means(&mut g)?;
        let report = self.breakdown(&g, &means);

        let (theta_grads, gen_grads) = match self.config.mode {
            Mode::Ddg => {
                let objective = means.lagrangian(&mut g, self.dual.lambda)?;
                let generator = means.generator_objective(&mut g)?;
                let mut both = g.backward_multi(&[objective, generator])?;
                let gen = both.pop().expect("two sweeps");
                (both.pop().expect("two sweeps"), Some(gen))
            }
            Mode::Erm => (g.backward(means.erm)?, None),
        };

        let lr = self.config.eta1;
        for (((group, param), state), var) in self
            .model
            .params_mut()
            .into_iter()
            .zip(&mut self.adam)
            .zip(vars)
        {
            let grads = match group {
                ParamGroup::Theta => &theta_grads,
                ParamGroup::Phi | ParamGroup::Psi => match &gen_grads {
                    Some(g) => g,
                    None => continue,
                },
            };
            grads.accumulate_into(var, param)?;
            adam_step(param, state, lr)?;
        }
        Ok(report)
    }

    /// Dual update from this batch's mean constraint value. No-op in ERM mode.
    pub fn dual_step(&mut self, mean_l_con: f64) {
        if self.config.mode == Mode::Ddg {
            dual_step(&mut self.dual, mean_l_con, self.config.eta2, self.step);
        }
    }

    /// Primal step, dual step, and a metrics row.
    pub fn iterate(&mut self, batch: &[&Example], epoch: usize) -> Result<MetricsRecord> {
        let lambda = self.dual.lambda;
        let step = self.step;
        let losses = self.primal_step(batch).map_err(|e| at_step(e, step))?;
        for v in [
            losses.l_erm,
            losses.l_con,
            losses.l_aug,
            losses.l_cyc,
            losses.lagrangian,
        ] {
            if !v.is_finite() {
                return Err(Error::Numeric {
                    op: format!("loss at step {step}"),
                });
            }
        }
        self.dual_step(losses.l_con);
        self.step += 1;
        Ok(MetricsRecord {
            step,
            epoch,
            l_erm: losses.l_erm,
            l_con: losses.l_con,
            l_aug: losses.l_aug,
            l_cyc: losses.l_cyc,
            lagrangian: losses.lagrangian,
            lambda,
            val_acc: None,
        })
    }
}

fn at_step(e: Error, step: u64) -> Error {
    match e {
        Error::Numeric { op } => Error::Numeric {
            op: format!("{op} at step {step}"),
        },
        other => other,
    }
}

/// Result of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The model at the end of the epoch with the highest validation
    /// accuracy (earliest on ties), or the final model without validation data.
    pub model: ModelBundle,
    pub metrics: Vec<MetricsRecord>,
    pub dual: DualState,
    pub gamma: f64,
    pub steps: u64,
    pub selected: Selection,
}

/// Where in the run the returned model was taken.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub epoch: usize,
    pub step: u64,
    pub lambda: f64,
    pub val_acc: Option<f64>,
}

/// Runs `epochs` passes of shuffled, full batches over `train_set`
/// (a trailing partial batch is dropped). Validation accuracy on `val_set`
/// is recorded on the last step of each epoch and picks the returned model.
pub fn train(config: &TrainConfig, train_set: &Dataset, val_set: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.len() < config.batch_size {
        return Err(Error::Config(format!(
            "training set has {} examples, fewer than one batch of {}",
            train_set.len(),
            config.batch_size
        )));
    }
    let gamma = resolve_gamma(config.gamma, train_set)?;
    let dims = model_dims(config, train_set.image_size, train_set.num_classes);
    let mut trainer = Trainer::new(config.clone(), dims, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2, 0));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let batches = train_set.len() / config.batch_size;
    let mut metrics = Vec::with_capacity(config.epochs * batches);
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut kept: Option<(ModelBundle, Selection)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks_exact(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set.examples[i]).collect();
            metrics.push(trainer.iterate(&batch, epoch)?);
        }
        if !val_set.is_empty() {
            let acc = accuracy(&trainer.model, val_set)?;
            if let Some(last) = metrics.last_mut() {
                last.val_acc = Some(acc);
            }
            if acc > best {
                best = acc;
                stale = 0;
                let sel = Selection {
                    epoch,
                    step: trainer.step,
                    lambda: trainer.dual.lambda,
                    val_acc: Some(acc),
                };
                kept = Some((trainer.model.clone(), sel));
            } else {
                stale += 1;
                if config.early_stop_patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
    }
    let (model, selected) = kept.unwrap_or_else(|| {
        let sel = Selection {
            epoch: config.epochs.saturating_sub(1),
            step: trainer.step,
            lambda: trainer.dual.lambda,
            val_acc: None,
        };
        (trainer.model, sel)
    });
    Ok(TrainOutcome {
        steps: trainer.step,
        model,
        metrics,
        dual: trainer.dual,
        gamma,
        selected,
    })
}
