use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::AdamConfig;

/// Reconstruction margin: a fixed value (possibly `+inf`) or resolved from data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GammaRepr", into = "GammaRepr")]
pub enum Gamma {
    /// A quarter of the mean l1 mass of the first 256 training images.
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<GammaRepr> for Gamma {
    type Error = String;

    fn try_from(r: GammaRepr) -> std::result::Result<Self, String> {
        match r {
            GammaRepr::Number(v) => Ok(Gamma::Fixed(v)),
            GammaRepr::Text(s) => match s.as_str() {
                "auto" => Ok(Gamma::Auto),
                "inf" | "+inf" | "infinity" => Ok(Gamma::Fixed(f64::INFINITY)),
                other => Err(format!(
                    "gamma must be a number, \"auto\" or \"inf\", got {other:?}"
                )),
            },
        }
    }
}

impl From<Gamma> for GammaRepr {
    fn from(g: Gamma) -> Self {
        match g {
            Gamma::Auto => GammaRepr::Text("auto".into()),
            Gamma::Fixed(v) if v == f64::INFINITY => GammaRepr::Text("inf".into()),
            Gamma::Fixed(v) => GammaRepr::Number(v),
        }
    }
}

/// Which partner each anchor is reconstructed against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Anchor `i` pairs with `(i + 1) mod B`.
    Shift,
    /// Anchor `i` pairs with every `j != i`.
    AllPairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// `max(d - gamma, 0)`.
    Hinge,
    /// `d - gamma`, which may be negative.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Constrained primal-dual training.
    Ddg,
    /// Plain cross-entropy baseline; only the classifier parameters move.
    Erm,
}

/// Weight of the cycle-consistency term when enabled.
pub const CYCLE_WEIGHT: f64 = 1.0;

/// Number of training images used to resolve [`Gamma::Auto`].
pub const AUTO_GAMMA_IMAGES: usize = 256;

/// Fraction of mean image l1 mass used by [`Gamma::Auto`].
pub const AUTO_GAMMA_FRACTION: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: Gamma,
    pub lambda0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub pairing: Pairing,
    pub constraint_mode: ConstraintMode,
    pub augment: bool,
    pub cycle: bool,
    pub seed: u64,
    pub mode: Mode,
    pub s_dim: usize,
    pub v_dim: usize,
    pub hidden: usize,
    /// Stop after this many epochs without a validation-accuracy improvement.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: Gamma::Auto,
            lambda0: 0.1,
            eta1: 1e-3,
            eta2: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 32,
            epochs: 30,
            pairing: Pairing::Shift,
            constraint_mode: ConstraintMode::Hinge,
            augment: false,
            cycle: false,
            seed: 0,
            mode: Mode::Ddg,
            s_dim: 16,
            v_dim: 8,
            hidden: 128,
            early_stop_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        match self.gamma {
            Gamma::Fixed(g) if g.is_nan() || g < 0.0 => {
                return fail(format!("gamma must be >= 0, got {g}"))
            }
            _ => {}
        }
        if !(self.lambda0 >= 0.0) || !self.lambda0.is_finite() {
            return fail(format!(
                "lambda0 must be finite and >= 0, got {}",
                self.lambda0
            ));
        }
        for (name, v) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        self.adam().validate()?;
        if self.batch_size < 2 {
            return fail(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            ));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.s_dim == 0 || self.v_dim == 0 || self.hidden == 0 {
            return fail("s_dim, v_dim and hidden must be positive".into());
        }
        if self.constraint_mode == ConstraintMode::Raw && self.gamma == Gamma::Fixed(f64::INFINITY)
        {
            return fail("raw constraint mode needs a finite gamma".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    /// Short run label: `erm`, `ddg` or `ddg+aug`.
    pub fn label(&self) -> &'static str {
        match (self.mode, self.augment) {
            (Mode::Erm, _) => "erm",
            (Mode::Ddg, false) => "ddg",
            (Mode::Ddg, true) => "ddg+aug",
        }
    }
}
