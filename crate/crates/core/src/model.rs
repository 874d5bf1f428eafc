//! Semantic encoder, classifier head, variation encoder and decoder.
//!
//! All four networks are small MLPs over flattened images. The semantic
//! encoder and classifier head together form the classifier parameters; the
//! variation encoder and the decoder are trained only through the
//! reconstruction constraint.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::optim::Param;
use crate::seed::{derive_seed, name_hash};
use crate::tensor::Tensor;

/// Network widths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Side of the square input images.
    pub image_size: usize,
    pub classes: usize,
    pub s_dim: usize,
    pub v_dim: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub fn pixels(&self) -> usize {
        self.image_size * self.image_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.s_dim == 0 || self.v_dim == 0 || self.hidden == 0 {
            return Err(Error::Config(format!(
                "model dimensions must be positive: {self:?}"
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        Ok(())
    }

    /// Total trainable scalars:
    /// `2PH + 2H + H(s+v) + (s+v) + sC + C + (s+v)H + H + HP + P`
    /// for `P` pixels, hidden width `H`, code widths `s`, `v` and `C` classes.
    pub fn param_count(&self) -> usize {
        let (p, h, s, v, c) = (
            self.pixels(),
            self.hidden,
            self.s_dim,
            self.v_dim,
            self.classes,
        );
        let semantic = p * h + h + h * s + s;
        let head = s * c + c;
        let variation = p * h + h + h * v + v;
        let decoder = (s + v) * h + h + h * p + p;
        semantic + head + variation + decoder
    }
}

/// Which encoder produced a code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeKind {
    Semantic,
    Variation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode {
    pub kind: CodeKind,
    pub values: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    /// Weights uniform in `±1/sqrt(fan_in)` from a stream keyed by the
    /// parameter name; bias zero.
    fn init(name: &str, fan_in: usize, fan_out: usize, seed: u64) -> Self {
        let wname = format!("{name}.weight");
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, name_hash(&wname), 0));
        let dist = Uniform::new_inclusive(-bound, bound);
        let w: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| dist.sample(&mut rng))
            .collect();
        Linear {
            weight: Param::new(wname, Tensor::from_parts(vec![fan_in, fan_out], w)),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[fan_out])),
        }
    }

    fn bind(&self, g: &mut Graph) -> Result<(Var, Var)> {
        Ok((g.param(&self.weight)?, g.param(&self.bias)?))
    }
}

/// Two-layer perceptron `in -> hidden (ReLU) -> out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub input: Linear,
    pub output: Linear,
}

impl Mlp {
    fn init(name: &str, fan_in: usize, hidden: usize, fan_out: usize, seed: u64) -> Self {
        Mlp {
            input: Linear::init(&format!("{name}.0"), fan_in, hidden, seed),
            output: Linear::init(&format!("{name}.1"), hidden, fan_out, seed),
        }
    }

    fn params(&self) -> [&Param; 4] {
        [
            &self.input.weight,
            &self.input.bias,
            &self.output.weight,
            &self.output.bias,
        ]
    }

    fn params_mut(&mut self) -> [&mut Param; 4] {
        [
            &mut self.input.weight,
            &mut self.input.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
}

#[derive(Clone, Copy, Debug)]
struct BoundMlp {
    w0: Var,
    b0: Var,
    w1: Var,
    b1: Var,
}

impl BoundMlp {
    fn bind(mlp: &Mlp, g: &mut Graph) -> Result<Self> {
        let (w0, b0) = mlp.input.bind(g)?;
        let (w1, b1) = mlp.output.bind(g)?;
        Ok(BoundMlp { w0, b0, w1, b1 })
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let h = g.matmul(x, self.w0)?;
        let h = g.add_bias(h, self.b0)?;
        let h = g.relu(h)?;
        let o = g.matmul(h, self.w1)?;
        g.add_bias(o, self.b1)
    }

    fn vars(&self) -> [Var; 4] {
        [self.w0, self.b0, self.w1, self.b1]
    }
}

/// Parameter groups updated by different objectives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    /// Semantic encoder and classifier head.
    Theta,
    /// Variation encoder.
    Phi,
    /// Decoder.
    Psi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub dims: ModelDims,
    pub semantic_encoder: Mlp,
    pub classifier_head: Linear,
    pub variation_encoder: Mlp,
    pub decoder: Mlp,
}

impl ModelBundle {
    pub fn new(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let (p, h) = (dims.pixels(), dims.hidden);
        Ok(ModelBundle {
            dims,
            semantic_encoder: Mlp::init("semantic_encoder", p, h, dims.s_dim, seed),
            classifier_head: Linear::init("classifier_head", dims.s_dim, dims.classes, seed),
            variation_encoder: Mlp::init("variation_encoder", p, h, dims.v_dim, seed),
            decoder: Mlp::init("decoder", dims.s_dim + dims.v_dim, h, p, seed),
        })
    }

    /// Every parameter with its group, in a fixed order.
    pub fn params(&self) -> Vec<(ParamGroup, &Param)> {
        let mut out: Vec<(ParamGroup, &Param)> = Vec::with_capacity(14);
        out.extend(
            self.semantic_encoder
                .params()
                .map(|p| (ParamGroup::Theta, p)),
        );
        out.push((ParamGroup::Theta, &self.classifier_head.weight));
        out.push((ParamGroup::Theta, &self.classifier_head.bias));
        out.extend(
            self.variation_encoder
                .params()
                .map(|p| (ParamGroup::Phi, p)),
        );
        out.extend(self.decoder.params().map(|p| (ParamGroup::Psi, p)));
        out
    }

    /// Mutable counterpart of [`ModelBundle::params`], same order.
    pub fn params_mut(&mut self) -> Vec<(ParamGroup, &mut Param)> {
        let mut out: Vec<(ParamGroup, &mut Param)> = Vec::with_capacity(14);
        out.extend(
            self.semantic_encoder
                .params_mut()
                .map(|p| (ParamGroup::Theta, p)),
        );
        out.push((ParamGroup::Theta, &mut self.classifier_head.weight));
        out.push((ParamGroup::Theta, &mut self.classifier_head.bias));
        out.extend(
            self.variation_encoder
                .params_mut()
                .map(|p| (ParamGroup::Phi, p)),
        );
        out.extend(self.decoder.params_mut().map(|p| (ParamGroup::Psi, p)));
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Registers every parameter on `g`.
    pub fn bind_params<'a>(&'a self, g: &mut Graph) -> Result<BoundModel<'a>> {
        let head = self.classifier_head.bind(g)?;
        Ok(BoundModel {
            model: self,
            semantic: BoundMlp::bind(&self.semantic_encoder, g)?,
            head,
            variation: BoundMlp::bind(&self.variation_encoder, g)?,
            decoder: BoundMlp::bind(&self.decoder, g)?,
        })
    }
}

/// Batched forward passes over matrices whose rows are flattened images or codes.
pub trait Network {
    /// `[m, pixels] -> [m, s_dim]`.
    fn semantic(&self, g: &mut Graph, x: Var) -> Result<Var>;
    /// `[m, pixels] -> [m, v_dim]`.
    fn variation(&self, g: &mut Graph, x: Var) -> Result<Var>;
    /// `([m, s_dim], [m, v_dim]) -> [m, pixels]`.
    fn decode(&self, g: &mut Graph, s: Var, v: Var) -> Result<Var>;
    /// `[m, s_dim] -> [m, classes]`.
    fn logits(&self, g: &mut Graph, s: Var) -> Result<Var>;
}

/// A model whose parameters can be placed on a graph.
pub trait Model {
    type Bound<'a>: Network
    where
        Self: 'a;

    fn bind<'a>(&'a self, g: &mut Graph) -> Result<Self::Bound<'a>>;
    fn dims(&self) -> ModelDims;

    /// Flattens `[H, W]` images into a batch matrix after checking shapes.
    fn batch(&self, images: &[&Tensor]) -> Result<Tensor> {
        let side = self.dims().image_size;
        for img in images {
            if img.shape() != [side, side] {
                return Err(Error::shape(
                    "model input",
                    format!("expected [{side}, {side}], got {:?}", img.shape()),
                ));
            }
        }
        Tensor::stack_rows(images)
    }

    fn encode_semantic(&self, x: &Tensor) -> Result<LatentCode> {
        let rows = self.semantic_codes(&[x])?;
        Ok(LatentCode {
            kind: CodeKind::Semantic,
            values: rows.reshape(vec![self.dims().s_dim])?,
        })
    }

    fn encode_variation(&self, x: &Tensor) -> Result<LatentCode> {
        let rows = self.variation_codes(&[x])?;
        Ok(LatentCode {
            kind: CodeKind::Variation,
            values: rows.reshape(vec![self.dims().v_dim])?,
        })
    }

    /// Semantic codes of a batch, `[n, s_dim]`.
    fn semantic_codes(&self, images: &[&Tensor]) -> Result<Tensor> {
        let mut g = Graph::new();
        let net = self.bind(&mut g)?;
        let x = g.constant(self.batch(images)?)?;
        let s = net.semantic(&mut g, x)?;
        Ok(g.value(s).clone())
    }

    /// Variation codes of a batch, `[n, v_dim]`.
    fn variation_codes(&self, images: &[&Tensor]) -> Result<Tensor> {
        let mut g = Graph::new();
        let net = self.bind(&mut g)?;
        let x = g.constant(self.batch(images)?)?;
        let v = net.variation(&mut g, x)?;
        Ok(g.value(v).clone())
    }

    /// Decodes row-aligned code matrices into `[H, W]` images.
    fn decode_codes(&self, s: &Tensor, v: &Tensor) -> Result<Vec<Tensor>> {
        let d = self.dims();
        let (n, sw) = s.dims2("decode")?;
        let (n2, vw) = v.dims2("decode")?;
        if sw != d.s_dim || vw != d.v_dim || n != n2 {
            return Err(Error::shape(
                "decode",
                format!(
                    "codes {:?} and {:?} for s_dim={} v_dim={}",
                    s.shape(),
                    v.shape(),
                    d.s_dim,
                    d.v_dim
                ),
            ));
        }
        let mut g = Graph::new();
        let net = self.bind(&mut g)?;
        let sv = g.constant(s.clone())?;
        let vv = g.constant(v.clone())?;
        let out = net.decode(&mut g, sv, vv)?;
        let side = d.image_size;
        g.value(out)
            .data()
            .chunks(d.pixels())
            .map(|c| Tensor::new(vec![side, side], c.to_vec()))
            .collect()
    }

    fn decode(&self, s: &LatentCode, v: &LatentCode) -> Result<Tensor> {
        if s.kind != CodeKind::Semantic || v.kind != CodeKind::Variation {
            return Err(Error::shape(
                "decode",
                format!(
                    "expected (semantic, variation) codes, got ({:?}, {:?})",
                    s.kind, v.kind
                ),
            ));
        }
        let d = self.dims();
        let s = s.values.reshape(vec![1, d.s_dim])?;
        let v = v.values.reshape(vec![1, d.v_dim])?;
        Ok(self.decode_codes(&s, &v)?.remove(0))
    }

    /// Class logits `[classes]` for a semantic code.
    fn classify(&self, s: &LatentCode) -> Result<Tensor> {
        if s.kind != CodeKind::Semantic {
            return Err(Error::shape(
                "classify",
                "classifier input must be a semantic code",
            ));
        }
        let rows = self.logits_of_codes(&s.values.reshape(vec![1, self.dims().s_dim])?)?;
        rows.reshape(vec![self.dims().classes])
    }

    /// Logits `[n, classes]` for semantic codes `[n, s_dim]`.
    fn logits_of_codes(&self, s: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let net = self.bind(&mut g)?;
        let sv = g.constant(s.clone())?;
        let l = net.logits(&mut g, sv)?;
        Ok(g.value(l).clone())
    }

    /// Class predictions (argmax, lowest index on ties) for a batch.
    fn predict(&self, images: &[&Tensor]) -> Result<Vec<usize>> {
        let mut g = Graph::new();
        let net = self.bind(&mut g)?;
        let x = g.constant(self.batch(images)?)?;
        let s = net.semantic(&mut g, x)?;
        let l = net.logits(&mut g, s)?;
        let c = self.dims().classes;
        Ok(g.value(l).data().chunks(c).map(argmax).collect())
    }

    /// `D(h_s(x_i), h_v(x_j))` for row-aligned batches.
    fn reconstruct_pairs(&self, xi: &[&Tensor], xj: &[&Tensor]) -> Result<Vec<Tensor>> {
        let mut g = Graph::new();
        let net = self.bind(&mut g)?;
        let a = g.constant(self.batch(xi)?)?;
        let b = g.constant(self.batch(xj)?)?;
        let s = net.semantic(&mut g, a)?;
        let v = net.variation(&mut g, b)?;
        let out = net.decode(&mut g, s, v)?;
        let side = self.dims().image_size;
        g.value(out)
            .data()
            .chunks(side * side)
            .map(|c| Tensor::new(vec![side, side], c.to_vec()))
            .collect()
    }

    fn reconstruct_pair(&self, xi: &Tensor, xj: &Tensor) -> Result<Tensor> {
        Ok(self.reconstruct_pairs(&[xi], &[xj])?.remove(0))
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// A [`ModelBundle`] with its parameters registered on one graph.
#[derive(Clone, Copy, Debug)]
pub struct BoundModel<'a> {
    pub model: &'a ModelBundle,
    semantic: BoundMlp,
    head: (Var, Var),
    variation: BoundMlp,
    decoder: BoundMlp,
}

impl BoundModel<'_> {
    /// Graph handles of the parameters, in [`ModelBundle::params`] order.
    pub fn param_vars(&self) -> Vec<Var> {
        let mut v = Vec::with_capacity(14);
        v.extend(self.semantic.vars());
        v.push(self.head.0);
        v.push(self.head.1);
        v.extend(self.variation.vars());
        v.extend(self.decoder.vars());
        v
    }
}

impl Network for BoundModel<'_> {
    fn semantic(&self, g: &mut Graph, x: Var) -> Result<Var> {
        self.semantic.forward(g, x)
    }

    fn variation(&self, g: &mut Graph, x: Var) -> Result<Var> {
        self.variation.forward(g, x)
    }

    fn decode(&self, g: &mut Graph, s: Var, v: Var) -> Result<Var> {
        let z = g.concat_cols(s, v)?;
        let out = self.decoder.forward(g, z)?;
        g.sigmoid(out)
    }

    fn logits(&self, g: &mut Graph, s: Var) -> Result<Var> {
        let l = g.matmul(s, self.head.0)?;
        g.add_bias(l, self.head.1)
    }
}

impl Model for ModelBundle {
    type Bound<'a> = BoundModel<'a>;

    fn bind<'a>(&'a self, g: &mut Graph) -> Result<BoundModel<'a>> {
        self.bind_params(g)
    }

    fn dims(&self) -> ModelDims {
        self.dims
    }
}

/// Hand-built models with known behavior, for tests and examples.
pub mod stubs {
    use super::*;

    /// Both encoders are the identity on pixels; the decoder returns the
    /// semantic input plus `offset`, ignoring the variation code. Logits are
    /// `s @ head`.
    #[derive(Clone, Debug)]
    pub struct IdentityAutoencoder {
        pub dims: ModelDims,
        pub head: Tensor,
        pub offset: f64,
    }

    impl IdentityAutoencoder {
        /// A perfect autoencoder with a fixed pseudo-random head.
        pub fn new(image_size: usize, classes: usize) -> Self {
            let p = image_size * image_size;
            let head: Vec<f64> = (0..p * classes)
                .map(|i| ((i * 37 + 11) % 17) as f64 / 8.0 - 1.0)
                .collect();
            IdentityAutoencoder {
                dims: ModelDims {
                    image_size,
                    classes,
                    s_dim: p,
                    v_dim: p,
                    hidden: 1,
                },
                head: Tensor::from_parts(vec![p, classes], head),
                offset: 0.0,
            }
        }

        pub fn with_offset(mut self, offset: f64) -> Self {
            self.offset = offset;
            self
        }
    }

    impl Network for &IdentityAutoencoder {
        fn semantic(&self, _g: &mut Graph, x: Var) -> Result<Var> {
            Ok(x)
        }

        fn variation(&self, _g: &mut Graph, x: Var) -> Result<Var> {
            Ok(x)
        }

        fn decode(&self, g: &mut Graph, s: Var, v: Var) -> Result<Var> {
            let ignored = g.scale(v, 0.0)?;
            let out = g.add(s, ignored)?;
            if self.offset == 0.0 {
                Ok(out)
            } else {
                g.add_scalar(out, self.offset)
            }
        }

        fn logits(&self, g: &mut Graph, s: Var) -> Result<Var> {
            let h = g.constant(self.head.clone())?;
            g.matmul(s, h)
        }
    }

    impl Model for IdentityAutoencoder {
        type Bound<'a> = &'a IdentityAutoencoder;

        fn bind<'a>(&'a self, _g: &mut Graph) -> Result<&'a IdentityAutoencoder> {
            Ok(self)
        }

        fn dims(&self) -> ModelDims {
            self.dims
        }
    }
}
