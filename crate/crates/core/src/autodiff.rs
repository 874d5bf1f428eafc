//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] is built fresh for every forward pass. Each operation appends a
//! node holding its value and enough context to propagate gradients back to
//! its operands. Calling [`Graph::backward`] sweeps the tape once in reverse
//! and consumes it; later operations or a second backward are errors.
//!
//! All reductions run left to right in index order, so identical inputs give
//! bitwise-identical values and gradients.

use crate::error::{Error, Result};
use crate::optim::Param;
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Abs(Var),
    ConcatCols(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Hinge(Var, f64),
    GatherRows(Var, Vec<usize>),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    name: Option<String>,
}

/// Gradients produced by one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    detached: bool,
}

impl Gradients {
    /// Gradient with respect to `var`. Leaves created with [`Graph::variable`]
    /// or [`Graph::param`] always have one (zero when unreachable).
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Set when no differentiable leaf was reachable from the loss; every leaf
    /// gradient is then zero.
    pub fn detached(&self) -> bool {
        self.detached
    }

    /// Adds the gradient of `var` into `param.grad`.
    pub fn accumulate_into(&self, var: Var, param: &mut Param) -> Result<()> {
        let g = self
            .get(var)
            .ok_or(Error::Tape("no gradient recorded for this node"))?;
        param.accumulate_grad(g)
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
}

fn shape_str(t: &Tensor) -> String {
    format!("{:?}", t.shape())
}

fn check_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric { op: op.to_string() })
    }
}

/// `out[m,n] = a[m,k] * b[k,n]`, accumulating over k in index order.
fn matmul_kernel(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

/// `out[m,k] = g[m,n] * b[k,n]^T`.
fn matmul_bt_kernel(g: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            out[i * k + p] = grow.iter().zip(brow).fold(0.0, |acc, (x, y)| acc + x * y);
        }
    }
    out
}

/// `out[k,n] = a[m,k]^T * g[m,n]`.
fn matmul_at_kernel(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += aip * gv;
            }
        }
    }
    out
}

fn add_into(slot: &mut Option<Tensor>, shape: &[usize], delta: Vec<f64>) {
    match slot {
        Some(t) => {
            let mut data = std::mem::replace(t, Tensor::zeros(&[1])).into_data();
            for (d, v) in data.iter_mut().zip(delta) {
                *d += v;
            }
            *t = Tensor::from_parts(shape.to_vec(), data);
        }
        None => *slot = Some(Tensor::from_parts(shape.to_vec(), delta)),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn name(&self, var: Var) -> Option<&str> {
        self.nodes[var.0].name.as_deref()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if self.consumed {
            return Err(Error::Tape(
                "graph already consumed by backward; rebuild the forward pass",
            ));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            name: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Input data; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Constant, false)
    }

    /// A differentiable leaf.
    pub fn variable(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, true)
    }

    /// Registers the current value of `param` as a differentiable leaf.
    pub fn param(&mut self, param: &Param) -> Result<Var> {
        let v = self.variable(param.value.clone())?;
        self.nodes[v.0].name = Some(param.name.clone());
        Ok(v)
    }

    /// `a[m,k] @ b[k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2("matmul")?;
        let (k2, n) = tb.dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("{} x {}", shape_str(ta), shape_str(tb)),
            ));
        }
        let out = matmul_kernel(ta.data(), tb.data(), m, k, n);
        check_finite("matmul", &out)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg)
    }

    /// `x[m,n] + bias[n]`, broadcasting over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let (m, n) = tx.dims2("add_bias")?;
        if tb.shape() != [n] {
            return Err(Error::shape(
                "add_bias",
                format!("{} + {}", shape_str(tx), shape_str(tb)),
            ));
        }
        let mut out = tx.data().to_vec();
        for i in 0..m {
            for (o, b) in out[i * n..(i + 1) * n].iter_mut().zip(tb.data()) {
                *o += b;
            }
        }
        check_finite("add_bias", &out)?;
        let rg = self.rg(x) || self.rg(bias);
        self.push(
            Tensor::from_parts(vec![m, n], out),
            Op::AddBias(x, bias),
            rg,
        )
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(
                name,
                format!("{} vs {}", shape_str(ta), shape_str(tb)),
            ));
        }
        let out: Vec<f64> = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        check_finite(name, &out)?;
        let shape = ta.shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::from_parts(shape, out), op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let out = self.value(x).map(f);
        check_finite(name, out.data())?;
        let rg = self.rg(x);
        self.push(out, op, rg)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary("relu", x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(
            "sigmoid",
            x,
            |v| {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            },
            Op::Sigmoid(x),
        )
    }

    /// Elementwise absolute value. The backward pass uses `sign(x)` with `sign(0) = 0`.
    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.unary("abs", x, f64::abs, Op::Abs(x))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        self.unary("scale", x, |v| v * s, Op::Scale(x, s))
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Result<Var> {
        self.unary("add_scalar", x, |v| v + s, Op::AddScalar(x))
    }

    /// `max(x - margin, 0)` elementwise. The margin may be `+inf`, in which case
    /// the output is identically zero.
    pub fn hinge(&mut self, x: Var, margin: f64) -> Result<Var> {
        if margin.is_nan() {
            return Err(Error::Numeric { op: "hinge".into() });
        }
        self.unary(
            "hinge",
            x,
            |v| {
                let r = v - margin;
                if r > 0.0 {
                    r
                } else {
                    0.0
                }
            },
            Op::Hinge(x, margin),
        )
    }

    /// Concatenates two matrices along the feature (column) axis.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, na) = ta.dims2("concat_cols")?;
        let (m2, nb) = tb.dims2("concat_cols")?;
        if m != m2 {
            return Err(Error::shape(
                "concat_cols",
                format!("{} vs {}", shape_str(ta), shape_str(tb)),
            ));
        }
        let mut out = Vec::with_capacity(m * (na + nb));
        for i in 0..m {
            out.extend_from_slice(&ta.data()[i * na..(i + 1) * na]);
            out.extend_from_slice(&tb.data()[i * nb..(i + 1) * nb]);
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(
            Tensor::from_parts(vec![m, na + nb], out),
            Op::ConcatCols(a, b),
            rg,
        )
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        check_finite("sum", &[s])?;
        let rg = self.rg(x);
        self.push(Tensor::from_parts(vec![1], vec![s]), Op::Sum(x), rg)
    }

    /// Mean of all elements, shape `[1]`.
    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s = t.sum() / t.len() as f64;
        check_finite("mean", &[s])?;
        let rg = self.rg(x);
        self.push(Tensor::from_parts(vec![1], vec![s]), Op::Mean(x), rg)
    }

    /// Per-row sums of a matrix, `[m,n] -> [m]`.
    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (m, n) = t.dims2("row_sum")?;
        let out: Vec<f64> = (0..m)
            .map(|i| {
                t.data()[i * n..(i + 1) * n]
                    .iter()
                    .fold(0.0, |acc, &v| acc + v)
            })
            .collect();
        check_finite("row_sum", &out)?;
        let rg = self.rg(x);
        self.push(Tensor::from_parts(vec![m], out), Op::RowSum(x), rg)
    }

    /// Per-row softmax cross-entropy of `logits[m,C]` against `labels`, `-> [m]`.
    /// Uses the log-sum-exp shift for stability.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (m, c) = t.dims2("softmax_cross_entropy")?;
        if labels.len() != m {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} logit rows but {} labels", m, labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("label {bad} out of range for {c} classes"),
            ));
        }
        let mut probs = vec![0.0; m * c];
        let mut out = vec![0.0; m];
        for i in 0..m {
            let row = &t.data()[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (p, &v) in probs[i * c..(i + 1) * c].iter_mut().zip(row) {
                *p = (v - max).exp();
                z += *p;
            }
            for p in &mut probs[i * c..(i + 1) * c] {
                *p /= z;
            }
            out[i] = max + z.ln() - row[labels[i]];
        }
        check_finite("softmax_cross_entropy", &out)?;
        let rg = self.rg(logits);
        self.push(
            Tensor::from_parts(vec![m], out),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        )
    }

    /// Selects rows of a matrix by index (indices may repeat).
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(x);
        let (m, n) = t.dims2("gather_rows")?;
        if idx.is_empty() {
            return Err(Error::shape("gather_rows", "empty index list"));
        }
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            if i >= m {
                return Err(Error::shape(
                    "gather_rows",
                    format!("row {i} out of range for {m} rows"),
                ));
            }
            out.extend_from_slice(&t.data()[i * n..(i + 1) * n]);
        }
        let rg = self.rg(x);
        self.push(
            Tensor::from_parts(vec![idx.len(), n], out),
            Op::GatherRows(x, idx.to_vec()),
            rg,
        )
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(x).reshape(shape)?;
        let rg = self.rg(x);
        self.push(t, Op::Reshape(x), rg)
    }

    /// Copies the value of `x` as a constant, blocking gradient flow.
    pub fn detach(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x).clone();
        self.constant(t)
    }

    /// Reverse sweep from a scalar loss. Consumes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        Ok(self.backward_multi(&[loss])?.pop().expect("one seed"))
    }

    /// Independent reverse sweeps from several scalar losses sharing one
    /// forward pass. Consumes the tape.
    pub fn backward_multi(&mut self, losses: &[Var]) -> Result<Vec<Gradients>> {
        if self.consumed {
            return Err(Error::Tape(
                "backward called twice without a new forward pass",
            ));
        }
        if self.nodes.is_empty() {
            return Err(Error::Tape("empty tape"));
        }
        for &l in losses {
            if self.value(l).len() != 1 {
                return Err(Error::shape(
                    "backward",
                    format!("loss must be scalar, got shape {:?}", self.value(l).shape()),
                ));
            }
        }
        let out = losses.iter().map(|&l| self.sweep(l)).collect();
        self.consumed = true;
        Ok(out)
    }

    fn sweep(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut reached_leaf = false;
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::full(&[1], 1.0));
        }
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            if matches!(node.op, Op::Leaf) {
                reached_leaf = true;
                grads[idx] = Some(gy);
                continue;
            }
            self.propagate(node, &gy, &mut grads);
            // Intermediate gradients are kept so callers can inspect them.
            grads[idx] = Some(gy);
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && grads[idx].is_none() {
                grads[idx] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Gradients {
            grads,
            detached: !reached_leaf,
        }
    }

    fn propagate(&self, node: &Node, gy: &Tensor, grads: &mut [Option<Tensor>]) {
        let g = gy.data();
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Constant | Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.shape()[1];
                if wants(*a) {
                    add_into(
                        &mut grads[a.0],
                        ta.shape(),
                        matmul_bt_kernel(g, tb.data(), m, k, n),
                    );
                }
                if wants(*b) {
                    add_into(
                        &mut grads[b.0],
                        tb.shape(),
                        matmul_at_kernel(ta.data(), g, m, k, n),
                    );
                }
            }
            Op::AddBias(x, b) => {
                let n = val(*b).len();
                if wants(*x) {
                    add_into(&mut grads[x.0], val(*x).shape(), g.to_vec());
                }
                if wants(*b) {
                    let mut gb = vec![0.0; n];
                    for row in g.chunks(n) {
                        for (o, v) in gb.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    add_into(&mut grads[b.0], &[n], gb);
                }
            }
            Op::Add(a, b) => {
                if wants(*a) {
                    add_into(&mut grads[a.0], val(*a).shape(), g.to_vec());
                }
                if wants(*b) {
                    add_into(&mut grads[b.0], val(*b).shape(), g.to_vec());
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    add_into(&mut grads[a.0], val(*a).shape(), g.to_vec());
                }
                if wants(*b) {
                    add_into(
                        &mut grads[b.0],
                        val(*b).shape(),
                        g.iter().map(|v| -v).collect(),
                    );
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                if wants(*a) {
                    let d = g.iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                    add_into(&mut grads[a.0], ta.shape(), d);
                }
                if wants(*b) {
                    let d = g.iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                    add_into(&mut grads[b.0], tb.shape(), d);
                }
            }
            Op::Relu(x) => {
                let tx = val(*x);
                let d = g
                    .iter()
                    .zip(tx.data())
                    .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                add_into(&mut grads[x.0], tx.shape(), d);
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                let d = g
                    .iter()
                    .zip(y)
                    .map(|(&gv, &yv)| gv * yv * (1.0 - yv))
                    .collect();
                add_into(&mut grads[x.0], val(*x).shape(), d);
            }
            Op::Abs(x) => {
                let tx = val(*x);
                let d = g
                    .iter()
                    .zip(tx.data())
                    .map(|(&gv, &xv)| {
                        if xv > 0.0 {
                            gv
                        } else if xv < 0.0 {
                            -gv
                        } else {
                            0.0
                        }
                    })
                    .collect();
                add_into(&mut grads[x.0], tx.shape(), d);
            }
            Op::Hinge(x, margin) => {
                let tx = val(*x);
                let d = g
                    .iter()
                    .zip(tx.data())
                    .map(|(&gv, &xv)| if xv - margin > 0.0 { gv } else { 0.0 })
                    .collect();
                add_into(&mut grads[x.0], tx.shape(), d);
            }
            Op::ConcatCols(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, na) = (ta.shape()[0], ta.shape()[1]);
                let nb = tb.shape()[1];
                let w = na + nb;
                if wants(*a) {
                    let mut d = Vec::with_capacity(m * na);
                    for i in 0..m {
                        d.extend_from_slice(&g[i * w..i * w + na]);
                    }
                    add_into(&mut grads[a.0], ta.shape(), d);
                }
                if wants(*b) {
                    let mut d = Vec::with_capacity(m * nb);
                    for i in 0..m {
                        d.extend_from_slice(&g[i * w + na..(i + 1) * w]);
                    }
                    add_into(&mut grads[b.0], tb.shape(), d);
                }
            }
            Op::Scale(x, s) => {
                add_into(
                    &mut grads[x.0],
                    val(*x).shape(),
                    g.iter().map(|v| v * s).collect(),
                );
            }
            Op::AddScalar(x) | Op::Reshape(x) => {
                add_into(&mut grads[x.0], val(*x).shape(), g.to_vec());
            }
            Op::Sum(x) => {
                let tx = val(*x);
                add_into(&mut grads[x.0], tx.shape(), vec![g[0]; tx.len()]);
            }
            Op::Mean(x) => {
                let tx = val(*x);
                let v = g[0] / tx.len() as f64;
                add_into(&mut grads[x.0], tx.shape(), vec![v; tx.len()]);
            }
            Op::RowSum(x) => {
                let tx = val(*x);
                let n = tx.shape()[1];
                let d = g
                    .iter()
                    .flat_map(|&gv| std::iter::repeat_n(gv, n))
                    .collect();
                add_into(&mut grads[x.0], tx.shape(), d);
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let tl = val(*logits);
                let c = tl.shape()[1];
                let mut d = Vec::with_capacity(probs.len());
                for (i, &y) in labels.iter().enumerate() {
                    for j in 0..c {
                        let onehot = if j == y { 1.0 } else { 0.0 };
                        d.push(g[i] * (probs[i * c + j] - onehot));
                    }
                }
                add_into(&mut grads[logits.0], tl.shape(), d);
            }
            Op::GatherRows(x, idx) => {
                let tx = val(*x);
                let n = tx.shape()[1];
                let mut d = vec![0.0; tx.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for (o, v) in d[i * n..(i + 1) * n].iter_mut().zip(&g[r * n..(r + 1) * n]) {
                        *o += v;
                    }
                }
                add_into(&mut grads[x.0], tx.shape(), d);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut g = Graph::new();
        let a = t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let i = g.constant(Tensor::eye(3)).unwrap();
        let av = g.constant(a.clone()).unwrap();
        let out = g.matmul(i, av).unwrap();
        assert!(g.value(out).bits_eq(&a));
    }

    #[test]
    fn matmul_shape_error_names_op() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn concat_features() {
        let mut g = Graph::new();
        let a = g.constant(t(&[1, 2], &[1.0, 2.0])).unwrap();
        let b = g.constant(t(&[1, 1], &[3.0])).unwrap();
        let c = g.concat_cols(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn cross_entropy_uniform_is_ln2() {
        let mut g = Graph::new();
        let l = g.constant(t(&[1, 2], &[0.0, 0.0])).unwrap();
        let ce = g.softmax_cross_entropy(l, &[0]).unwrap();
        assert!((g.value(ce).data()[0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_decreases_with_margin() {
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let mut g = Graph::new();
            let l = g.constant(t(&[1, 3], &[k as f64, 0.0, 0.0])).unwrap();
            let ce = g.softmax_cross_entropy(l, &[0]).unwrap();
            let v = g.value(ce).data()[0];
            assert!(v >= 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn cross_entropy_stable_for_large_logits() {
        let mut g = Graph::new();
        let l = g.constant(t(&[1, 2], &[1000.0, 0.0])).unwrap();
        let ce = g.softmax_cross_entropy(l, &[1]).unwrap();
        assert!((g.value(ce).data()[0] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn square_sum_gradient() {
        let mut g = Graph::new();
        let x = g.variable(t(&[2], &[3.0, -1.0])).unwrap();
        let sq = g.mul(x, x).unwrap();
        let loss = g.sum(sq).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[6.0, -2.0]);
    }

    #[test]
    fn unused_leaf_has_exact_zero_grad() {
        let mut g = Graph::new();
        let x = g.variable(t(&[2], &[1.0, 2.0])).unwrap();
        let unused = g.variable(t(&[3], &[1.0, 2.0, 3.0])).unwrap();
        let loss = g.sum(x).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(unused).unwrap().data(), &[0.0, 0.0, 0.0]);
        assert!(!grads.detached());
    }

    #[test]
    fn detached_loss_flags_and_zeroes() {
        let mut g = Graph::new();
        let x = g.variable(t(&[2], &[1.0, 2.0])).unwrap();
        let d = g.detach(x).unwrap();
        let loss = g.sum(d).unwrap();
        let grads = g.backward(loss).unwrap();
        assert!(grads.detached());
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn second_backward_is_error() {
        let mut g = Graph::new();
        let x = g.variable(t(&[1], &[2.0])).unwrap();
        let loss = g.sum(x).unwrap();
        g.backward(loss).unwrap();
        assert!(matches!(g.backward(loss), Err(Error::Tape(_))));
        assert!(matches!(g.sum(x), Err(Error::Tape(_))));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.variable(t(&[2], &[1.0, 2.0])).unwrap();
        assert!(matches!(g.backward(x), Err(Error::Shape { .. })));
    }

    #[test]
    fn abs_subgradient_at_zero_is_zero() {
        let mut g = Graph::new();
        let x = g.variable(t(&[3], &[-2.0, 0.0, 4.0])).unwrap();
        let a = g.abs(x).unwrap();
        let loss = g.sum(a).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn hinge_with_infinite_margin_is_zero() {
        let mut g = Graph::new();
        let x = g.variable(t(&[2], &[5.0, 1e300])).unwrap();
        let h = g.hinge(x, f64::INFINITY).unwrap();
        assert_eq!(g.value(h).data(), &[0.0, 0.0]);
        let loss = g.sum(h).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_multi_gives_independent_gradients() {
        let mut g = Graph::new();
        let x = g.variable(t(&[1], &[3.0])).unwrap();
        let a = g.scale(x, 2.0).unwrap();
        let b = g.mul(x, x).unwrap();
        let grads = g.backward_multi(&[a, b]).unwrap();
        assert_eq!(grads[0].get(x).unwrap().data(), &[2.0]);
        assert_eq!(grads[1].get(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn non_finite_output_is_numeric_error() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1], &[1e308])).unwrap();
        let err = g.scale(x, 10.0).unwrap_err();
        assert!(matches!(err, Error::Numeric { ref op } if op == "scale"));
    }
}
