//! Named parameters and the bias-corrected Adam update.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A trainable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn accumulate_grad(&mut self, g: &Tensor) -> Result<()> {
        if g.shape() != self.value.shape() {
            return Err(Error::shape(
                "accumulate_grad",
                format!(
                    "{} is {:?}, gradient is {:?}",
                    self.name,
                    self.value.shape(),
                    g.shape()
                ),
            ));
        }
        let mut data = std::mem::replace(&mut self.grad, Tensor::zeros(&[1])).into_data();
        for (d, v) in data.iter_mut().zip(g.data()) {
            *d += v;
        }
        self.grad = Tensor::from_parts(self.value.shape().to_vec(), data);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = Tensor::zeros(self.value.shape());
    }
}

/// Adam decay rates and stabilizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::Config(format!(
                "Adam betas must lie in (0,1), got beta1={} beta2={}",
                self.beta1, self.beta2
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "Adam eps must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// First and second moment estimates for one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(shape: &[usize], config: AdamConfig) -> Self {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            t: 0,
            config,
        }
    }

    pub fn for_param(param: &Param, config: AdamConfig) -> Self {
        Self::new(param.value.shape(), config)
    }
}

/// Applies one Adam step to `param` using `param.grad`, then zeroes the gradient.
pub fn adam_step(param: &mut Param, state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Config(format!(
            "learning rate must be positive and finite, got {lr}"
        )));
    }
    if state.m.shape() != param.value.shape() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "state {:?} vs param {} {:?}",
                state.m.shape(),
                param.name,
                param.value.shape()
            ),
        ));
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    let t = state.t + 1;
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);

    let shape = param.value.shape().to_vec();
    let mut m = std::mem::replace(&mut state.m, Tensor::zeros(&[1])).into_data();
    let mut v = std::mem::replace(&mut state.v, Tensor::zeros(&[1])).into_data();
    let mut w = std::mem::replace(&mut param.value, Tensor::zeros(&[1])).into_data();
    for (((wi, mi), vi), &g) in w.iter_mut().zip(&mut m).zip(&mut v).zip(param.grad.data()) {
        *mi = beta1 * *mi + (1.0 - beta1) * g;
        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *wi -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            op: format!("adam_step({})", param.name),
        });
    }
    state.m = Tensor::from_parts(shape.clone(), m);
    state.v = Tensor::from_parts(shape.clone(), v);
    param.value = Tensor::from_parts(shape, w);
    state.t = t;
    param.zero_grad();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64, g: f64) -> Param {
        let mut p = Param::new("w", Tensor::vector(vec![v]).unwrap());
        p.grad = Tensor::vector(vec![g]).unwrap();
        p
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = scalar_param(1.0, 0.5);
        let mut s = AdamState::for_param(&p, AdamConfig::default());
        adam_step(&mut p, &mut s, 0.01).unwrap();
        let expected = 1.0 - 0.01 * 0.5 / (0.5 + 1e-8);
        assert!((p.value.data()[0] - expected).abs() < 1e-15);
        assert_eq!(s.t, 1);
        assert_eq!(p.grad.data(), &[0.0]);
    }

    #[test]
    fn zero_gradient_means_no_change() {
        let mut p = scalar_param(0.3, 0.0);
        let mut s = AdamState::for_param(&p, AdamConfig::default());
        for _ in 0..5 {
            adam_step(&mut p, &mut s, 0.1).unwrap();
            assert_eq!(p.value.data(), &[0.3]);
        }
        assert_eq!(s.t, 5);
    }

    #[test]
    fn first_step_opposes_gradient() {
        for g in [-3.0, -1e-4, 2e-6, 7.5] {
            let mut p = scalar_param(0.0, g);
            let mut s = AdamState::for_param(&p, AdamConfig::default());
            adam_step(&mut p, &mut s, 1e-3).unwrap();
            assert_eq!(p.value.data()[0].signum(), -f64::signum(g));
        }
    }

    #[test]
    fn non_positive_lr_is_config_error() {
        let mut p = scalar_param(0.0, 1.0);
        let mut s = AdamState::for_param(&p, AdamConfig::default());
        assert!(matches!(
            adam_step(&mut p, &mut s, 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            adam_step(&mut p, &mut s, -1.0),
            Err(Error::Config(_))
        ));
    }
}
