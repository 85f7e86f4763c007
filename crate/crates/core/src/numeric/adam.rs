use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// A named trainable tensor and its pending gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T = f32> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Self {
            name: name.into(),
            value,
            grad: None,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            name: self.name.clone(),
            value: self.value.cast(),
            grad: self.grad.as_ref().map(Tensor::cast),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Classic L2 coupling: `weight_decay * θ` is added to the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam moments for a fixed, ordered parameter list.
#[derive(Clone, Debug)]
pub struct Adam<T = f32> {
    config: AdamConfig,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, params: &[&Param<T>]) -> Self {
        Self {
            config,
            step: 0,
            first: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            second: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected update over `params` (same order as at
    /// construction). Gradients are cleared afterwards.
    pub fn step(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} parameters, got {}",
                self.first.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            let Some(g) = &p.grad else {
                return Err(Error::MissingGrad(p.name.clone()));
            };
            if g.shape() != p.value.shape() || self.first[i].shape() != p.value.shape() {
                return Err(Error::shape("adam_step", p.value.shape(), g.shape()));
            }
        }

        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);

        for (i, p) in params.iter_mut().enumerate() {
            let grad = p.grad.take().expect("checked above");
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (k, theta) in p.value.data_mut().iter_mut().enumerate() {
                let th = theta.as_f64();
                let g = grad.data()[k].as_f64() + c.weight_decay * th;
                let mk = c.beta1 * m[k].as_f64() + (1.0 - c.beta1) * g;
                let vk = c.beta2 * v[k].as_f64() + (1.0 - c.beta2) * g * g;
                m[k] = T::from_f64_lossy(mk);
                v[k] = T::from_f64_lossy(vk);
                let update = c.lr * (mk / bc1) / ((vk / bc2).sqrt() + c.eps);
                *theta = T::from_f64_lossy(th - update);
            }
        }
        Ok(())
    }
}
