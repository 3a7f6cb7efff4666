use serde::{Deserialize, Serialize};

use super::matrix::{Matrix, Scalar};
use crate::error::{FeaeError, Result};

/// A trainable matrix with its gradient buffer and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Scalar = f32> {
    pub name: String,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
    adam_m: Matrix<T>,
    adam_v: Matrix<T>,
    step: u64,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Matrix<T>) -> Self {
        let (r, c) = value.shape();
        Param {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
            adam_m: Matrix::zeros(r, c),
            adam_v: Matrix::zeros(r, c),
            step: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn zero_grad(&mut self) {
        let (r, c) = self.value.shape();
        if self.grad.shape() != (r, c) {
            self.grad = Matrix::zeros(r, c);
        } else {
            self.grad.fill(T::zero());
        }
    }

    /// Drops optimizer state; used after deserializing or cloning a snapshot
    /// into a fresh optimizer.
    pub fn reset_state(&mut self) {
        let (r, c) = self.value.shape();
        self.grad = Matrix::zeros(r, c);
        self.adam_m = Matrix::zeros(r, c);
        self.adam_v = Matrix::zeros(r, c);
        self.step = 0;
    }

    pub fn cast<U: Scalar>(&self) -> Param<U> {
        Param::new(self.name.clone(), self.value.cast())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with decoupled weight decay, then zeroes every gradient.
///
/// ```text
/// value <- value - lr * wd * value
/// m <- b1 m + (1 - b1) g ;  v <- b2 v + (1 - b2) g^2
/// value <- value - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
///
/// All gradients are validated before any parameter moves.
pub fn adam_step<T: Scalar>(params: &mut [&mut Param<T>], cfg: &AdamConfig) -> Result<()> {
    for p in params.iter() {
        if p.grad.shape() != p.value.shape() {
            return Err(FeaeError::dim(
                p.value.shape(),
                p.grad.shape(),
                &format!("gradient of {}", p.name),
            ));
        }
        if !p.grad.is_finite() {
            return Err(FeaeError::Numeric(format!(
                "non-finite gradient for parameter {}",
                p.name
            )));
        }
    }
    let lr = T::lit(cfg.lr);
    let decay = T::one() - T::lit(cfg.lr * cfg.weight_decay);
    let (b1, b2, eps) = (T::lit(cfg.beta1), T::lit(cfg.beta2), T::lit(cfg.eps));
    for p in params.iter_mut() {
        let (r, c) = p.value.shape();
        if p.adam_m.shape() != (r, c) {
            p.adam_m = Matrix::zeros(r, c);
            p.adam_v = Matrix::zeros(r, c);
        }
        p.step += 1;
        let t = p.step as i32;
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        let Param {
            value,
            grad,
            adam_m,
            adam_v,
            ..
        } = &mut **p;
        for (((w, &g), m), v) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(adam_m.data_mut())
            .zip(adam_v.data_mut())
        {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w = *w * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.zero_grad();
    }
    Ok(())
}
