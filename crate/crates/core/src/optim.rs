//! Adam, shared by GP hyperparameter fitting and network training.

use nalgebra::DVector;

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    m: DVector<T>,
    v: DVector<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self {
            lr: T::lit(lr),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            m: DVector::zeros(dim),
            v: DVector::zeros(dim),
            t: 0,
        }
    }

    /// One descent step on `params` given the gradient of the loss.
    pub fn step(&mut self, params: &mut DVector<T>, grad: &DVector<T>) {
        self.t += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        let step = self.lr * bc2.sqrt() / bc1;
        let eps = self.eps * bc2.sqrt();
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            params[i] -= step * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}
