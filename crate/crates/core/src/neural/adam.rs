use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Gradients, Mlp};

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: i32,
    /// First and second moments, flattened in [`Mlp::params`] order.
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T, num_params: usize) -> Self {
        Self {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
        }
    }

    pub fn for_net(lr: T, net: &Mlp<T>) -> Self {
        Self::new(lr, net.num_params())
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn moments(&self) -> (&[T], &[T]) {
        (&self.m, &self.v)
    }

    /// One descent step along `grads` (the gradient of a loss to minimize).
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>) -> Result<()> {
        if net.num_params() != self.m.len() {
            return Err(Error::Shape {
                context: "optimizer state",
                expected: self.m.len(),
                actual: net.num_params(),
            });
        }
        self.step += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.step);
        let c2 = one - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let mut k = 0;
        for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
            let pairs = layer
                .weight
                .iter_mut()
                .zip(g.weight.iter())
                .chain(layer.bias.iter_mut().zip(g.bias.iter()));
            for (p, &gv) in pairs {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = b1 * *m + (one - b1) * gv;
                *v = b2 * *v + (one - b2) * gv * gv;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
                k += 1;
            }
        }
        Ok(())
    }
}
