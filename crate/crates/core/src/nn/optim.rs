//! RMSprop.

use super::network::Network;
use super::real::Real;

/// `a ← ρa + (1−ρ)g²;  p ← p − lr·g/√(a + ε)` applied element-wise.
pub fn rmsprop_update<T: Real>(
    params: &mut [T],
    grads: &[T],
    acc: &mut [T],
    lr: f64,
    decay: f64,
    eps: f64,
) {
    let (lr, rho, one_minus, eps) = (
        T::from_f64(lr),
        T::from_f64(decay),
        T::from_f64(1.0 - decay),
        T::from_f64(eps),
    );
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        *a = rho * *a + one_minus * g * g;
        *p -= lr * g / (*a + eps).sqrt();
    }
}

/// Optimizer state for a whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp<T> {
    pub decay: f64,
    pub epsilon: f64,
    acc: Vec<Vec<T>>,
}

impl<T: Real> RmsProp<T> {
    pub fn new(net: &Network<T>, decay: f64, epsilon: f64) -> Self {
        Self {
            decay,
            epsilon,
            acc: net.params().iter().map(|p| vec![T::ZERO; p.data.len()]).collect(),
        }
    }

    pub fn step(&mut self, net: &mut Network<T>, grad: &Network<T>, lr: f64) {
        let grads = grad.params();
        for ((p, g), a) in net.params_mut().into_iter().zip(grads).zip(self.acc.iter_mut()) {
            rmsprop_update(p, g.data, a, lr, self.decay, self.epsilon);
        }
    }
}
