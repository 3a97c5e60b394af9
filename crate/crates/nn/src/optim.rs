//! Adam with bias correction.

use crate::param::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Applies one update to every parameter from its accumulated gradient,
    /// then clears the gradients.
    pub fn step(&self, store: &mut ParamStore) {
        for p in store.iter_mut() {
            p.step += 1;
            let bc1 = 1.0 - self.beta1.powi(p.step as i32);
            let bc2 = 1.0 - self.beta2.powi(p.step as i32);
            let grads = p.grad.data();
            let m = p.first_moment.data_mut();
            for (mi, g) in m.iter_mut().zip(grads) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
            }
            let v = p.second_moment.data_mut();
            for (vi, g) in v.iter_mut().zip(grads) {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
            }
            let (m, v) = (p.first_moment.data(), p.second_moment.data());
            for ((w, mi), vi) in p.value.data_mut().iter_mut().zip(m).zip(v) {
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.zero_grad();
        }
    }
}
