//! First/second-moment gradient descent.

use super::mlp::{Gradients, Mlp};

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.t = self.t.saturating_add(1);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..grads.weights.len() {
            let (w, g, m, v) = (
                &mut net.weights_mut()[l],
                &grads.weights[l],
                &mut self.m.weights[l],
                &mut self.v.weights[l],
            );
            for (((p, &g), m), v) in w.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                update(p, g, m, v);
            }
            let (b, g, m, v) = (
                &mut net.biases_mut()[l],
                &grads.biases[l],
                &mut self.m.biases[l],
                &mut self.v.biases[l],
            );
            for (((p, &g), m), v) in b.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                update(p, g, m, v);
            }
        }
    }
}
