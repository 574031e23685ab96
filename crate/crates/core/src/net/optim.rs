//! First-order optimisers: SGD with momentum and Adam.

use super::{Grads, OptimizerKind, ToyNet, TrainConfig};
use serde::{Deserialize, Serialize};

pub struct Momentum {
    pub lr: f64,
    pub beta: f64,
    velocity: Grads,
}

impl Momentum {
    pub fn new(net: &ToyNet, lr: f64, beta: f64) -> Self {
        Momentum {
            lr,
            beta,
            velocity: Grads::zeros_like(net),
        }
    }

    /// `v = beta v + g; p -= lr v`.
    pub fn step(&mut self, net: &mut ToyNet, grads: &Grads) {
        self.velocity.scale(self.beta);
        self.velocity.add(grads);
        net.add_scaled(&self.velocity, -self.lr);
    }
}

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &ToyNet, lr: f64, beta1: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut ToyNet, grads: &Grads) {
        self.t += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            for (idx, p) in layer.w.iter_mut().enumerate() {
                let g = grads.w[l][idx];
                let m = &mut self.m.w[l][idx];
                let v = &mut self.v.w[l][idx];
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
            }
            for (idx, p) in layer.b.iter_mut().enumerate() {
                let g = grads.b[l][idx];
                let m = &mut self.m.b[l][idx];
                let v = &mut self.v.b[l][idx];
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
            }
        }
    }
}

/// Optimiser dispatch configured per training stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Sgd,
    Adam,
}

pub enum Optimizer {
    Sgd(Momentum),
    Adam(Adam),
}

impl Optimizer {
    pub fn from_config(net: &ToyNet, cfg: &TrainConfig) -> Self {
        match cfg.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd(Momentum::new(net, cfg.learning_rate, cfg.momentum)),
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(net, cfg.learning_rate, cfg.momentum)),
        }
    }

    pub fn step(&mut self, net: &mut ToyNet, grads: &Grads) {
        match self {
            Optimizer::Sgd(o) => o.step(net, grads),
            Optimizer::Adam(o) => o.step(net, grads),
        }
    }
}
