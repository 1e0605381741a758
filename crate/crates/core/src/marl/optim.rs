use serde::{Deserialize, Serialize};

use crate::diffusion::{Mlp, MlpGrads};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Per-network optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, net: &Mlp) -> Optimizer {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
                Optimizer::Adam {
                    lr,
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                    step: 0,
                    m: zeros.clone(),
                    v: zeros,
                }
            }
        }
    }

    /// Descends along `grads`, rescaled first so their norm is at most
    /// `clip` when given.
    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads, clip: Option<f64>) {
        let norm = grads.norm();
        let scale = match clip {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let grads = grads.slices();
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in net.params_mut().into_iter().zip(grads) {
                    for (x, d) in p.iter_mut().zip(g) {
                        *x -= *lr * scale * d;
                    }
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                for (((p, g), m), v) in net.params_mut().into_iter().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    for i in 0..p.len() {
                        let d = scale * g[i];
                        m[i] = *beta1 * m[i] + (1.0 - *beta1) * d;
                        v[i] = *beta2 * v[i] + (1.0 - *beta2) * d * d;
                        p[i] -= *lr * (m[i] / c1) / ((v[i] / c2).sqrt() + *eps);
                    }
                }
            }
        }
    }
}
