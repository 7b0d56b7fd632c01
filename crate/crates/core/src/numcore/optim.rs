use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Grads, Tensor};
use crate::{math, Error, Result};

const RMS_DECAY: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Rmsprop,
    Adam,
}

/// Optimizer state for one agent. Moment accumulators mirror the agent's
/// parameter tensors one-to-one.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step_count: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &[&Tensor]) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::arg(format!("learning rate must be positive, got {learning_rate}")));
        }
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect::<Vec<_>>();
        Ok(Optimizer {
            kind,
            learning_rate,
            first: if kind == OptimizerKind::Adam { zeros() } else { Vec::new() },
            second: zeros(),
            step_count: 0,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &Grads) -> Result<()> {
        if params.len() != grads.0.len() || params.len() != self.second.len() {
            return Err(Error::dim("optimizer parameter list", self.second.len(), grads.0.len()));
        }
        for (i, (p, g)) in params.iter().zip(&grads.0).enumerate() {
            if !p.same_shape(g) || !p.same_shape(&self.second[i]) {
                return Err(Error::dim(format!("optimizer tensor {i}"), p.len(), g.len()));
            }
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Rmsprop => {
                for ((p, g), v) in params.iter_mut().zip(&grads.0).zip(&mut self.second) {
                    for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                        *vv = RMS_DECAY * *vv + (1.0 - RMS_DECAY) * gv * gv;
                        *pv -= lr * gv / (math::sqrt(*vv) + EPS);
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count as f64;
                let c1 = 1.0 - libm::pow(ADAM_BETA1, t);
                let c2 = 1.0 - libm::pow(ADAM_BETA2, t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(&grads.0)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((pv, &gv), mv), vv) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                        *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv -= lr * m_hat / (math::sqrt(v_hat) + EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Clamps every parameter into `[-c, c]`.
pub fn clip_weights(params: &mut [&mut Tensor], c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(Error::arg(format!("clip bound must be positive, got {c}")));
    }
    for p in params.iter_mut() {
        for w in p.data_mut() {
            *w = w.clamp(-c, c);
        }
    }
    Ok(())
}
