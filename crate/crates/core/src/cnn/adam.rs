//! Adam optimizer with bias correction, shared across all parameter
//! tensors of one model. One state instance belongs to one training run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AdamConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

/// First/second moment accumulators per tensor plus the shared step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over every tensor:
    /// m <- b1 m + (1-b1) g, v <- b2 v + (1-b2) g^2,
    /// p <- p - lr * m_hat / (sqrt(v_hat) + eps).
    pub fn step(
        &mut self,
        params: &mut [&mut Vec<f64>],
        grads: &[Vec<f64>],
        cfg: &AdamConfig,
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape {
                expected: format!("{} tensors", self.m.len()),
                got: format!("{} params, {} grads", params.len(), grads.len()),
            });
        }
        for g in grads {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "gradient passed to the optimizer".into(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let m_correction = 1.0 - cfg.beta1.powi(t);
        let v_correction = 1.0 - cfg.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            debug_assert_eq!(p.len(), g.len());
            for i in 0..g.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / m_correction;
                let v_hat = v[i] / v_correction;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
        Ok(())
    }
}
