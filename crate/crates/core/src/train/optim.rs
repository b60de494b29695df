use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Decay the weights directly instead of adding `wd * p` to the gradient.
    pub decoupled: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0, decoupled: false }
    }
}

/// Adam with bias correction. Moment buffers are sized on the first step.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update of every parameter buffer. Parameters are left untouched
    /// when any gradient is non-finite.
    pub fn step<P, G>(&mut self, params: &mut [P], grads: &[G], lr: f64) -> Result<()>
    where
        P: AsMut<[f64]>,
        G: AsRef<[f64]>,
    {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!("{} parameters, {} gradients", params.len(), grads.len())));
        }
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (p, g) = (p.as_mut(), g.as_ref());
            if p.len() != g.len() {
                return Err(Error::Shape(format!("parameter {i} has {} values, gradient {}", p.len(), g.len())));
            }
            if let Some(j) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::Numeric {
                    op: "adam".into(),
                    reason: format!("non-finite gradient at parameter {i}, entry {j}"),
                });
            }
        }
        if self.m.is_empty() {
            self.m = params.iter_mut().map(|p| vec![0.0; p.as_mut().len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Shape("parameter list changed between steps".into()));
        }

        self.t += 1;
        let c = self.config;
        let bias1 = 1.0 - c.beta1.powi(self.t);
        let bias2 = 1.0 - c.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (k, (w, &raw)) in p.as_mut().iter_mut().zip(g.as_ref()).enumerate() {
                let grad = if c.decoupled { raw } else { raw + c.weight_decay * *w };
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grad;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * grad * grad;
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                if c.decoupled {
                    *w -= lr * c.weight_decay * *w;
                }
                *w -= lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}
