//! SGD and Adam with decoupled weight decay.
//!
//! SGD:  `p <- p - lr * (g + wd * p)`
//!
//! Adam: bias-corrected moments, then
//! `p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)`.
//! The decay term never enters the moment estimates.

use serde::{Deserialize, Serialize};

use super::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimiserKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimiserConfig {
    pub kind: OptimiserKind,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimiserConfig {
    pub fn sgd(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            kind: OptimiserKind::Sgd,
            learning_rate,
            weight_decay,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn adam(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            kind: OptimiserKind::Adam,
            ..Self::sgd(learning_rate, weight_decay)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::InvalidConfig("adam betas must lie in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimiserState {
    pub config: OptimiserConfig,
    /// Present only for Adam.
    pub moments: Option<AdamMoments>,
}

impl OptimiserState {
    pub fn new(config: OptimiserConfig, param_count: usize) -> Self {
        let moments = match config.kind {
            OptimiserKind::Sgd => None,
            OptimiserKind::Adam => Some(AdamMoments {
                m: vec![0.0; param_count],
                v: vec![0.0; param_count],
                step: 0,
            }),
        };
        Self { config, moments }
    }
}

pub fn optimiser_step(params: &mut ParamVector, grad: &[f64], opt: &mut OptimiserState) -> Result<()> {
    if grad.len() != params.len() {
        return Err(Error::DimensionMismatch {
            context: "gradient",
            expected: params.len(),
            actual: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric { layer: "gradient" });
    }
    let cfg = opt.config;
    let lr = cfg.learning_rate;
    let wd = cfg.weight_decay;
    match opt.moments.as_mut() {
        None => {
            for (p, g) in params.values_mut().iter_mut().zip(grad) {
                *p -= lr * (g + wd * *p);
            }
        }
        Some(mom) => {
            if mom.m.len() != grad.len() {
                return Err(Error::DimensionMismatch {
                    context: "adam moments",
                    expected: grad.len(),
                    actual: mom.m.len(),
                });
            }
            mom.step += 1;
            let t = mom.step as i32;
            let c1 = 1.0 - cfg.beta1.powi(t);
            let c2 = 1.0 - cfg.beta2.powi(t);
            for (((p, g), m), v) in params
                .values_mut()
                .iter_mut()
                .zip(grad)
                .zip(mom.m.iter_mut())
                .zip(mom.v.iter_mut())
            {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + wd * *p);
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::Numeric { layer: "optimiser update" });
    }
    Ok(())
}
