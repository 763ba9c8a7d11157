use super::param::Parameter;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Result<Self> {
        let cfg = Self {
            learning_rate,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Zeroes the gradient afterwards.
/// Frozen parameters are left exactly as they are.
pub fn adam_step(param: &mut Parameter, cfg: &AdamConfig) {
    if param.is_frozen() {
        return;
    }
    let t = param.bump_step() as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let (value, m, v, grad) = param.moments_mut();
    let it = value
        .data_mut()
        .iter_mut()
        .zip(m.data_mut().iter_mut())
        .zip(v.data_mut().iter_mut())
        .zip(grad.data().iter());
    for (((theta, m), v), &g) in it {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    param.zero_grad();
}
