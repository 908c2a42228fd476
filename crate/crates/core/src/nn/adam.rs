use serde::{Deserialize, Serialize};

use super::Param;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update; `t` is the 1-based step number.
pub fn adam_update<T: Scalar>(p: &mut Param<T>, grad: &[T], t: u64, cfg: &AdamConfig) {
    assert_eq!(grad.len(), p.value.len(), "gradient length");
    assert!(t >= 1, "Adam steps are 1-based");
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - cfg.beta1), T::lit(1.0 - cfg.beta2));
    let ti = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = T::lit(1.0 / (1.0 - cfg.beta1.powi(ti)));
    let c2 = T::lit(1.0 / (1.0 - cfg.beta2.powi(ti)));
    let (lr, eps) = (T::lit(cfg.lr), T::lit(cfg.eps));
    for (((w, m), v), &g) in p.value.iter_mut().zip(&mut p.m).zip(&mut p.v).zip(grad) {
        *m = b1 * *m + one_b1 * g;
        *v = b2 * *v + one_b2 * g * g;
        let m_hat = *m * c1;
        let v_hat = *v * c2;
        *w -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
