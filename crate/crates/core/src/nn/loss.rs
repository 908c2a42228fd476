use serde::{Deserialize, Serialize};

use super::{Model, NnError};
use crate::{Scalar, Tensor};

/// Guard added to every ratio denominator of the soft metric terms.
pub const METRIC_EPS: f64 = 1e-7;

/// Weights of the classification loss. `alpha` is `[recall, specificity, precision, f1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub phi: f64,
    pub alpha: [f64; 4],
    pub lambda: f64,
    pub eps_clip: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            phi: 1.0,
            alpha: [0.0; 4],
            lambda: 1e-4,
            eps_clip: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.phi > 0.0
            && self.alpha.iter().all(|&a| a >= 0.0)
            && self.lambda >= 0.0
            && self.eps_clip > 0.0
            && self.eps_clip < 0.5;
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(format!("invalid loss config {self:?}")))
        }
    }
}

/// Differentiable confusion counts with the unsafe class (index 0) as positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftConfusion<T> {
    pub tp: T,
    pub fn_: T,
    pub fp: T,
    pub tn: T,
}

pub fn soft_confusion<T: Scalar>(probs: &Tensor<T>, labels: &Tensor<T>) -> SoftConfusion<T> {
    let mut c = SoftConfusion {
        tp: T::zero(),
        fn_: T::zero(),
        fp: T::zero(),
        tn: T::zero(),
    };
    for b in 0..probs.batch() {
        let p = probs.row(b)[0];
        let y = labels.row(b)[0];
        c.tp += p * y;
        c.fn_ += (T::one() - p) * y;
        c.fp += p * (T::one() - y);
        c.tn += (T::one() - p) * (T::one() - y);
    }
    c
}

/// Mean binary cross-entropy on the unsafe-class probability, clipped to `[eps, 1 - eps]`.
pub fn binary_cross_entropy<T: Scalar>(probs: &Tensor<T>, labels: &Tensor<T>, eps_clip: f64) -> T {
    let (lo, hi) = (T::lit(eps_clip), T::lit(1.0 - eps_clip));
    let m = T::lit(probs.batch() as f64);
    let total: T = (0..probs.batch())
        .map(|b| {
            let p = probs.row(b)[0].max(lo).min(hi);
            let y = labels.row(b)[0];
            y * p.ln() + (T::one() - y) * (T::one() - p).ln()
        })
        .sum();
    -total / m
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub total: T,
    pub cross_entropy: T,
    /// `alpha_r Rec + alpha_s Spe + alpha_p Pre + alpha_f F1` (subtracted from the total).
    pub metric_bonus: T,
    pub l2: T,
    /// Gradient with respect to `probs`; only the unsafe column is nonzero.
    pub d_probs: Tensor<T>,
}

/// `q = a / (a + b + eps)` and its derivative given `da`, `db`.
fn ratio<T: Scalar>(a: T, b: T, da: T, db: T, eps: T) -> (T, T) {
    let den = a + b + eps;
    (a / den, (da * (b + eps) - a * db) / (den * den))
}

/// Weighted cross-entropy minus weighted soft metrics plus L2 on every weight tensor.
///
/// Gradients with respect to the parameters of the L2 term are `lambda * W`; the model
/// adds them during backpropagation.
pub fn loss<T: Scalar>(
    probs: &Tensor<T>,
    labels: &Tensor<T>,
    model: &Model<T>,
    cfg: &LossConfig,
) -> LossOutput<T> {
    assert_eq!(
        probs.shape(),
        labels.shape(),
        "probabilities and labels differ in shape"
    );
    let nb = probs.batch();
    let nc = probs.row_len();
    let m = T::lit(nb as f64);
    let phi = T::lit(cfg.phi);
    let (lo, hi) = (T::lit(cfg.eps_clip), T::lit(1.0 - cfg.eps_clip));
    let eps = T::lit(METRIC_EPS);
    let one = T::one();

    let mut ce = T::zero();
    let mut d_probs = Tensor::zeros(probs.shape());
    for b in 0..nb {
        let raw = probs.row(b)[0];
        let y = labels.row(b)[0];
        let p = raw.max(lo).min(hi);
        ce -= phi * y * p.ln() + (one - y) * (one - p).ln();
        if raw > lo && raw < hi {
            d_probs[b * nc] = -(phi * y / p - (one - y) / (one - p)) / m;
        }
    }
    ce = ce / m;

    let c = soft_confusion(probs, labels);
    let [ar, as_, ap, af] = cfg.alpha.map(T::lit);
    let mut bonus = T::zero();
    if cfg.alpha.iter().any(|&a| a != 0.0) {
        // Per-sample derivatives of the counts: dTP = y, dFN = -y, dFP = 1 - y, dTN = -(1 - y).
        // Each ratio is linear in those, so keep (d/dy-part, d/d(1-y)-part) coefficients.
        let (rec, dr_y) = ratio(c.tp, c.fn_, one, -one, eps);
        let (spe, ds_n) = ratio(c.tn, c.fp, -one, one, eps);
        let den_p = c.tp + c.fp + eps;
        let pre = c.tp / den_p;
        let dp_y = (den_p - c.tp) / (den_p * den_p);
        let dp_n = -c.tp / (den_p * den_p);
        let den_f = pre + rec + eps;
        let f1 = T::lit(2.0) * pre * rec / den_f;
        let f_pre = T::lit(2.0) * (rec * den_f - pre * rec) / (den_f * den_f);
        let f_rec = T::lit(2.0) * (pre * den_f - pre * rec) / (den_f * den_f);
        bonus = ar * rec + as_ * spe + ap * pre + af * f1;

        let g_y = ar * dr_y + ap * dp_y + af * (f_pre * dp_y + f_rec * dr_y);
        let g_n = as_ * ds_n + ap * dp_n + af * f_pre * dp_n;
        for b in 0..nb {
            let y = labels.row(b)[0];
            d_probs[b * nc] -= y * g_y + (one - y) * g_n;
        }
    }

    let l2 = if cfg.lambda > 0.0 {
        T::lit(cfg.lambda / 2.0) * model.weight_sq_sum()
    } else {
        T::zero()
    };
    LossOutput {
        total: ce - bonus + l2,
        cross_entropy: ce,
        metric_bonus: bonus,
        l2,
        d_probs,
    }
}
