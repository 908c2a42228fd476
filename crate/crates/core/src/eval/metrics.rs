use std::fmt;
use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;
use crate::encoder::Label;

/// Two-sided 99% standard-normal quantile.
pub const Z_99: f64 = 2.5758;

/// Counts with unsafe as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

pub fn confusion(predicted: &[Label], actual: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::Invalid(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, a) in predicted.iter().zip(actual) {
        match (a, p) {
            (Label::Unsafe, Label::Unsafe) => cm.tp += 1,
            (Label::Unsafe, Label::Safe) => cm.fn_ += 1,
            (Label::Safe, Label::Unsafe) => cm.fp += 1,
            (Label::Safe, Label::Safe) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// 99% normal-approximation half-widths for the proportion metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intervals {
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
}

/// `None` marks a metric whose denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub mcc: Option<f64>,
    pub intervals: Intervals,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn half_width(p: Option<f64>, n: u64) -> Option<f64> {
    p.filter(|_| n > 0).map(|p| confidence_interval(p, n, 0.99))
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricReport {
    let &ConfusionMatrix { tp, fn_, fp, tn } = cm;
    let recall = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let precision = ratio(tp, tp + fp);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let accuracy = ratio(tp + tn, cm.total());
    let den = (tp + fp) as f64 * (tp + fn_) as f64 * (tn + fp) as f64 * (tn + fn_) as f64;
    let mcc = (den > 0.0).then(|| (tp as f64 * tn as f64 - fp as f64 * fn_ as f64) / den.sqrt());
    MetricReport {
        recall,
        specificity,
        precision,
        f1,
        accuracy,
        mcc,
        intervals: Intervals {
            recall: half_width(recall, tp + fn_),
            specificity: half_width(specificity, tn + fp),
            precision: half_width(precision, tp + fp),
            accuracy: half_width(accuracy, cm.total()),
        },
    }
}

impl MetricReport {
    /// `metric,value,ci99` rows followed by the raw confusion counts.
    pub fn to_csv(&self, cm: &ConfusionMatrix) -> String {
        let i = &self.intervals;
        let rows = [
            ("recall", self.recall, i.recall),
            ("specificity", self.specificity, i.specificity),
            ("precision", self.precision, i.precision),
            ("f1", self.f1, None),
            ("accuracy", self.accuracy, i.accuracy),
            ("mcc", self.mcc, None),
        ];
        let mut s = String::from("metric,value,ci99\n");
        for (name, v, ci) in rows {
            let ci = ci.map(|c| format!("{c:.6}")).unwrap_or_default();
            writeln!(s, "{name},{},{ci}", Opt(v)).expect("string write");
        }
        for (name, v) in [("tp", cm.tp), ("fn", cm.fn_), ("fp", cm.fp), ("tn", cm.tn)] {
            writeln!(s, "{name},{v},").expect("string write");
        }
        s
    }
}

/// Formats an optional metric for reports.
pub(crate) struct Opt(pub Option<f64>);

impl fmt::Display for Opt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.6}"),
            None => f.write_str("undefined"),
        }
    }
}

/// Safe count over unsafe count.
pub fn balanced_phi(labels: &[Label]) -> Result<f64, EvalError> {
    let safe = labels.iter().filter(|&&l| l == Label::Safe).count();
    let unsafe_ = labels.len() - safe;
    if safe == 0 || unsafe_ == 0 {
        return Err(EvalError::Invalid(
            "balanced class coefficient needs both classes".into(),
        ));
    }
    Ok(safe as f64 / unsafe_ as f64)
}

/// Normal-approximation half-width `z sqrt(p (1 - p) / n)` at a two-sided confidence
/// level; the 99% level uses the four-digit constant `Z_99`.
pub fn confidence_interval(p: f64, n: u64, level: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&p) && n >= 1,
        "need 0 <= p <= 1 and n >= 1"
    );
    assert!(
        level > 0.0 && level < 1.0,
        "confidence level must lie in (0, 1)"
    );
    let z = if level == 0.99 {
        Z_99
    } else {
        Normal::standard().inverse_cdf(0.5 + level / 2.0)
    };
    z * (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(tp: u64, fn_: u64, fp: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    #[test]
    fn confusion_cases() {
        let labels = [
            Label::Unsafe,
            Label::Safe,
            Label::Unsafe,
            Label::Safe,
            Label::Unsafe,
        ];
        let c = confusion(&labels, &labels).unwrap();
        assert_eq!((c.fn_, c.fp), (0, 0));
        let flipped: Vec<Label> = labels
            .iter()
            .map(|l| Label::from_index(1 - l.index()))
            .collect();
        let c = confusion(&flipped, &labels).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion(&labels[..2], &labels).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draw = |rng: &mut ChaCha8Rng| {
            (0..1000)
                .map(|_| Label::from_safe(rng.random_bool(0.3)))
                .collect::<Vec<_>>()
        };
        let (p, a) = (draw(&mut rng), draw(&mut rng));
        let c = confusion(&p, &a).unwrap();
        let mut tally = [0u64; 4];
        for i in 0..1000 {
            tally[a[i].index() * 2 + p[i].index()] += 1;
        }
        assert_eq!([c.tp, c.fn_, c.fp, c.tn], tally);
    }

    #[test]
    fn hand_example() {
        let r = metrics(&cm(4, 1, 2, 3));
        assert_eq!(r.recall, Some(0.8));
        assert!((r.precision.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.mcc.unwrap() - 10.0 / 600f64.sqrt()).abs() < 1e-15);
        assert!((r.mcc.unwrap() - 0.4082).abs() < 1e-4);
    }

    #[test]
    fn degenerate_cases() {
        let perfect = metrics(&cm(5, 0, 0, 7));
        for v in [
            perfect.recall,
            perfect.specificity,
            perfect.precision,
            perfect.f1,
            perfect.accuracy,
            perfect.mcc,
        ] {
            assert_eq!(v, Some(1.0));
        }
        let all_unsafe = metrics(&cm(6, 0, 4, 0));
        assert_eq!(all_unsafe.recall, Some(1.0));
        assert_eq!(all_unsafe.specificity, Some(0.0));
        assert_eq!(all_unsafe.mcc, None);
        let no_unsafe = metrics(&cm(0, 0, 0, 3));
        assert_eq!(no_unsafe.recall, None);
        assert_eq!(no_unsafe.precision, None);
        assert_eq!(Opt(None).to_string(), "undefined");
        let csv = metrics(&cm(0, 0, 0, 3)).to_csv(&cm(0, 0, 0, 3));
        assert!(csv.contains("recall,undefined,\n"));
        assert!(csv.ends_with("tn,3,\n"));
    }

    #[test]
    fn phi_values() {
        let half: Vec<Label> = (0..10).map(|i| Label::from_safe(i % 2 == 0)).collect();
        assert_eq!(balanced_phi(&half).unwrap(), 1.0);
        let skewed: Vec<Label> = (0..10_000).map(|i| Label::from_safe(i < 1456)).collect();
        assert!((balanced_phi(&skewed).unwrap() - 0.170).abs() < 1e-3);
        assert!(balanced_phi(&[Label::Safe]).is_err());
    }

    #[test]
    fn interval_values() {
        assert_eq!(confidence_interval(0.0, 50, 0.99), 0.0);
        assert_eq!(confidence_interval(1.0, 50, 0.99), 0.0);
        assert!((confidence_interval(0.5, 100, 0.99) - 0.12879).abs() < 1e-12);
        let a = confidence_interval(0.3, 100, 0.99);
        let b = confidence_interval(0.3, 400, 0.99);
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!((confidence_interval(0.5, 100, 0.95) - 1.959964 * 0.05).abs() < 1e-6);
        for n in 1..50 {
            assert!(confidence_interval(0.4, n + 1, 0.99) < confidence_interval(0.4, n, 0.99));
            assert!(confidence_interval(0.5, n, 0.99) >= confidence_interval(0.37, n, 0.99));
        }
    }
}
