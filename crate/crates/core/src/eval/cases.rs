use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::Opt;
use super::{confusion, metrics, ConfusionMatrix, EvalError, MetricReport};
use crate::encoder::{Label, LabeledDataset, Split};
use crate::nn::{predict, LossConfig, Model};
use crate::train::{predict_split, train, TrainConfig, TrainError, TrainHistory};
use crate::Scalar;

/// One loss configuration to train and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: u32,
    pub phi: f64,
    /// `[recall, specificity, precision, f1]`.
    pub alpha: [f64; 4],
}

impl CaseSpec {
    pub fn loss(&self, base: &LossConfig) -> LossConfig {
        LossConfig {
            phi: self.phi,
            alpha: self.alpha,
            ..*base
        }
    }
}

/// The eight class-weight / metric-cost combinations of the reference study.
pub fn reference_cases() -> Vec<CaseSpec> {
    let rows: [(f64, [f64; 4]); 8] = [
        (1.0, [0.0; 4]),
        (2.0, [0.0; 4]),
        (5.0, [0.0; 4]),
        (1.0, [0.5; 4]),
        (1.0, [0.5, 0.0, 0.5, 0.5]),
        (2.0, [0.5, 0.0, 0.5, 0.5]),
        (3.0, [0.5, 0.0, 0.5, 0.5]),
        (2.0, [0.0, 0.0, 0.5, 0.5]),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, &(phi, alpha))| CaseSpec {
            id: i as u32 + 1,
            phi,
            alpha,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub report: MetricReport,
    /// Predicted label per split index, in split order.
    pub predicted: Vec<Label>,
    pub indices: Vec<usize>,
}

impl Evaluation {
    /// Dataset indices whose prediction differs from the label.
    pub fn misclassified(&self, ds: &LabeledDataset) -> Vec<usize> {
        self.indices
            .iter()
            .zip(&self.predicted)
            .filter(|(&i, &p)| ds.samples[i].label != p)
            .map(|(&i, _)| i)
            .collect()
    }
}

pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    ds: &LabeledDataset,
    split: Split,
    batch_size: usize,
) -> Result<Evaluation, EvalError> {
    let (probs, _) = predict_split(model, ds, split, batch_size)?;
    let indices = ds.splits.get(split).to_vec();
    let predicted: Vec<Label> = predict(&probs).into_iter().map(Label::from_index).collect();
    let actual: Vec<Label> = indices.iter().map(|&i| ds.samples[i].label).collect();
    let cm = confusion(&predicted, &actual)?;
    Ok(Evaluation {
        confusion: cm,
        report: metrics(&cm),
        predicted,
        indices,
    })
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case: CaseSpec,
    pub outcome: Result<(Evaluation, TrainHistory), String>,
}

/// Trains one model per case from the same initial parameters and scores it on the test split.
pub fn run_cases<T: Scalar>(
    ds: &LabeledDataset,
    cases: &[CaseSpec],
    base: &TrainConfig,
    init: &Model<T>,
    mut on_case: impl FnMut(&CaseSpec, &Result<(Evaluation, TrainHistory), String>),
) -> Vec<CaseResult> {
    cases
        .iter()
        .map(|case| {
            let cfg = TrainConfig {
                loss: case.loss(&base.loss),
                checkpoint: None,
                ..base.clone()
            };
            let outcome = train(init.clone(), ds, &cfg)
                .map_err(|e: TrainError| e.to_string())
                .and_then(|(model, hist)| {
                    evaluate(&model, ds, Split::Test, cfg.batch_size)
                        .map(|ev| (ev, hist))
                        .map_err(|e| e.to_string())
                });
            on_case(case, &outcome);
            CaseResult {
                case: case.clone(),
                outcome,
            }
        })
        .collect()
}

impl CaseResult {
    pub fn radar_row(&self) -> (&CaseSpec, Result<&MetricReport, &str>) {
        (
            &self.case,
            self.outcome
                .as_ref()
                .map(|(ev, _)| &ev.report)
                .map_err(String::as_str),
        )
    }
}

/// One row per case, one column per metric; failed cases list their error.
pub fn radar_csv<'a>(
    rows: impl IntoIterator<Item = (&'a CaseSpec, Result<&'a MetricReport, &'a str>)>,
) -> String {
    let mut s = String::from("case,phi,alpha_r,alpha_s,alpha_p,alpha_f,recall,specificity,precision,f1,accuracy,mcc,error\n");
    for (c, outcome) in rows {
        write!(
            s,
            "{},{},{},{},{},{},",
            c.id, c.phi, c.alpha[0], c.alpha[1], c.alpha[2], c.alpha[3]
        )
        .expect("string write");
        match outcome {
            Ok(m) => writeln!(
                s,
                "{},{},{},{},{},{},",
                Opt(m.recall),
                Opt(m.specificity),
                Opt(m.precision),
                Opt(m.f1),
                Opt(m.accuracy),
                Opt(m.mcc)
            ),
            Err(e) => writeln!(s, ",,,,,,{}", e.replace(',', ";")),
        }
        .expect("string write");
    }
    s
}
