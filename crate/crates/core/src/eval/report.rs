use std::fmt::Write as _;

use super::{kmeans, EvalError, DEFAULT_MAX_ITERS};
use crate::encoder::LabeledDataset;

/// Per-bus net active then reactive demand for every sample.
pub fn operating_features(ds: &LabeledDataset) -> Vec<Vec<f64>> {
    ds.samples
        .iter()
        .map(|s| s.snapshot.p.iter().chain(&s.snapshot.q).copied().collect())
        .collect()
}

/// Z-scores each column; constant columns become zero.
pub fn standardize(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if points.is_empty() {
        return Vec::new();
    }
    let n = points.len() as f64;
    let dim = points[0].len();
    let mean: Vec<f64> = (0..dim)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n)
        .collect();
    let sd: Vec<f64> = (0..dim)
        .map(|j| (points.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    points
        .iter()
        .map(|p| {
            (0..dim)
                .map(|j| {
                    if sd[j] > 0.0 {
                        (p[j] - mean[j]) / sd[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    pub k: usize,
    /// Cluster holding the most misclassified points.
    pub cluster: usize,
    pub count: usize,
    /// `count` over all misclassified points.
    pub fraction: f64,
    /// Share of all points that fall in that cluster.
    pub cluster_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisclassReport {
    pub misclassified: usize,
    pub rows: Vec<Concentration>,
    pub note: Option<String>,
}

impl MisclassReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,cluster,misclassified_in_cluster,fraction,cluster_mass\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.k, r.cluster, r.count, r.fraction, r.cluster_mass
            )
            .expect("string write");
        }
        if let Some(note) = &self.note {
            writeln!(s, "# {note}").expect("string write");
        }
        s
    }
}

/// Clusters the standardised operating space for each `k` and reports the largest share
/// of misclassified points that lands in a single cluster.
pub fn misclassification_report(
    features: &[Vec<f64>],
    misclassified: &[usize],
    ks: &[usize],
    seed: u64,
) -> Result<MisclassReport, EvalError> {
    if misclassified.is_empty() {
        return Ok(MisclassReport {
            misclassified: 0,
            rows: Vec::new(),
            note: Some("no misclassified points".into()),
        });
    }
    if let Some(&bad) = misclassified.iter().find(|&&i| i >= features.len()) {
        return Err(EvalError::Invalid(format!(
            "misclassified index {bad} outside {} points",
            features.len()
        )));
    }
    let z = standardize(features);
    let mut rows = Vec::new();
    for &k in ks {
        let km = kmeans(&z, k, seed, DEFAULT_MAX_ITERS)?;
        let mut counts = vec![0usize; k];
        for &i in misclassified {
            counts[km.assignments[i]] += 1;
        }
        let (cluster, &count) = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("k >= 1");
        let mass = km.assignments.iter().filter(|&&a| a == cluster).count();
        rows.push(Concentration {
            k,
            cluster,
            count,
            fraction: count as f64 / misclassified.len() as f64,
            cluster_mass: mass as f64 / features.len() as f64,
        });
    }
    Ok(MisclassReport {
        misclassified: misclassified.len(),
        rows,
        note: None,
    })
}
