use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use super::EvalError;
use crate::encoder::{encode_into, NormConstants, CHANNELS};
use crate::grid::{GridModel, Snapshot};
use crate::nn::{predict, Model};
use crate::stability::{assess_security, DynamicParams};
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub repetitions: usize,
    pub contingencies: usize,
    /// Mean wall-clock time of one full N-1 oracle assessment.
    pub oracle_ms: f64,
    /// Mean wall-clock time of encode, forward pass and class pick for one snapshot.
    pub cnn_ms: f64,
    pub ratio: f64,
    pub oracle_safe: bool,
    pub cnn_safe: bool,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "repetitions = {}", self.repetitions)?;
        writeln!(f, "contingencies = {}", self.contingencies)?;
        writeln!(f, "oracle_ms = {:.6}", self.oracle_ms)?;
        writeln!(f, "cnn_ms = {:.6}", self.cnn_ms)?;
        writeln!(f, "ratio = {:.3}", self.ratio)?;
        writeln!(f, "oracle_safe = {}", self.oracle_safe)?;
        write!(f, "cnn_safe = {}", self.cnn_safe)
    }
}

/// Times both assessment paths on one snapshot on the calling thread, after one untimed
/// warm-up run each.
#[allow(clippy::too_many_arguments)]
pub fn bench_assessment<T: Scalar>(
    grid: &GridModel,
    dynp: &DynamicParams,
    contingencies: &[usize],
    threshold: f64,
    snapshot: &Snapshot,
    norms: &NormConstants,
    model: &Model<T>,
    repetitions: usize,
) -> Result<BenchReport, EvalError> {
    if repetitions == 0 {
        return Err(EvalError::Invalid(
            "at least one repetition is required".into(),
        ));
    }
    let topo = grid.topology();
    let n = topo.n_buses;
    if model.input_shape() != [n, n, CHANNELS] {
        return Err(EvalError::Invalid(format!(
            "model expects {:?}, grid has {n} buses",
            model.input_shape()
        )));
    }
    let oracle = || assess_security(grid, snapshot, dynp, contingencies, threshold);
    let cnn = || -> Result<usize, EvalError> {
        let mut img = Tensor::<T>::zeros(&[1, n, n, CHANNELS]);
        encode_into(snapshot, &topo, norms, img.data_mut());
        let probs = model.forward_single(&img)?;
        Ok(predict(&probs)[0])
    };

    let oracle_safe = oracle()?.is_safe;
    let start = Instant::now();
    for _ in 0..repetitions {
        black_box(oracle()?);
    }
    let oracle_ms = start.elapsed().as_secs_f64() * 1e3 / repetitions as f64;

    let cnn_safe = cnn()? == 1;
    let start = Instant::now();
    for _ in 0..repetitions {
        black_box(cnn()?);
    }
    let cnn_ms = start.elapsed().as_secs_f64() * 1e3 / repetitions as f64;

    Ok(BenchReport {
        repetitions,
        contingencies: contingencies.len(),
        oracle_ms,
        cnn_ms,
        ratio: oracle_ms / cnn_ms,
        oracle_safe,
        cnn_safe,
    })
}
