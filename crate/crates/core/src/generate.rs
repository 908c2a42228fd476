//! Sampling, solving and labelling operating points into a dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncodeError, Label, LabeledDataset, NormScope, Sample};
use crate::grid::{default_contingencies, sample_operating_points, solve_power_flow, GridModel};
use crate::stability::{assess_security, DynamicParams, DEFAULT_THRESHOLD};

/// Smallest usable dataset.
pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub count: usize,
    /// Half-width of the uniform demand factor around the base case.
    pub spread: f64,
    pub seed: u64,
    pub threshold: f64,
    /// Lines to outage; every non-bridge line when absent.
    pub contingencies: Option<Vec<usize>>,
    pub split: [f64; 3],
    pub norm_scope: NormScope,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            count: 10_000,
            spread: 0.4,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            contingencies: None,
            split: [0.7, 0.1, 0.2],
            norm_scope: NormScope::Train,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateStats {
    pub requested: usize,
    /// Base-case power flows that converged.
    pub converged: usize,
    /// Converged points the oracle could not label.
    pub oracle_failures: usize,
    pub safe: usize,
    pub unsafe_: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("only {usable} usable operating points out of {requested}; at least {MIN_SAMPLES} are needed")]
    TooFew { usable: usize, requested: usize },
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Samples `count` demand scenarios, keeps those whose base power flow converges and labels
/// each with the N-1 screening. Points are processed in parallel but kept in draw order.
pub fn generate_dataset(
    grid: &GridModel,
    dynp: &DynamicParams,
    cfg: &GenerateConfig,
) -> Result<(LabeledDataset, GenerateStats), GenerateError> {
    if !(0.0..=1.0).contains(&cfg.spread) {
        return Err(GenerateError::Config(format!(
            "spread {} outside [0, 1]",
            cfg.spread
        )));
    }
    let contingencies = cfg
        .contingencies
        .clone()
        .unwrap_or_else(|| default_contingencies(grid));
    if let Some(&bad) = contingencies.iter().find(|&&l| l >= grid.lines.len()) {
        return Err(GenerateError::Config(format!(
            "contingency line {bad} does not exist"
        )));
    }
    let points = sample_operating_points(grid, cfg.spread, cfg.count, cfg.seed);
    let outcomes: Vec<Option<Option<Sample>>> = points
        .par_iter()
        .map(|inj| {
            let snapshot = solve_power_flow(grid, inj).ok()?.snapshot;
            Some(
                assess_security(grid, &snapshot, dynp, &contingencies, cfg.threshold)
                    .ok()
                    .map(|label| Sample {
                        snapshot,
                        label: Label::from_safe(label.is_safe),
                        min_damping: label.min_damping,
                    }),
            )
        })
        .collect();
    let converged = outcomes.iter().filter(|o| o.is_some()).count();
    let samples: Vec<Sample> = outcomes.into_iter().flatten().flatten().collect();
    let safe = samples.iter().filter(|s| s.label == Label::Safe).count();
    let stats = GenerateStats {
        requested: cfg.count,
        converged,
        oracle_failures: converged - samples.len(),
        safe,
        unsafe_: samples.len() - safe,
    };
    if samples.len() < MIN_SAMPLES {
        return Err(GenerateError::TooFew {
            usable: samples.len(),
            requested: cfg.count,
        });
    }
    let ds = LabeledDataset::build(
        grid.topology(),
        samples,
        cfg.split,
        cfg.seed,
        cfg.norm_scope,
    )?;
    Ok((ds, stats))
}
