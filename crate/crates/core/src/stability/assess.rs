use std::fmt;

use super::{
    damping_ratios, eigenvalues, linearize_swing, reduce_network, DynamicParams, ModeSet,
    StabilityError,
};
use crate::grid::{
    apply_contingency, solve_power_flow, GridError, GridModel, Injections, Snapshot,
};

/// Minimum damping ratio for a secure operating point.
pub const DEFAULT_THRESHOLD: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Base,
    Outage(usize),
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Case::Base => write!(f, "base"),
            Case::Outage(id) => write!(f, "line {id}"),
        }
    }
}

/// What set the worst case's damping value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cause {
    Damping,
    /// A real eigenvalue in the right half-plane; scored as damping -1.
    UnstableRealMode,
    /// Post-outage power flow failed; scored as damping -1.
    NoConvergence,
    /// No oscillatory mode at all; scored as damping +1.
    NoOscillation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityLabel {
    pub is_safe: bool,
    pub min_damping: f64,
    pub worst: Case,
    pub cause: Cause,
}

/// Small-signal analysis of one solved snapshot on one topology.
pub fn analyze_snapshot(
    grid: &GridModel,
    snap: &Snapshot,
    dynp: &DynamicParams,
) -> Result<ModeSet, StabilityError> {
    let net = reduce_network(grid, snap, dynp)?;
    let a = linearize_swing(&net, dynp);
    let eigs = eigenvalues(&a)?;
    Ok(damping_ratios(&eigs))
}

fn score(modes: &ModeSet) -> (f64, Cause) {
    if modes.has_unstable_real_mode() {
        return (-1.0, Cause::UnstableRealMode);
    }
    match modes.min_damping() {
        Some(z) => (z, Cause::Damping),
        None => (1.0, Cause::NoOscillation),
    }
}

/// N-1 small-signal screening: safe iff the minimum damping ratio over the base case and
/// every listed outage is at least `threshold`.
pub fn assess_security(
    grid: &GridModel,
    snap: &Snapshot,
    dynp: &DynamicParams,
    contingencies: &[usize],
    threshold: f64,
) -> Result<SecurityLabel, StabilityError> {
    let base_modes = analyze_snapshot(grid, snap, dynp).map_err(|e| e.during(Case::Base))?;
    let (mut min_damping, mut cause) = score(&base_modes);
    let mut worst = Case::Base;

    let inj = Injections::from_snapshot(grid, snap);
    for &line in contingencies {
        let case = Case::Outage(line);
        let outaged =
            apply_contingency(grid, line).map_err(|e| StabilityError::Grid(e).during(case))?;
        let (z, c) = match solve_power_flow(&outaged, &inj) {
            Ok(pf) => {
                score(&analyze_snapshot(&outaged, &pf.snapshot, dynp).map_err(|e| e.during(case))?)
            }
            Err(GridError::NonConvergence { .. }) => (-1.0, Cause::NoConvergence),
            Err(e) => return Err(StabilityError::Grid(e).during(case)),
        };
        if z < min_damping {
            min_damping = z;
            cause = c;
            worst = case;
        }
    }
    Ok(SecurityLabel {
        is_safe: min_damping >= threshold,
        min_damping,
        worst,
        cause,
    })
}
