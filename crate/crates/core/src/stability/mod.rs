//! Classical-model small-signal screening used as the labelling oracle.

mod assess;
mod modes;
mod reduce;
mod swing;

pub use assess::{
    analyze_snapshot, assess_security, Case, Cause, SecurityLabel, DEFAULT_THRESHOLD,
};
pub use modes::{damping_ratio, damping_ratios, eigenvalues, ModeSet, ZERO_MODE_TOL};
pub use reduce::{
    augmented_admittance, internal_emfs, kron_reduce, load_admittances, reduce_network,
    ReducedNetwork,
};
pub use swing::{electrical_power, linearize_swing, synchronizing_matrix};

use crate::grid::{GridError, GridModel};

#[derive(Debug, Clone, PartialEq)]
pub struct MachineParams {
    pub h: f64,
    pub d: f64,
    pub xd_prime: f64,
}

/// Per-generator dynamic data plus synchronous speed in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicParams {
    pub machines: Vec<MachineParams>,
    pub omega_s: f64,
}

impl DynamicParams {
    pub fn from_grid(grid: &GridModel) -> Self {
        Self {
            machines: grid
                .generators
                .iter()
                .map(|g| MachineParams {
                    h: g.h,
                    d: g.d,
                    xd_prime: g.xd_prime,
                })
                .collect(),
            omega_s: 2.0 * std::f64::consts::PI * grid.frequency,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StabilityError {
    #[error("{generators} generators but dynamic data for {params}")]
    MissingDynamics { generators: usize, params: usize },
    #[error("singular bus block during network reduction")]
    SingularElimination,
    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("oracle failure in case {case}: {source}")]
    InCase {
        case: Case,
        #[source]
        source: Box<StabilityError>,
    },
}

impl StabilityError {
    fn during(self, case: Case) -> Self {
        match self {
            e @ StabilityError::InCase { .. } => e,
            e => StabilityError::InCase {
                case,
                source: Box::new(e),
            },
        }
    }
}
