//! Static grid model, AC power flow, line outages and operating-point sampling.

mod contingency;
mod model;
mod powerflow;
mod sampler;
mod ybus;

pub use contingency::{apply_contingency, default_contingencies};
pub use model::{load_grid, Bus, BusType, Generator, GridFile, GridModel, Line, Topology};
pub use powerflow::{
    bus_injections, max_mismatch, series_losses, shunt_losses, solve_power_flow,
    solve_power_flow_with, Injections, PowerFlow, Snapshot, PF_MAX_ITERATIONS, PF_TOLERANCE,
};
pub use sampler::sample_operating_points;
pub use ybus::{build_ybus, CMatrix};

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("grid parse error: {0}")]
    Parse(String),
    #[error("grid validation error: {0}")]
    Validation(String),
    #[error("power flow did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("line {0} does not exist")]
    UnknownLine(usize),
    #[error("line {0} is already out of service")]
    OutOfService(usize),
    #[error("removing line {0} islands the network")]
    Islanding(usize),
}
