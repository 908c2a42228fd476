//! Bundled example grids.

use crate::grid::GridModel;

pub const NINE_BUS_JSON: &str = include_str!("../fixtures/nine_bus.json");
pub const THREE_BUS_JSON: &str = include_str!("../fixtures/three_bus.json");

/// The classic 9-bus, 3-machine system (loads at buses 4, 6 and 8).
pub fn nine_bus() -> GridModel {
    GridModel::from_json(NINE_BUS_JSON).expect("bundled 9-bus grid is valid")
}

pub fn three_bus() -> GridModel {
    GridModel::from_json(THREE_BUS_JSON).expect("bundled 3-bus grid is valid")
}

pub const NINE_BUS_HEAVY_JSON: &str = include_str!("../fixtures/nine_bus_heavy.json");

/// The 9-bus system with demand and dispatch raised 50%, which puts the uniform
/// +/-40% sampling box across the N-1 loadability boundary.
pub fn nine_bus_heavy() -> GridModel {
    GridModel::from_json(NINE_BUS_HEAVY_JSON).expect("bundled heavy 9-bus grid is valid")
}
