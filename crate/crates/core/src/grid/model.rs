use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    Pv,
    Pq,
}

/// A network node. Loads and shunts are per-unit on the grid base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub index: usize,
    #[serde(rename = "type")]
    pub bus_type: BusType,
    #[serde(default)]
    pub p_load: f64,
    #[serde(default)]
    pub q_load: f64,
    #[serde(default)]
    pub g_shunt: f64,
    #[serde(default)]
    pub b_shunt: f64,
    #[serde(default = "one")]
    pub v_setpoint: f64,
}

/// A pi-model branch. `b` is the total charging susceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: usize,
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "yes")]
    pub in_service: bool,
}

impl Line {
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(self.r, self.x)
    }

    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.from_bus == a && self.to_bus == b) || (self.from_bus == b && self.to_bus == a)
    }
}

/// A synchronous machine with its classical-model dynamic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Scheduled active output (ignored at the slack bus).
    pub p_gen: f64,
    /// Inertia constant in seconds.
    pub h: f64,
    /// Damping coefficient, pu torque per pu speed.
    pub d: f64,
    /// Transient reactance.
    pub xd_prime: f64,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn sixty() -> f64 {
    60.0
}

/// On-disk grid schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    pub base_mva: f64,
    #[serde(default = "sixty")]
    pub frequency: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
}

/// A validated static network description.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    pub base_mva: f64,
    /// Nominal system frequency in Hz.
    pub frequency: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub slack_bus: usize,
}

impl GridModel {
    pub fn from_file(file: GridFile) -> Result<Self, GridError> {
        let GridFile {
            base_mva,
            frequency,
            mut buses,
            lines,
            generators,
        } = file;

        if !(base_mva.is_finite() && base_mva > 0.0) {
            return Err(GridError::Validation(format!(
                "base_mva must be positive, got {base_mva}"
            )));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(GridError::Validation(format!(
                "frequency must be positive, got {frequency}"
            )));
        }
        if buses.is_empty() {
            return Err(GridError::Validation("grid has no buses".into()));
        }

        buses.sort_by_key(|b| b.index);
        for (pos, bus) in buses.iter().enumerate() {
            if bus.index != pos {
                return Err(if pos > 0 && buses[pos - 1].index == bus.index {
                    GridError::Validation(format!("duplicate bus index {}", bus.index))
                } else {
                    GridError::Validation(format!("bus indices not contiguous at {}", bus.index))
                });
            }
            let values = [
                bus.p_load,
                bus.q_load,
                bus.g_shunt,
                bus.b_shunt,
                bus.v_setpoint,
            ];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(GridError::Validation(format!(
                    "bus {} has non-finite data",
                    bus.index
                )));
            }
            if bus.bus_type != BusType::Pq && bus.v_setpoint <= 0.0 {
                return Err(GridError::Validation(format!(
                    "bus {} voltage setpoint must be positive",
                    bus.index
                )));
            }
        }
        let n = buses.len();

        let slack: Vec<usize> = buses
            .iter()
            .filter(|b| b.bus_type == BusType::Slack)
            .map(|b| b.index)
            .collect();
        if slack.len() != 1 {
            return Err(GridError::Validation(format!(
                "expected exactly one slack bus, found {}",
                slack.len()
            )));
        }

        for line in &lines {
            if line.from_bus >= n || line.to_bus >= n {
                return Err(GridError::Validation(format!(
                    "line {}-{} references a missing bus",
                    line.from_bus, line.to_bus
                )));
            }
            if line.from_bus == line.to_bus {
                return Err(GridError::Validation(format!(
                    "line loops on bus {}",
                    line.from_bus
                )));
            }
            if line.x == 0.0 || ![line.r, line.x, line.b].iter().all(|v| v.is_finite()) {
                return Err(GridError::Validation(format!(
                    "line {}-{} needs finite data and non-zero reactance",
                    line.from_bus, line.to_bus
                )));
            }
        }

        let mut gen_at = vec![None; n];
        for (k, g) in generators.iter().enumerate() {
            if g.bus >= n {
                return Err(GridError::Validation(format!(
                    "generator {k} on missing bus {}",
                    g.bus
                )));
            }
            if gen_at[g.bus].replace(k).is_some() {
                return Err(GridError::Validation(format!(
                    "more than one generator on bus {}",
                    g.bus
                )));
            }
            if !(g.h > 0.0 && g.d >= 0.0 && g.xd_prime > 0.0 && g.p_gen.is_finite()) {
                return Err(GridError::Validation(format!(
                    "generator {k} needs h > 0, d >= 0, xd_prime > 0"
                )));
            }
        }
        for bus in &buses {
            let has_gen = gen_at[bus.index].is_some();
            match (bus.bus_type, has_gen) {
                (BusType::Pq, true) => {
                    return Err(GridError::Validation(format!(
                        "PQ bus {} carries a generator",
                        bus.index
                    )))
                }
                (BusType::Slack | BusType::Pv, false) => {
                    return Err(GridError::Validation(format!(
                        "voltage-controlled bus {} has no generator",
                        bus.index
                    )))
                }
                _ => {}
            }
        }

        let grid = GridModel {
            base_mva,
            frequency,
            buses,
            lines: merge_parallel(lines),
            generators,
            slack_bus: slack[0],
        };
        if !grid.is_connected() {
            return Err(GridError::Validation("line graph is not connected".into()));
        }
        Ok(grid)
    }

    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let file: GridFile =
            serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> GridFile {
        GridFile {
            base_mva: self.base_mva,
            frequency: self.frequency,
            buses: self.buses.clone(),
            lines: self.lines.clone(),
            generators: self.generators.clone(),
        }
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Generator index at each bus, if any.
    pub fn generator_at(&self) -> Vec<Option<usize>> {
        let mut at = vec![None; self.n_buses()];
        for (k, g) in self.generators.iter().enumerate() {
            at[g.bus] = Some(k);
        }
        at
    }

    /// Connectivity over in-service lines, optionally ignoring one more line.
    pub(crate) fn connected_without(&self, skip: Option<usize>) -> bool {
        let n = self.n_buses();
        let mut adj = vec![Vec::new(); n];
        for (id, l) in self.lines.iter().enumerate() {
            if l.in_service && Some(id) != skip {
                adj[l.from_bus].push(l.to_bus);
                adj[l.to_bus].push(l.from_bus);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    pub fn is_connected(&self) -> bool {
        self.connected_without(None)
    }

    pub fn topology(&self) -> Topology {
        Topology {
            n_buses: self.n_buses(),
            lines: self
                .lines
                .iter()
                .map(|l| (l.from_bus, l.to_bus, l.in_service))
                .collect(),
        }
    }
}

/// Bus count and directed line endpoints; everything the image encoder needs from a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub n_buses: usize,
    /// `(from, to, in_service)` per line, in line-id order.
    pub lines: Vec<(usize, usize, bool)>,
}

impl Topology {
    pub fn in_service(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.2)
            .map(|(id, l)| (id, l.0, l.1))
    }
}

/// Collapses lines sharing a bus pair into one equivalent branch.
fn merge_parallel(lines: Vec<Line>) -> Vec<Line> {
    let mut groups: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut merged: Vec<Line> = Vec::with_capacity(lines.len());
    for line in lines {
        let key = (
            line.from_bus.min(line.to_bus),
            line.from_bus.max(line.to_bus),
        );
        match groups.get(&key) {
            None => {
                groups.insert(key, merged.len());
                merged.push(line);
            }
            Some(&slot) => {
                let first = &mut merged[slot];
                match (first.in_service, line.in_service) {
                    (_, false) => {}
                    (false, true) => {
                        *first = line;
                    }
                    (true, true) => {
                        let y = first.series_admittance() + line.series_admittance();
                        let z = Complex64::new(1.0, 0.0) / y;
                        first.r = z.re;
                        first.x = z.im;
                        first.b += line.b;
                    }
                }
            }
        }
    }
    merged
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<GridModel, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| GridError::Parse(format!("{}: {e}", path.display())))?;
    GridModel::from_json(&text)
}
