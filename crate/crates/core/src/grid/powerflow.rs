use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{build_ybus, BusType, GridError, GridModel};

pub const PF_TOLERANCE: f64 = 1e-8;
pub const PF_MAX_ITERATIONS: usize = 30;

/// Per-bus demand and per-generator active dispatch for one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injections {
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    /// Indexed like `GridModel::generators`; the slack entry is only a target.
    pub p_gen: Vec<f64>,
}

impl Injections {
    pub fn base(grid: &GridModel) -> Self {
        Self {
            p_load: grid.buses.iter().map(|b| b.p_load).collect(),
            q_load: grid.buses.iter().map(|b| b.q_load).collect(),
            p_gen: grid.generators.iter().map(|g| g.p_gen).collect(),
        }
    }

    /// Recovers the demand and dispatch that produced a solved snapshot.
    pub fn from_snapshot(grid: &GridModel, snap: &Snapshot) -> Self {
        Self {
            p_load: snap.p_load.clone(),
            q_load: snap.q_load.clone(),
            p_gen: grid
                .generators
                .iter()
                .map(|g| snap.p_load[g.bus] - snap.p[g.bus])
                .collect(),
        }
    }

    fn validate(&self, grid: &GridModel) -> Result<(), GridError> {
        let n = grid.n_buses();
        if self.p_load.len() != n
            || self.q_load.len() != n
            || self.p_gen.len() != grid.generators.len()
        {
            return Err(GridError::Validation(
                "injection vector lengths do not match grid".into(),
            ));
        }
        let all = self.p_load.iter().chain(&self.q_load).chain(&self.p_gen);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(GridError::Validation("non-finite injection".into()));
        }
        Ok(())
    }
}

/// One solved operating point. Bus powers are net demand (load minus generation).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    /// Flow leaving the from-end of each line, in line-id order. Zero when out of service.
    pub p_from: Vec<f64>,
    pub p_to: Vec<f64>,
    pub q_from: Vec<f64>,
    pub q_to: Vec<f64>,
}

impl Snapshot {
    pub fn n_buses(&self) -> usize {
        self.v.len()
    }

    pub fn n_lines(&self) -> usize {
        self.p_from.len()
    }

    pub fn voltage(&self, bus: usize) -> Complex64 {
        Complex64::from_polar(self.v[bus], self.theta[bus])
    }

    pub fn voltages(&self) -> Vec<Complex64> {
        (0..self.n_buses()).map(|i| self.voltage(i)).collect()
    }

    /// Complex power delivered by the machine at each generator, in generator order.
    pub fn generator_output(&self, grid: &GridModel) -> Vec<Complex64> {
        grid.generators
            .iter()
            .map(|g| {
                Complex64::new(
                    self.p_load[g.bus] - self.p[g.bus],
                    self.q_load[g.bus] - self.q[g.bus],
                )
            })
            .collect()
    }

    /// Net injection per bus (generation minus load).
    pub fn injection(&self, bus: usize) -> Complex64 {
        Complex64::new(-self.p[bus], -self.q[bus])
    }
}

#[derive(Debug, Clone)]
pub struct PowerFlow {
    pub snapshot: Snapshot,
    /// Newton corrections applied before the mismatch fell under tolerance.
    pub iterations: usize,
    pub max_mismatch: f64,
}

/// Complex power injected at every bus for a voltage profile.
pub fn bus_injections(ybus: &DMatrix<Complex64>, voltages: &[Complex64]) -> Vec<Complex64> {
    let n = voltages.len();
    (0..n)
        .map(|i| {
            let current: Complex64 = (0..n).map(|k| ybus[(i, k)] * voltages[k]).sum();
            voltages[i] * current.conj()
        })
        .collect()
}

/// Largest absolute P mismatch at non-slack buses and Q mismatch at PQ buses.
pub fn max_mismatch(grid: &GridModel, inj: &Injections, snap: &Snapshot) -> f64 {
    let ybus = build_ybus(grid);
    let s = bus_injections(&ybus, &snap.voltages());
    let (p_sch, q_sch) = scheduled(grid, inj);
    grid.buses
        .iter()
        .flat_map(|b| {
            let dp = match b.bus_type {
                BusType::Slack => 0.0,
                _ => (s[b.index].re - p_sch[b.index]).abs(),
            };
            let dq = match b.bus_type {
                BusType::Pq => (s[b.index].im - q_sch[b.index]).abs(),
                _ => 0.0,
            };
            [dp, dq]
        })
        .fold(0.0, f64::max)
}

fn scheduled(grid: &GridModel, inj: &Injections) -> (Vec<f64>, Vec<f64>) {
    let mut p: Vec<f64> = inj.p_load.iter().map(|x| -x).collect();
    let q: Vec<f64> = inj.q_load.iter().map(|x| -x).collect();
    for (g, pg) in grid.generators.iter().zip(&inj.p_gen) {
        p[g.bus] += pg;
    }
    (p, q)
}

/// Polar Newton-Raphson from a flat start.
pub fn solve_power_flow(grid: &GridModel, inj: &Injections) -> Result<PowerFlow, GridError> {
    solve_power_flow_with(grid, inj, PF_TOLERANCE, PF_MAX_ITERATIONS)
}

pub fn solve_power_flow_with(
    grid: &GridModel,
    inj: &Injections,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlow, GridError> {
    inj.validate(grid)?;
    let n = grid.n_buses();
    let ybus = build_ybus(grid);
    let (p_sch, q_sch) = scheduled(grid, inj);

    let mut vm: Vec<f64> = grid
        .buses
        .iter()
        .map(|b| {
            if b.bus_type == BusType::Pq {
                1.0
            } else {
                b.v_setpoint
            }
        })
        .collect();
    let mut va = vec![0.0; n];

    // Unknown ordering: angles of non-slack buses, then magnitudes of PQ buses.
    let pvpq: Vec<usize> = (0..n)
        .filter(|&i| grid.buses[i].bus_type != BusType::Slack)
        .collect();
    let pq: Vec<usize> = (0..n)
        .filter(|&i| grid.buses[i].bus_type == BusType::Pq)
        .collect();
    let mut ang_pos = vec![usize::MAX; n];
    let mut mag_pos = vec![usize::MAX; n];
    for (k, &i) in pvpq.iter().enumerate() {
        ang_pos[i] = k;
    }
    for (k, &i) in pq.iter().enumerate() {
        mag_pos[i] = pvpq.len() + k;
    }
    let dim = pvpq.len() + pq.len();

    let mut iterations = 0;
    loop {
        let volts: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(vm[i], va[i]))
            .collect();
        let s = bus_injections(&ybus, &volts);

        let mut f = DVector::zeros(dim);
        for (k, &i) in pvpq.iter().enumerate() {
            f[k] = s[i].re - p_sch[i];
        }
        for (k, &i) in pq.iter().enumerate() {
            f[pvpq.len() + k] = s[i].im - q_sch[i];
        }
        let worst = f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if !worst.is_finite() {
            return Err(GridError::NonConvergence { iterations });
        }
        if worst < tol {
            let snapshot = assemble_snapshot(grid, inj, &vm, &va, &s);
            return Ok(PowerFlow {
                snapshot,
                iterations,
                max_mismatch: worst,
            });
        }
        if iterations == max_iter {
            return Err(GridError::NonConvergence { iterations });
        }

        let mut jac = DMatrix::zeros(dim, dim);
        for &i in &pvpq {
            let (rp, rq) = (ang_pos[i], mag_pos[i]);
            for k in 0..n {
                let y = ybus[(i, k)];
                if y == Complex64::new(0.0, 0.0) && i != k {
                    continue;
                }
                let (g, b) = (y.re, y.im);
                if i == k {
                    let (pi, qi) = (s[i].re, s[i].im);
                    jac[(rp, ang_pos[i])] = -qi - b * vm[i] * vm[i];
                    if rq != usize::MAX {
                        jac[(rq, ang_pos[i])] = pi - g * vm[i] * vm[i];
                        jac[(rp, rq)] = pi / vm[i] + g * vm[i];
                        jac[(rq, rq)] = qi / vm[i] - b * vm[i];
                    }
                } else {
                    let t = va[i] - va[k];
                    let (c, sn) = (t.cos(), t.sin());
                    let gs_bc = g * sn - b * c;
                    let gc_bs = g * c + b * sn;
                    if ang_pos[k] != usize::MAX {
                        jac[(rp, ang_pos[k])] = vm[i] * vm[k] * gs_bc;
                        if rq != usize::MAX {
                            jac[(rq, ang_pos[k])] = -vm[i] * vm[k] * gc_bs;
                        }
                    }
                    if mag_pos[k] != usize::MAX {
                        jac[(rp, mag_pos[k])] = vm[i] * gc_bs;
                        if rq != usize::MAX {
                            jac[(rq, mag_pos[k])] = vm[i] * gs_bc;
                        }
                    }
                }
            }
        }

        let dx = jac
            .lu()
            .solve(&(-f))
            .ok_or(GridError::NonConvergence { iterations })?;
        for &i in &pvpq {
            va[i] += dx[ang_pos[i]];
        }
        for &i in &pq {
            vm[i] += dx[mag_pos[i]];
        }
        iterations += 1;
        if vm.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(GridError::NonConvergence { iterations });
        }
    }
}

fn assemble_snapshot(
    grid: &GridModel,
    inj: &Injections,
    vm: &[f64],
    va: &[f64],
    s: &[Complex64],
) -> Snapshot {
    let volts: Vec<Complex64> = vm
        .iter()
        .zip(va)
        .map(|(&m, &a)| Complex64::from_polar(m, a))
        .collect();
    let nl = grid.lines.len();
    let (mut p_from, mut p_to, mut q_from, mut q_to) =
        (vec![0.0; nl], vec![0.0; nl], vec![0.0; nl], vec![0.0; nl]);
    for (id, line) in grid.lines.iter().enumerate() {
        if !line.in_service {
            continue;
        }
        let (vf, vt) = (volts[line.from_bus], volts[line.to_bus]);
        let ys = line.series_admittance();
        let jb = Complex64::new(0.0, line.b / 2.0);
        let s_ft = vf * ((vf - vt) * ys + vf * jb).conj();
        let s_tf = vt * ((vt - vf) * ys + vt * jb).conj();
        p_from[id] = s_ft.re;
        q_from[id] = s_ft.im;
        p_to[id] = s_tf.re;
        q_to[id] = s_tf.im;
    }
    Snapshot {
        v: vm.to_vec(),
        theta: va.to_vec(),
        p: s.iter().map(|x| -x.re).collect(),
        q: s.iter().map(|x| -x.im).collect(),
        p_load: inj.p_load.clone(),
        q_load: inj.q_load.clone(),
        p_from,
        p_to,
        q_from,
        q_to,
    }
}

/// Active power consumed by line series resistances.
pub fn series_losses(grid: &GridModel, snap: &Snapshot) -> f64 {
    grid.lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.in_service)
        .map(|(id, _)| snap.p_from[id] + snap.p_to[id])
        .sum()
}

/// Active power absorbed by bus shunt conductances.
pub fn shunt_losses(grid: &GridModel, snap: &Snapshot) -> f64 {
    grid.buses
        .iter()
        .map(|b| b.g_shunt * snap.v[b.index].powi(2))
        .sum()
}
