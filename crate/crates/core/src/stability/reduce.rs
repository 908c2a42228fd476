use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DynamicParams, StabilityError};
use crate::grid::{build_ybus, CMatrix, GridModel, Snapshot};

/// Classical-model network seen from the generator internal nodes.
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    /// m x m admittance between internal EMFs.
    pub y: CMatrix,
    /// Internal EMF `E' = V + j x'd I` per generator.
    pub emf: Vec<Complex64>,
    /// Mechanical power per generator, equal to its electrical output at equilibrium.
    pub p_mech: Vec<f64>,
}

/// Constant-impedance load admittances from the snapshot demand and voltages.
pub fn load_admittances(snap: &Snapshot) -> Vec<Complex64> {
    (0..snap.n_buses())
        .map(|i| Complex64::new(snap.p_load[i], -snap.q_load[i]) / (snap.v[i] * snap.v[i]))
        .collect()
}

/// Internal EMFs behind transient reactance for the snapshot's generator outputs.
pub fn internal_emfs(grid: &GridModel, snap: &Snapshot, dynp: &DynamicParams) -> Vec<Complex64> {
    snap.generator_output(grid)
        .iter()
        .zip(&grid.generators)
        .zip(&dynp.machines)
        .map(|((s, g), m)| {
            let v = snap.voltage(g.bus);
            let current = (s / v).conj();
            v + Complex64::new(0.0, m.xd_prime) * current
        })
        .collect()
}

/// Admittance over `[internal nodes (m); buses (n)]`: network, loads as impedances,
/// and one `1/(j x'd)` branch per generator.
pub fn augmented_admittance(grid: &GridModel, snap: &Snapshot, dynp: &DynamicParams) -> CMatrix {
    let n = grid.n_buses();
    let m = grid.generators.len();
    let ybus = build_ybus(grid);
    let mut y = CMatrix::zeros(m + n, m + n);
    y.view_mut((m, m), (n, n)).copy_from(&ybus);
    for (i, yl) in load_admittances(snap).into_iter().enumerate() {
        y[(m + i, m + i)] += yl;
    }
    for (k, (g, mp)) in grid.generators.iter().zip(&dynp.machines).enumerate() {
        let yg = Complex64::new(1.0, 0.0) / Complex64::new(0.0, mp.xd_prime);
        let b = m + g.bus;
        y[(k, k)] += yg;
        y[(b, b)] += yg;
        y[(k, b)] -= yg;
        y[(b, k)] -= yg;
    }
    y
}

/// Kron elimination of every bus node, keeping the generator internal nodes.
pub fn reduce_network(
    grid: &GridModel,
    snap: &Snapshot,
    dynp: &DynamicParams,
) -> Result<ReducedNetwork, StabilityError> {
    let m = grid.generators.len();
    if dynp.machines.len() != m {
        return Err(StabilityError::MissingDynamics {
            generators: m,
            params: dynp.machines.len(),
        });
    }
    let full = augmented_admittance(grid, snap, dynp);
    let y = kron_reduce(&full, m)?;

    let emf = internal_emfs(grid, snap, dynp);
    let p_mech = snap.generator_output(grid).iter().map(|s| s.re).collect();
    Ok(ReducedNetwork { y, emf, p_mech })
}

/// `Y_kk - Y_ke Y_ee^-1 Y_ek` where the first `keep` nodes are retained.
pub fn kron_reduce(full: &CMatrix, keep: usize) -> Result<CMatrix, StabilityError> {
    let total = full.nrows();
    let elim = total - keep;
    let ykk = full.view((0, 0), (keep, keep));
    let yke = full.view((0, keep), (keep, elim));
    let yek: DMatrix<Complex64> = full.view((keep, 0), (elim, keep)).into_owned();
    let yee: DMatrix<Complex64> = full.view((keep, keep), (elim, elim)).into_owned();
    let lu = yee.lu();
    let x = lu.solve(&yek).ok_or(StabilityError::SingularElimination)?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(StabilityError::SingularElimination);
    }
    Ok(ykk - yke * x)
}
