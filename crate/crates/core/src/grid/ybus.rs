use nalgebra::DMatrix;
use num_complex::Complex64;

use super::GridModel;

pub type CMatrix = DMatrix<Complex64>;

/// Bus admittance matrix over in-service lines and bus shunts.
pub fn build_ybus(grid: &GridModel) -> CMatrix {
    let n = grid.n_buses();
    let mut y = CMatrix::zeros(n, n);
    for line in grid.lines.iter().filter(|l| l.in_service) {
        let (f, t) = (line.from_bus, line.to_bus);
        let ys = line.series_admittance();
        let half_charging = Complex64::new(0.0, line.b / 2.0);
        y[(f, f)] += ys + half_charging;
        y[(t, t)] += ys + half_charging;
        y[(f, t)] -= ys;
        y[(t, f)] -= ys;
    }
    for bus in &grid.buses {
        y[(bus.index, bus.index)] += Complex64::new(bus.g_shunt, bus.b_shunt);
    }
    y
}
