use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DynamicParams, ReducedNetwork};

/// Electrical output `P_ei = sum_j E_i E_j (G_ij cos d_ij + B_ij sin d_ij)` at given rotor angles.
pub fn electrical_power(y: &DMatrix<Complex64>, e_mag: &[f64], delta: &[f64]) -> Vec<f64> {
    let m = e_mag.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let d = delta[i] - delta[j];
                    let yij = y[(i, j)];
                    e_mag[i] * e_mag[j] * (yij.re * d.cos() + yij.im * d.sin())
                })
                .sum()
        })
        .collect()
}

/// Synchronising-power matrix `dP_e/d delta`, evaluated analytically.
pub fn synchronizing_matrix(y: &DMatrix<Complex64>, e_mag: &[f64], delta: &[f64]) -> DMatrix<f64> {
    let m = e_mag.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i == j {
                continue;
            }
            let d = delta[i] - delta[j];
            let yij = y[(i, j)];
            let off = e_mag[i] * e_mag[j] * (yij.re * d.sin() - yij.im * d.cos());
            k[(i, j)] = off;
            diag -= off;
        }
        k[(i, i)] = diag;
    }
    k
}

/// State matrix of the linearised classical swing equations.
///
/// States are rotor angles (rad) followed by speed deviations (rad/s):
/// `A = [[0, I], [-M^-1 K, -M^-1 D]]` with `M_ii = 2 H_i / w_s` and `D_ii = d_i / w_s`.
pub fn linearize_swing(net: &ReducedNetwork, dynp: &DynamicParams) -> DMatrix<f64> {
    let m = net.emf.len();
    let e_mag: Vec<f64> = net.emf.iter().map(|e| e.norm()).collect();
    let delta: Vec<f64> = net.emf.iter().map(|e| e.arg()).collect();
    let k = synchronizing_matrix(&net.y, &e_mag, &delta);

    let mut a = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        a[(i, m + i)] = 1.0;
        let mp = &dynp.machines[i];
        let inertia = 2.0 * mp.h / dynp.omega_s;
        for j in 0..m {
            a[(m + i, j)] = -k[(i, j)] / inertia;
        }
        a[(m + i, m + i)] = -(mp.d / dynp.omega_s) / inertia;
    }
    a
}
