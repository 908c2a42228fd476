use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EncodeError;
use crate::grid::{Snapshot, Topology};
use crate::Scalar;

pub const CHANNELS: usize = 3;

/// Dataset-wide maxima used to scale each channel into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstants {
    pub max_p: f64,
    pub max_q: f64,
    pub max_v: f64,
}

/// `N x N x 3` image in row-major `(i, j, channel)` order with channels P, Q, V.
#[derive(Debug, Clone, PartialEq)]
pub struct PqvImage<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> PqvImage<T> {
    pub fn get(&self, i: usize, j: usize, ch: usize) -> T {
        self.data[(i * self.n + j) * CHANNELS + ch]
    }

    /// Nonzero off-diagonal cells in one channel.
    pub fn off_diagonal_nonzeros(&self, ch: usize) -> usize {
        let n = self.n;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.get(i, j, ch) != T::zero())
            .count()
    }
}

/// Unnormalised cell values `(i, j, [p, q, v])` before the absolute value is taken:
/// bus diagonals followed by two cells per in-service line.
pub fn raw_channels(snap: &Snapshot, topo: &Topology) -> Vec<(usize, usize, [f64; 3])> {
    let mut cells = Vec::with_capacity(snap.n_buses() + 2 * topo.lines.len());
    for i in 0..snap.n_buses() {
        cells.push((i, i, [snap.p[i], snap.q[i], snap.v[i]]));
    }
    for (id, f, t) in topo.in_service() {
        let drop: Complex64 = snap.voltage(f) - snap.voltage(t);
        cells.push((f, t, [snap.p_from[id], snap.q_from[id], drop.norm()]));
        cells.push((t, f, [snap.p_to[id], snap.q_to[id], drop.norm()]));
    }
    cells
}

fn check(snap: &Snapshot, topo: &Topology) -> Result<(), EncodeError> {
    if snap.n_buses() != topo.n_buses || snap.n_lines() != topo.lines.len() {
        return Err(EncodeError::Mismatch(format!(
            "snapshot has {} buses / {} lines, topology {} / {}",
            snap.n_buses(),
            snap.n_lines(),
            topo.n_buses,
            topo.lines.len()
        )));
    }
    Ok(())
}

/// Per-channel maximum absolute raw entry over all snapshots.
pub fn compute_norms<'a>(
    snapshots: impl IntoIterator<Item = &'a Snapshot>,
    topo: &Topology,
) -> Result<NormConstants, EncodeError> {
    let mut max = [0.0f64; 3];
    let mut seen = false;
    for snap in snapshots {
        check(snap, topo)?;
        seen = true;
        for (_, _, vals) in raw_channels(snap, topo) {
            for (m, v) in max.iter_mut().zip(vals) {
                *m = m.max(v.abs());
            }
        }
    }
    if !seen {
        return Err(EncodeError::Empty);
    }
    for (m, name) in max.iter().zip(["P", "Q", "V"]) {
        if !(*m > 0.0) || !m.is_finite() {
            return Err(EncodeError::DegenerateChannel(name));
        }
    }
    Ok(NormConstants {
        max_p: max[0],
        max_q: max[1],
        max_v: max[2],
    })
}

/// Writes one normalised image into `out` (length `N * N * 3`), clipping entries at 1.
pub fn encode_into<T: Scalar>(
    snap: &Snapshot,
    topo: &Topology,
    norms: &NormConstants,
    out: &mut [T],
) {
    let n = topo.n_buses;
    assert_eq!(out.len(), n * n * CHANNELS, "image buffer length");
    out.fill(T::zero());
    let scale = [norms.max_p, norms.max_q, norms.max_v];
    for (i, j, vals) in raw_channels(snap, topo) {
        for ch in 0..CHANNELS {
            out[(i * n + j) * CHANNELS + ch] = T::lit((vals[ch].abs() / scale[ch]).min(1.0));
        }
    }
}

pub fn encode_snapshot<T: Scalar>(
    snap: &Snapshot,
    topo: &Topology,
    norms: &NormConstants,
) -> Result<PqvImage<T>, EncodeError> {
    check(snap, topo)?;
    let n = topo.n_buses;
    let mut data = vec![T::zero(); n * n * CHANNELS];
    encode_into(snap, topo, norms, &mut data);
    Ok(PqvImage { n, data })
}
