//! Dataset file: little-endian header (magic `PQVD`, version, bus count, sample count,
//! channel count, the three norms, line endpoints, split index arrays) followed by one
//! raw record per sample (label, worst damping, bus and line vectors).

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt, LE};

use super::{EncodeError, Label, LabeledDataset, NormConstants, Sample, Splits, CHANNELS};
use crate::grid::{Snapshot, Topology};

const MAGIC: &[u8; 4] = b"PQVD";
pub const DATASET_VERSION: u32 = 1;

fn write_vec(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    v.iter().try_for_each(|&x| w.write_f64::<LE>(x))
}

fn read_vec(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    (0..n).map(|_| r.read_f64::<LE>()).collect()
}

fn write_indices(w: &mut impl Write, idx: &[usize]) -> std::io::Result<()> {
    w.write_u64::<LE>(idx.len() as u64)?;
    idx.iter().try_for_each(|&i| w.write_u64::<LE>(i as u64))
}

fn read_indices(r: &mut impl Read, limit: usize) -> Result<Vec<usize>, EncodeError> {
    let n = r.read_u64::<LE>()? as usize;
    if n > limit {
        return Err(EncodeError::Format(format!(
            "split of {n} exceeds {limit} samples"
        )));
    }
    (0..n)
        .map(|_| {
            let i = r.read_u64::<LE>()? as usize;
            if i >= limit {
                return Err(EncodeError::Format(format!("split index {i} out of range")));
            }
            Ok(i)
        })
        .collect()
}

pub fn write_dataset(ds: &LabeledDataset, path: &Path) -> Result<(), EncodeError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

fn write_to(ds: &LabeledDataset, w: &mut impl Write) -> Result<(), EncodeError> {
    let n = ds.n_buses();
    let n_lines = ds.topology.lines.len();
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(DATASET_VERSION)?;
    w.write_u32::<LE>(n as u32)?;
    w.write_u64::<LE>(ds.samples.len() as u64)?;
    w.write_u32::<LE>(CHANNELS as u32)?;
    write_vec(w, &[ds.norms.max_p, ds.norms.max_q, ds.norms.max_v])?;
    w.write_u32::<LE>(n_lines as u32)?;
    for &(f, t, on) in &ds.topology.lines {
        w.write_u32::<LE>(f as u32)?;
        w.write_u32::<LE>(t as u32)?;
        w.write_u8(on as u8)?;
    }
    write_indices(w, &ds.splits.train)?;
    write_indices(w, &ds.splits.val)?;
    write_indices(w, &ds.splits.test)?;
    for s in &ds.samples {
        let snap = &s.snapshot;
        if snap.n_buses() != n || snap.n_lines() != n_lines {
            return Err(EncodeError::Mismatch(
                "snapshot size differs from dataset topology".into(),
            ));
        }
        w.write_u8(s.label.index() as u8)?;
        w.write_f64::<LE>(s.min_damping)?;
        for v in [
            &snap.v,
            &snap.theta,
            &snap.p,
            &snap.q,
            &snap.p_load,
            &snap.q_load,
        ] {
            write_vec(w, v)?;
        }
        for v in [&snap.p_from, &snap.p_to, &snap.q_from, &snap.q_to] {
            write_vec(w, v)?;
        }
    }
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset, EncodeError> {
    read_from(&mut BufReader::new(File::open(path)?)).map_err(|e| match e {
        EncodeError::Io(io) if io.kind() == ErrorKind::UnexpectedEof => {
            EncodeError::Format("truncated dataset file".into())
        }
        e => e,
    })
}

fn read_from(r: &mut impl Read) -> Result<LabeledDataset, EncodeError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(EncodeError::Format(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LE>()?;
    if version != DATASET_VERSION {
        return Err(EncodeError::Format(format!(
            "unsupported dataset version {version}"
        )));
    }
    let n = r.read_u32::<LE>()? as usize;
    let count = r.read_u64::<LE>()? as usize;
    let channels = r.read_u32::<LE>()? as usize;
    if channels != CHANNELS {
        return Err(EncodeError::Format(format!(
            "expected {CHANNELS} channels, found {channels}"
        )));
    }
    let nv = read_vec(r, 3)?;
    let norms = NormConstants {
        max_p: nv[0],
        max_q: nv[1],
        max_v: nv[2],
    };
    let n_lines = r.read_u32::<LE>()? as usize;
    let mut lines = Vec::with_capacity(n_lines.min(1 << 20));
    for _ in 0..n_lines {
        let f = r.read_u32::<LE>()? as usize;
        let t = r.read_u32::<LE>()? as usize;
        let on = r.read_u8()? != 0;
        if f >= n || t >= n {
            return Err(EncodeError::Format(format!(
                "line endpoint ({f}, {t}) outside {n} buses"
            )));
        }
        lines.push((f, t, on));
    }
    let splits = Splits {
        train: read_indices(r, count)?,
        val: read_indices(r, count)?,
        test: read_indices(r, count)?,
    };
    let mut seen = vec![false; count];
    for &i in splits.train.iter().chain(&splits.val).chain(&splits.test) {
        if std::mem::replace(&mut seen[i], true) {
            return Err(EncodeError::Format(format!(
                "index {i} appears in two splits"
            )));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(EncodeError::Format(
            "splits do not cover every sample".into(),
        ));
    }

    let mut samples = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        let label = match r.read_u8()? {
            0 => Label::Unsafe,
            1 => Label::Safe,
            b => return Err(EncodeError::Format(format!("invalid label byte {b}"))),
        };
        let min_damping = r.read_f64::<LE>()?;
        let mut bus = (0..6)
            .map(|_| read_vec(r, n))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter();
        let mut line = (0..4)
            .map(|_| read_vec(r, n_lines))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter();
        let mut next_bus = || bus.next().expect("six bus vectors");
        let mut next_line = || line.next().expect("four line vectors");
        let snapshot = Snapshot {
            v: next_bus(),
            theta: next_bus(),
            p: next_bus(),
            q: next_bus(),
            p_load: next_bus(),
            q_load: next_bus(),
            p_from: next_line(),
            p_to: next_line(),
            q_from: next_line(),
            q_to: next_line(),
        };
        samples.push(Sample {
            snapshot,
            label,
            min_damping,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(EncodeError::Format("trailing bytes after dataset".into()));
    }
    Ok(LabeledDataset {
        topology: Topology { n_buses: n, lines },
        samples,
        norms,
        splits,
    })
}
