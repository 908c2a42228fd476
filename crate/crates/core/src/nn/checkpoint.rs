//! Binary model file: magic `PQVM`, version, input shape, layer chain, Adam step, then
//! for every parameter tensor in chain order (weights before bias) its values, first
//! moments and second moments as little-endian `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt, LE};

use super::{LayerParams, LayerSpec, Model, NnError, Param};
use crate::Scalar;

const MAGIC: &[u8; 4] = b"PQVM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_spec(w: &mut impl Write, spec: &LayerSpec) -> std::io::Result<()> {
    match *spec {
        LayerSpec::Conv { kernel, filters } => {
            w.write_u8(0)?;
            w.write_u32::<LE>(kernel as u32)?;
            w.write_u32::<LE>(filters as u32)
        }
        LayerSpec::MaxPool => w.write_u8(1),
        LayerSpec::Relu => w.write_u8(2),
        LayerSpec::Flatten => w.write_u8(3),
        LayerSpec::Dense { units } => {
            w.write_u8(4)?;
            w.write_u32::<LE>(units as u32)
        }
        LayerSpec::Dropout { rate } => {
            w.write_u8(5)?;
            w.write_f64::<LE>(rate)
        }
        LayerSpec::Softmax => w.write_u8(6),
    }
}

fn read_spec(r: &mut impl Read) -> Result<LayerSpec, NnError> {
    Ok(match r.read_u8()? {
        0 => LayerSpec::Conv {
            kernel: r.read_u32::<LE>()? as usize,
            filters: r.read_u32::<LE>()? as usize,
        },
        1 => LayerSpec::MaxPool,
        2 => LayerSpec::Relu,
        3 => LayerSpec::Flatten,
        4 => LayerSpec::Dense {
            units: r.read_u32::<LE>()? as usize,
        },
        5 => LayerSpec::Dropout {
            rate: r.read_f64::<LE>()?,
        },
        6 => LayerSpec::Softmax,
        t => return Err(NnError::Format(format!("unknown layer tag {t}"))),
    })
}

fn write_floats<T: Scalar>(w: &mut impl Write, v: &[T]) -> std::io::Result<()> {
    for &x in v {
        w.write_f32::<LE>(x.to_f32().unwrap_or(f32::NAN))?;
    }
    Ok(())
}

fn read_floats<T: Scalar>(r: &mut impl Read, n: usize) -> std::io::Result<Vec<T>> {
    (0..n)
        .map(|_| r.read_f32::<LE>().map(|x| T::lit(x as f64)))
        .collect()
}

pub fn write_checkpoint<T: Scalar>(model: &Model<T>, w: &mut impl Write) -> Result<(), NnError> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(CHECKPOINT_VERSION)?;
    for d in model.input_shape() {
        w.write_u32::<LE>(d as u32)?;
    }
    w.write_u32::<LE>(model.chain().len() as u32)?;
    for spec in model.chain() {
        write_spec(w, spec)?;
    }
    w.write_u64::<LE>(model.step)?;
    for lp in &model.params {
        for p in [&lp.weights, &lp.bias] {
            write_floats(w, &p.value)?;
            write_floats(w, &p.m)?;
            write_floats(w, &p.v)?;
        }
    }
    Ok(())
}

fn truncated(e: std::io::Error) -> NnError {
    if e.kind() == ErrorKind::UnexpectedEof {
        NnError::Format("truncated checkpoint".into())
    } else {
        NnError::Io(e)
    }
}

pub fn read_checkpoint<T: Scalar>(r: &mut impl Read) -> Result<Model<T>, NnError> {
    let inner = |r: &mut dyn Read| -> Result<Model<T>, NnError> {
        let mut r = r;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Format(format!("bad magic {magic:?}")));
        }
        let version = r.read_u32::<LE>()?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mut input = [0usize; 3];
        for d in &mut input {
            *d = r.read_u32::<LE>()? as usize;
        }
        let n_layers = r.read_u32::<LE>()? as usize;
        if n_layers > 1 << 16 {
            return Err(NnError::Format(format!(
                "implausible layer count {n_layers}"
            )));
        }
        let chain = (0..n_layers)
            .map(|_| read_spec(&mut r))
            .collect::<Result<Vec<_>, _>>()?;
        let step = r.read_u64::<LE>()?;
        let infos = super::infer_shapes(input, &chain)?;
        let mut params = Vec::new();
        for info in infos.iter().filter(|i| i.spec.has_params()) {
            let mut tensor = |n: usize| -> std::io::Result<Param<T>> {
                Ok(Param {
                    value: read_floats(&mut r, n)?,
                    m: read_floats(&mut r, n)?,
                    v: read_floats(&mut r, n)?,
                })
            };
            let weights = tensor(info.weight_len)?;
            let bias = tensor(info.bias_len)?;
            params.push(LayerParams { weights, bias });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(NnError::Format("trailing bytes after checkpoint".into()));
        }
        Model::from_parts(input, chain, params, step)
    };
    inner(r).map_err(|e| match e {
        NnError::Io(io) => truncated(io),
        e => e,
    })
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<(), NnError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>, NnError> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
