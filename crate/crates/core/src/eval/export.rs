use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::EvalError;
use crate::encoder::{PqvImage, CHANNELS};
use crate::nn::{LayerSpec, Model};
use crate::Scalar;

/// Binary (P6) portable pixmap.
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<(), EvalError> {
    if rgb.len() != width * height * 3 {
        return Err(EvalError::Invalid(format!(
            "{} bytes for a {width}x{height} RGB raster",
            rgb.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)?;
    w.flush()?;
    Ok(())
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Maps P, Q, V to red, green, blue; each cell becomes a `scale x scale` block.
pub fn image_to_ppm<T: Scalar>(
    img: &PqvImage<T>,
    scale: usize,
    path: &Path,
) -> Result<(), EvalError> {
    let side = img.n * scale;
    let mut rgb = vec![0u8; side * side * 3];
    for y in 0..side {
        for x in 0..side {
            for ch in 0..CHANNELS {
                rgb[(y * side + x) * 3 + ch] = to_byte(img.get(y / scale, x / scale, ch).as_f64());
            }
        }
    }
    write_ppm(path, side, side, &rgb)
}

/// Pixel bytes of the first-layer filter tiles: filter `f` occupies tile
/// `(f / cols, f % cols)` of a grid with `cols = ceil(sqrt(F))`, tiles separated by one
/// black pixel. Each input channel is min-max scaled over the whole layer.
pub fn conv1_raster<T: Scalar>(model: &Model<T>) -> Result<(usize, usize, Vec<u8>), EvalError> {
    let (k, filters) = match model.chain().first() {
        Some(&LayerSpec::Conv { kernel, filters }) if model.input_shape()[2] == CHANNELS => {
            (kernel, filters)
        }
        _ => {
            return Err(EvalError::Invalid(
                "first layer is not a convolution over three channels".into(),
            ))
        }
    };
    let w = &model.params[0].weights.value;
    let at = |ky: usize, kx: usize, c: usize, f: usize| {
        w[((ky * k + kx) * CHANNELS + c) * filters + f].as_f64()
    };
    let mut lo = [f64::INFINITY; CHANNELS];
    let mut hi = [f64::NEG_INFINITY; CHANNELS];
    for (i, v) in w.iter().enumerate() {
        let c = (i / filters) % CHANNELS;
        lo[c] = lo[c].min(v.as_f64());
        hi[c] = hi[c].max(v.as_f64());
    }
    let cols = (filters as f64).sqrt().ceil() as usize;
    let rows = filters.div_ceil(cols);
    let (width, height) = (cols * (k + 1) - 1, rows * (k + 1) - 1);
    let mut rgb = vec![0u8; width * height * 3];
    for f in 0..filters {
        let (ty, tx) = (f / cols, f % cols);
        for ky in 0..k {
            for kx in 0..k {
                let px = ((ty * (k + 1) + ky) * width + tx * (k + 1) + kx) * 3;
                for c in 0..CHANNELS {
                    let span = hi[c] - lo[c];
                    let v = if span > 0.0 {
                        (at(ky, kx, c, f) - lo[c]) / span
                    } else {
                        0.0
                    };
                    rgb[px + c] = to_byte(v);
                }
            }
        }
    }
    Ok((width, height, rgb))
}

pub fn export_conv1_weights<T: Scalar>(model: &Model<T>, path: &Path) -> Result<(), EvalError> {
    let (w, h, rgb) = conv1_raster(model)?;
    write_ppm(path, w, h, &rgb)
}
