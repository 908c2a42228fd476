//! Per-layer forward and backward kernels on `[b, h, w, c]` batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Scalar, Tensor};

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for j in 0..8 {
            acc[j] += xa[j] * xb[j];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (&x, &y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Kernel-tap range `lo..hi` that lands inside `0..len` for output position `pos`
/// under same-padding `pad`.
#[inline]
fn tap_range(pos: usize, len: usize, k: usize, pad: usize) -> (usize, usize) {
    (pad.saturating_sub(pos), k.min(len + pad - pos))
}

/// Same-padded 2-D cross-correlation. `weights` is `[k, k, f_in, f_out]`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &[T],
    bias: &[T],
    k: usize,
) -> Tensor<T> {
    let &[nb, h, w, fi] = input.shape() else {
        panic!("conv2d expects a 4-D input")
    };
    let fo = bias.len();
    assert_eq!(weights.len(), k * k * fi * fo, "conv2d weight shape");
    assert!(k % 2 == 1, "conv2d kernel must be odd");
    let pad = k / 2;
    let x = input.data();
    let mut out = Tensor::zeros(&[nb, h, w, fo]);
    let o = out.data_mut();
    for b in 0..nb {
        for y in 0..h {
            let (ky0, ky1) = tap_range(y, h, k, pad);
            for xx in 0..w {
                let (kx0, kx1) = tap_range(xx, w, k, pad);
                let opx = &mut o[((b * h + y) * w + xx) * fo..][..fo];
                opx.copy_from_slice(bias);
                for ky in ky0..ky1 {
                    let iy = y + ky - pad;
                    for kx in kx0..kx1 {
                        let ix = xx + kx - pad;
                        let ipx = &x[((b * h + iy) * w + ix) * fi..][..fi];
                        let wtap = &weights[(ky * k + kx) * fi * fo..][..fi * fo];
                        for (c, &a) in ipx.iter().enumerate() {
                            if a != T::zero() {
                                axpy(opx, a, &wtap[c * fo..][..fo]);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients into `d_weights` / `d_bias` and returns the
/// input gradient when `want_input` is set.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &[T],
    k: usize,
    d_out: &Tensor<T>,
    d_weights: &mut [T],
    d_bias: &mut [T],
    want_input: bool,
) -> Option<Tensor<T>> {
    let &[nb, h, w, fi] = input.shape() else {
        panic!("conv2d expects a 4-D input")
    };
    let fo = d_bias.len();
    let pad = k / 2;
    let x = input.data();
    let g = d_out.data();
    let mut d_in = want_input.then(|| Tensor::zeros(input.shape()));
    for b in 0..nb {
        for y in 0..h {
            let (ky0, ky1) = tap_range(y, h, k, pad);
            for xx in 0..w {
                let (kx0, kx1) = tap_range(xx, w, k, pad);
                let gpx = &g[((b * h + y) * w + xx) * fo..][..fo];
                for (db, &gv) in d_bias.iter_mut().zip(gpx) {
                    *db += gv;
                }
                for ky in ky0..ky1 {
                    let iy = y + ky - pad;
                    for kx in kx0..kx1 {
                        let ix = xx + kx - pad;
                        let at = ((b * h + iy) * w + ix) * fi;
                        let ipx = &x[at..][..fi];
                        let tap = (ky * k + kx) * fi * fo;
                        let dwtap = &mut d_weights[tap..][..fi * fo];
                        for (c, &a) in ipx.iter().enumerate() {
                            if a != T::zero() {
                                axpy(&mut dwtap[c * fo..][..fo], a, gpx);
                            }
                        }
                        if let Some(d_in) = d_in.as_mut() {
                            let wtap = &weights[tap..][..fi * fo];
                            let dpx = &mut d_in.data_mut()[at..][..fi];
                            for (c, dv) in dpx.iter_mut().enumerate() {
                                *dv += dot(&wtap[c * fo..][..fo], gpx);
                            }
                        }
                    }
                }
            }
        }
    }
    d_in
}

/// 2x2 / stride-2 max pooling; a trailing odd row or column is dropped.
/// Returns the output and, per output element, the flat input index of its maximum
/// (first in row-major window order on ties).
pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let &[nb, h, w, c] = input.shape() else {
        panic!("maxpool expects a 4-D input")
    };
    assert!(h >= 2 && w >= 2, "maxpool needs at least a 2x2 input");
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Tensor::zeros(&[nb, oh, ow, c]);
    let mut arg = vec![0u32; nb * oh * ow * c];
    let o = out.data_mut();
    for b in 0..nb {
        for y in 0..oh {
            for xx in 0..ow {
                for ch in 0..c {
                    let mut best_i = ((b * h + 2 * y) * w + 2 * xx) * c + ch;
                    let mut best = x[best_i];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = ((b * h + 2 * y + dy) * w + 2 * xx + dx) * c + ch;
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                    let oi = ((b * oh + y) * ow + xx) * c + ch;
                    o[oi] = best;
                    arg[oi] = best_i as u32;
                }
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[u32],
    d_out: &Tensor<T>,
) -> Tensor<T> {
    let mut d_in = Tensor::zeros(input_shape);
    let di = d_in.data_mut();
    for (&i, &g) in argmax.iter().zip(d_out.data()) {
        di[i as usize] += g;
    }
    d_in
}

pub fn relu_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes the gradient where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, d_out: &Tensor<T>) -> Tensor<T> {
    let data = input
        .data()
        .iter()
        .zip(d_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

/// Affine map `[b, f_in] x [f_in, f_out] + bias`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &[T], bias: &[T]) -> Tensor<T> {
    let (nb, fi) = (input.batch(), input.row_len());
    let fo = bias.len();
    assert_eq!(weights.len(), fi * fo, "dense weight shape");
    let mut out = Tensor::zeros(&[nb, fo]);
    for b in 0..nb {
        let orow = &mut out.data_mut()[b * fo..][..fo];
        orow.copy_from_slice(bias);
        for (i, &a) in input.row(b).iter().enumerate() {
            if a != T::zero() {
                axpy(orow, a, &weights[i * fo..][..fo]);
            }
        }
    }
    out
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &[T],
    d_out: &Tensor<T>,
    d_weights: &mut [T],
    d_bias: &mut [T],
    want_input: bool,
) -> Option<Tensor<T>> {
    let (nb, fi) = (input.batch(), input.row_len());
    let fo = d_bias.len();
    let mut d_in = want_input.then(|| Tensor::zeros(&[nb, fi]));
    for b in 0..nb {
        let g = d_out.row(b);
        for (db, &gv) in d_bias.iter_mut().zip(g) {
            *db += gv;
        }
        for (i, &a) in input.row(b).iter().enumerate() {
            if a != T::zero() {
                axpy(&mut d_weights[i * fo..][..fo], a, g);
            }
        }
        if let Some(d_in) = d_in.as_mut() {
            let drow = &mut d_in.data_mut()[b * fi..][..fi];
            for (i, dv) in drow.iter_mut().enumerate() {
                *dv = dot(&weights[i * fo..][..fo], g);
            }
        }
    }
    d_in
}

/// Inverted dropout. Returns the output and the per-element multiplier (0 or 1/(1-rate)).
pub fn dropout_forward<T: Scalar>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut impl Rng,
) -> (Tensor<T>, Vec<T>) {
    assert!(
        (0.0..1.0).contains(&rate),
        "dropout rate must lie in [0, 1)"
    );
    let keep = T::lit(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..input.len())
        .map(|_| {
            if rate > 0.0 && rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let data = input
        .data()
        .iter()
        .zip(&mask)
        .map(|(&x, &m)| x * m)
        .collect();
    (Tensor::from_vec(input.shape(), data), mask)
}

/// Dropout with an explicit seed; identity when not training.
pub fn dropout<T: Scalar>(input: &Tensor<T>, rate: f64, seed: u64, training: bool) -> Tensor<T> {
    if !training {
        return input.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dropout_forward(input, rate, &mut rng).0
}

pub fn dropout_backward<T: Scalar>(mask: &[T], d_out: &Tensor<T>) -> Tensor<T> {
    let data = d_out
        .data()
        .iter()
        .zip(mask)
        .map(|(&g, &m)| g * m)
        .collect();
    Tensor::from_vec(d_out.shape(), data)
}

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let (nb, nc) = (logits.batch(), logits.row_len());
    let mut out = Tensor::zeros(&[nb, nc]);
    for b in 0..nb {
        let row = logits.row(b);
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let orow = &mut out.data_mut()[b * nc..][..nc];
        let mut sum = T::zero();
        for (o, &z) in orow.iter_mut().zip(row) {
            *o = (z - mx).exp();
            sum += *o;
        }
        for o in orow.iter_mut() {
            *o = *o / sum;
        }
    }
    out
}

/// Logit gradient from probability gradient: `dz_k = p_k (g_k - sum_j g_j p_j)`.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, d_probs: &Tensor<T>) -> Tensor<T> {
    let (nb, nc) = (probs.batch(), probs.row_len());
    let mut out = Tensor::zeros(&[nb, nc]);
    for b in 0..nb {
        let (p, g) = (probs.row(b), d_probs.row(b));
        let inner: T = p.iter().zip(g).map(|(&a, &b)| a * b).sum();
        for k in 0..nc {
            out.data_mut()[b * nc + k] = p[k] * (g[k] - inner);
        }
    }
    out
}
