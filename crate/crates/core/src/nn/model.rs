use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_backward,
    dropout_forward, maxpool_backward, maxpool_forward, relu_backward, relu_forward, softmax,
    softmax_backward,
};
use super::{
    adam_update, infer_shapes, loss, AdamConfig, LayerInfo, LayerSpec, LossConfig, LossOutput,
    NnError,
};
use crate::{Scalar, Tensor};

/// Samples per work unit; gradients are reduced over chunks in index order so results do
/// not depend on the number of worker threads.
const CHUNK: usize = 16;

/// One trainable tensor with its Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Vec<T>) -> Self {
        let n = value.len();
        Self {
            value,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// Conv: `[k, k, f_in, f_out]`; dense: `[f_in, f_out]`.
    pub weights: Param<T>,
    pub bias: Param<T>,
}

/// Whether dropout is active. Training masks are drawn per sample from
/// `(seed, sample position)`, so they do not depend on chunking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Infer,
    Train { seed: u64 },
}

/// A layer chain with its parameters and optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    input: [usize; 3],
    chain: Vec<LayerSpec>,
    infos: Vec<LayerInfo>,
    /// One entry per conv or dense layer, in chain order.
    pub params: Vec<LayerParams<T>>,
    /// Adam steps taken so far.
    pub step: u64,
}

/// Parameter gradients aligned with `Model::params` as `(weights, bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &Model<T>) -> Self {
        Self {
            layers: model
                .params
                .iter()
                .map(|p| {
                    (
                        vec![T::zero(); p.weights.value.len()],
                        vec![T::zero(); p.bias.value.len()],
                    )
                })
                .collect(),
        }
    }

    fn add(&mut self, other: &Self) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(a, &x)| *a += x);
            b.iter_mut().zip(ob).for_each(|(a, &x)| *a += x);
        }
    }
}

enum Saved<T> {
    None,
    PoolArg(Vec<u32>),
    Mask(Vec<T>),
}

struct Trace<T> {
    /// Input of every layer followed by the final output.
    acts: Vec<Tensor<T>>,
    saved: Vec<Saved<T>>,
}

fn mix_seed(seed: u64, position: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ position.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<T: Scalar> Model<T> {
    /// Builds the chain and draws He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`)
    /// with zero biases and zero optimiser state.
    pub fn new(input: [usize; 3], chain: Vec<LayerSpec>, seed: u64) -> Result<Self, NnError> {
        let infos = infer_shapes(input, &chain)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut fan_in_shape = input.to_vec();
        for info in &infos {
            if info.spec.has_params() {
                let fan_in = match info.spec {
                    LayerSpec::Conv { kernel, .. } => kernel * kernel * fan_in_shape[2],
                    _ => fan_in_shape[0],
                };
                let limit = (6.0 / fan_in as f64).sqrt();
                let w = (0..info.weight_len)
                    .map(|_| T::lit(rng.random_range(-limit..limit)))
                    .collect();
                params.push(LayerParams {
                    weights: Param::new(w),
                    bias: Param::new(vec![T::zero(); info.bias_len]),
                });
            }
            fan_in_shape = info.out_shape.clone();
        }
        Self::from_parts(input, chain, params, 0)
    }

    /// Assembles a model from stored parameters, checking every length.
    pub fn from_parts(
        input: [usize; 3],
        chain: Vec<LayerSpec>,
        params: Vec<LayerParams<T>>,
        step: u64,
    ) -> Result<Self, NnError> {
        let infos = infer_shapes(input, &chain)?;
        match (chain.last(), infos.last()) {
            (Some(LayerSpec::Softmax), Some(last)) if last.out_shape == [2] => {}
            _ => return Err(NnError::Shape("chain must end in a two-way softmax".into())),
        }
        let expected: Vec<(usize, usize)> = infos
            .iter()
            .filter(|i| i.spec.has_params())
            .map(|i| (i.weight_len, i.bias_len))
            .collect();
        let got: Vec<(usize, usize)> = params
            .iter()
            .map(|p| (p.weights.value.len(), p.bias.value.len()))
            .collect();
        let consistent = params.iter().all(|p| {
            p.weights.m.len() == p.weights.value.len()
                && p.weights.v.len() == p.weights.value.len()
                && p.bias.m.len() == p.bias.value.len()
                && p.bias.v.len() == p.bias.value.len()
        });
        if expected != got || !consistent {
            return Err(NnError::Shape(format!(
                "parameter lengths {got:?} do not match chain {expected:?}"
            )));
        }
        Ok(Self {
            input,
            chain,
            infos,
            params,
            step,
        })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input
    }

    pub fn chain(&self) -> &[LayerSpec] {
        &self.chain
    }

    pub fn layer_infos(&self) -> &[LayerInfo] {
        &self.infos
    }

    pub fn param_count(&self) -> usize {
        self.infos.iter().map(LayerInfo::param_count).sum()
    }

    pub fn weight_sq_sum(&self) -> T {
        self.params
            .iter()
            .flat_map(|p| p.weights.value.iter())
            .map(|&w| w * w)
            .sum()
    }

    /// Converts parameters and optimiser state to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        let cp = |p: &Param<T>| Param {
            value: conv(&p.value),
            m: conv(&p.m),
            v: conv(&p.v),
        };
        Model {
            input: self.input,
            chain: self.chain.clone(),
            infos: self.infos.clone(),
            params: self
                .params
                .iter()
                .map(|l| LayerParams {
                    weights: cp(&l.weights),
                    bias: cp(&l.bias),
                })
                .collect(),
            step: self.step,
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        if x.shape().len() != 4 || x.shape()[1..] != self.input[..] || x.batch() == 0 {
            return Err(NnError::Shape(format!(
                "batch shape {:?} does not match model input {:?}",
                x.shape(),
                self.input
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Tensor<T>, mode: Mode, first: usize, keep: bool) -> Trace<T> {
        let mut acts = Vec::with_capacity(if keep { self.chain.len() + 1 } else { 1 });
        let mut saved = Vec::with_capacity(self.chain.len());
        let mut cur = x.clone();
        let mut pi = 0;
        for (li, spec) in self.chain.iter().enumerate() {
            let mut aux = Saved::None;
            let next = match *spec {
                LayerSpec::Conv { kernel, .. } => {
                    let p = &self.params[pi];
                    pi += 1;
                    conv2d_forward(&cur, &p.weights.value, &p.bias.value, kernel)
                }
                LayerSpec::Dense { .. } => {
                    let p = &self.params[pi];
                    pi += 1;
                    dense_forward(&cur, &p.weights.value, &p.bias.value)
                }
                LayerSpec::MaxPool => {
                    let (out, arg) = maxpool_forward(&cur);
                    if keep {
                        aux = Saved::PoolArg(arg);
                    }
                    out
                }
                LayerSpec::Relu => relu_forward(&cur),
                LayerSpec::Flatten => {
                    let b = cur.batch();
                    let r = cur.row_len();
                    cur.clone().reshape(&[b, r])
                }
                LayerSpec::Dropout { rate } => match mode {
                    Mode::Infer => cur.clone(),
                    Mode::Train { seed } => {
                        let r = cur.row_len();
                        let mut data = Vec::with_capacity(cur.len());
                        let mut mask = Vec::with_capacity(cur.len());
                        for b in 0..cur.batch() {
                            let position = ((first + b) as u64) << 8 | li as u64;
                            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, position));
                            let row = Tensor::from_vec(&[1, r], cur.row(b).to_vec());
                            let (o, m) = dropout_forward(&row, rate, &mut rng);
                            data.extend_from_slice(o.data());
                            mask.extend(m);
                        }
                        if keep {
                            aux = Saved::Mask(mask);
                        }
                        Tensor::from_vec(cur.shape(), data)
                    }
                },
                LayerSpec::Softmax => softmax(&cur),
            };
            if keep {
                acts.push(cur);
            }
            saved.push(aux);
            cur = next;
        }
        acts.push(cur);
        Trace { acts, saved }
    }

    /// Class probabilities (dropout disabled).
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        let n = x.batch();
        let parts: Vec<Tensor<T>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let chunk = x.slice_batch(c * CHUNK, ((c + 1) * CHUNK).min(n));
                self.run(&chunk, Mode::Infer, 0, false)
                    .acts
                    .pop()
                    .expect("output")
            })
            .collect();
        Ok(Tensor::concat_batch(&parts))
    }

    /// Same as `forward` on a single sample without thread dispatch.
    pub fn forward_single(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        Ok(self
            .run(x, Mode::Infer, 0, false)
            .acts
            .pop()
            .expect("output"))
    }

    fn backward(&self, trace: &Trace<T>, d_probs: &Tensor<T>) -> Gradients<T> {
        let mut grads = Gradients::zeros_like(self);
        let mut g = d_probs.clone();
        let mut pi = self.params.len();
        for li in (0..self.chain.len()).rev() {
            let input = &trace.acts[li];
            let want_input = li > 0;
            g = match (self.chain[li], &trace.saved[li]) {
                (LayerSpec::Softmax, _) => softmax_backward(&trace.acts[li + 1], &g),
                (LayerSpec::Dense { .. }, _) => {
                    pi -= 1;
                    let (dw, db) = &mut grads.layers[pi];
                    match dense_backward(
                        input,
                        &self.params[pi].weights.value,
                        &g,
                        dw,
                        db,
                        want_input,
                    ) {
                        Some(d) => d,
                        None => break,
                    }
                }
                (LayerSpec::Conv { kernel, .. }, _) => {
                    pi -= 1;
                    let (dw, db) = &mut grads.layers[pi];
                    match conv2d_backward(
                        input,
                        &self.params[pi].weights.value,
                        kernel,
                        &g,
                        dw,
                        db,
                        want_input,
                    ) {
                        Some(d) => d,
                        None => break,
                    }
                }
                (LayerSpec::Dropout { .. }, Saved::Mask(mask)) => dropout_backward(mask, &g),
                (LayerSpec::Dropout { .. }, _) => g,
                (LayerSpec::MaxPool, Saved::PoolArg(arg)) => {
                    maxpool_backward(input.shape(), arg, &g)
                }
                (LayerSpec::MaxPool, _) => unreachable!("pool trace missing"),
                (LayerSpec::Relu, _) => relu_backward(input, &g),
                (LayerSpec::Flatten, _) => g.reshape(input.shape()),
            };
        }
        grads
    }

    /// Loss on a batch and the full parameter gradient, including the L2 term.
    /// `first` is the position of the batch's first sample within its epoch and only
    /// affects dropout masks.
    pub fn loss_and_gradients(
        &self,
        x: &Tensor<T>,
        labels: &Tensor<T>,
        cfg: &LossConfig,
        mode: Mode,
        first: usize,
    ) -> Result<(LossOutput<T>, Gradients<T>), NnError> {
        self.check_input(x)?;
        if labels.shape() != [x.batch(), 2] {
            return Err(NnError::Shape(format!(
                "labels {:?} for batch of {}",
                labels.shape(),
                x.batch()
            )));
        }
        let n = x.batch();
        let n_chunks = n.div_ceil(CHUNK);
        let traces: Vec<Trace<T>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let s = c * CHUNK;
                self.run(&x.slice_batch(s, (s + CHUNK).min(n)), mode, first + s, true)
            })
            .collect();
        let probs = Tensor::concat_batch(
            &traces
                .iter()
                .map(|t| t.acts.last().expect("output").clone())
                .collect::<Vec<_>>(),
        );
        let out = loss(&probs, labels, self, cfg);

        let partial: Vec<Gradients<T>> = traces
            .par_iter()
            .enumerate()
            .map(|(c, t)| {
                let s = c * CHUNK;
                self.backward(t, &out.d_probs.slice_batch(s, (s + CHUNK).min(n)))
            })
            .collect();
        let mut grads = Gradients::zeros_like(self);
        for p in &partial {
            grads.add(p);
        }
        if cfg.lambda > 0.0 {
            let lam = T::lit(cfg.lambda);
            for ((dw, _), p) in grads.layers.iter_mut().zip(&self.params) {
                dw.iter_mut()
                    .zip(&p.weights.value)
                    .for_each(|(g, &w)| *g += lam * w);
            }
        }
        Ok((out, grads))
    }

    /// Advances the step counter and applies one Adam update to every tensor.
    pub fn adam_step(&mut self, grads: &Gradients<T>, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step;
        for (p, (dw, db)) in self.params.iter_mut().zip(&grads.layers) {
            adam_update(&mut p.weights, dw, t, cfg);
            adam_update(&mut p.bias, db, t, cfg);
        }
    }
}

/// Row-wise argmax; ties resolve to class 0 (unsafe).
pub fn predict<T: Scalar>(probs: &Tensor<T>) -> Vec<usize> {
    (0..probs.batch())
        .map(|b| {
            let row = probs.row(b);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}
