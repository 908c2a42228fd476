use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    /// Same-padded convolution with an odd square kernel.
    Conv {
        kernel: usize,
        filters: usize,
    },
    /// 2x2 window, stride 2, floor semantics.
    MaxPool,
    Relu,
    Flatten,
    Dense {
        units: usize,
    },
    Dropout {
        rate: f64,
    },
    Softmax,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }
}

/// Three conv/pool/relu stages (kernels 9, 7, 5), a hidden dense layer with dropout
/// and a two-way softmax head.
pub fn conv_chain(filters: [usize; 3], hidden: usize) -> Vec<LayerSpec> {
    use LayerSpec::*;
    let mut chain = Vec::new();
    for (kernel, f) in [9, 7, 5].into_iter().zip(filters) {
        chain.extend([Conv { kernel, filters: f }, MaxPool, Relu]);
    }
    chain.extend([
        Flatten,
        Dense { units: hidden },
        Relu,
        Dropout { rate: 0.2 },
        Dense { units: 2 },
        Softmax,
    ]);
    chain
}

/// The reference architecture: filters 20/40/80 and a 250-unit hidden layer.
pub fn paper_chain() -> Vec<LayerSpec> {
    conv_chain([20, 40, 80], 250)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerInfo {
    pub spec: LayerSpec,
    /// Output shape without the batch dimension.
    pub out_shape: Vec<usize>,
    /// `(weights, biases)` lengths; zero for parameter-free layers.
    pub weight_len: usize,
    pub bias_len: usize,
}

impl LayerInfo {
    pub fn param_count(&self) -> usize {
        self.weight_len + self.bias_len
    }
}

/// Propagates `[h, w, c]` through the chain, checking every layer's preconditions.
pub fn infer_shapes(input: [usize; 3], chain: &[LayerSpec]) -> Result<Vec<LayerInfo>, NnError> {
    let err = |i: usize, msg: String| Err(NnError::Shape(format!("layer {i}: {msg}")));
    if input.contains(&0) {
        return err(0, format!("empty input shape {input:?}"));
    }
    let mut shape = input.to_vec();
    let mut infos = Vec::with_capacity(chain.len());
    for (i, &spec) in chain.iter().enumerate() {
        let (mut wl, mut bl) = (0, 0);
        match spec {
            LayerSpec::Conv { kernel, filters } => {
                let [_, _, c] = shape[..] else {
                    return err(i, format!("conv needs [h, w, c], got {shape:?}"));
                };
                if kernel % 2 == 0 || filters == 0 {
                    return err(
                        i,
                        format!("conv kernel {kernel} must be odd and filters {filters} positive"),
                    );
                }
                wl = kernel * kernel * c * filters;
                bl = filters;
                shape[2] = filters;
            }
            LayerSpec::MaxPool => {
                let [h, w, _] = shape[..] else {
                    return err(i, format!("pool needs [h, w, c], got {shape:?}"));
                };
                if h < 2 || w < 2 {
                    return err(i, format!("pool needs at least 2x2, got {h}x{w}"));
                }
                shape[0] = h / 2;
                shape[1] = w / 2;
            }
            LayerSpec::Relu => {}
            LayerSpec::Flatten => shape = vec![shape.iter().product()],
            LayerSpec::Dense { units } => {
                let [f] = shape[..] else {
                    return err(i, format!("dense needs a flat input, got {shape:?}"));
                };
                if units == 0 {
                    return err(i, "dense needs at least one unit".into());
                }
                wl = f * units;
                bl = units;
                shape = vec![units];
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return err(i, format!("dropout rate {rate} outside [0, 1)"));
                }
            }
            LayerSpec::Softmax => {
                if shape.len() != 1 {
                    return err(i, format!("softmax needs a flat input, got {shape:?}"));
                }
            }
        }
        infos.push(LayerInfo {
            spec,
            out_shape: shape.clone(),
            weight_len: wl,
            bias_len: bl,
        });
    }
    Ok(infos)
}
