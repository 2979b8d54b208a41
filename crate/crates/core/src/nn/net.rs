//! Network description, parameters and the forward/backward passes.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layers::{self, BnCache, CrossEntropy};
use super::scalar::Scalar;
use super::tensor::Tensor4;
use super::NnError;

/// Input block geometry: RGB, 16x16.
pub const INPUT_DIMS: [usize; 3] = [3, 16, 16];
pub const NUM_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// 3x3, stride 1, padding 1.
    Conv { in_ch: usize, out_ch: usize },
    BatchNorm { channels: usize },
    Relu,
    /// 2x2, stride 2.
    MaxPool,
    Flatten,
    Fc { inputs: usize, outputs: usize },
    Dropout { rate: f64 },
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::BatchNorm { .. } => "batchnorm",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool => "maxpool",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Fc { .. } => "fc",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Softmax => "softmax",
        }
    }

    fn token(&self) -> String {
        match self {
            LayerSpec::Conv { in_ch, out_ch } => format!("conv{in_ch}-{out_ch}"),
            LayerSpec::BatchNorm { channels } => format!("bn{channels}"),
            LayerSpec::Relu => "relu".into(),
            LayerSpec::MaxPool => "pool".into(),
            LayerSpec::Flatten => "flat".into(),
            LayerSpec::Fc { inputs, outputs } => format!("fc{inputs}-{outputs}"),
            LayerSpec::Dropout { rate } => format!("drop{rate}"),
            LayerSpec::Softmax => "softmax".into(),
        }
    }

    fn parse(tok: &str) -> Option<LayerSpec> {
        let pair = |s: &str| -> Option<(usize, usize)> {
            let (a, b) = s.split_once('-')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        };
        Some(match tok {
            "relu" => LayerSpec::Relu,
            "pool" => LayerSpec::MaxPool,
            "flat" => LayerSpec::Flatten,
            "softmax" => LayerSpec::Softmax,
            t if t.starts_with("conv") => {
                let (in_ch, out_ch) = pair(&t[4..])?;
                LayerSpec::Conv { in_ch, out_ch }
            }
            t if t.starts_with("bn") => LayerSpec::BatchNorm {
                channels: t[2..].parse().ok()?,
            },
            t if t.starts_with("fc") => {
                let (inputs, outputs) = pair(&t[2..])?;
                LayerSpec::Fc { inputs, outputs }
            }
            t if t.starts_with("drop") => LayerSpec::Dropout {
                rate: t[4..].parse().ok()?,
            },
            _ => return None,
        })
    }
}

/// Ordered layer list of a block classifier over 3x16x16 inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub layers: Vec<LayerSpec>,
}

impl Default for NetSpec {
    fn default() -> Self {
        NetSpec::classifier(&[16, 32, 64], &[128, 64], 0.5)
    }
}

impl NetSpec {
    /// VGG-style stack: one Conv-BN-ReLU-Pool stage per entry of
    /// `conv_widths`, then hidden FC-ReLU-Dropout layers and a 2-way
    /// FC-Softmax head.
    pub fn classifier(conv_widths: &[usize], hidden: &[usize], dropout: f64) -> Self {
        let mut layers = Vec::new();
        let mut ch = INPUT_DIMS[0];
        let mut side = INPUT_DIMS[1];
        for &w in conv_widths {
            layers.push(LayerSpec::Conv { in_ch: ch, out_ch: w });
            layers.push(LayerSpec::BatchNorm { channels: w });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::MaxPool);
            ch = w;
            side /= 2;
        }
        layers.push(LayerSpec::Flatten);
        let mut feat = ch * side * side;
        for &h in hidden {
            layers.push(LayerSpec::Fc { inputs: feat, outputs: h });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::Dropout { rate: dropout });
            feat = h;
        }
        layers.push(LayerSpec::Fc {
            inputs: feat,
            outputs: NUM_CLASSES,
        });
        layers.push(LayerSpec::Softmax);
        NetSpec { layers }
    }

    /// Text form, one token per layer; also the input to [`NetSpec::hash`].
    pub fn canonical(&self) -> String {
        let mut s = format!("in{}x{}x{}", INPUT_DIMS[0], INPUT_DIMS[1], INPUT_DIMS[2]);
        for l in &self.layers {
            let _ = write!(s, "|{}", l.token());
        }
        s
    }

    pub fn parse(text: &str) -> Result<NetSpec, NnError> {
        let mut toks = text.split('|');
        let expected_in = format!("in{}x{}x{}", INPUT_DIMS[0], INPUT_DIMS[1], INPUT_DIMS[2]);
        if toks.next() != Some(expected_in.as_str()) {
            return Err(NnError::Format(format!("unsupported input geometry in '{text}'")));
        }
        let layers = toks
            .map(|t| LayerSpec::parse(t).ok_or_else(|| NnError::Format(format!("unknown layer token '{t}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = NetSpec { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// 64-bit FNV-1a of the canonical text.
    pub fn hash(&self) -> u64 {
        self.canonical().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    /// Check layer-to-layer shape consistency and return the per-layer
    /// output dimensions (c, h, w).
    pub fn validate(&self) -> Result<Vec<[usize; 3]>, NnError> {
        let err = |i: usize, msg: String| NnError::Shape {
            layer: "netspec",
            detail: format!("layer {i}: {msg}"),
        };
        let mut shape = INPUT_DIMS;
        let mut flat = false;
        let mut last_conv: Option<usize> = None;
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            match *l {
                LayerSpec::Conv { in_ch, out_ch } => {
                    if flat || in_ch != shape[0] || out_ch == 0 {
                        return Err(err(i, format!("conv expects {} input channels", shape[0])));
                    }
                    if let Some(prev) = last_conv {
                        if out_ch != 2 * prev {
                            return Err(err(i, format!("feature maps must double ({prev} -> {out_ch})")));
                        }
                    }
                    last_conv = Some(out_ch);
                    shape[0] = out_ch;
                }
                LayerSpec::BatchNorm { channels } => {
                    if flat || channels != shape[0] {
                        return Err(err(i, format!("batchnorm over {} channels", shape[0])));
                    }
                }
                LayerSpec::MaxPool => {
                    if flat || !shape[1].is_multiple_of(2) || !shape[2].is_multiple_of(2) || shape[1] < 2 {
                        return Err(err(i, format!("cannot pool {}x{}", shape[1], shape[2])));
                    }
                    shape[1] /= 2;
                    shape[2] /= 2;
                }
                LayerSpec::Flatten => {
                    shape = [shape[0] * shape[1] * shape[2], 1, 1];
                    flat = true;
                }
                LayerSpec::Fc { inputs, outputs } => {
                    if !flat || inputs != shape[0] || outputs == 0 {
                        return Err(err(i, format!("fc expects {} flattened inputs", shape[0])));
                    }
                    shape[0] = outputs;
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(NnError::DropoutRate(rate));
                    }
                }
                LayerSpec::Relu => {}
                LayerSpec::Softmax => {
                    if i + 1 != self.layers.len() {
                        return Err(err(i, "softmax must be the last layer".into()));
                    }
                }
            }
            shapes.push(shape);
        }
        if self.layers.last() != Some(&LayerSpec::Softmax) || shape != [NUM_CLASSES, 1, 1] {
            return Err(err(self.layers.len(), "network must end in a 2-way softmax".into()));
        }
        Ok(shapes)
    }
}

/// Learnable tensors and running statistics of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T> {
    Stateless,
    Conv {
        weight: Vec<T>,
        bias: Vec<T>,
    },
    BatchNorm {
        gamma: Vec<T>,
        beta: Vec<T>,
        running_mean: Vec<T>,
        running_var: Vec<T>,
    },
    Fc {
        weight: Vec<T>,
        bias: Vec<T>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub spec: NetSpec,
    pub layers: Vec<LayerParams<T>>,
}

/// Gradients in the order of [`NetParams::learnable`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub tensors: Vec<Vec<T>>,
}

enum LayerCache<T> {
    None,
    Conv { col: Vec<T>, in_dims: [usize; 4] },
    Bn(BnCache<T>),
    Relu(Tensor4<T>),
    Pool { argmax: Vec<u32>, in_dims: [usize; 4] },
    Flatten([usize; 4]),
    Fc(Tensor4<T>),
    Dropout(Option<Vec<T>>),
}

/// Activations saved by a training-mode forward pass.
pub struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    /// On/off pattern of every ReLU and the winner of every pooling window.
    /// Two inputs with the same signature lie in the same linear region of
    /// the network.
    pub fn kink_signature(&self) -> Vec<u32> {
        let mut sig = Vec::new();
        for l in &self.layers {
            match l {
                LayerCache::Relu(y) => sig.extend(y.data.iter().map(|&v| (v > T::zero()) as u32)),
                LayerCache::Pool { argmax, .. } => sig.extend_from_slice(argmax),
                _ => {}
            }
        }
        sig
    }
}

impl<T: Scalar> NetParams<T> {
    /// He-normal weights, zero biases, unit batchnorm scale.
    pub fn init<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Result<Self, NnError> {
        Self::build(spec, |n, fan_in| {
            let sd = (2.0 / fan_in as f64).sqrt();
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    T::of(z * sd)
                })
                .collect()
        })
    }

    /// All weights zero; batchnorm at identity statistics.
    pub fn zeros(spec: &NetSpec) -> Result<Self, NnError> {
        Self::build(spec, |n, _| vec![T::zero(); n])
    }

    fn build(spec: &NetSpec, mut normal: impl FnMut(usize, usize) -> Vec<T>) -> Result<Self, NnError> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv { in_ch, out_ch } => LayerParams::Conv {
                    weight: normal(out_ch * in_ch * 9, in_ch * 9),
                    bias: vec![T::zero(); out_ch],
                },
                LayerSpec::BatchNorm { channels } => LayerParams::BatchNorm {
                    gamma: vec![T::one(); channels],
                    beta: vec![T::zero(); channels],
                    running_mean: vec![T::zero(); channels],
                    running_var: vec![T::one(); channels],
                },
                LayerSpec::Fc { inputs, outputs } => LayerParams::Fc {
                    weight: normal(outputs * inputs, inputs),
                    bias: vec![T::zero(); outputs],
                },
                _ => LayerParams::Stateless,
            })
            .collect();
        Ok(NetParams {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec.hash()
    }

    /// Learnable tensors in declaration order (weights before biases,
    /// batchnorm scale before shift).
    pub fn learnable(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for l in &self.layers {
            match l {
                LayerParams::Conv { weight, bias } | LayerParams::Fc { weight, bias } => {
                    out.push(weight);
                    out.push(bias);
                }
                LayerParams::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                LayerParams::Stateless => {}
            }
        }
        out
    }

    pub fn learnable_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                LayerParams::Conv { weight, bias } | LayerParams::Fc { weight, bias } => {
                    out.push(weight);
                    out.push(bias);
                }
                LayerParams::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                LayerParams::Stateless => {}
            }
        }
        out
    }

    /// Every stored tensor including running statistics, in file order.
    pub fn all_tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for l in &self.layers {
            match l {
                LayerParams::Conv { weight, bias } | LayerParams::Fc { weight, bias } => {
                    out.push(weight);
                    out.push(bias);
                }
                LayerParams::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    out.extend([gamma.as_slice(), beta, running_mean, running_var]);
                }
                LayerParams::Stateless => {}
            }
        }
        out
    }

    pub fn all_tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                LayerParams::Conv { weight, bias } | LayerParams::Fc { weight, bias } => {
                    out.push(weight);
                    out.push(bias);
                }
                LayerParams::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => {
                    out.push(gamma);
                    out.push(beta);
                    out.push(running_mean);
                    out.push(running_var);
                }
                LayerParams::Stateless => {}
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> NetParams<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::of(x.to_f64().unwrap())).collect::<Vec<U>>();
        NetParams {
            spec: self.spec.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    LayerParams::Stateless => LayerParams::Stateless,
                    LayerParams::Conv { weight, bias } => LayerParams::Conv {
                        weight: conv(weight),
                        bias: conv(bias),
                    },
                    LayerParams::Fc { weight, bias } => LayerParams::Fc {
                        weight: conv(weight),
                        bias: conv(bias),
                    },
                    LayerParams::BatchNorm {
                        gamma,
                        beta,
                        running_mean,
                        running_var,
                    } => LayerParams::BatchNorm {
                        gamma: conv(gamma),
                        beta: conv(beta),
                        running_mean: conv(running_mean),
                        running_var: conv(running_var),
                    },
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<(), NnError> {
        if x.dims[1..] != INPUT_DIMS {
            return Err(NnError::Shape {
                layer: "input",
                detail: format!("expected Nx3x16x16, got {:?}", x.dims),
            });
        }
        Ok(())
    }

    /// Inference pass: batchnorm uses running statistics, dropout is off.
    /// Returns class probabilities as an (N, 2, 1, 1) tensor.
    pub fn forward_eval(&self, x: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for (spec, p) in self.spec.layers.iter().zip(&self.layers) {
            cur = match (spec, p) {
                (LayerSpec::Conv { out_ch, .. }, LayerParams::Conv { weight, bias }) => {
                    layers::conv2d(&cur, weight, bias, *out_ch)?
                }
                (
                    LayerSpec::BatchNorm { .. },
                    LayerParams::BatchNorm {
                        gamma,
                        beta,
                        running_mean,
                        running_var,
                    },
                ) => layers::batchnorm_eval(&cur, gamma, beta, running_mean, running_var)?,
                (LayerSpec::Relu, _) => layers::relu(&cur),
                (LayerSpec::MaxPool, _) => layers::maxpool2x2(&cur)?.0,
                (LayerSpec::Flatten, _) => {
                    let n = cur.batch();
                    let f = cur.features();
                    cur.reshaped([n, f, 1, 1])
                }
                (LayerSpec::Fc { outputs, .. }, LayerParams::Fc { weight, bias }) => {
                    layers::fc(&cur, weight, bias, *outputs)?
                }
                (LayerSpec::Dropout { .. }, _) => cur,
                (LayerSpec::Softmax, _) => layers::softmax(&cur),
                _ => unreachable!("parameters built from the same spec"),
            };
        }
        Ok(cur)
    }

    /// Training pass: batch statistics (running statistics are updated),
    /// dropout drawn from `rng`. Returns probabilities and saved activations.
    pub fn forward_train<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor4<T>,
        rng: &mut R,
    ) -> Result<(Tensor4<T>, ForwardCache<T>), NnError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (spec, p) in self.spec.layers.iter().zip(self.layers.iter_mut()) {
            let (next, cache) = match (spec, p) {
                (LayerSpec::Conv { out_ch, .. }, LayerParams::Conv { weight, bias }) => {
                    let (y, col) = layers::conv2d_cached(&cur, weight, bias, *out_ch)?;
                    (y, LayerCache::Conv { col, in_dims: cur.dims })
                }
                (
                    LayerSpec::BatchNorm { .. },
                    LayerParams::BatchNorm {
                        gamma,
                        beta,
                        running_mean,
                        running_var,
                    },
                ) => {
                    let (y, c) = layers::batchnorm_train(&cur, gamma, beta, running_mean, running_var)?;
                    (y, LayerCache::Bn(c))
                }
                (LayerSpec::Relu, _) => {
                    let y = layers::relu(&cur);
                    (y.clone(), LayerCache::Relu(y))
                }
                (LayerSpec::MaxPool, _) => {
                    let (y, argmax) = layers::maxpool2x2(&cur)?;
                    (y, LayerCache::Pool { argmax, in_dims: cur.dims })
                }
                (LayerSpec::Flatten, _) => {
                    let dims = cur.dims;
                    let (n, f) = (cur.batch(), cur.features());
                    (cur.reshaped([n, f, 1, 1]), LayerCache::Flatten(dims))
                }
                (LayerSpec::Fc { outputs, .. }, LayerParams::Fc { weight, bias }) => {
                    let y = layers::fc(&cur, weight, bias, *outputs)?;
                    (y, LayerCache::Fc(cur))
                }
                (LayerSpec::Dropout { rate }, _) => {
                    let (y, mask) = layers::dropout(&cur, *rate, true, rng)?;
                    (y, LayerCache::Dropout(mask))
                }
                (LayerSpec::Softmax, _) => (layers::softmax(&cur), LayerCache::None),
                _ => unreachable!("parameters built from the same spec"),
            };
            caches.push(cache);
            cur = next;
        }
        Ok((cur, ForwardCache { layers: caches }))
    }

    /// Backpropagate a gradient with respect to the softmax input. Returns
    /// parameter gradients and, if requested, the input gradient.
    pub fn backward(
        &self,
        cache: ForwardCache<T>,
        grad_logits: &Tensor4<T>,
        need_input_grad: bool,
    ) -> Result<(Grads<T>, Option<Tensor4<T>>), NnError> {
        let mut per_layer: Vec<Vec<Vec<T>>> = vec![Vec::new(); self.layers.len()];
        let mut grad = grad_logits.clone();
        let first_param_layer = self
            .layers
            .iter()
            .position(|l| !matches!(l, LayerParams::Stateless))
            .unwrap_or(0);
        let n = self.layers.len();
        for (i, cache) in cache.layers.into_iter().enumerate().rev() {
            let spec = &self.spec.layers[i];
            let need_dx = need_input_grad || i > first_param_layer;
            let non_finite = |v: &[T]| v.iter().any(|x| !x.is_finite());
            grad = match (spec, &self.layers[i], cache) {
                (LayerSpec::Softmax, _, _) => {
                    debug_assert_eq!(i, n - 1);
                    grad
                }
                (LayerSpec::Conv { .. }, LayerParams::Conv { weight, .. }, LayerCache::Conv { col, in_dims }) => {
                    let g = layers::conv2d_backward(in_dims, &col, weight, &grad, need_dx);
                    per_layer[i] = vec![g.dweight, g.dbias];
                    g.dx.unwrap_or_else(|| Tensor4::zeros([0, 0, 0, 0]))
                }
                (LayerSpec::BatchNorm { .. }, LayerParams::BatchNorm { gamma, .. }, LayerCache::Bn(c)) => {
                    let (dx, dg, db) = layers::batchnorm_backward(&c, gamma, &grad);
                    per_layer[i] = vec![dg, db];
                    dx
                }
                (LayerSpec::Relu, _, LayerCache::Relu(y)) => layers::relu_backward(&y, &grad),
                (LayerSpec::MaxPool, _, LayerCache::Pool { argmax, in_dims }) => {
                    layers::maxpool_backward(&argmax, in_dims, &grad)
                }
                (LayerSpec::Flatten, _, LayerCache::Flatten(dims)) => grad.reshaped(dims),
                (LayerSpec::Fc { .. }, LayerParams::Fc { weight, .. }, LayerCache::Fc(x)) => {
                    let g = layers::fc_backward(&x, weight, &grad, need_dx);
                    per_layer[i] = vec![g.dweight, g.dbias];
                    g.dx.unwrap_or_else(|| Tensor4::zeros([0, 0, 0, 0]))
                }
                (LayerSpec::Dropout { .. }, _, LayerCache::Dropout(mask)) => {
                    layers::dropout_backward(mask.as_deref(), &grad)
                }
                _ => unreachable!("cache built by forward_train over the same spec"),
            };
            if non_finite(&grad.data) || per_layer[i].iter().any(|t| non_finite(t)) {
                return Err(NnError::NonFinite {
                    index: i,
                    layer: spec.token(),
                });
            }
            if i == first_param_layer && !need_input_grad {
                break;
            }
        }
        let input_grad = need_input_grad.then_some(grad);
        Ok((
            Grads {
                tensors: per_layer.into_iter().flatten().collect(),
            },
            input_grad,
        ))
    }

    /// Forward in training mode, weighted cross-entropy, and full backward.
    pub fn loss_and_grads<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor4<T>,
        labels: &[usize],
        class_weights: &[f64],
        rng: &mut R,
    ) -> Result<(CrossEntropy<T>, Grads<T>), NnError> {
        let (probs, cache) = self.forward_train(x, rng)?;
        let ce = layers::cross_entropy_weighted(&probs, labels, class_weights)?;
        let (grads, _) = self.backward(cache, &ce.grad_logits, false)?;
        Ok((ce, grads))
    }
}
