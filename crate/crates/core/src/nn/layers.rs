//! Layer kernels. Tensors are NCHW; fully connected layers treat each
//! sample as a flat feature vector.
//!
//! Convolution follows the cross-correlation convention used by deep
//! learning frameworks: `y[o,y,x] = b[o] + sum w[o,c,ky,kx] * x[c, y+ky-1, x+kx-1]`
//! with a fixed 3x3 kernel, stride 1 and zero padding of 1.

use rand::Rng;

use super::scalar::{gemm, Mat, Scalar};
use super::tensor::Tensor4;
use super::NnError;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const PROB_FLOOR: f64 = 1e-12;

const K: usize = 3;

fn shape_err(layer: &'static str, detail: String) -> NnError {
    NnError::Shape { layer, detail }
}

/// Unfold 3x3 neighbourhoods: rows are (c, ky, kx), columns are (n, y, x).
pub(crate) fn im2col<T: Scalar>(x: &Tensor4<T>) -> Vec<T> {
    let [n, c, h, w] = x.dims;
    let cols = n * h * w;
    let mut col = vec![T::zero(); c * K * K * cols];
    for ci in 0..c {
        for ky in 0..K {
            for kx in 0..K {
                let row = &mut col[((ci * K + ky) * K + kx) * cols..][..cols];
                for ni in 0..n {
                    let src = &x.data[(ni * c + ci) * h * w..][..h * w];
                    let dst = &mut row[ni * h * w..][..h * w];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let srow = &src[sy as usize * w..][..w];
                        let drow = &mut dst[y * w..][..w];
                        let x0 = if kx == 0 { 1 } else { 0 };
                        let x1 = if kx == 2 { w - 1 } else { w };
                        for xx in x0..x1 {
                            drow[xx] = srow[xx + kx - 1];
                        }
                    }
                }
            }
        }
    }
    col
}

fn col2im<T: Scalar>(dcol: &[T], dims: [usize; 4]) -> Tensor4<T> {
    let [n, c, h, w] = dims;
    let cols = n * h * w;
    let mut dx = Tensor4::zeros(dims);
    for ci in 0..c {
        for ky in 0..K {
            for kx in 0..K {
                let row = &dcol[((ci * K + ky) * K + kx) * cols..][..cols];
                for ni in 0..n {
                    let src = &row[ni * h * w..][..h * w];
                    let dst = &mut dx.data[(ni * c + ci) * h * w..][..h * w];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let x0 = if kx == 0 { 1 } else { 0 };
                        let x1 = if kx == 2 { w - 1 } else { w };
                        for xx in x0..x1 {
                            let v = src[y * w + xx];
                            dst[sy as usize * w + xx + kx - 1] =
                                dst[sy as usize * w + xx + kx - 1] + v;
                        }
                    }
                }
            }
        }
    }
    dx
}

/// (O, N*HW) row-major -> NCHW.
fn cm_to_nchw<T: Scalar>(m: &[T], n: usize, o: usize, hw: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * o * hw];
    for oi in 0..o {
        for ni in 0..n {
            out[(ni * o + oi) * hw..][..hw].copy_from_slice(&m[oi * n * hw + ni * hw..][..hw]);
        }
    }
    out
}

fn nchw_to_cm<T: Scalar>(t: &Tensor4<T>) -> Vec<T> {
    let [n, c, h, w] = t.dims;
    let hw = h * w;
    let mut out = vec![T::zero(); n * c * hw];
    for ci in 0..c {
        for ni in 0..n {
            out[ci * n * hw + ni * hw..][..hw].copy_from_slice(&t.data[(ni * c + ci) * hw..][..hw]);
        }
    }
    out
}

fn check_conv<T: Scalar>(x: &Tensor4<T>, weight: &[T], bias: &[T], out_ch: usize) -> Result<(), NnError> {
    let c = x.channels();
    if weight.len() != out_ch * c * K * K {
        return Err(shape_err(
            "conv2d",
            format!(
                "weights hold {} values, expected {out_ch}x{c}x3x3 for a {c}-channel input",
                weight.len()
            ),
        ));
    }
    if bias.len() != out_ch {
        return Err(shape_err("conv2d", format!("bias has {} values, expected {out_ch}", bias.len())));
    }
    Ok(())
}

/// 3x3 convolution, stride 1, padding 1. Returns the output and the
/// unfolded input needed by [`conv2d_backward`].
pub fn conv2d_cached<T: Scalar>(
    x: &Tensor4<T>,
    weight: &[T],
    bias: &[T],
    out_ch: usize,
) -> Result<(Tensor4<T>, Vec<T>), NnError> {
    check_conv(x, weight, bias, out_ch)?;
    let [n, c, h, w] = x.dims;
    let cols = n * h * w;
    let col = im2col(x);
    let mut ym = vec![T::zero(); out_ch * cols];
    for (o, row) in ym.chunks_mut(cols.max(1)).enumerate() {
        row.fill(bias[o]);
    }
    gemm(Mat::new(weight, out_ch, c * K * K), Mat::new(&col, c * K * K, cols), T::one(), &mut ym);
    let y = Tensor4::from_vec([n, out_ch, h, w], cm_to_nchw(&ym, n, out_ch, h * w));
    Ok((y, col))
}

pub fn conv2d<T: Scalar>(x: &Tensor4<T>, weight: &[T], bias: &[T], out_ch: usize) -> Result<Tensor4<T>, NnError> {
    conv2d_cached(x, weight, bias, out_ch).map(|(y, _)| y)
}

pub struct ConvGrads<T> {
    pub dx: Option<Tensor4<T>>,
    pub dweight: Vec<T>,
    pub dbias: Vec<T>,
}

pub fn conv2d_backward<T: Scalar>(
    in_dims: [usize; 4],
    col: &[T],
    weight: &[T],
    dy: &Tensor4<T>,
    need_dx: bool,
) -> ConvGrads<T> {
    let [n, c, h, w] = in_dims;
    let out_ch = dy.channels();
    let cols = n * h * w;
    let kk = c * K * K;
    let dym = nchw_to_cm(dy);
    let mut dweight = vec![T::zero(); out_ch * kk];
    gemm(Mat::new(&dym, out_ch, cols), Mat::t(col, kk, cols), T::zero(), &mut dweight);
    let dbias = dym.chunks(cols.max(1)).map(|r| r.iter().copied().sum()).collect();
    let dx = need_dx.then(|| {
        let mut dcol = vec![T::zero(); kk * cols];
        gemm(Mat::t(weight, out_ch, kk), Mat::new(&dym, out_ch, cols), T::zero(), &mut dcol);
        col2im(&dcol, in_dims)
    });
    ConvGrads { dx, dweight, dbias }
}

/// Saved state of a training-mode batch normalisation.
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

fn check_bn<T: Scalar>(x: &Tensor4<T>, gamma: &[T], beta: &[T]) -> Result<(), NnError> {
    let c = x.channels();
    if gamma.len() != c || beta.len() != c {
        return Err(shape_err("batchnorm", format!("{c} channels, {} scales", gamma.len())));
    }
    Ok(())
}

/// Training-mode batch normalisation over (N, H, W) per channel. Updates the
/// running statistics with momentum [`BN_MOMENTUM`] (unbiased variance).
pub fn batchnorm_train<T: Scalar>(
    x: &Tensor4<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &mut [T],
    running_var: &mut [T],
) -> Result<(Tensor4<T>, BnCache<T>), NnError> {
    check_bn(x, gamma, beta)?;
    if x.batch() < 2 {
        return Err(NnError::BatchTooSmall);
    }
    let [n, c, _, _] = x.dims;
    let hw = x.plane();
    let count = (n * hw) as f64;
    let mut y = Tensor4::zeros(x.dims);
    let mut xhat = vec![T::zero(); x.data.len()];
    let mut inv_std = vec![T::zero(); c];
    let mom = T::of(BN_MOMENTUM);
    for ci in 0..c {
        let mut sum = 0.0f64;
        for ni in 0..n {
            for v in &x.data[(ni * c + ci) * hw..][..hw] {
                sum += v.to_f64().unwrap();
            }
        }
        let mean = sum / count;
        let mut sq = 0.0f64;
        for ni in 0..n {
            for v in &x.data[(ni * c + ci) * hw..][..hw] {
                let d = v.to_f64().unwrap() - mean;
                sq += d * d;
            }
        }
        let var = sq / count;
        let istd = T::of(1.0 / (var + BN_EPSILON).sqrt());
        inv_std[ci] = istd;
        let m = T::of(mean);
        for ni in 0..n {
            let off = (ni * c + ci) * hw;
            for i in off..off + hw {
                let xh = (x.data[i] - m) * istd;
                xhat[i] = xh;
                y.data[i] = gamma[ci] * xh + beta[ci];
            }
        }
        let unbiased = if count > 1.0 { sq / (count - 1.0) } else { var };
        running_mean[ci] = (T::one() - mom) * running_mean[ci] + mom * m;
        running_var[ci] = (T::one() - mom) * running_var[ci] + mom * T::of(unbiased);
    }
    Ok((y, BnCache { xhat, inv_std }))
}

/// Inference-mode batch normalisation using running statistics.
pub fn batchnorm_eval<T: Scalar>(
    x: &Tensor4<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
) -> Result<Tensor4<T>, NnError> {
    check_bn(x, gamma, beta)?;
    let [n, c, _, _] = x.dims;
    let hw = x.plane();
    let mut y = Tensor4::zeros(x.dims);
    for ci in 0..c {
        let scale = gamma[ci] / (running_var[ci] + T::of(BN_EPSILON)).sqrt();
        let shift = beta[ci] - running_mean[ci] * scale;
        for ni in 0..n {
            let off = (ni * c + ci) * hw;
            for i in off..off + hw {
                y.data[i] = x.data[i] * scale + shift;
            }
        }
    }
    Ok(y)
}

pub fn batchnorm_backward<T: Scalar>(
    cache: &BnCache<T>,
    gamma: &[T],
    dy: &Tensor4<T>,
) -> (Tensor4<T>, Vec<T>, Vec<T>) {
    let [n, c, _, _] = dy.dims;
    let hw = dy.plane();
    let m = T::of((n * hw) as f64);
    let mut dx = Tensor4::zeros(dy.dims);
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for ci in 0..c {
        let (mut sdy, mut sdyx) = (T::zero(), T::zero());
        for ni in 0..n {
            let off = (ni * c + ci) * hw;
            for i in off..off + hw {
                sdy = sdy + dy.data[i];
                sdyx = sdyx + dy.data[i] * cache.xhat[i];
            }
        }
        dgamma[ci] = sdyx;
        dbeta[ci] = sdy;
        let k = gamma[ci] * cache.inv_std[ci] / m;
        for ni in 0..n {
            let off = (ni * c + ci) * hw;
            for i in off..off + hw {
                dx.data[i] = k * (m * dy.data[i] - sdy - cache.xhat[i] * sdyx);
            }
        }
    }
    (dx, dgamma, dbeta)
}

pub fn relu<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        dims: x.dims,
        data: x.data.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect(),
    }
}

/// Backward through ReLU given its forward output.
pub fn relu_backward<T: Scalar>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        dims: dy.dims,
        data: y
            .data
            .iter()
            .zip(&dy.data)
            .map(|(&o, &g)| if o > T::zero() { g } else { T::zero() })
            .collect(),
    }
}

/// 2x2 max pooling with stride 2. Also returns, for every output, the flat
/// input index that produced it.
pub fn maxpool2x2<T: Scalar>(x: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<u32>), NnError> {
    let [n, c, h, w] = x.dims;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(shape_err("maxpool", format!("odd spatial size {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Tensor4::zeros([n, c, oh, ow]);
    let mut arg = vec![0u32; n * c * oh * ow];
    for nc in 0..n * c {
        let base = nc * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x.data[i] > x.data[best] {
                        best = i;
                    }
                }
                let o = (nc * oh + oy) * ow + ox;
                y.data[o] = x.data[best];
                arg[o] = best as u32;
            }
        }
    }
    Ok((y, arg))
}

pub fn maxpool_backward<T: Scalar>(argmax: &[u32], in_dims: [usize; 4], dy: &Tensor4<T>) -> Tensor4<T> {
    let mut dx = Tensor4::zeros(in_dims);
    for (o, &i) in argmax.iter().enumerate() {
        dx.data[i as usize] = dx.data[i as usize] + dy.data[o];
    }
    dx
}

/// Affine map `y = x W^T + b` with `W` stored (out, in).
pub fn fc<T: Scalar>(x: &Tensor4<T>, weight: &[T], bias: &[T], out: usize) -> Result<Tensor4<T>, NnError> {
    let (n, inp) = (x.batch(), x.features());
    if weight.len() != out * inp || bias.len() != out {
        return Err(shape_err(
            "fc",
            format!("{inp} inputs and {out} outputs need {} weights, got {}", out * inp, weight.len()),
        ));
    }
    let mut y = vec![T::zero(); n * out];
    for row in y.chunks_mut(out) {
        row.copy_from_slice(bias);
    }
    gemm(Mat::new(&x.data, n, inp), Mat::t(weight, out, inp), T::one(), &mut y);
    Ok(Tensor4::from_vec([n, out, 1, 1], y))
}

pub struct FcGrads<T> {
    pub dx: Option<Tensor4<T>>,
    pub dweight: Vec<T>,
    pub dbias: Vec<T>,
}

pub fn fc_backward<T: Scalar>(x: &Tensor4<T>, weight: &[T], dy: &Tensor4<T>, need_dx: bool) -> FcGrads<T> {
    let (n, inp) = (x.batch(), x.features());
    let out = dy.features();
    let mut dweight = vec![T::zero(); out * inp];
    gemm(Mat::t(&dy.data, n, out), Mat::new(&x.data, n, inp), T::zero(), &mut dweight);
    let mut dbias = vec![T::zero(); out];
    for row in dy.data.chunks(out) {
        for (d, &g) in dbias.iter_mut().zip(row) {
            *d = *d + g;
        }
    }
    let dx = need_dx.then(|| {
        let mut dx = vec![T::zero(); n * inp];
        gemm(Mat::new(&dy.data, n, out), Mat::new(weight, out, inp), T::zero(), &mut dx);
        Tensor4::from_vec(x.dims, dx)
    });
    FcGrads { dx, dweight, dbias }
}

/// Inverted dropout. In training mode each value is zeroed with
/// probability `rate` and survivors are scaled by `1/(1-rate)`; the returned
/// mask holds the per-value multiplier. Evaluation mode is the identity.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor4<T>,
    rate: f64,
    train: bool,
    rng: &mut R,
) -> Result<(Tensor4<T>, Option<Vec<T>>), NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::DropoutRate(rate));
    }
    if !train || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.data.len())
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let data = x.data.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor4::from_vec(x.dims, data), Some(mask)))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&[T]>, dy: &Tensor4<T>) -> Tensor4<T> {
    match mask {
        None => dy.clone(),
        Some(m) => Tensor4::from_vec(dy.dims, dy.data.iter().zip(m).map(|(&g, &k)| g * k).collect()),
    }
}

/// Row-wise softmax over the feature axis.
pub fn softmax<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let f = x.features();
    let mut out = Vec::with_capacity(x.data.len());
    for row in x.data.chunks(f) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        out.extend(exps.into_iter().map(|e| e / sum));
    }
    Tensor4::from_vec(x.dims, out)
}

/// Weighted cross-entropy of softmax probabilities.
#[derive(Debug, Clone)]
pub struct CrossEntropy<T> {
    /// `sum_i w[l_i] * -ln p_i[l_i] / sum_i w[l_i]`.
    pub loss: f64,
    /// Gradient with respect to the softmax input (logits).
    pub grad_logits: Tensor4<T>,
    /// Set when a true-class probability was below [`PROB_FLOOR`] and clamped.
    pub clamped: bool,
}

pub fn cross_entropy_weighted<T: Scalar>(
    probs: &Tensor4<T>,
    labels: &[usize],
    class_weights: &[f64],
) -> Result<CrossEntropy<T>, NnError> {
    let (n, k) = (probs.batch(), probs.features());
    if labels.len() != n || class_weights.len() != k {
        return Err(shape_err(
            "cross_entropy",
            format!("{n} samples/{k} classes vs {} labels/{} weights", labels.len(), class_weights.len()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(shape_err("cross_entropy", format!("label {bad} out of range")));
    }
    let wsum: f64 = labels.iter().map(|&l| class_weights[l]).sum();
    let mut loss = 0.0;
    let mut clamped = false;
    let mut grad = vec![T::zero(); n * k];
    for (i, &l) in labels.iter().enumerate() {
        let row = &probs.data[i * k..(i + 1) * k];
        let mut p = row[l].to_f64().unwrap();
        if p < PROB_FLOOR {
            p = PROB_FLOOR;
            clamped = true;
        }
        let wi = class_weights[l] / wsum;
        loss -= wi * p.ln();
        for j in 0..k {
            let target = if j == l { 1.0 } else { 0.0 };
            grad[i * k + j] = T::of(wi) * (row[j] - T::of(target));
        }
    }
    Ok(CrossEntropy {
        loss,
        grad_logits: Tensor4::from_vec(probs.dims, grad),
        clamped,
    })
}
