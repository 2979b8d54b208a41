//! Central finite-difference oracle for the network kernels.
//!
//! Every check builds a scalar `L = sum(g * f(x))` with a random upstream
//! weighting `g`, perturbs one input coordinate at a time by `±h`, and
//! compares `(L(+h) - L(-h)) / 2h` with the analytic gradient.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texvc::nn::layers;
use texvc::nn::{NetParams, NetSpec, Tensor4};

pub const H: f64 = 1e-5;
/// Denominator floor so near-zero gradients are judged on absolute error.
/// Central differences of an O(1) loss carry roughly 1e-10 of rounding
/// noise at this step, so exactly-zero gradients (a conv bias feeding
/// batchnorm) need an absolute allowance above that.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub max_rel: f64,
    pub checked: usize,
    pub skipped: usize,
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn rand_t(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> Tensor4<f64> {
    Tensor4::from_vec(dims, rand_vec(rng, dims.iter().product(), -1.0, 1.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compare `analytic` with central differences of `f` around `x`.
fn compare(name: &str, x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Check {
    let mut max_rel = 0.0f64;
    let mut xs = x.to_vec();
    for i in 0..x.len() {
        xs[i] = x[i] + H;
        let fp = f(&xs);
        xs[i] = x[i] - H;
        let fm = f(&xs);
        xs[i] = x[i];
        let numeric = (fp - fm) / (2.0 * H);
        max_rel = max_rel.max(rel_err(analytic[i], numeric));
    }
    Check {
        name: name.to_string(),
        max_rel,
        checked: x.len(),
        skipped: 0,
    }
}

pub fn check_conv(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [2, 3, 5, 4];
    let out_ch = 4;
    let x = rand_t(&mut rng, dims);
    let w = rand_vec(&mut rng, out_ch * 27, -1.0, 1.0);
    let b = rand_vec(&mut rng, out_ch, -1.0, 1.0);
    let g = rand_vec(&mut rng, 2 * out_ch * 20, -1.0, 1.0);
    let (_, col) = layers::conv2d_cached(&x, &w, &b, out_ch).unwrap();
    let gt = Tensor4::from_vec([2, out_ch, 5, 4], g.clone());
    let grads = layers::conv2d_backward(dims, &col, &w, &gt, true);
    let loss = |x: &Tensor4<f64>, w: &[f64], b: &[f64]| dot(&layers::conv2d(x, w, b, out_ch).unwrap().data, &g);
    vec![
        compare("conv dx", &x.data, &grads.dx.unwrap().data, |v| {
            loss(&Tensor4::from_vec(dims, v.to_vec()), &w, &b)
        }),
        compare("conv dw", &w, &grads.dweight, |v| loss(&x, v, &b)),
        compare("conv db", &b, &grads.dbias, |v| loss(&x, &w, v)),
    ]
}

pub fn check_batchnorm(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [4, 3, 3, 2];
    let x = Tensor4::from_vec(dims, rand_vec(&mut rng, 72, -2.0, 3.0));
    let gamma = rand_vec(&mut rng, 3, 0.5, 1.5);
    let beta = rand_vec(&mut rng, 3, -0.5, 0.5);
    let g = rand_vec(&mut rng, 72, -1.0, 1.0);
    let (_, cache) = layers::batchnorm_train(&x, &gamma, &beta, &mut [0.0; 3], &mut [1.0; 3]).unwrap();
    let (dx, dgamma, dbeta) = layers::batchnorm_backward(&cache, &gamma, &Tensor4::from_vec(dims, g.clone()));
    let loss = |x: &Tensor4<f64>, ga: &[f64], be: &[f64]| {
        let y = layers::batchnorm_train(x, ga, be, &mut [0.0; 3], &mut [1.0; 3]).unwrap().0;
        dot(&y.data, &g)
    };
    vec![
        compare("batchnorm dx", &x.data, &dx.data, |v| {
            loss(&Tensor4::from_vec(dims, v.to_vec()), &gamma, &beta)
        }),
        compare("batchnorm dgamma", &gamma, &dgamma, |v| loss(&x, v, &beta)),
        compare("batchnorm dbeta", &beta, &dbeta, |v| loss(&x, &gamma, v)),
    ]
}

pub fn check_relu(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [2, 2, 3, 3];
    // Keep inputs away from the kink at zero.
    let data = (0..36)
        .map(|_| {
            let m = rng.gen_range(0.01..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    let x = Tensor4::from_vec(dims, data);
    let g = rand_vec(&mut rng, 36, -1.0, 1.0);
    let y = layers::relu(&x);
    let dx = layers::relu_backward(&y, &Tensor4::from_vec(dims, g.clone()));
    vec![compare("relu dx", &x.data, &dx.data, |v| {
        dot(&layers::relu(&Tensor4::from_vec(dims, v.to_vec())).data, &g)
    })]
}

pub fn check_maxpool(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [2, 2, 4, 4];
    // A shuffled grid of well-separated values has no ties within h.
    let mut data: Vec<f64> = (0..64).map(|i| i as f64 * 0.1).collect();
    for i in (1..data.len()).rev() {
        let j = rng.gen_range(0..=i);
        data.swap(i, j);
    }
    let x = Tensor4::from_vec(dims, data);
    let g = rand_vec(&mut rng, 16, -1.0, 1.0);
    let (_, arg) = layers::maxpool2x2(&x).unwrap();
    let dx = layers::maxpool_backward(&arg, dims, &Tensor4::from_vec([2, 2, 2, 2], g.clone()));
    vec![compare("maxpool dx", &x.data, &dx.data, |v| {
        dot(&layers::maxpool2x2(&Tensor4::from_vec(dims, v.to_vec())).unwrap().0.data, &g)
    })]
}

pub fn check_fc(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [3, 7, 1, 1];
    let out = 5;
    let x = rand_t(&mut rng, dims);
    let w = rand_vec(&mut rng, out * 7, -1.0, 1.0);
    let b = rand_vec(&mut rng, out, -1.0, 1.0);
    let g = rand_vec(&mut rng, 3 * out, -1.0, 1.0);
    let grads = layers::fc_backward(&x, &w, &Tensor4::from_vec([3, out, 1, 1], g.clone()), true);
    let loss = |x: &Tensor4<f64>, w: &[f64], b: &[f64]| dot(&layers::fc(x, w, b, out).unwrap().data, &g);
    vec![
        compare("fc dx", &x.data, &grads.dx.unwrap().data, |v| {
            loss(&Tensor4::from_vec(dims, v.to_vec()), &w, &b)
        }),
        compare("fc dw", &w, &grads.dweight, |v| loss(&x, v, &b)),
        compare("fc db", &b, &grads.dbias, |v| loss(&x, &w, v)),
    ]
}

pub fn check_dropout(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [2, 6, 1, 1];
    let x = rand_t(&mut rng, dims);
    let g = rand_vec(&mut rng, 12, -1.0, 1.0);
    let mask_seed = rng.gen();
    let run = |x: &Tensor4<f64>| {
        let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
        layers::dropout(x, 0.5, true, &mut r).unwrap()
    };
    let (_, mask) = run(&x);
    let dx = layers::dropout_backward(mask.as_deref(), &Tensor4::from_vec(dims, g.clone()));
    vec![compare("dropout dx", &x.data, &dx.data, |v| {
        dot(&run(&Tensor4::from_vec(dims, v.to_vec())).0.data, &g)
    })]
}

pub fn check_softmax_ce(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [5, 2, 1, 1];
    let z = Tensor4::from_vec(dims, rand_vec(&mut rng, 10, -3.0, 3.0));
    let labels: Vec<usize> = (0..5).map(|_| rng.gen_range(0..2)).collect();
    let w = [1.0, 20.78];
    let ce = layers::cross_entropy_weighted(&layers::softmax(&z), &labels, &w).unwrap();
    vec![compare("softmax+cross-entropy dlogits", &z.data, &ce.grad_logits.data, |v| {
        let p = layers::softmax(&Tensor4::from_vec(dims, v.to_vec()));
        layers::cross_entropy_weighted(&p, &labels, &w).unwrap().loss
    })]
}

/// End-to-end check through every layer of a network on a 4-sample batch.
/// Coordinates whose perturbation changes a ReLU sign or a pooling winner
/// sit on a non-differentiable point and are skipped.
pub fn check_network(spec: &NetSpec, seed: u64, max_coords_per_tensor: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: NetParams<f64> = NetParams::init(spec, &mut rng).unwrap();
    // Non-trivial batchnorm affine parameters.
    for t in params.learnable_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }
    }
    let x = rand_t(&mut rng, [4, 3, 16, 16]);
    let labels = vec![0, 1, 1, 0];
    let w = [1.0, 3.0];
    let drop_seed: u64 = rng.gen();

    let eval = |p: &NetParams<f64>| {
        let mut p = p.clone();
        let mut r = ChaCha8Rng::seed_from_u64(drop_seed);
        let (probs, cache) = p.forward_train(&x, &mut r).unwrap();
        let loss = layers::cross_entropy_weighted(&probs, &labels, &w).unwrap().loss;
        (loss, cache.kink_signature())
    };

    let analytic = {
        let mut p = params.clone();
        let mut r = ChaCha8Rng::seed_from_u64(drop_seed);
        p.loss_and_grads(&x, &labels, &w, &mut r).unwrap().1
    };
    let (_, base_sig) = eval(&params);

    let mut max_rel = 0.0f64;
    let (mut checked, mut skipped) = (0, 0);
    let n_tensors = params.learnable().len();
    for ti in 0..n_tensors {
        let len = params.learnable()[ti].len();
        let stride = (len / max_coords_per_tensor.max(1)).max(1);
        for ci in (0..len).step_by(stride) {
            let orig = params.learnable()[ti][ci];
            params.learnable_mut()[ti][ci] = orig + H;
            let (fp, sp) = eval(&params);
            params.learnable_mut()[ti][ci] = orig - H;
            let (fm, sm) = eval(&params);
            params.learnable_mut()[ti][ci] = orig;
            if sp != base_sig || sm != base_sig {
                skipped += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * H);
            max_rel = max_rel.max(rel_err(analytic.tensors[ti][ci], numeric));
            checked += 1;
        }
    }
    Check {
        name: format!("network {}", spec.canonical()),
        max_rel,
        checked,
        skipped,
    }
}

/// Every per-layer check plus a whole-network check for one seed.
pub fn all_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    out.extend(check_conv(seed));
    out.extend(check_batchnorm(seed));
    out.extend(check_relu(seed));
    out.extend(check_maxpool(seed));
    out.extend(check_fc(seed));
    out.extend(check_dropout(seed));
    out.extend(check_softmax_ce(seed));
    out.push(check_network(&NetSpec::classifier(&[4, 8, 16], &[16, 8], 0.5), seed, 24));
    out
}
