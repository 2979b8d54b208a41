//! Orthonormal 2-D DCT-II, uniform scalar quantisation and zig-zag scan.

use std::sync::OnceLock;

/// `n`x`n` DCT-II basis, row k = frequency k.
struct Basis {
    n: usize,
    c: Vec<f64>,
}

impl Basis {
    fn new(n: usize) -> Self {
        let mut c = vec![0.0; n * n];
        for k in 0..n {
            let a = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                c[k * n + i] = a * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            }
        }
        Basis { n, c }
    }
}

fn basis(n: usize) -> &'static Basis {
    static B8: OnceLock<Basis> = OnceLock::new();
    static B16: OnceLock<Basis> = OnceLock::new();
    match n {
        8 => B8.get_or_init(|| Basis::new(8)),
        16 => B16.get_or_init(|| Basis::new(16)),
        _ => panic!("transform size {n} not supported"),
    }
}

/// `C x C^T` for a row-major `n`x`n` block.
pub fn forward_dct(block: &[f64], n: usize) -> Vec<f64> {
    let b = basis(n);
    let mut tmp = vec![0.0; n * n];
    // Rows: tmp[y][k] = sum_x block[y][x] * C[k][x]
    for y in 0..n {
        for k in 0..n {
            tmp[y * n + k] = (0..n).map(|x| block[y * n + x] * b.c[k * n + x]).sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        for u in 0..n {
            out[k * n + u] = (0..n).map(|y| tmp[y * n + u] * b.c[k * n + y]).sum();
        }
    }
    debug_assert_eq!(b.n, n);
    out
}

/// `C^T X C`, the inverse of [`forward_dct`].
pub fn inverse_dct(coef: &[f64], n: usize) -> Vec<f64> {
    let b = basis(n);
    let mut tmp = vec![0.0; n * n];
    for k in 0..n {
        for x in 0..n {
            tmp[k * n + x] = (0..n).map(|u| coef[k * n + u] * b.c[u * n + x]).sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            out[y * n + x] = (0..n).map(|k| tmp[k * n + x] * b.c[k * n + y]).sum();
        }
    }
    out
}

/// Round half away from zero.
#[inline]
fn round_away(v: f64) -> i64 {
    v.round() as i64
}

/// Quantise with step `q`, rounding half away from zero.
pub fn quantize(coef: &[f64], q: u32) -> Vec<i32> {
    coef.iter().map(|&c| round_away(c / q as f64) as i32).collect()
}

/// Residual levels for a block of integer residuals.
pub fn transform_quantize(residual: &[i32], n: usize, q: u32) -> Vec<i32> {
    let block: Vec<f64> = residual.iter().map(|&v| v as f64).collect();
    quantize(&forward_dct(&block, n), q)
}

/// Integer residual reconstructed from levels. All-zero levels skip the
/// transform.
pub fn dequantize_inverse(levels: &[i32], n: usize, q: u32) -> Vec<i32> {
    if levels.iter().all(|&l| l == 0) {
        return vec![0; n * n];
    }
    let coef: Vec<f64> = levels.iter().map(|&l| l as f64 * q as f64).collect();
    inverse_dct(&coef, n).iter().map(|&v| round_away(v) as i32).collect()
}

/// Diagonal zig-zag scan order for an `n`x`n` block (raster indices).
pub fn zigzag(n: usize) -> &'static [usize] {
    static Z8: OnceLock<Vec<usize>> = OnceLock::new();
    static Z16: OnceLock<Vec<usize>> = OnceLock::new();
    let build = |n: usize| {
        let mut order = Vec::with_capacity(n * n);
        for s in 0..2 * n - 1 {
            let range: Vec<usize> = (0..n).filter(|&y| s >= y && s - y < n).collect();
            // Even diagonals run bottom-left to top-right.
            let ys: Vec<usize> = if s % 2 == 0 { range.into_iter().rev().collect() } else { range };
            for y in ys {
                order.push(y * n + (s - y));
            }
        }
        order
    };
    match n {
        8 => Z8.get_or_init(|| build(8)),
        16 => Z16.get_or_init(|| build(16)),
        _ => panic!("scan size {n} not supported"),
    }
}
