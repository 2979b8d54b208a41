//! Bjøntegaard delta rate and PSNR between two rate-distortion curves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// Bits per frame.
    pub rate: f64,
    /// Non-texture PSNR in dB.
    pub psnr: f64,
}

#[derive(Deserialize)]
struct RawCurve {
    points: Vec<RdPoint>,
}

/// Four RD points sorted by strictly increasing rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve")]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl TryFrom<RawCurve> for RdCurve {
    type Error = EvalError;

    fn try_from(raw: RawCurve) -> Result<Self, EvalError> {
        RdCurve::new(raw.points)
    }
}

impl RdCurve {
    pub const POINTS: usize = 4;

    pub fn new(mut points: Vec<RdPoint>) -> Result<Self, EvalError> {
        if points.len() != Self::POINTS {
            return Err(EvalError::Curve(format!("{} points, need {}", points.len(), Self::POINTS)));
        }
        for p in &points {
            if !(p.rate > 0.0 && p.rate.is_finite()) {
                return Err(EvalError::NonPositiveRate(p.rate));
            }
            if !p.psnr.is_finite() {
                return Err(EvalError::Curve(format!("PSNR {}", p.psnr)));
            }
        }
        points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        if points.windows(2).any(|w| w[0].rate >= w[1].rate) {
            return Err(EvalError::Curve("rates are not distinct".into()));
        }
        Ok(RdCurve { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    /// PSNR rises with rate.
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[0].psnr < w[1].psnr)
    }

    fn log_rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rate.log10()).collect()
    }

    fn psnrs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.psnr).collect()
    }
}

/// Curve model used to integrate between the points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BdMethod {
    /// One least-squares cubic per curve.
    #[default]
    Cubic,
    /// Piecewise cubic Hermite interpolation with monotone slopes.
    Pchip,
}

/// Cubic polynomial in the normalised variable `(x - centre) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    /// Coefficients of u^0 .. u^3.
    pub coef: [f64; 4],
    pub centre: f64,
    pub scale: f64,
}

impl Cubic {
    /// Least-squares fit through at least four points with distinct `x`.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self, EvalError> {
        if xs.len() < 4 || xs.len() != ys.len() {
            return Err(EvalError::Curve(format!("cubic fit needs at least 4 points, got {}", xs.len())));
        }
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (centre, scale) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        if !(scale > 0.0) {
            return Err(EvalError::Curve("fit abscissae coincide".into()));
        }
        let a = DMatrix::from_fn(xs.len(), 4, |i, j| ((xs[i] - centre) / scale).powi(j as i32));
        let b = DVector::from_column_slice(ys);
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| EvalError::Curve(format!("cubic fit failed: {e}")))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::Curve("cubic fit is singular".into()));
        }
        Ok(Cubic {
            coef: [sol[0], sol[1], sol[2], sol[3]],
            centre,
            scale,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.centre) / self.scale;
        self.coef.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let u = (x - self.centre) / self.scale;
        let c = &self.coef;
        self.scale * u * (c[0] + u * (c[1] / 2.0 + u * (c[2] / 3.0 + u * c[3] / 4.0)))
    }

    /// Exact integral over [lo, hi].
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.antiderivative(hi) - self.antiderivative(lo)
    }
}

/// Monotone piecewise cubic Hermite interpolant.
struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    fn new(xs: &[f64], ys: &[f64]) -> Result<Self, EvalError> {
        let mut pts: Vec<(f64, f64)> = xs.iter().cloned().zip(ys.iter().cloned()).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(EvalError::Curve("interpolation abscissae are not distinct".into()));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let (w1, w2) = (2.0 * h[k] + h[k - 1], h[k] + 2.0 * h[k - 1]);
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s.signum() != d0.signum() {
                0.0
            } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        d[0] = end(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Pchip { xs, ys, slopes: d })
    }

    /// Exact integral over [lo, hi] within the data range.
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.xs.len() - 1 {
            let (x0, x1) = (self.xs[k], self.xs[k + 1]);
            let (a, b) = (lo.max(x0), hi.min(x1));
            if a >= b {
                continue;
            }
            let h = x1 - x0;
            let delta = (self.ys[k + 1] - self.ys[k]) / h;
            let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
            let c = [
                self.ys[k],
                d0,
                (3.0 * delta - 2.0 * d0 - d1) / h,
                (d0 + d1 - 2.0 * delta) / (h * h),
            ];
            let prim = |t: f64| t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)));
            total += prim(b - x0) - prim(a - x0);
        }
        total
    }
}

/// Mean difference `test - base` of `y(x)` over the shared `x` range.
fn mean_gap(
    base: (&[f64], &[f64]),
    test: (&[f64], &[f64]),
    method: BdMethod,
    axis: &'static str,
) -> Result<f64, EvalError> {
    let range = |xs: &[f64]| {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (bl, bh) = range(base.0);
    let (tl, th) = range(test.0);
    let (lo, hi) = (bl.max(tl), bh.min(th));
    if !(hi > lo) {
        return Err(EvalError::NoOverlap(axis));
    }
    let (ib, it) = match method {
        BdMethod::Cubic => (
            Cubic::fit(base.0, base.1)?.integral(lo, hi),
            Cubic::fit(test.0, test.1)?.integral(lo, hi),
        ),
        BdMethod::Pchip => (
            Pchip::new(base.0, base.1)?.integral(lo, hi),
            Pchip::new(test.0, test.1)?.integral(lo, hi),
        ),
    };
    Ok((it - ib) / (hi - lo))
}

fn warn_non_monotone(name: &str, c: &RdCurve) {
    if !c.is_monotone() {
        log::warn!("{name} curve PSNR does not rise with rate; Bjøntegaard results may be unreliable");
    }
}

/// Average rate change of `test` against `base` at equal PSNR, in
/// percent; negative means `test` needs fewer bits.
pub fn bd_rate(base: &RdCurve, test: &RdCurve, method: BdMethod) -> Result<f64, EvalError> {
    warn_non_monotone("baseline", base);
    warn_non_monotone("test", test);
    let gap = mean_gap(
        (&base.psnrs(), &base.log_rates()),
        (&test.psnrs(), &test.log_rates()),
        method,
        "PSNR",
    )?;
    Ok((10f64.powf(gap) - 1.0) * 100.0)
}

/// Average PSNR change of `test` against `base` at equal rate, in dB.
pub fn bd_psnr(base: &RdCurve, test: &RdCurve, method: BdMethod) -> Result<f64, EvalError> {
    warn_non_monotone("baseline", base);
    warn_non_monotone("test", test);
    mean_gap(
        (&base.log_rates(), &base.psnrs()),
        (&test.log_rates(), &test.psnrs()),
        method,
        "rate",
    )
}
