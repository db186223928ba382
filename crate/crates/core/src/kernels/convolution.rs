use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::SampledFunction;
use crate::error::{Error, Result};

// Below this length the direct O(n²) sum is cheaper than two FFTs.
const DIRECT_LIMIT: usize = 96;

/// Trapezoidal causal convolution `(f ⋆ g)(t) = ∫_0^t f(t−u) g(u) du` on the
/// shared grid.
///
/// The result is truncated to the shorter of the two horizons. Tail masses
/// of the operands are ignored and the result carries none.
pub fn convolve(f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    check_grid(f, g)?;
    let n = f.len().min(g.len());
    let raw = linear_convolution(&f.values()[..n], &g.values()[..n], n);
    Ok(SampledFunction::from_parts(
        f.dt(),
        trapezoid_correct(raw, &f.values()[..n], &g.values()[..n], f.dt()),
        0.0,
    ))
}

pub(crate) fn check_grid(f: &SampledFunction, g: &SampledFunction) -> Result<()> {
    let (a, b) = (f.dt(), g.dt());
    if (a - b).abs() > 1e-12 * a.max(b) {
        return Err(Error::GridMismatch { left: a, right: b });
    }
    Ok(())
}

/// Turns the raw discrete sum `Σ_{j≤k} f_{k−j} g_j` into the trapezoidal
/// integral by halving the two endpoint terms.
fn trapezoid_correct(mut raw: Vec<f64>, f: &[f64], g: &[f64], dt: f64) -> Vec<f64> {
    for (k, r) in raw.iter_mut().enumerate() {
        *r = dt * (*r - 0.5 * (f[k] * g[0] + f[0] * g[k]));
    }
    raw
}

/// First `n` coefficients of the linear convolution of `a` and `b`.
pub(crate) fn linear_convolution(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let a = &a[..a.len().min(n)];
    let b = &b[..b.len().min(n)];
    if a.is_empty() || b.is_empty() {
        return vec![0.0; n];
    }
    if a.len().min(b.len()) <= DIRECT_LIMIT {
        return direct(a, b, n);
    }
    let size = (a.len() + b.len() - 1).min(2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa = spectrum(&*fwd, a, size);
    let fb = spectrum(&*fwd, b, size);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    let mut out: Vec<f64> = fa.iter().take(n).map(|c| c.re * scale).collect();
    out.resize(n, 0.0);
    out
}

fn direct(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(n - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn spectrum(fft: &dyn Fft<f64>, x: &[f64], size: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    fft.process(&mut buf);
    buf
}

/// Repeated trapezoidal convolution against one fixed operand.
///
/// Holds the operand's spectrum so that series such as `φ^(⋆n)` cost two
/// FFTs per term.
pub struct Convolver {
    dt: f64,
    base: Vec<f64>,
    size: usize,
    base_spectrum: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Convolver {
    pub fn new(base: &SampledFunction) -> Self {
        let n = base.len();
        let size = (2 * n).next_power_of_two().max(2);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let base_spectrum = spectrum(&*fwd, base.values(), size);
        Self {
            dt: base.dt(),
            base: base.values().to_vec(),
            size,
            base_spectrum,
            fwd,
            inv,
        }
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// `base ⋆ g`, on the base grid length.
    pub fn apply(&self, g: &SampledFunction) -> Result<SampledFunction> {
        if (g.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::GridMismatch { left: self.dt, right: g.dt() });
        }
        Ok(SampledFunction::from_parts(self.dt, self.apply_values(g.values()), 0.0))
    }

    pub(crate) fn apply_values(&self, g: &[f64]) -> Vec<f64> {
        let n = self.base.len();
        let mut gv = g[..g.len().min(n)].to_vec();
        gv.resize(n, 0.0);
        let raw = if n <= DIRECT_LIMIT {
            direct(&self.base, &gv, n)
        } else {
            let mut buf = spectrum(&*self.fwd, &gv, self.size);
            for (x, y) in buf.iter_mut().zip(&self.base_spectrum) {
                *x *= y;
            }
            self.inv.process(&mut buf);
            let scale = 1.0 / self.size as f64;
            buf.iter().take(n).map(|c| c.re * scale).collect()
        };
        trapezoid_correct(raw, &self.base, &gv, self.dt)
    }
}
