//! Joint calibration of the impulsive model to a family of impact curves.
//!
//! Each empirical curve `η̂⁽ⁱ⁾_s` on `s ∈ [0, 2]` comes from metaorders of
//! duration `Tᵢ`. The model curve for a constant rate is
//! `m(t) = ∫_0^t H − ∫_0^{t−T} H`, rescaled so that it matches `η̂⁽ⁱ⁾_1` at
//! `s = 1`; the fit minimizes
//!
//! ```text
//! Σᵢ ∫_0^2 (η̂⁽ⁱ⁾_1 · m_i(s·Tᵢ)/m_i(Tᵢ) − η̂⁽ⁱ⁾_s)² ds
//! ```
//!
//! over the kernel norm, the exponent `b` and one `Cᵢ` per curve. Since
//! `H = 1 − (1 + C/‖φ‖₁)∫κ` and `κ` depends only on the kernel, the
//! contrarian ratios enter linearly and are solved cheaply per curve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::estimation::ImpactCurve;
use crate::kernels::{kappa_resolvent, sample_kernel, PowerLawKernel, SampledFunction, DEFAULT_POWER_LAW_OFFSET};
use crate::optimize::golden_section;

/// Curves, durations and search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitProblem {
    pub curves: Vec<ImpactCurve>,
    /// Metaorder duration of each curve, in seconds.
    pub durations: Vec<f64>,
    /// Kernel time unit in seconds; the offset is expressed in it.
    #[serde(default = "default_unit")]
    pub time_unit: f64,
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default = "default_norm_bounds")]
    pub norm_bounds: (f64, f64),
    #[serde(default = "default_b_bounds")]
    pub b_bounds: (f64, f64),
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    /// Grid step of the kernel, in `time_unit`.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_unit() -> f64 {
    60.0
}

fn default_offset() -> f64 {
    DEFAULT_POWER_LAW_OFFSET
}

fn default_norm_bounds() -> (f64, f64) {
    (0.01, 0.99)
}

fn default_b_bounds() -> (f64, f64) {
    (-1.99, -1.01)
}

fn default_c_max() -> f64 {
    1.5
}

fn default_dt() -> f64 {
    1e-2
}

impl FitProblem {
    pub fn new(curves: Vec<ImpactCurve>, durations: Vec<f64>) -> Result<Self> {
        let p = Self {
            curves,
            durations,
            time_unit: default_unit(),
            offset: default_offset(),
            norm_bounds: default_norm_bounds(),
            b_bounds: default_b_bounds(),
            c_max: default_c_max(),
            dt: default_dt(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.curves.len() != self.durations.len() {
            return Err(Error::param("durations", "one duration per curve"));
        }
        for &t in &self.durations {
            ensure_finite("durations", t)?;
            if !(t > 0.0) {
                return Err(Error::param("durations", "must be > 0"));
            }
        }
        for c in &self.curves {
            if c.value_at(1.0).is_none() {
                return Err(Error::param("curves", "every curve needs a value at s = 1"));
            }
        }
        for (name, v) in [("time_unit", self.time_unit), ("offset", self.offset), ("dt", self.dt)] {
            ensure_finite(name, v)?;
            if !(v > 0.0) {
                return Err(Error::param(name, "must be > 0"));
            }
        }
        let (nl, nh) = self.norm_bounds;
        if !(nl > 0.0 && nh < 1.0 && nl < nh) {
            return Err(Error::param("norm_bounds", "need 0 < lo < hi < 1"));
        }
        let (bl, bh) = self.b_bounds;
        if !(bl > -2.0 && bh < -1.0 && bl < bh) {
            return Err(Error::param("b_bounds", "need -2 < lo < hi < -1"));
        }
        if !(self.c_max >= 0.0) {
            return Err(Error::param("c_max", "must be >= 0"));
        }
        Ok(())
    }

    /// `Σᵢ ∫ η̂⁽ⁱ⁾_s² ds`, the reference scale of the objective.
    pub fn curve_energy(&self) -> f64 {
        self.curves.iter().map(|c| integrate(&c.s, &c.mean, |v| v * v)).sum()
    }

    fn horizon(&self) -> f64 {
        let s_max = self.curves.iter().map(|c| c.s_max()).fold(1.0, f64::max);
        let t_max = self.durations.iter().copied().fold(0.0, f64::max);
        s_max * t_max / self.time_unit
    }
}

fn integrate(s: &[f64], v: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    s.windows(2)
        .zip(v.windows(2))
        .map(|(s, v)| 0.5 * (s[1] - s[0]) * (f(v[0]) + f(v[1])))
        .sum()
}

/// Kernel and contrarian ratios of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub norm: f64,
    pub b: f64,
    pub contrarian: Vec<f64>,
}

/// `∫∫κ` on the grid for one kernel, with the two parts of every model curve.
struct KernelResponse {
    norm: f64,
    kk: SampledFunction,
}

impl KernelResponse {
    fn new(problem: &FitProblem, norm: f64, b: f64) -> Result<Self> {
        let kernel = PowerLawKernel::with_l1_norm(norm, b, problem.offset)?;
        let phi = sample_kernel(kernel, problem.dt, problem.horizon().max(problem.dt))?;
        let kappa = kappa_resolvent(&phi)?;
        let kk = kappa.cumulative_integral().cumulative_integral();
        Ok(Self { norm, kk })
    }

    fn kk_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.kk.value_at(x)
        }
    }

    /// `(A(s), B(s))` with `m(s) = A − (1 + C/‖φ‖₁)·B` for a curve of
    /// duration `t_len` (kernel units).
    fn parts(&self, s: &[f64], t_len: f64) -> (Vec<f64>, Vec<f64>) {
        s.iter()
            .map(|&s| {
                let t = s * t_len;
                (t.min(t_len), self.kk_at(t) - self.kk_at(t - t_len))
            })
            .unzip()
    }
}

/// Squared error of one curve for a given `C`, plus the scale factor.
fn curve_error(curve: &ImpactCurve, a: &[f64], b: &[f64], at_one: (f64, f64), norm: f64, c: f64) -> (f64, f64) {
    let k = 1.0 + c / norm;
    let m1 = at_one.0 - k * at_one.1;
    let target = curve.value_at(1.0).unwrap();
    if !(m1 > 0.0) {
        return (f64::INFINITY, f64::NAN);
    }
    let scale = target / m1;
    let err: Vec<f64> = a
        .iter()
        .zip(b)
        .zip(&curve.mean)
        .map(|((a, b), v)| scale * (a - k * b) - v)
        .collect();
    (integrate(&curve.s, &err, |e| e * e), scale)
}

struct Prepared {
    parts: Vec<(Vec<f64>, Vec<f64>, (f64, f64))>,
    norm: f64,
}

fn prepare(problem: &FitProblem, norm: f64, b: f64) -> Result<Prepared> {
    let resp = KernelResponse::new(problem, norm, b)?;
    let parts = problem
        .curves
        .iter()
        .zip(&problem.durations)
        .map(|(c, &d)| {
            let t_len = d / problem.time_unit;
            let (a, bb) = resp.parts(&c.s, t_len);
            let (a1, b1) = resp.parts(&[1.0], t_len);
            (a, bb, (a1[0], b1[0]))
        })
        .collect();
    Ok(Prepared { parts, norm: resp.norm })
}

/// The integrated squared error minimized by [`fit`].
pub fn objective(params: &FitParams, problem: &FitProblem) -> Result<f64> {
    problem.validate()?;
    if problem.curves.is_empty() {
        return Ok(0.0);
    }
    if params.contrarian.len() != problem.curves.len() {
        return Err(Error::param("contrarian", "one value per curve"));
    }
    let prep = prepare(problem, params.norm, params.b)?;
    Ok(problem
        .curves
        .iter()
        .zip(&prep.parts)
        .zip(&params.contrarian)
        .map(|((curve, (a, b, one)), &c)| curve_error(curve, a, b, *one, prep.norm, c).0)
        .sum())
}

/// Model curve of one problem entry, rescaled to match at `s = 1`.
pub fn model_curve(problem: &FitProblem, index: usize, params: &FitParams) -> Result<Vec<f64>> {
    let prep = prepare(problem, params.norm, params.b)?;
    let (a, b, one) = &prep.parts[index];
    let c = params.contrarian[index];
    let curve = &problem.curves[index];
    let (_, scale) = curve_error(curve, a, b, *one, prep.norm, c);
    let k = 1.0 + c / prep.norm;
    Ok(a.iter().zip(b).map(|(a, b)| scale * (a - k * b)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Bracket width at which 1D searches stop.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    /// Starting points `(norm, b)`; defaults to eight spread over the box.
    #[serde(default)]
    pub starts: Option<Vec<(f64, f64)>>,
}

fn default_tol() -> f64 {
    1e-4
}

fn default_sweeps() -> usize {
    30
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { tol: default_tol(), max_sweeps: default_sweeps(), starts: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub norm: f64,
    pub b: f64,
    pub offset: f64,
    pub contrarian: Vec<f64>,
    /// Per-curve factor mapping the unit-rate model onto the data.
    pub scales: Vec<f64>,
    pub objective: f64,
    /// Objective divided by `Σᵢ ∫ η̂² ds`.
    pub relative_objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective reached from each start.
    pub start_objectives: Vec<f64>,
}

impl FitResult {
    pub fn params(&self) -> FitParams {
        FitParams { norm: self.norm, b: self.b, contrarian: self.contrarian.clone() }
    }
}

/// Profiled objective: best `Cᵢ` per curve for a kernel.
fn profiled(problem: &FitProblem, norm: f64, b: f64, tol: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let prep = prepare(problem, norm, b)?;
    let mut total = 0.0;
    let mut cs = Vec::with_capacity(problem.curves.len());
    let mut scales = Vec::with_capacity(problem.curves.len());
    for (curve, (a, bb, one)) in problem.curves.iter().zip(&prep.parts) {
        let m = golden_section(
            |c| curve_error(curve, a, bb, *one, prep.norm, c).0,
            0.0,
            problem.c_max,
            tol * 0.1,
            200,
        );
        total += m.value;
        cs.push(m.x);
        scales.push(curve_error(curve, a, bb, *one, prep.norm, m.x).1);
    }
    Ok((total, cs, scales))
}

fn default_starts(problem: &FitProblem) -> Vec<(f64, f64)> {
    let (nl, nh) = problem.norm_bounds;
    let (bl, bh) = problem.b_bounds;
    let at = |u: f64, lo: f64, hi: f64| lo + u * (hi - lo);
    [(0.2, 0.2), (0.5, 0.5), (0.8, 0.8), (0.2, 0.8), (0.8, 0.2), (0.5, 0.15), (0.5, 0.85), (0.9, 0.5)]
        .iter()
        .map(|&(u, v)| (at(u, nl, nh), at(v, bl, bh)))
        .collect()
}

/// Coordinate descent over `(‖φ‖₁, b)` with the `Cᵢ` profiled out, from
/// several fixed starts. Starts run in parallel; the best is kept.
pub fn fit(problem: &FitProblem, config: &FitConfig) -> Result<FitResult> {
    problem.validate()?;
    if problem.curves.is_empty() {
        return Err(Error::InsufficientData("no curves to fit".into()));
    }
    let starts = config.starts.clone().unwrap_or_else(|| default_starts(problem));
    if starts.is_empty() {
        return Err(Error::param("starts", "need at least one starting point"));
    }
    let (nl, nh) = problem.norm_bounds;
    let (bl, bh) = problem.b_bounds;
    let runs: Vec<Result<(f64, f64, f64, usize, bool)>> = starts
        .par_iter()
        .map(|&(n0, b0)| {
            let mut norm = n0.clamp(nl, nh);
            let mut b = b0.clamp(bl, bh);
            let mut evals = 0usize;
            let mut eval = |n: f64, b: f64| -> f64 {
                evals += 1;
                profiled(problem, n, b, config.tol).map_or(f64::INFINITY, |r| r.0)
            };
            let mut best = eval(norm, b);
            let mut converged = false;
            for _ in 0..config.max_sweeps {
                let (n_prev, b_prev) = (norm, b);
                let m = golden_section(|n| eval(n, b), nl, nh, config.tol, 200);
                if m.value <= best {
                    norm = m.x;
                    best = m.value;
                }
                let m = golden_section(|x| eval(norm, x), bl, bh, config.tol, 200);
                if m.value <= best {
                    b = m.x;
                    best = m.value;
                }
                if (norm - n_prev).abs() <= config.tol && (b - b_prev).abs() <= config.tol {
                    converged = true;
                    break;
                }
            }
            Ok((best, norm, b, evals, converged))
        })
        .collect();
    let runs: Vec<(f64, f64, f64, usize, bool)> = runs.into_iter().collect::<Result<_>>()?;
    let winner = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .map(|(_, r)| *r)
        .unwrap();
    let (_, norm, b, _, converged) = winner;
    let (objective, contrarian, scales) = profiled(problem, norm, b, config.tol)?;
    let kernel = PowerLawKernel::with_l1_norm(norm, b, problem.offset)?;
    let energy = problem.curve_energy();
    Ok(FitResult {
        alpha: kernel.alpha,
        norm,
        b,
        offset: problem.offset,
        contrarian,
        scales,
        objective,
        relative_objective: if energy > 0.0 { objective / energy } else { objective },
        evaluations: runs.iter().map(|r| r.3).sum(),
        converged,
        start_objectives: runs.iter().map(|r| r.0).collect(),
    })
}
