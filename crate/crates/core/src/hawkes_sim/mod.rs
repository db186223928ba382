//! Multivariate Hawkes processes: exact simulation by thinning, expected
//! counts through the matrix resolvent, and Monte Carlo impact curves.
//!
//! Intensities follow `λ_i(t) = μ_i(t) + e_i(t) + Σ_j ∫_[0,t) Φ_ij(t − s) dN_j(s)`
//! where `e_i` is a deterministic exogenous term. Events of dimension `j`
//! excite dimension `i` through `Φ_ij`.

mod intensity;
mod monte_carlo;
mod thinning;

pub use intensity::{IntensityFn, PiecewiseConstant, Step};
pub use monte_carlo::{monte_carlo_impact, monte_carlo_mean, MonteCarloCurve, MonteCarloOptions};
pub use thinning::{simulate, simulate_path, SimOptions};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::him_model::HimSpec;
use crate::kernels::{convolve, psi_series, sample_kernel, spectral_radius, Kernel, KernelMatrix, SampledFunction};

/// Dimension of upward price jumps in a HIM simulation.
pub const UP: usize = 0;
/// Dimension of downward price jumps in a HIM simulation.
pub const DOWN: usize = 1;

/// Baselines, kernel matrix and horizon of a Hawkes process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HawkesSpec {
    pub baseline: Vec<PiecewiseConstant>,
    /// `kernels[i][j]`: response of dimension `i` to events of dimension `j`.
    pub kernels: Vec<Vec<Option<Kernel>>>,
    pub horizon: f64,
}

impl HawkesSpec {
    pub fn new(baseline: Vec<PiecewiseConstant>, kernels: Vec<Vec<Option<Kernel>>>, horizon: f64) -> Result<Self> {
        let spec = Self { baseline, kernels, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.baseline.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::param("baseline", "need at least one dimension"));
        }
        if self.kernels.len() != d || self.kernels.iter().any(|row| row.len() != d) {
            return Err(Error::param("kernels", format!("must be a {d}x{d} matrix")));
        }
        ensure_finite("horizon", self.horizon)?;
        if !(self.horizon > 0.0) {
            return Err(Error::param("horizon", "must be > 0"));
        }
        for mu in &self.baseline {
            mu.validate("baseline")?;
        }
        for k in self.kernels.iter().flatten().flatten() {
            k.validate()?;
        }
        let rho = spectral_radius(&self.norm_matrix());
        if rho >= 1.0 {
            return Err(Error::Unstable(rho));
        }
        Ok(())
    }

    /// Entrywise analytic L1 norms.
    pub fn norm_matrix(&self) -> nalgebra::DMatrix<f64> {
        let d = self.dim();
        nalgebra::DMatrix::from_fn(d, d, |i, j| self.kernels[i][j].map_or(0.0, |k| k.l1_norm()))
    }

    /// Two-dimensional price process of `him`: baselines `μ±` and the
    /// cross-excitation `[[0, φ], [φ, 0]]`.
    pub fn from_him(him: &HimSpec, horizon: f64) -> Result<Self> {
        let phi = Some(him.kernel());
        Self::new(
            vec![PiecewiseConstant::constant(him.mu), PiecewiseConstant::constant(him.mu_down())],
            vec![vec![None, phi], vec![phi, None]],
            horizon,
        )
    }
}

/// Exogenous terms of the impulsive model: `f(r_t)` on the up side and
/// `(C/‖φ‖₁)·∫ f(r_s) φ(t − s) ds` on the down side.
pub fn him_exogenous(him: &HimSpec) -> Vec<Vec<IntensityFn>> {
    let steps: Vec<Step> = him
        .schedule
        .mapped(&him.f)
        .into_iter()
        .filter(|p| p.rate > 0.0)
        .map(|p| Step { start: p.start, end: p.end, value: p.rate })
        .collect();
    let input = PiecewiseConstant::with_steps(0.0, steps);
    let norm = him.phi_norm();
    let mut down = Vec::new();
    if him.contrarian > 0.0 && norm > 0.0 {
        down.push(IntensityFn::KernelResponse {
            input: input.clone(),
            kernel: him.kernel(),
            scale: him.contrarian / norm,
        });
    }
    vec![vec![IntensityFn::Piecewise(input)], down]
}

/// One event of a multivariate point process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub dim: usize,
}

/// Events sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub horizon: f64,
    pub dims: usize,
}

impl EventStream {
    pub fn count(&self, dim: usize, t: f64) -> usize {
        self.events.iter().take_while(|e| e.time <= t).filter(|e| e.dim == dim).count()
    }

    pub fn times(&self, dim: usize) -> Vec<f64> {
        self.events.iter().filter(|e| e.dim == dim).map(|e| e.time).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,dim")?;
        for e in &self.events {
            writeln!(w, "{},{}", e.time, e.dim)?;
        }
        Ok(())
    }
}

/// Integer price path `P_t`, right-continuous, starting at 0.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PricePath {
    /// Jump times, increasing.
    pub times: Vec<f64>,
    /// Price right after each jump.
    pub values: Vec<i64>,
}

impl PricePath {
    pub fn value_at(&self, t: f64) -> i64 {
        let n = self.times.partition_point(|&s| s <= t);
        if n == 0 {
            0
        } else {
            self.values[n - 1]
        }
    }

    pub fn terminal(&self) -> i64 {
        self.values.last().copied().unwrap_or(0)
    }
}

/// `P = N_up − N_down`.
pub fn price_path(stream: &EventStream, up: usize, down: usize) -> Result<PricePath> {
    if up >= stream.dims || down >= stream.dims || up == down {
        return Err(Error::param("dims", format!("need two distinct dims below {}", stream.dims)));
    }
    let mut path = PricePath::default();
    let mut p = 0i64;
    for e in &stream.events {
        let step = if e.dim == up {
            1
        } else if e.dim == down {
            -1
        } else {
            continue;
        };
        p += step;
        path.times.push(e.time);
        path.values.push(p);
    }
    Ok(path)
}

/// `E[N(t)] = h(t) + (Ψ ⋆ h)(t)` with `h = ∫_0^t (μ + e)`, on a grid of
/// step `dt` over `[0, horizon]`.
pub fn expected_counts(
    spec: &HawkesSpec,
    exogenous: &[Vec<IntensityFn>],
    dt: f64,
    tol: f64,
) -> Result<Vec<SampledFunction>> {
    spec.validate()?;
    let d = spec.dim();
    check_exogenous(exogenous, d)?;
    let n = (spec.horizon / dt + 1e-9).floor() as usize + 1;
    let h: Vec<SampledFunction> = (0..d)
        .map(|i| {
            SampledFunction::from_fn(dt, n, |t| {
                spec.baseline[i].integral(t) + exogenous[i].iter().map(|e| e.integral(t)).sum::<f64>()
            })
        })
        .collect::<Result<_>>()?;
    let zero = SampledFunction::zeros(dt, n)?;
    let rows = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| match spec.kernels[i][j] {
                    Some(k) if !k.is_zero() => sample_kernel(k, dt, spec.horizon).map(|s| s.resized(n)),
                    _ => Ok(zero.clone()),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let psi = psi_series(&KernelMatrix::new(rows)?, tol)?.psi;
    (0..d)
        .map(|i| {
            let mut values = h[i].values().to_vec();
            for (j, hj) in h.iter().enumerate() {
                let c = convolve(psi.get(i, j), hj)?;
                for (v, x) in values.iter_mut().zip(c.values()) {
                    *v += x;
                }
            }
            SampledFunction::new(dt, values)
        })
        .collect()
}

pub(crate) fn check_exogenous(exogenous: &[Vec<IntensityFn>], d: usize) -> Result<()> {
    if exogenous.len() != d {
        return Err(Error::param("exogenous", format!("need one list per dimension ({d})")));
    }
    for e in exogenous.iter().flatten() {
        e.validate()?;
    }
    Ok(())
}
