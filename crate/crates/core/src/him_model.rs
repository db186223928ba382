//! Analytic impact curves of the Hawkes impact model.
//!
//! The price is `P = J⁺ − J⁻` with cross-excited intensities
//! `λ± = μ + φ ⋆ dJ∓ + (f(r) ⋆ g±)`. For the impulsive variant
//! (`g⁺ = δ`, `g⁻ = C·φ/‖φ‖₁`) the expected price move is
//!
//! ```text
//! η_t = ∫ f(r_s) H(t − s) ds,    H(t) = 1 − (1 + C/‖φ‖₁) ∫_0^t κ
//! ```
//!
//! and for a constant rate it settles at `f(r)·T·(1 − C)/(1 + ‖φ‖₁)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{
    convolve, kappa_resolvent, kappa_series, l1_norm, sample_kernel, CausalMeasure,
    Kernel, SampledFunction, DEFAULT_DT,
};
use crate::stats::ols;

/// Instantaneous impact function `f`, mapping a trading rate to an added
/// intensity. `f(0) = 0` in every form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "snake_case")]
pub enum ImpactFunction {
    Identity,
    /// `f(r) = a·r^p`, `p > 0`.
    Power { a: f64, p: f64 },
}

impl Default for ImpactFunction {
    fn default() -> Self {
        ImpactFunction::Identity
    }
}

impl ImpactFunction {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            ImpactFunction::Identity => r,
            ImpactFunction::Power { a, p } => {
                if r == 0.0 {
                    0.0
                } else {
                    a * r.powf(p)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ImpactFunction::Power { a, p } = *self {
            ensure_finite("f.a", a)?;
            ensure_finite("f.p", p)?;
            if a < 0.0 {
                return Err(Error::param("f.a", "must be >= 0"));
            }
            if !(p > 0.0) {
                return Err(Error::param("f.p", "must be > 0 so that f(0) = 0"));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> ImpactFunction {
        match *self {
            ImpactFunction::Identity => ImpactFunction::Power { a: c, p: 1.0 },
            ImpactFunction::Power { a, p } => ImpactFunction::Power { a: a * c, p },
        }
    }
}

/// One constant-rate segment `[start, end)` of a trading schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePiece {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

/// Piecewise-constant trading rate `r_t`, zero outside its pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct TradingSchedule {
    pieces: Vec<RatePiece>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ScheduleRepr {
    Constant {
        t0: f64,
        #[serde(rename = "T")]
        duration: f64,
        r: f64,
    },
    Pieces {
        pieces: Vec<RatePiece>,
    },
}

impl TryFrom<ScheduleRepr> for TradingSchedule {
    type Error = Error;

    fn try_from(repr: ScheduleRepr) -> Result<Self> {
        match repr {
            ScheduleRepr::Constant { t0, duration, r } => TradingSchedule::constant(t0, duration, r),
            ScheduleRepr::Pieces { pieces } => TradingSchedule::new(pieces),
        }
    }
}

impl From<TradingSchedule> for ScheduleRepr {
    fn from(s: TradingSchedule) -> Self {
        match s.as_constant() {
            Some((t0, duration, r)) => ScheduleRepr::Constant { t0, duration, r },
            None => ScheduleRepr::Pieces { pieces: s.pieces },
        }
    }
}

impl TradingSchedule {
    pub fn new(mut pieces: Vec<RatePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::param("schedule", "needs at least one piece"));
        }
        for p in &pieces {
            ensure_finite("schedule.start", p.start)?;
            ensure_finite("schedule.end", p.end)?;
            ensure_finite("schedule.rate", p.rate)?;
            if !(p.end > p.start) {
                return Err(Error::param("schedule", format!("empty piece [{}, {})", p.start, p.end)));
            }
            if p.rate < 0.0 {
                return Err(Error::param("schedule.rate", "trading rate must be >= 0"));
            }
        }
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        if pieces.windows(2).any(|w| w[1].start < w[0].end) {
            return Err(Error::param("schedule", "pieces overlap"));
        }
        Ok(Self { pieces })
    }

    /// Rate `r` on `[t0, t0 + duration]`.
    pub fn constant(t0: f64, duration: f64, r: f64) -> Result<Self> {
        Self::new(vec![RatePiece { start: t0, end: t0 + duration, rate: r }])
    }

    pub fn pieces(&self) -> &[RatePiece] {
        &self.pieces
    }

    pub fn start(&self) -> f64 {
        self.pieces[0].start
    }

    pub fn end(&self) -> f64 {
        self.pieces.last().unwrap().end
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| t >= p.start && t < p.end)
            .map_or(0.0, |p| p.rate)
    }

    /// `(t0, T, r)` when the schedule is a single constant-rate block.
    pub fn as_constant(&self) -> Option<(f64, f64, f64)> {
        match self.pieces.as_slice() {
            [p] => Some((p.start, p.end - p.start, p.rate)),
            _ => None,
        }
    }

    /// The schedule with every rate mapped through `f`.
    pub fn mapped(&self, f: &ImpactFunction) -> Vec<RatePiece> {
        self.pieces
            .iter()
            .map(|p| RatePiece { rate: f.eval(p.rate), ..*p })
            .collect()
    }
}

/// Impulsive HIM parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HimSpec {
    /// Baseline intensity of upward jumps (events per second).
    pub mu: f64,
    /// Baseline of downward jumps; defaults to `mu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_down: Option<f64>,
    kernel: Kernel,
    /// Contrarian-to-herding ratio `C`.
    #[serde(rename = "C")]
    pub contrarian: f64,
    #[serde(default)]
    pub f: ImpactFunction,
    pub schedule: TradingSchedule,
}

impl HimSpec {
    pub fn new(
        mu: f64,
        kernel: impl Into<Kernel>,
        contrarian: f64,
        f: ImpactFunction,
        schedule: TradingSchedule,
    ) -> Result<Self> {
        let spec = Self {
            mu,
            mu_down: None,
            kernel: kernel.into(),
            contrarian,
            f,
            schedule,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: HimSpec = serde_json::from_str(text)
            .map_err(|e| Error::param("spec", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mu", self.mu)?;
        if self.mu < 0.0 {
            return Err(Error::param("mu", "must be >= 0"));
        }
        if let Some(m) = self.mu_down {
            ensure_finite("mu_down", m)?;
            if m < 0.0 {
                return Err(Error::param("mu_down", "must be >= 0"));
            }
        }
        self.kernel.validate()?;
        ensure_finite("C", self.contrarian)?;
        if self.contrarian < 0.0 {
            return Err(Error::param("C", "must be >= 0"));
        }
        let norm = self.kernel.l1_norm();
        if norm >= 1.0 {
            return Err(Error::NotSummable(norm));
        }
        if self.contrarian > 0.0 && norm == 0.0 {
            return Err(Error::param("C", "C > 0 needs a kernel with positive norm"));
        }
        self.f.validate()
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn with_kernel(mut self, kernel: impl Into<Kernel>) -> Result<Self> {
        self.kernel = kernel.into();
        self.validate()?;
        Ok(self)
    }

    pub fn with_contrarian(mut self, c: f64) -> Result<Self> {
        self.contrarian = c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_f(mut self, f: ImpactFunction) -> Result<Self> {
        self.f = f;
        self.validate()?;
        Ok(self)
    }

    pub fn mu_down(&self) -> f64 {
        self.mu_down.unwrap_or(self.mu)
    }

    pub fn phi_norm(&self) -> f64 {
        self.kernel.l1_norm()
    }

    /// `(g⁺, g⁻) = (δ, C·φ/‖φ‖₁)` sampled on `[0, horizon]`.
    pub fn impact_kernels(&self, dt: f64, horizon: f64) -> Result<(CausalMeasure, CausalMeasure)> {
        let norm = self.phi_norm();
        let scale = if norm > 0.0 { self.contrarian / norm } else { 0.0 };
        let phi = sample_kernel(self.kernel, dt, horizon)?;
        Ok((CausalMeasure::Dirac, CausalMeasure::Density(phi.scaled(scale))))
    }
}

/// How `κ` is computed for the analytic curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum KappaMethod {
    /// Literal alternating series truncated at `tol`.
    Series { tol: f64 },
    /// Exact grid solution of `κ = φ − φ⋆κ`.
    Resolvent,
}

impl Default for KappaMethod {
    fn default() -> Self {
        KappaMethod::Resolvent
    }
}

impl KappaMethod {
    pub fn kappa(&self, phi: &SampledFunction) -> Result<SampledFunction> {
        match *self {
            KappaMethod::Series { tol } => Ok(kappa_series(phi, tol)?.sum),
            KappaMethod::Resolvent => kappa_resolvent(phi),
        }
    }
}

/// Grid settings for analytic curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub kappa: KappaMethod,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { dt: DEFAULT_DT, kappa: KappaMethod::default() }
    }
}

impl CurveConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// `G(t) = ∫_0^t (g⁺ − g⁻)` on `len` grid points.
pub fn g_function(g_plus: &CausalMeasure, g_minus: &CausalMeasure, dt: f64, len: usize) -> Result<SampledFunction> {
    let plus = g_plus.cumulative(dt, len)?;
    let minus = g_minus.cumulative(dt, len)?;
    let values = plus.values().iter().zip(minus.values()).map(|(a, b)| a - b).collect();
    SampledFunction::new(dt, values)
}

/// `H(t) = 1 − (1 + C/‖φ‖₁) ∫_0^t κ`, with `‖φ‖₁` taken from the sampled
/// kernel (grid plus tail). The tail mass of the result is left at zero; its
/// limit is `(1 − C)/(1 + ‖φ‖₁)`.
pub fn h_function(phi: &SampledFunction, contrarian: f64, method: KappaMethod) -> Result<SampledFunction> {
    ensure_finite("C", contrarian)?;
    if contrarian < 0.0 {
        return Err(Error::param("C", "must be >= 0"));
    }
    let norm = l1_norm(phi);
    let kappa = method.kappa(phi)?;
    h_from_kappa(&kappa, norm, contrarian)
}

pub(crate) fn h_from_kappa(kappa: &SampledFunction, norm: f64, contrarian: f64) -> Result<SampledFunction> {
    if norm == 0.0 {
        if contrarian > 0.0 {
            return Err(Error::param("C", "C > 0 needs a kernel with positive norm"));
        }
        return SampledFunction::new(kappa.dt(), vec![1.0; kappa.len()]);
    }
    let c = 1.0 + contrarian / norm;
    let k = kappa.cumulative_integral();
    Ok(SampledFunction::from_parts(
        kappa.dt(),
        k.values().iter().map(|v| 1.0 - c * v).collect(),
        0.0,
    ))
}

/// `H(∞) = (1 − C)/(1 + ‖φ‖₁)`.
pub fn h_limit(phi_norm: f64, contrarian: f64) -> f64 {
    (1.0 - contrarian) / (1.0 + phi_norm)
}

/// An analytic impact curve `η_t` on explicit times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactCurveAnalytic {
    pub t: Vec<f64>,
    pub eta: Vec<f64>,
}

impl ImpactCurveAnalytic {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,eta")?;
        for (t, e) in self.t.iter().zip(&self.eta) {
            writeln!(w, "{t},{e}")?;
        }
        Ok(())
    }
}

/// Response of the price to a unit-rate block: `η_t = Σ f(r_i)·(Ĥ(t − a_i) − Ĥ(t − b_i))`
/// where `Ĥ(x) = ∫_0^x H`.
#[derive(Debug, Clone)]
pub struct ResponseFunction {
    h: SampledFunction,
    h_integral: SampledFunction,
}

impl ResponseFunction {
    pub fn new(h: SampledFunction) -> Self {
        let h_integral = h.cumulative_integral();
        Self { h, h_integral }
    }

    pub fn h(&self) -> &SampledFunction {
        &self.h
    }

    /// `∫_0^x H`, zero for `x ≤ 0`.
    pub fn integrated(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let horizon = self.h_integral.horizon();
        if x <= horizon {
            self.h_integral.value_at(x)
        } else {
            // Hold H at its last grid value beyond the horizon.
            self.h_integral.values().last().unwrap() + (x - horizon) * self.h.values().last().unwrap()
        }
    }

    pub fn eta(&self, pieces: &[RatePiece], t: f64) -> f64 {
        pieces
            .iter()
            .map(|p| p.rate * (self.integrated(t - p.start) - self.integrated(t - p.end)))
            .sum()
    }
}

fn check_times(t_grid: &[f64]) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "must not be empty"));
    }
    let mut max = f64::NEG_INFINITY;
    for &t in t_grid {
        ensure_finite("t_grid", t)?;
        max = max.max(t);
    }
    Ok(max)
}

/// Response function of `spec` covering times up to `t_max`.
pub fn response_function(spec: &HimSpec, t_max: f64, config: &CurveConfig) -> Result<ResponseFunction> {
    spec.validate()?;
    let horizon = (t_max - spec.schedule.start()).max(config.dt);
    let phi = sample_kernel(spec.kernel(), config.dt, horizon)?;
    let kappa = config.kappa.kappa(&phi)?;
    let h = h_from_kappa(&kappa, spec.phi_norm(), spec.contrarian)?;
    Ok(ResponseFunction::new(h))
}

/// `η_t = ∫ f(r_s) H(t − s) ds` on `t_grid`.
pub fn impact_curve_analytic(spec: &HimSpec, t_grid: &[f64], config: &CurveConfig) -> Result<ImpactCurveAnalytic> {
    let t_max = check_times(t_grid)?;
    let response = response_function(spec, t_max, config)?;
    let pieces = spec.schedule.mapped(&spec.f);
    Ok(ImpactCurveAnalytic {
        t: t_grid.to_vec(),
        eta: t_grid.iter().map(|&t| response.eta(&pieces, t)).collect(),
    })
}

/// Same curve through the general formula `η_t = ∫ f(r_s)(G − κ⋆G)(t − s) ds`.
pub fn impact_curve_general(
    g_plus: &CausalMeasure,
    g_minus: &CausalMeasure,
    phi: &SampledFunction,
    f: &ImpactFunction,
    schedule: &TradingSchedule,
    t_grid: &[f64],
    method: KappaMethod,
) -> Result<ImpactCurveAnalytic> {
    check_times(t_grid)?;
    let g = g_function(g_plus, g_minus, phi.dt(), phi.len())?;
    let kappa = method.kappa(phi)?;
    let kg = convolve(&kappa, &g)?;
    let values = g.values().iter().zip(kg.values()).map(|(a, b)| a - b).collect();
    let response = ResponseFunction::new(SampledFunction::new(phi.dt(), values)?);
    let pieces = schedule.mapped(f);
    Ok(ImpactCurveAnalytic {
        t: t_grid.to_vec(),
        eta: t_grid.iter().map(|&t| response.eta(&pieces, t)).collect(),
    })
}

/// `η_∞ = f(r)·T·(1 − C)/(1 + ‖φ‖₁)` for a constant-rate schedule.
pub fn permanent_impact(spec: &HimSpec) -> Result<f64> {
    spec.validate()?;
    let (_, duration, r) = spec.schedule.as_constant().ok_or_else(|| {
        Error::param("schedule", "closed-form permanent impact needs a constant-rate schedule")
    })?;
    Ok(spec.f.eval(r) * duration * h_limit(spec.phi_norm(), spec.contrarian))
}

/// Long-horizon level of the analytic curve for arbitrary schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermanentEstimate {
    pub value: f64,
    /// `|η(m·T) − η(m·T/2)|`, a bound on the remaining decay.
    pub truncation: f64,
}

pub fn permanent_impact_numeric(spec: &HimSpec, multiple: f64, config: &CurveConfig) -> Result<PermanentEstimate> {
    if !(multiple > 1.0) {
        return Err(Error::param("multiple", "must be > 1"));
    }
    let t0 = spec.schedule.start();
    let span = spec.schedule.duration();
    let far = t0 + multiple * span;
    let half = t0 + 0.5 * multiple * span;
    let curve = impact_curve_analytic(spec, &[half, far], config)?;
    Ok(PermanentEstimate {
        value: curve.eta[1],
        truncation: (curve.eta[1] - curve.eta[0]).abs(),
    })
}

/// Log-log slope of the decay towards the permanent level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Slopes fitted separately on the lower and upper halves of the window.
    pub lower_half_exponent: f64,
    pub upper_half_exponent: f64,
    /// False when the two half-window slopes disagree, as for an exponential tail.
    pub power_law_like: bool,
}

/// Fits `η_t − η_∞ ∝ (t − t₀ − T)^e` on `window` (times measured from `t₀`).
pub fn decay_exponent(spec: &HimSpec, window: (f64, f64), config: &CurveConfig) -> Result<DecayFit> {
    let (t0, duration, _) = spec.schedule.as_constant().ok_or_else(|| {
        Error::param("schedule", "decay exponent needs a constant-rate schedule")
    })?;
    let (lo, hi) = window;
    ensure_finite("window", lo)?;
    ensure_finite("window", hi)?;
    if !(lo > duration && hi > lo) {
        return Err(Error::OutOfRange(format!(
            "window [{lo}, {hi}] must start after the execution end {duration}"
        )));
    }
    let eta_inf = permanent_impact(spec)?;
    let n = 64;
    let times: Vec<f64> = (0..n)
        .map(|i| t0 + lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let curve = impact_curve_analytic(spec, &times, config)?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (t, e) in times.iter().zip(&curve.eta) {
        let excess = e - eta_inf;
        if !(excess > 0.0) {
            return Err(Error::NonPositive(format!(
                "η_t − η_∞ = {excess:e} at t = {t}; the decay is not resolvable in this window"
            )));
        }
        x.push((t - t0 - duration).ln());
        y.push(excess.ln());
    }
    let (slope, intercept) = ols(&x, &y)?;
    let (s_lo, _) = ols(&x[..n / 2], &y[..n / 2])?;
    let (s_hi, _) = ols(&x[n / 2..], &y[n / 2..])?;
    let power_law_like = (s_hi - s_lo).abs() <= 0.1 + 0.25 * slope.abs();
    Ok(DecayFit {
        exponent: slope,
        prefactor: intercept.exp(),
        lower_half_exponent: s_lo,
        upper_half_exponent: s_hi,
        power_law_like,
    })
}
