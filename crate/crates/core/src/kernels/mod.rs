//! Causal kernels on a uniform time grid.
//!
//! Everything the analytic impact formulas need is expressed through
//! [`SampledFunction`]: a causal function sampled at `t = k·dt`, with the
//! analytic mass that lies beyond the last grid point carried as a scalar.
//! Integrals and convolutions use the trapezoidal rule, so errors are
//! `O(dt²)` for kernels that are smooth on `[0, ∞)`.

mod convolution;
mod series;

pub use convolution::{convolve, Convolver};
pub use series::{
    kappa_resolvent, kappa_series, kernel_matrix_norms, positive_resolvent, positive_series,
    psi_series, spectral_radius, KernelMatrix, KernelSeries, PsiSeries, DEFAULT_SERIES_TOL,
};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Default grid step for analytic curves, in seconds.
pub const DEFAULT_DT: f64 = 1e-2;

/// Kernel offset fixed in the power-law fits, in the kernel's time unit.
pub const DEFAULT_POWER_LAW_OFFSET: f64 = 0.25;

/// A causal function sampled on `t = k·dt`, `k = 0..len`.
///
/// The function is implicitly zero for `t < 0`. `tail_mass` is the analytic
/// integral of `|f|` beyond the last grid point; it is added to L1 norms and
/// ignored by convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    dt: f64,
    values: Vec<f64>,
    tail_mass: f64,
}

/// JSON header accompanying the `t,value` CSV form of a [`SampledFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledHeader {
    pub dt: f64,
    pub horizon: f64,
    pub tail_mass: f64,
}

impl SampledFunction {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        Self::with_tail(dt, values, 0.0)
    }

    pub fn with_tail(dt: f64, values: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", format!("must be finite and > 0, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::param("values", "at least one sample is required"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("values", format!("sample {k} is not finite")));
        }
        if !(tail_mass >= 0.0) || !tail_mass.is_finite() {
            return Err(Error::param("tail_mass", format!("must be finite and >= 0, got {tail_mass}")));
        }
        Ok(Self { dt, values, tail_mass })
    }

    /// Identically zero function with `len` samples.
    pub fn zeros(dt: f64, len: usize) -> Result<Self> {
        Self::new(dt, vec![0.0; len.max(1)])
    }

    /// Samples `f` at `k·dt` for `k = 0..len`.
    pub fn from_fn(dt: f64, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(dt, (0..len.max(1)).map(|k| f(k as f64 * dt)).collect())
    }

    // Internal constructor for values produced by arithmetic on valid inputs.
    pub(crate) fn from_parts(dt: f64, values: Vec<f64>, tail_mass: f64) -> Self {
        debug_assert!(dt > 0.0 && !values.is_empty());
        Self { dt, values, tail_mass }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn set_tail_mass(&mut self, tail_mass: f64) {
        self.tail_mass = tail_mass.max(0.0);
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dt)
    }

    pub fn header(&self) -> SampledHeader {
        SampledHeader {
            dt: self.dt,
            horizon: self.horizon(),
            tail_mass: self.tail_mass,
        }
    }

    /// Linear interpolation; zero for `t < 0`, last value held beyond the horizon.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Trapezoidal `∫_0^horizon f`.
    pub fn integral(&self) -> f64 {
        trapezoid(self.dt, &self.values)
    }

    /// Running trapezoidal integral `F(t_k) = ∫_0^{t_k} f`.
    pub fn cumulative_integral(&self) -> SampledFunction {
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * self.dt * (w[0] + w[1]);
            out.push(acc);
        }
        SampledFunction::from_parts(self.dt, out, 0.0)
    }

    pub fn scaled(&self, c: f64) -> SampledFunction {
        SampledFunction::from_parts(
            self.dt,
            self.values.iter().map(|v| v * c).collect(),
            self.tail_mass * c.abs(),
        )
    }

    /// Truncates or zero-extends to `len` samples.
    pub fn resized(&self, len: usize) -> SampledFunction {
        let mut values = self.values.clone();
        values.resize(len.max(1), 0.0);
        SampledFunction::from_parts(self.dt, values, self.tail_mass)
    }

    pub fn sup_distance(&self, other: &SampledFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the `t,value` CSV form.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.times().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    /// Parses the `t,value` CSV form against its JSON header.
    pub fn read_csv(header: SampledHeader, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("t,value") => {}
            other => {
                return Err(Error::param(
                    "csv header",
                    format!("expected `t,value`, got {other:?}"),
                ))
            }
        }
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let mut parts = line.split(',');
            let t: f64 = parse_field(parts.next(), "t", k)?;
            let v: f64 = parse_field(parts.next(), "value", k)?;
            if (t - k as f64 * header.dt).abs() > 1e-9 * header.dt.max(1.0) * (k as f64 + 1.0) {
                return Err(Error::param("t", format!("row {k} is off the dt grid")));
            }
            values.push(v);
        }
        Self::with_tail(header.dt, values, header.tail_mass)
    }
}

fn parse_field(field: Option<&str>, name: &str, row: usize) -> Result<f64> {
    field
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::param(name, format!("row {row}: missing or unparsable")))
}

pub(crate) fn trapezoid(dt: f64, values: &[f64]) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Trapezoidal L1 norm over the grid plus the declared analytic tail mass.
pub fn l1_norm(f: &SampledFunction) -> f64 {
    let abs: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
    trapezoid(f.dt, &abs) + f.tail_mass
}

/// `φ(t) = α·(offset + t)^b` for `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawKernel {
    pub alpha: f64,
    pub b: f64,
    pub offset: f64,
}

impl PowerLawKernel {
    pub fn new(alpha: f64, b: f64, offset: f64) -> Result<Self> {
        let k = Self { alpha, b, offset };
        k.validate()?;
        Ok(k)
    }

    /// Chooses `α` so that `‖φ‖₁ = norm`.
    pub fn with_l1_norm(norm: f64, b: f64, offset: f64) -> Result<Self> {
        if !(norm >= 0.0) || !norm.is_finite() {
            return Err(Error::param("l1_norm", format!("must be finite and >= 0, got {norm}")));
        }
        let probe = Self::new(1.0, b, offset)?;
        Self::new(norm / probe.l1_norm(), b, offset)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("alpha", self.alpha)?;
        ensure_finite("b", self.b)?;
        ensure_finite("offset", self.offset)?;
        if self.alpha < 0.0 {
            return Err(Error::param("alpha", "must be >= 0"));
        }
        if !(self.b > -2.0 && self.b < -1.0) {
            return Err(Error::param("b", format!("must lie in (-2, -1), got {}", self.b)));
        }
        if !(self.offset > 0.0) {
            return Err(Error::param("offset", "must be > 0"));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.alpha * (self.offset + t).powf(self.b)
        }
    }

    /// `∫_0^t φ`.
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let e = self.b + 1.0;
        self.alpha * (self.offset.powf(e) - (self.offset + t).powf(e)) / (-e)
    }

    /// `∫_0^t ∫_0^u φ(v) dv du`.
    pub fn double_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let e = self.b + 1.0;
        let o = self.offset;
        let grown = ((o + t).powf(e + 1.0) - o.powf(e + 1.0)) / (e + 1.0);
        self.alpha * (o.powf(e) * t - grown) / (-e)
    }

    /// `α·offset^(b+1) / (−b−1)`.
    pub fn l1_norm(&self) -> f64 {
        let e = self.b + 1.0;
        self.alpha * self.offset.powf(e) / (-e)
    }

    pub fn tail_mass(&self, horizon: f64) -> f64 {
        let e = self.b + 1.0;
        self.alpha * (self.offset + horizon.max(0.0)).powf(e) / (-e)
    }
}

/// `φ(t) = α·e^(−βt)` for `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialKernel {
    pub alpha: f64,
    pub beta: f64,
}

impl ExponentialKernel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let k = Self { alpha, beta };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("alpha", self.alpha)?;
        ensure_finite("beta", self.beta)?;
        if self.alpha < 0.0 {
            return Err(Error::param("alpha", "must be >= 0"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::param("beta", "must be > 0"));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.alpha * (-self.beta * t).exp()
        }
    }

    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.alpha / self.beta * -(-self.beta * t).exp_m1()
        }
    }

    pub fn double_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.alpha / self.beta * (t + (-self.beta * t).exp_m1() / self.beta)
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn tail_mass(&self, horizon: f64) -> f64 {
        self.alpha / self.beta * (-self.beta * horizon.max(0.0)).exp()
    }
}

/// The two kernel families with closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub enum Kernel {
    PowerLaw(PowerLawKernel),
    Exponential(ExponentialKernel),
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::PowerLaw(k) => k.validate(),
            Kernel::Exponential(k) => k.validate(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Kernel::PowerLaw(k) => k.value(t),
            Kernel::Exponential(k) => k.value(t),
        }
    }

    pub fn integral(&self, t: f64) -> f64 {
        match self {
            Kernel::PowerLaw(k) => k.integral(t),
            Kernel::Exponential(k) => k.integral(t),
        }
    }

    pub fn double_integral(&self, t: f64) -> f64 {
        match self {
            Kernel::PowerLaw(k) => k.double_integral(t),
            Kernel::Exponential(k) => k.double_integral(t),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        match self {
            Kernel::PowerLaw(k) => k.l1_norm(),
            Kernel::Exponential(k) => k.l1_norm(),
        }
    }

    pub fn tail_mass(&self, horizon: f64) -> f64 {
        match self {
            Kernel::PowerLaw(k) => k.tail_mass(horizon),
            Kernel::Exponential(k) => k.tail_mass(horizon),
        }
    }

    /// Same family and shape with the amplitude multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Kernel {
        match *self {
            Kernel::PowerLaw(k) => Kernel::PowerLaw(PowerLawKernel { alpha: k.alpha * c, ..k }),
            Kernel::Exponential(k) => Kernel::Exponential(ExponentialKernel { alpha: k.alpha * c, ..k }),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::PowerLaw(k) => k.alpha == 0.0,
            Kernel::Exponential(k) => k.alpha == 0.0,
        }
    }
}

impl From<PowerLawKernel> for Kernel {
    fn from(k: PowerLawKernel) -> Self {
        Kernel::PowerLaw(k)
    }
}

impl From<ExponentialKernel> for Kernel {
    fn from(k: ExponentialKernel) -> Self {
        Kernel::Exponential(k)
    }
}

/// Serialized form of a kernel: `{family, alpha | l1_norm, b | beta, offset}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    PowerLaw {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l1_norm: Option<f64>,
        b: f64,
        #[serde(default = "default_offset")]
        offset: f64,
    },
    Exponential {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l1_norm: Option<f64>,
        beta: f64,
    },
}

fn default_offset() -> f64 {
    DEFAULT_POWER_LAW_OFFSET
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Kernel> {
        match spec {
            KernelSpec::PowerLaw { alpha, l1_norm, b, offset } => match (alpha, l1_norm) {
                (Some(a), None) => Ok(PowerLawKernel::new(a, b, offset)?.into()),
                (None, Some(n)) => Ok(PowerLawKernel::with_l1_norm(n, b, offset)?.into()),
                _ => Err(Error::param("kernel", "give exactly one of `alpha` and `l1_norm`")),
            },
            KernelSpec::Exponential { alpha, l1_norm, beta } => match (alpha, l1_norm) {
                (Some(a), None) => Ok(ExponentialKernel::new(a, beta)?.into()),
                (None, Some(n)) => Ok(ExponentialKernel::new(n * beta, beta)?.into()),
                _ => Err(Error::param("kernel", "give exactly one of `alpha` and `l1_norm`")),
            },
        }
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::PowerLaw(k) => KernelSpec::PowerLaw { alpha: Some(k.alpha), l1_norm: None, b: k.b, offset: k.offset },
            Kernel::Exponential(k) => KernelSpec::Exponential { alpha: Some(k.alpha), l1_norm: None, beta: k.beta },
        }
    }
}

/// A causal measure: a Dirac mass at the origin or a sampled density.
///
/// The Dirac mass is never put on the grid; convolving with it returns the
/// other operand unchanged.
#[derive(Debug, Clone, PartialEq)]
pub enum CausalMeasure {
    Dirac,
    Density(SampledFunction),
}

impl CausalMeasure {
    /// `μ ⋆ g`.
    pub fn convolve(&self, g: &SampledFunction) -> Result<SampledFunction> {
        match self {
            CausalMeasure::Dirac => Ok(g.clone()),
            CausalMeasure::Density(f) => convolve(f, g),
        }
    }

    /// Cumulative mass `μ([0, t_k])` on a grid of `len` points with step `dt`.
    pub fn cumulative(&self, dt: f64, len: usize) -> Result<SampledFunction> {
        match self {
            CausalMeasure::Dirac => SampledFunction::new(dt, vec![1.0; len.max(1)]),
            CausalMeasure::Density(f) => {
                if (f.dt() - dt).abs() > 1e-12 * dt {
                    return Err(Error::GridMismatch { left: f.dt(), right: dt });
                }
                Ok(f.resized(len).cumulative_integral())
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            CausalMeasure::Dirac => 1.0,
            CausalMeasure::Density(f) => f.integral() + f.tail_mass(),
        }
    }
}

/// Samples `kernel` on `[0, horizon]` with step `dt`; the analytic mass
/// beyond the last grid point is stored as the tail mass.
pub fn sample_kernel(kernel: impl Into<Kernel>, dt: f64, horizon: f64) -> Result<SampledFunction> {
    let kernel = kernel.into();
    kernel.validate()?;
    ensure_finite("dt", dt)?;
    ensure_finite("horizon", horizon)?;
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be > 0"));
    }
    if horizon < dt {
        return Err(Error::param("horizon", format!("{horizon} is shorter than dt = {dt}")));
    }
    let n = (horizon / dt + 1e-9).floor() as usize + 1;
    let values: Vec<f64> = (0..n).map(|k| kernel.value(k as f64 * dt)).collect();
    let tail = kernel.tail_mass((n - 1) as f64 * dt);
    SampledFunction::with_tail(dt, values, tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_integrals_match_quadrature() {
        let kernels: [Kernel; 2] = [
            PowerLawKernel::new(0.3, -1.4, 0.25).unwrap().into(),
            ExponentialKernel::new(0.7, 2.0).unwrap().into(),
        ];
        for k in kernels {
            let n = 200_000;
            let t = 30.0;
            let h = t / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                acc += k.integral((i as f64 + 0.5) * h) * h;
            }
            assert!((acc - k.double_integral(t)).abs() < 1e-7, "{k:?}");
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn exponential_samples_on_coarse_grid() {
        let f = sample_kernel(ExponentialKernel::new(1.0, 1.0).unwrap(), 0.5, 1.0).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f.values()[0], 1.0);
        assert!(close(f.values()[1], (-0.5f64).exp(), 1e-15));
        assert!(close(f.values()[2], (-1.0f64).exp(), 1e-15));
        assert!(close(f.tail_mass(), (-1.0f64).exp(), 1e-15));
    }

    #[test]
    fn power_law_value_at_origin() {
        let k = PowerLawKernel::new(1.0, -1.5, 0.25).unwrap();
        assert!(close(k.value(0.0), 8.0, 1e-12));
    }

    #[test]
    fn power_law_alpha_from_norm() {
        // α = 0.8456 · 0.5 / 0.25^(−0.5)
        let k = PowerLawKernel::with_l1_norm(0.8456, -1.5, 0.25).unwrap();
        assert!(close(k.alpha, 0.2114, 1e-12));
        assert!(close(k.l1_norm(), 0.8456, 1e-12));
    }

    #[test]
    fn power_law_norm_matches_quadrature() {
        // Substituting t = offset·(u^(−3) − 1) maps [0, ∞) to (0, 1] and removes
        // the heavy tail; Simpson on u gives an independent check of the L1 formula.
        let k = PowerLawKernel::new(0.2114, -1.5, 0.25).unwrap();
        let n = 20_000;
        let h = 1.0 / n as f64;
        let g = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let t = k.offset * (u.powi(-3) - 1.0);
            let dtdu = 3.0 * k.offset * u.powi(-4);
            k.value(t) * dtdu
        };
        let mut s = g(0.0) + g(1.0);
        for i in 1..n {
            s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = s * h / 3.0;
        assert!(close(quad, 0.8456, 1e-6), "quadrature {quad}");
    }

    #[test]
    fn l1_norm_of_sampled_exponential() {
        let f = sample_kernel(ExponentialKernel::new(1.0, 1.0).unwrap(), 1e-3, 40.0).unwrap();
        assert!(close(l1_norm(&f), 1.0, 1e-3));
    }

    #[test]
    fn l1_norm_of_zero_is_zero() {
        let z = SampledFunction::zeros(0.1, 50).unwrap();
        assert_eq!(l1_norm(&z), 0.0);
    }

    #[test]
    fn l1_norm_of_sampled_power_law() {
        let k = PowerLawKernel::with_l1_norm(0.8456, -1.5, 0.25).unwrap();
        let f = sample_kernel(k, 1e-3, 50.0).unwrap();
        assert!(close(l1_norm(&f), 0.8456, 1e-3), "{}", l1_norm(&f));
    }

    #[test]
    fn sample_rejects_bad_grid() {
        let k = ExponentialKernel::new(1.0, 1.0).unwrap();
        assert!(sample_kernel(k, 0.5, 0.25).is_err());
        assert!(sample_kernel(k, 0.0, 1.0).is_err());
        assert!(sample_kernel(k, f64::NAN, 1.0).is_err());
        let bad = ExponentialKernel { alpha: f64::INFINITY, beta: 1.0 };
        assert!(sample_kernel(bad, 0.1, 1.0).is_err());
    }

    #[test]
    fn power_law_exponent_range_enforced() {
        assert!(PowerLawKernel::new(1.0, -0.9, 0.25).is_err());
        assert!(PowerLawKernel::new(1.0, -2.0, 0.25).is_err());
        assert!(PowerLawKernel::new(1.0, -1.5, 0.0).is_err());
    }

    #[test]
    fn dirac_is_convolution_identity() {
        let g = SampledFunction::from_fn(0.01, 300, |t| (3.0 * t).sin() + t).unwrap();
        assert_eq!(CausalMeasure::Dirac.convolve(&g).unwrap(), g);
        let c = CausalMeasure::Dirac.cumulative(0.01, 10).unwrap();
        assert!(c.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn csv_round_trip() {
        let f = sample_kernel(ExponentialKernel::new(0.5, 2.0).unwrap(), 0.25, 2.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = SampledFunction::read_csv(f.header(), std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn interpolation_and_cumulative_integral() {
        let f = SampledFunction::from_fn(0.5, 5, |t| t).unwrap();
        assert!(close(f.value_at(0.75), 0.75, 1e-15));
        assert_eq!(f.value_at(-1.0), 0.0);
        let c = f.cumulative_integral();
        assert!(close(*c.values().last().unwrap(), 2.0, 1e-15));
    }
}
