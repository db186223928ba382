use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::Kernel;

/// One step `[start, end)` carrying `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

/// `level + Σ steps` where each step adds its value on `[start, end)`.
/// Steps may overlap; all values are non-negative.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseConstant {
    #[serde(default)]
    pub level: f64,
    #[serde(default)]
    pub steps: Vec<Step>,
}

impl PiecewiseConstant {
    pub fn constant(level: f64) -> Self {
        Self { level, steps: Vec::new() }
    }

    pub fn with_steps(level: f64, steps: Vec<Step>) -> Self {
        Self { level, steps }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        ensure_finite(name, self.level)?;
        if self.level < 0.0 {
            return Err(Error::param(name, "negative intensity"));
        }
        for s in &self.steps {
            ensure_finite(name, s.start)?;
            ensure_finite(name, s.end)?;
            ensure_finite(name, s.value)?;
            if s.value < 0.0 {
                return Err(Error::param(name, "negative intensity"));
            }
            if !(s.end > s.start) {
                return Err(Error::param(name, format!("empty step [{}, {})", s.start, s.end)));
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        self.level
            + self
                .steps
                .iter()
                .filter(|s| t >= s.start && t < s.end)
                .map(|s| s.value)
                .sum::<f64>()
    }

    /// Upper bound of the function on `[a, b]`.
    pub fn upper_bound(&self, a: f64, b: f64) -> f64 {
        self.level
            + self
                .steps
                .iter()
                .filter(|s| s.start <= b && s.end > a)
                .map(|s| s.value)
                .sum::<f64>()
    }

    /// `∫_0^t`.
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.level * t
            + self
                .steps
                .iter()
                .map(|s| s.value * (t.min(s.end) - s.start.max(0.0)).max(0.0))
                .sum::<f64>()
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().flat_map(|s| [s.start, s.end])
    }
}

/// A deterministic added intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntensityFn {
    Piecewise(PiecewiseConstant),
    /// `scale · ∫ input(s) kernel(t − s) ds`.
    KernelResponse {
        input: PiecewiseConstant,
        kernel: Kernel,
        scale: f64,
    },
}

impl IntensityFn {
    pub fn validate(&self) -> Result<()> {
        match self {
            IntensityFn::Piecewise(p) => p.validate("exogenous"),
            IntensityFn::KernelResponse { input, kernel, scale } => {
                input.validate("exogenous.input")?;
                kernel.validate()?;
                ensure_finite("exogenous.scale", *scale)?;
                if *scale < 0.0 {
                    return Err(Error::param("exogenous.scale", "negative intensity"));
                }
                if input.level != 0.0 {
                    return Err(Error::param("exogenous.input", "a filtered input must vanish at -inf (level 0)"));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            IntensityFn::Piecewise(p) => p.value(t),
            IntensityFn::KernelResponse { input, kernel, scale } => {
                scale
                    * input
                        .steps
                        .iter()
                        .map(|s| s.value * (kernel.integral(t - s.start) - kernel.integral(t - s.end)))
                        .sum::<f64>()
            }
        }
    }

    /// Upper bound on `[a, b]`. For a filtered input the kernel is
    /// decreasing, so the value at `a` plus the largest possible new inflow
    /// bounds the whole interval.
    pub fn upper_bound(&self, a: f64, b: f64) -> f64 {
        match self {
            IntensityFn::Piecewise(p) => p.upper_bound(a, b),
            IntensityFn::KernelResponse { input, kernel, scale } => {
                self.value(a) + scale * input.upper_bound(a, b) * kernel.value(0.0) * (b - a)
            }
        }
    }

    /// `∫_0^t`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            IntensityFn::Piecewise(p) => p.integral(t),
            IntensityFn::KernelResponse { input, kernel, scale } => {
                scale
                    * input
                        .steps
                        .iter()
                        .map(|s| {
                            let lo = s.start.max(0.0);
                            if s.end <= lo {
                                return 0.0;
                            }
                            s.value * (kernel.double_integral(t - lo) - kernel.double_integral(t - s.end))
                        })
                        .sum::<f64>()
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            IntensityFn::Piecewise(p) => p.breakpoints().collect(),
            IntensityFn::KernelResponse { input, .. } => input.breakpoints().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ExponentialKernel, PowerLawKernel};

    #[test]
    fn piecewise_values_and_integrals() {
        let p = PiecewiseConstant::with_steps(
            1.0,
            vec![Step { start: 2.0, end: 4.0, value: 3.0 }, Step { start: 3.0, end: 5.0, value: 1.0 }],
        );
        assert_eq!(p.value(1.0), 1.0);
        assert_eq!(p.value(3.5), 5.0);
        assert_eq!(p.value(4.0), 2.0);
        assert_eq!(p.upper_bound(0.0, 2.0), 4.0);
        assert_eq!(p.upper_bound(4.5, 9.0), 2.0);
        assert!((p.integral(10.0) - (10.0 + 6.0 + 2.0)).abs() < 1e-12);
        assert!(PiecewiseConstant::constant(-1.0).validate("mu").is_err());
    }

    #[test]
    fn kernel_response_matches_quadrature() {
        let input = PiecewiseConstant::with_steps(0.0, vec![Step { start: 1.0, end: 6.0, value: 0.4 }]);
        for kernel in [
            Kernel::from(ExponentialKernel::new(0.5, 1.0).unwrap()),
            Kernel::from(PowerLawKernel::new(0.2, -1.5, 0.25).unwrap()),
        ] {
            let f = IntensityFn::KernelResponse { input: input.clone(), kernel, scale: 0.7 };
            let t = 4.5;
            let n = 100_000;
            let h = (t - 1.0) / n as f64;
            let direct: f64 =
                (0..n).map(|i| 1.0 + (i as f64 + 0.5) * h).map(|s| 0.7 * 0.4 * kernel.value(t - s) * h).sum();
            assert!((f.value(t) - direct).abs() < 1e-5, "{kernel:?}");

            let m = 20_000;
            let dh = 10.0 / m as f64;
            let area: f64 = (0..m).map(|i| f.value((i as f64 + 0.5) * dh) * dh).sum();
            assert!((f.integral(10.0) - area).abs() < 1e-5);

            for (a, b) in [(0.0, 2.0), (2.0, 3.0), (5.0, 8.0)] {
                let bound = f.upper_bound(a, b);
                for i in 0..=50 {
                    let x = a + (b - a) * i as f64 / 50.0;
                    assert!(f.value(x) <= bound + 1e-12);
                }
            }
        }
    }
}
