//! Convolution series of a kernel: the alternating series `κ`, the
//! non-alternating resolvent `Σ φ^(⋆n)` and its matrix version `Ψ`.
//!
//! Each series is available as a literal partial sum (`*_series`) and, for
//! scalar kernels, as the exact solution of the trapezoidal Volterra
//! equation it converges to (`*_resolvent`), computed by power-series
//! inversion in `O(n log n)`. The two routes agree to the series tolerance.

use log::warn;
use nalgebra::DMatrix;

use super::convolution::{check_grid, linear_convolution, Convolver};
use super::{l1_norm, SampledFunction};
use crate::error::{Error, Result};

/// Stop a series once the next term's L1 norm drops below this.
pub const DEFAULT_SERIES_TOL: f64 = 1e-6;

const MAX_TERMS: usize = 200_000;

/// Partial sum of a convolution series together with its diagnostics.
#[derive(Debug, Clone)]
pub struct KernelSeries {
    pub sum: SampledFunction,
    pub terms: usize,
    pub last_term_norm: f64,
    /// Whether `φ ≥ φ⋆φ` held on the grid (guarantees `κ ≥ 0`).
    pub phi_dominates_square: bool,
}

/// `κ = Σ_{n≥1} (−1)^(n−1) φ^(⋆n)`, accumulated until the added term's L1
/// norm falls below `tol`.
pub fn kappa_series(phi: &SampledFunction, tol: f64) -> Result<KernelSeries> {
    series(phi, tol, -1.0)
}

/// `Σ_{n≥1} φ^(⋆n)`, the scalar counterpart of [`psi_series`]. Applied to
/// `κ` it recovers `φ`.
pub fn positive_series(phi: &SampledFunction, tol: f64) -> Result<KernelSeries> {
    series(phi, tol, 1.0)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::param("tol", format!("must be finite and > 0, got {tol}")));
    }
    Ok(())
}

fn summable_norm(phi: &SampledFunction) -> Result<f64> {
    let norm = l1_norm(phi);
    if norm >= 1.0 {
        return Err(Error::NotSummable(norm));
    }
    Ok(norm)
}

fn series(phi: &SampledFunction, tol: f64, sign: f64) -> Result<KernelSeries> {
    check_tol(tol)?;
    let norm = summable_norm(phi)?;
    let conv = Convolver::new(phi);
    let mut sum = phi.values().to_vec();
    let mut term = phi.clone();
    let mut terms = 1;
    let mut last = norm;
    let mut dominates = true;
    let mut coeff = 1.0;
    while last >= tol {
        if terms >= MAX_TERMS {
            return Err(Error::NoConvergence(format!(
                "convolution series still at {last:.3e} after {terms} terms"
            )));
        }
        term = conv.apply(&term)?;
        terms += 1;
        if terms == 2 {
            dominates = dominates_square(phi.values(), term.values());
        }
        coeff *= sign;
        for (s, t) in sum.iter_mut().zip(term.values()) {
            *s += coeff * t;
        }
        last = l1_norm(&term);
    }
    if sign < 0.0 && !dominates {
        warn!("phi >= phi*phi fails on the grid; kappa may take negative values");
    }
    let tail = series_tail(phi.tail_mass(), norm, sign);
    Ok(KernelSeries {
        sum: SampledFunction::from_parts(phi.dt(), sum, tail),
        terms,
        last_term_norm: last,
        phi_dominates_square: dominates,
    })
}

fn dominates_square(phi: &[f64], square: &[f64]) -> bool {
    let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    phi.iter().zip(square).all(|(p, s)| *p >= s - 1e-12 * scale)
}

/// Asymptotic tail mass of a series in `φ` when `φ` is subexponential:
/// `tail(F(φ)) ≈ F'(‖φ‖₁)·tail(φ)` with `F(z) = z/(1∓z)`.
fn series_tail(phi_tail: f64, norm: f64, sign: f64) -> f64 {
    let d = 1.0 - sign * norm;
    phi_tail / (d * d)
}

/// Exact limit of [`kappa_series`] on the grid: the solution of the
/// trapezoidal renewal equation `κ = φ − φ⋆κ`.
pub fn kappa_resolvent(phi: &SampledFunction) -> Result<SampledFunction> {
    resolvent(phi, -1.0)
}

/// Exact limit of [`positive_series`]: the solution of `ρ = φ + φ⋆ρ`.
pub fn positive_resolvent(phi: &SampledFunction) -> Result<SampledFunction> {
    resolvent(phi, 1.0)
}

// Writing the trapezoidal operator on generating functions,
// T(f, x) = dt·F·X − (dt/2)(f₀·X + x₀·F), the equation x = φ + s·T(φ, x)
// with x₀ = φ₀ becomes X·(1 − s·dt·F + s·dt·φ₀/2) = F·(1 − s·dt·φ₀/2).
fn resolvent(phi: &SampledFunction, sign: f64) -> Result<SampledFunction> {
    let norm = summable_norm(phi)?;
    let dt = phi.dt();
    let f = phi.values();
    let n = f.len();
    let half = sign * dt * f[0] / 2.0;
    let mut denom: Vec<f64> = f.iter().map(|v| -sign * dt * v).collect();
    denom[0] += 1.0 + half;
    if denom[0].abs() < 1e-12 {
        return Err(Error::param("dt", "grid too coarse for the kernel's value at 0"));
    }
    let recip = series_reciprocal(&denom, n);
    let mut x = linear_convolution(f, &recip, n);
    for v in &mut x {
        *v *= 1.0 - half;
    }
    Ok(SampledFunction::from_parts(dt, x, series_tail(phi.tail_mass(), norm, sign)))
}

/// First `n` coefficients of `1/d(z)` by Newton iteration `r ← r·(2 − d·r)`.
fn series_reciprocal(d: &[f64], n: usize) -> Vec<f64> {
    let mut r = vec![1.0 / d[0]];
    let mut m = 1;
    while m < n {
        let m2 = (2 * m).min(n);
        let e = linear_convolution(&d[..d.len().min(m2)], &r, m2);
        let mut corr: Vec<f64> = e.iter().map(|v| -v).collect();
        corr[0] += 2.0;
        r = linear_convolution(&r, &corr, m2);
        m = m2;
    }
    r.truncate(n);
    r
}

/// A `d×d` matrix of kernels on a common grid, row-major.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    dim: usize,
    entries: Vec<SampledFunction>,
}

impl KernelMatrix {
    pub fn new(rows: Vec<Vec<SampledFunction>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::param("Phi", "matrix must be at least 1x1"));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::param("Phi", "matrix must be square"));
        }
        let entries: Vec<SampledFunction> = rows.into_iter().flatten().collect();
        let len = entries[0].len();
        for e in &entries {
            check_grid(&entries[0], e)?;
            if e.len() != len {
                return Err(Error::param("Phi", "all entries must share the grid length"));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize, dt: f64, len: usize) -> Result<Self> {
        let z = SampledFunction::zeros(dt, len)?;
        Self::new(vec![vec![z; dim]; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.entries[0].dt()
    }

    pub fn grid_len(&self) -> usize {
        self.entries[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> &SampledFunction {
        &self.entries[i * self.dim + j]
    }

    /// Entrywise `∫_0^∞` (grid plus tail mass).
    pub fn integral_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let e = self.get(i, j);
            e.integral() + e.tail_mass()
        })
    }
}

/// Entrywise L1 norm matrix `K`.
pub fn kernel_matrix_norms(phi: &KernelMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(phi.dim, phi.dim, |i, j| l1_norm(phi.get(i, j)))
}

pub fn spectral_radius(k: &DMatrix<f64>) -> f64 {
    k.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Matrix series `Ψ = Σ_{n≥1} Φ^(⋆n)` with `(A⋆B)_ij = Σ_k a_ik ⋆ b_kj`.
#[derive(Debug, Clone)]
pub struct PsiSeries {
    pub psi: KernelMatrix,
    pub terms: usize,
    pub last_term_norm: f64,
}

pub fn psi_series(phi: &KernelMatrix, tol: f64) -> Result<PsiSeries> {
    check_tol(tol)?;
    let d = phi.dim;
    let k = kernel_matrix_norms(phi);
    let rho = spectral_radius(&k);
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let convolvers: Vec<Option<Convolver>> = phi
        .entries
        .iter()
        .map(|e| (l1_norm(e) > 0.0).then(|| Convolver::new(e)))
        .collect();
    let n = phi.grid_len();
    let dt = phi.dt();
    let mut sum: Vec<Vec<f64>> = phi.entries.iter().map(|e| e.values().to_vec()).collect();
    let mut term: Vec<Vec<f64>> = sum.clone();
    let mut terms = 1;
    let mut last = max_entry_norm(&term, dt);
    while last >= tol {
        if terms >= MAX_TERMS {
            return Err(Error::NoConvergence(format!(
                "matrix series still at {last:.3e} after {terms} terms"
            )));
        }
        let mut next = vec![vec![0.0; n]; d * d];
        for i in 0..d {
            for j in 0..d {
                let acc = &mut next[i * d + j];
                for m in 0..d {
                    if let Some(c) = &convolvers[m * d + j] {
                        let prod = c.apply_values(&term[i * d + m]);
                        for (a, p) in acc.iter_mut().zip(prod) {
                            *a += p;
                        }
                    }
                }
            }
        }
        term = next;
        terms += 1;
        for (s, t) in sum.iter_mut().zip(&term) {
            for (a, b) in s.iter_mut().zip(t) {
                *a += b;
            }
        }
        last = max_entry_norm(&term, dt);
    }

    // Tail masses: (I−K)⁻¹·T_Φ·(I−K)⁻¹, the matrix form of `series_tail`.
    let tails = DMatrix::from_fn(d, d, |i, j| phi.get(i, j).tail_mass());
    let inv = (DMatrix::identity(d, d) - &k)
        .try_inverse()
        .ok_or(Error::Unstable(rho))?;
    let psi_tails = &inv * tails * &inv;
    let entries = sum
        .into_iter()
        .enumerate()
        .map(|(idx, v)| SampledFunction::from_parts(dt, v, psi_tails[(idx / d, idx % d)].max(0.0)))
        .collect();
    Ok(PsiSeries {
        psi: KernelMatrix { dim: d, entries },
        terms,
        last_term_norm: last,
    })
}

fn max_entry_norm(term: &[Vec<f64>], dt: f64) -> f64 {
    term.iter()
        .map(|v| {
            let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            super::trapezoid(dt, &abs)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{convolve, sample_kernel, ExponentialKernel, PowerLawKernel};

    fn sup_err(f: &SampledFunction, g: impl Fn(f64) -> f64) -> f64 {
        f.times()
            .zip(f.values())
            .map(|(t, v)| (v - g(t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn kappa_of_exponential_kernel() {
        // κ̂ = φ̂/(1+φ̂) with φ̂ = α/(β+iω) gives κ(t) = α·e^(−(α+β)t).
        let (a, b) = (0.5, 1.0);
        let phi = sample_kernel(ExponentialKernel::new(a, b).unwrap(), 1e-3, 20.0).unwrap();
        let k = kappa_series(&phi, DEFAULT_SERIES_TOL).unwrap();
        // φ⋆φ = α²t·e^(−βt) overtakes φ for t > β/α, yet κ stays positive here.
        assert!(!k.phi_dominates_square);
        let err = sup_err(&k.sum, |t| a * (-(a + b) * t).exp());
        assert!(err < 1e-3, "sup error {err}");
    }

    #[test]
    fn kappa_of_zero_is_zero() {
        let z = SampledFunction::zeros(0.01, 100).unwrap();
        let k = kappa_series(&z, DEFAULT_SERIES_TOL).unwrap();
        assert!(k.sum.values().iter().all(|&v| v == 0.0));
        assert_eq!(k.terms, 1);
    }

    #[test]
    fn kappa_rejects_non_summable_kernel() {
        let phi = sample_kernel(ExponentialKernel::new(1.2, 1.0).unwrap(), 0.01, 30.0).unwrap();
        assert!(matches!(kappa_series(&phi, 1e-6), Err(Error::NotSummable(_))));
        assert!(matches!(kappa_resolvent(&phi), Err(Error::NotSummable(_))));
    }

    #[test]
    fn kappa_norm_identity_power_law() {
        let kern = PowerLawKernel::with_l1_norm(0.6, -1.5, 0.25).unwrap();
        let phi = sample_kernel(kern, 1e-2, 500.0).unwrap();
        let k = kappa_series(&phi, 1e-7).unwrap();
        let l = l1_norm(&phi);
        assert!((l1_norm(&k.sum) - l / (1.0 + l)).abs() < 1e-3);
    }

    #[test]
    fn resolvent_matches_series() {
        let kern = PowerLawKernel::with_l1_norm(0.8456, -1.5, 0.25).unwrap();
        let phi = sample_kernel(kern, 1e-2, 60.0).unwrap();
        let s = kappa_series(&phi, 1e-9).unwrap();
        let r = kappa_resolvent(&phi).unwrap();
        assert!(s.sum.sup_distance(&r) < 1e-8, "{}", s.sum.sup_distance(&r));
        let ps = positive_series(&phi, 1e-9).unwrap();
        let pr = positive_resolvent(&phi).unwrap();
        assert!(ps.sum.sup_distance(&pr) < 1e-6, "{}", ps.sum.sup_distance(&pr));
    }

    #[test]
    fn kappa_satisfies_renewal_equation() {
        let phi = sample_kernel(ExponentialKernel::new(0.7, 1.3).unwrap(), 1e-2, 30.0).unwrap();
        let k = kappa_resolvent(&phi).unwrap();
        let pk = convolve(&phi, &k).unwrap();
        let resid: f64 = phi
            .values()
            .iter()
            .zip(k.values())
            .zip(pk.values())
            .map(|((p, k), c)| (p - k - c).abs())
            .fold(0.0, f64::max);
        assert!(resid < 1e-12, "{resid}");
    }

    #[test]
    fn inverse_relation_recovers_phi() {
        let tol = 1e-7;
        let kern = PowerLawKernel::with_l1_norm(0.5, -1.4, 0.25).unwrap();
        let phi = sample_kernel(kern, 1e-2, 40.0).unwrap();
        let k = kappa_series(&phi, tol).unwrap();
        let back = positive_series(&k.sum, tol).unwrap();
        assert!(back.sum.sup_distance(&phi) < 10.0 * tol * phi.values()[0].max(1.0));
    }

    #[test]
    fn scalar_psi_of_exponential() {
        let (a, b) = (0.4, 1.0);
        let phi = sample_kernel(ExponentialKernel::new(a, b).unwrap(), 1e-3, 30.0).unwrap();
        let m = KernelMatrix::new(vec![vec![phi]]).unwrap();
        let psi = psi_series(&m, 1e-8).unwrap();
        let err = sup_err(psi.psi.get(0, 0), |t| a * (-(b - a) * t).exp());
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn psi_of_zero_matrix_is_zero() {
        let m = KernelMatrix::zeros(3, 0.1, 50).unwrap();
        let psi = psi_series(&m, 1e-6).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(psi.psi.get(i, j).values().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn cross_kernel_psi_splits_even_and_odd() {
        let (a, b) = (0.6, 1.0);
        let phi = sample_kernel(ExponentialKernel::new(a, b).unwrap(), 2e-3, 40.0).unwrap();
        let zero = SampledFunction::zeros(phi.dt(), phi.len()).unwrap();
        let m = KernelMatrix::new(vec![vec![zero.clone(), phi.clone()], vec![phi.clone(), zero]]).unwrap();
        let psi = psi_series(&m, 1e-9).unwrap();
        // Σ_{n odd} φ^(⋆n) and Σ_{n even} φ^(⋆n) from the two scalar resolvents.
        let rho = positive_resolvent(&phi).unwrap();
        let kappa = kappa_resolvent(&phi).unwrap();
        let odd: Vec<f64> = rho.values().iter().zip(kappa.values()).map(|(r, k)| 0.5 * (r + k)).collect();
        let even: Vec<f64> = rho.values().iter().zip(kappa.values()).map(|(r, k)| 0.5 * (r - k)).collect();
        let odd = SampledFunction::new(phi.dt(), odd).unwrap();
        let even = SampledFunction::new(phi.dt(), even).unwrap();
        assert!(psi.psi.get(0, 1).sup_distance(&odd) < 1e-6);
        assert!(psi.psi.get(0, 0).sup_distance(&even) < 1e-6);

        // ∫Ψ = K(I−K)⁻¹ entrywise.
        let k = kernel_matrix_norms(&m);
        let expected = &k * (DMatrix::identity(2, 2) - &k).try_inverse().unwrap();
        let got = psi.psi.integral_matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((got[(i, j)] - expected[(i, j)]).abs() < 1e-4, "{i}{j}: {} vs {}", got[(i, j)], expected[(i, j)]);
            }
        }
    }

    #[test]
    fn psi_rejects_unstable_matrix() {
        let phi = sample_kernel(ExponentialKernel::new(0.6, 1.0).unwrap(), 0.01, 20.0).unwrap();
        let m = KernelMatrix::new(vec![vec![phi.clone(), phi.clone()], vec![phi.clone(), phi]]).unwrap();
        assert!(matches!(psi_series(&m, 1e-6), Err(Error::Unstable(_))));
    }
}
