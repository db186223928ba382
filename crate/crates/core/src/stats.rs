//! Small descriptive-statistics helpers shared by the estimators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Generator for stream `stream` of the family seeded by `seed`. Streams
/// are independent, so parallel work indexed by stream is reproducible.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two points.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Quantile of already sorted data with linear interpolation between order
/// statistics (`h = (n−1)·p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn quantiles(xs: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    levels.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::param("x/y", "length mismatch"));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("need at least two points for a line fit".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("regressor has zero variance".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Minimizer of `Σ wᵢ·|xᵢ − m|` over `m` (lower weighted median).
pub fn weighted_median(xs: &[f64], ws: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..xs.len()).filter(|&i| ws[i] > 0.0).collect();
    if idx.is_empty() {
        return f64::NAN;
    }
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let total: f64 = idx.iter().map(|&i| ws[i]).sum();
    let mut acc = 0.0;
    for &i in &idx {
        acc += ws[i];
        if acc >= 0.5 * total {
            return xs[i];
        }
    }
    xs[*idx.last().unwrap()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let q = quantiles(&[4.0, 1.0, 3.0, 2.0], &[0.0, 0.5, 1.0, 0.25]);
        assert_eq!(q, vec![1.0, 2.5, 4.0, 1.75]);
    }

    #[test]
    fn ols_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let (s, i) = ols(&x, &y).unwrap();
        assert!((s + 2.0).abs() < 1e-14 && (i - 3.0).abs() < 1e-14);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn weighted_median_minimizes_abs_loss() {
        let xs = [1.0, 2.0, 10.0];
        let ws = [1.0, 1.0, 3.0];
        assert_eq!(weighted_median(&xs, &ws), 10.0);
        assert_eq!(weighted_median(&[5.0, 1.0, 3.0], &[1.0, 1.0, 1.0]), 3.0);
    }
}
