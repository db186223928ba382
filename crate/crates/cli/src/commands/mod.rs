pub mod curve;
pub mod daily;
pub mod estimate;
pub mod fit;
pub mod simulate;

/// `n` evenly spaced points on `[0, end]`.
pub(crate) fn linspace(end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![end];
    }
    (0..n).map(|k| end * k as f64 / (n - 1) as f64).collect()
}
