//! Derivative-free one-dimensional minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search of `f` on `[lo, hi]`, stopping once the bracket is
/// narrower than `tol`.
///
/// The bracket endpoints are evaluated too, so a minimum sitting on the
/// boundary of the box is returned exactly.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Minimum {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let fa0 = f(a);
    let fb0 = f(b);
    let mut evaluations = 2;
    let mut best = if fb0 < fa0 { (b, fb0) } else { (a, fa0) };
    if b - a <= tol {
        return Minimum { x: best.0, value: best.1, evaluations };
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    evaluations += 2;
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best.1 || (v == best.1 && !best.1.is_finite()) {
            best = (x, v);
        }
    }
    if !best.1.is_finite() {
        best = if fc <= fd { (c, fc) } else { (d, fd) };
    }
    Minimum { x: best.0, value: best.1, evaluations }
}
