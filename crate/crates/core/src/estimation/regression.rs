use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::curves::{quantile_buckets, return_proxy};
use super::data::{MetaorderRecord, PriceStore, ResponseTransform, Variable};
use crate::error::{ensure_finite, Error, Result};
use crate::optimize::golden_section;
use crate::stats::{mean, ols, std_error, weighted_median};

/// Distance used by the direct fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    L1,
    L2,
    /// Least squares on `log y` against `log a + Σ γᵢ log Xᵢ`.
    Loglog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionOptions {
    /// Search box for every exponent (L1 and L2).
    #[serde(default = "default_bounds")]
    pub exponent_bounds: (f64, f64),
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
}

fn default_bounds() -> (f64, f64) {
    (-2.0, 2.0)
}

fn default_tol() -> f64 {
    1e-13
}

fn default_sweeps() -> usize {
    200
}

impl Default for RegressionOptions {
    fn default() -> Self {
        Self { exponent_bounds: default_bounds(), tol: default_tol(), max_sweeps: default_sweeps() }
    }
}

/// Fitted `y ≈ a·Π Xᵢ^γᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub loss: Loss,
    pub prefactor: f64,
    pub exponents: Vec<f64>,
    pub variables: Vec<String>,
    /// Mean absolute (L1), mean squared (L2) or mean squared log (loglog) residual.
    pub loss_value: f64,
    /// `y − a·Π Xᵢ^γᵢ` for every input row.
    pub residuals: Vec<f64>,
    /// Rows left out of a loglog fit for a non-positive response.
    pub dropped: usize,
    pub converged: bool,
    pub sweeps: usize,
}

fn design_check(y: &[f64], xs: &[Vec<f64>], names: &[String]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::param("variables", "need at least one regressor"));
    }
    if names.len() != xs.len() {
        return Err(Error::param("variables", "one name per regressor"));
    }
    for (x, name) in xs.iter().zip(names) {
        if x.len() != y.len() {
            return Err(Error::param(name, "length differs from the response"));
        }
        for &v in x {
            ensure_finite(name, v)?;
            if !(v > 0.0) {
                return Err(Error::NonPositive(format!("regressor {name} has value {v}")));
            }
        }
        if x.iter().all(|&v| v == x[0]) {
            return Err(Error::Degenerate(format!("regressor {name} is constant")));
        }
    }
    for &v in y {
        ensure_finite("response", v)?;
    }
    Ok(())
}

fn model_terms(logs: &[Vec<f64>], exponents: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| logs.iter().zip(exponents).map(|(l, g)| g * l[i]).sum::<f64>().exp())
        .collect()
}

/// Best prefactor for fixed model terms `z` and the resulting loss.
fn profile(loss: Loss, y: &[f64], z: &[f64]) -> (f64, f64) {
    match loss {
        Loss::L2 => {
            let szz: f64 = z.iter().map(|v| v * v).sum();
            let a = y.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / szz;
            let value = y.iter().zip(z).map(|(y, z)| (y - a * z).powi(2)).sum::<f64>() / y.len() as f64;
            (a, value)
        }
        Loss::L1 => {
            let ratios: Vec<f64> = y.iter().zip(z).map(|(y, z)| y / z).collect();
            let a = weighted_median(&ratios, z);
            let value = y.iter().zip(z).map(|(y, z)| (y - a * z).abs()).sum::<f64>() / y.len() as f64;
            (a, value)
        }
        Loss::Loglog => unreachable!("loglog is solved in closed form"),
    }
}

fn loglog_fit(y: &[f64], logs: &[Vec<f64>]) -> Result<(f64, Vec<f64>, f64, usize)> {
    let keep: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0.0).collect();
    let dropped = y.len() - keep.len();
    let m = logs.len();
    if keep.len() < m + 2 {
        return Err(Error::InsufficientData(format!(
            "{} positive responses for {m} regressors",
            keep.len()
        )));
    }
    let design = DMatrix::from_fn(keep.len(), m + 1, |r, c| if c == 0 { 1.0 } else { logs[c - 1][keep[r]] });
    let target = DVector::from_iterator(keep.len(), keep.iter().map(|&i| y[i].ln()));
    let svd = design.clone().svd(true, true);
    let smallest = svd.singular_values.min();
    if smallest <= 1e-12 * svd.singular_values.max() {
        return Err(Error::Degenerate("collinear regressors".into()));
    }
    let beta = svd
        .solve(&target, 1e-14)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let fitted = &design * &beta;
    let mse = (target - fitted).norm_squared() / keep.len() as f64;
    Ok((beta[0].exp(), beta.iter().skip(1).copied().collect(), mse, dropped))
}

/// Fits `y ≈ a·Π Xᵢ^γᵢ` under `loss`.
///
/// L1 and L2 profile out the prefactor in closed form (weighted median,
/// moment ratio) and search the exponents by cyclic golden-section descent
/// inside `exponent_bounds`, starting from the loglog solution.
pub fn fit_power_law(
    y: &[f64],
    xs: &[Vec<f64>],
    names: &[String],
    loss: Loss,
    options: &RegressionOptions,
) -> Result<RegressionResult> {
    design_check(y, xs, names)?;
    let n = y.len();
    let logs: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| v.ln()).collect()).collect();
    let residuals = |a: f64, g: &[f64]| -> Vec<f64> {
        model_terms(&logs, g, n).iter().zip(y).map(|(z, y)| y - a * z).collect()
    };
    let (lo, hi) = options.exponent_bounds;
    if !(lo < hi) {
        return Err(Error::param("exponent_bounds", "need lo < hi"));
    }

    let start = loglog_fit(y, &logs);
    if loss == Loss::Loglog {
        let (a, g, mse, dropped) = start?;
        return Ok(RegressionResult {
            loss,
            prefactor: a,
            residuals: residuals(a, &g),
            exponents: g,
            variables: names.to_vec(),
            loss_value: mse,
            dropped,
            converged: true,
            sweeps: 0,
        });
    }

    let mut g: Vec<f64> = match &start {
        Ok((_, g, _, _)) => g.iter().map(|v| v.clamp(lo, hi)).collect(),
        Err(_) => vec![0.5 * (lo + hi); xs.len()],
    };
    let objective = |g: &[f64]| profile(loss, y, &model_terms(&logs, g, n)).1;
    let mut best = objective(&g);
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < options.max_sweeps {
        sweeps += 1;
        let before = g.clone();
        for j in 0..g.len() {
            let mut trial = g.clone();
            let m = golden_section(
                |v| {
                    trial[j] = v;
                    objective(&trial)
                },
                lo,
                hi,
                options.tol,
                400,
            );
            if m.value <= best {
                g[j] = m.x;
                best = m.value;
            }
        }
        let step = g.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if step <= options.tol * 10.0 {
            converged = true;
            break;
        }
    }
    let (a, value) = profile(loss, y, &model_terms(&logs, &g, n));
    Ok(RegressionResult {
        loss,
        prefactor: a,
        residuals: residuals(a, &g),
        exponents: g,
        variables: names.to_vec(),
        loss_value: value,
        dropped: 0,
        converged,
        sweeps,
    })
}

/// Direct fit of the signed temporary impact `ε·ΔP(t0 + T)` against record
/// variables. Records without price coverage of `[t0, t0 + T]` are an error.
pub fn direct_regression(
    records: &[MetaorderRecord],
    prices: &PriceStore,
    variables: &[Variable],
    loss: Loss,
    transform: ResponseTransform,
    options: &RegressionOptions,
) -> Result<RegressionResult> {
    let mut y = Vec::with_capacity(records.len());
    for r in records {
        let series = prices
            .for_record(r)
            .ok_or_else(|| Error::InsufficientData(format!("no prices for record {}", r.id)))?;
        let rel = return_proxy(series, r.t0, r.end())?;
        y.push(r.side.sign() * transform.apply(r, rel)?);
    }
    let xs: Vec<Vec<f64>> = variables.iter().map(|v| records.iter().map(|r| v.of(r)).collect()).collect();
    let names: Vec<String> = variables.iter().map(|v| v.name().to_string()).collect();
    fit_power_law(&y, &xs, &names, loss, options)
}

/// Mean residual in one quantile bucket of a trace variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub lower: f64,
    pub upper: f64,
    pub mean_y: f64,
    pub mean_residual: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Bucket means of the residuals along `y` (one value per residual).
pub fn residual_trace(result: &RegressionResult, y: &[f64], k: usize) -> Result<Vec<TracePoint>> {
    if y.len() != result.residuals.len() {
        return Err(Error::param("trace variable", "one value per residual"));
    }
    let buckets = quantile_buckets(y, k)?;
    Ok(buckets
        .into_iter()
        .map(|idx| {
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let res: Vec<f64> = idx.iter().map(|&i| result.residuals[i]).collect();
            TracePoint {
                lower: ys.iter().copied().fold(f64::INFINITY, f64::min),
                upper: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_y: mean(&ys),
                mean_residual: mean(&res),
                stderr: std_error(&res),
                count: idx.len(),
            }
        })
        .collect())
}

/// Slope of the mean residual against the log of the bucket mean.
pub fn trace_slope(trace: &[TracePoint]) -> Result<f64> {
    let x: Vec<f64> = trace.iter().map(|p| p.mean_y.ln()).collect();
    let y: Vec<f64> = trace.iter().map(|p| p.mean_residual).collect();
    Ok(ols(&x, &y)?.0)
}
