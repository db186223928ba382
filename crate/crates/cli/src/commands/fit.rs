//! `him fit`: joint calibration to empirical impact curves.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use hawkes_impact::estimation::ImpactCurve;
use hawkes_impact::kernels::DEFAULT_POWER_LAW_OFFSET;
use hawkes_impact::model_fit::{fit, model_curve, objective, FitConfig, FitParams, FitProblem, FitResult};
use hawkes_impact::stats::stream_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{resolve, sidecar, Invocation, ResolvePaths, SIDECAR};
use crate::output::Outputs;
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveInput {
    pub path: PathBuf,
    /// Metaorder duration of the curve, seconds.
    pub duration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitCommandConfig {
    pub curves: Vec<CurveInput>,
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
    /// Kernel grid step, in `time_unit`.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub search: FitConfig,
    /// Random parameter draws the fit must beat.
    #[serde(default = "default_checks")]
    pub random_checks: usize,
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

fn default_checks() -> usize {
    32
}

impl ResolvePaths for FitCommandConfig {
    fn resolve_paths(&mut self, base: &std::path::Path) {
        for c in &mut self.curves {
            resolve(base, &mut c.path);
        }
    }
}

#[derive(Debug, Serialize)]
struct FitReport {
    #[serde(flatten)]
    result: FitResult,
    random_checks: usize,
    best_random_objective: f64,
    beats_random: bool,
}

/// Smallest objective over uniform draws in the search box.
fn random_floor(problem: &FitProblem, n: usize, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut best = f64::INFINITY;
    for _ in 0..n {
        let params = FitParams {
            norm: rng.random_range(problem.norm_bounds.0..problem.norm_bounds.1),
            b: rng.random_range(problem.b_bounds.0..problem.b_bounds.1),
            contrarian: (0..problem.curves.len()).map(|_| rng.random_range(0.0..=problem.c_max)).collect(),
        };
        best = best.min(objective(&params, problem)?);
    }
    Ok(best)
}

pub fn run(inv: &Invocation) -> Result<Outputs> {
    let (seed, mut cfg): (u64, FitCommandConfig) = inv.load("fit")?;
    if let Some(dt) = inv.dt {
        cfg.dt = dt;
    }
    ensure!(!cfg.curves.is_empty(), "curves must not be empty");
    let mut curves = Vec::with_capacity(cfg.curves.len());
    for c in &cfg.curves {
        let file = File::open(&c.path).with_context(|| format!("opening {}", c.path.display()))?;
        curves.push(ImpactCurve::read_csv(file).with_context(|| format!("reading {}", c.path.display()))?);
    }
    let problem = FitProblem {
        curves,
        durations: cfg.curves.iter().map(|c| c.duration).collect(),
        time_unit: cfg.time_unit,
        offset: cfg.offset,
        norm_bounds: cfg.norm_bounds,
        b_bounds: cfg.b_bounds,
        c_max: cfg.c_max,
        dt: cfg.dt,
    };
    problem.validate()?;
    let result = fit(&problem, &cfg.search)?;
    let floor = random_floor(&problem, cfg.random_checks, seed)?;
    let params = result.params();
    let models: Vec<Vec<f64>> =
        (0..problem.curves.len()).map(|i| model_curve(&problem, i, &params)).collect::<hawkes_impact::Result<_>>()?;

    let mut out = Outputs::new();
    out.csv("fit_curves.csv", |w| {
        writeln!(w, "curve,s,data,model")?;
        for (i, (c, m)) in problem.curves.iter().zip(&models).enumerate() {
            for k in 0..c.s.len() {
                writeln!(w, "{i},{},{},{}", c.s[k], c.mean[k], m[k])?;
            }
        }
        Ok(())
    });
    let labels: Vec<(String, String)> =
        (0..models.len()).map(|i| (format!("data {i}"), format!("model {i}"))).collect();
    let mut series = Vec::new();
    for ((c, m), (ld, lm)) in problem.curves.iter().zip(&models).zip(&labels) {
        series.push(Series { label: ld, x: &c.s, y: &c.mean });
        series.push(Series { label: lm, x: &c.s, y: m });
    }
    out.text("fit.svg", line_chart("Model fit", "s", "impact", &series));
    let beats_random = result.objective <= floor;
    if !beats_random {
        eprintln!("warning: fitted objective {} is above the best of {} random draws ({floor})", result.objective, cfg.random_checks);
    }
    out.json(
        "fit.json",
        &FitReport { result, random_checks: cfg.random_checks, best_random_objective: floor, beats_random },
    )?;
    out.json(SIDECAR, &sidecar("fit", seed, &cfg)?)?;
    Ok(out)
}
