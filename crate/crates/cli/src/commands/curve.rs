//! `him curve`: analytic impact curves for one or more specifications.

use std::io::Write;

use anyhow::{ensure, Result};
use hawkes_impact::estimation::ImpactCurve;
use hawkes_impact::him_model::{impact_curve_analytic, permanent_impact, HimSpec, KappaMethod};
use hawkes_impact::kernels::DEFAULT_DT;
use serde::{Deserialize, Serialize};

use super::linspace;
use crate::config::{sidecar, Invocation, ResolvePaths, SIDECAR};
use crate::output::Outputs;
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledSpec {
    pub label: String,
    pub spec: HimSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveCommandConfig {
    pub curves: Vec<LabeledSpec>,
    /// Defaults to four times the latest schedule end.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub kappa: KappaMethod,
    /// Also write constant-rate curves on the rescaled grid `s = k/100`,
    /// `s ≤ s_max`, in the estimator's curve format.
    #[serde(default = "default_s_max")]
    pub rescaled_s_max: Option<f64>,
}

fn default_points() -> usize {
    401
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_s_max() -> Option<f64> {
    Some(2.0)
}

impl ResolvePaths for CurveCommandConfig {}

#[derive(Debug, Serialize)]
struct CurveSummary {
    label: String,
    final_value: f64,
    /// Closed-form long-run level for constant schedules.
    permanent: Option<f64>,
}

pub fn run(inv: &Invocation) -> Result<Outputs> {
    let (seed, mut cfg): (u64, CurveCommandConfig) = inv.load("curve")?;
    if let Some(dt) = inv.dt {
        cfg.dt = dt;
    }
    ensure!(!cfg.curves.is_empty(), "curves must not be empty");
    ensure!(cfg.points >= 2, "points must be >= 2");
    for c in &cfg.curves {
        c.spec.validate()?;
        ensure!(!c.label.contains(','), "label {:?} must not contain a comma", c.label);
    }
    let latest = cfg.curves.iter().map(|c| c.spec.schedule.end()).fold(0.0, f64::max);
    let t_max = *cfg.t_max.get_or_insert(4.0 * latest);
    ensure!(t_max > 0.0, "t_max must be > 0");
    let grid = linspace(t_max, cfg.points);
    let config = hawkes_impact::him_model::CurveConfig { dt: cfg.dt, kappa: cfg.kappa };

    let mut out = Outputs::new();
    let mut etas = Vec::with_capacity(cfg.curves.len());
    let mut summary = Vec::new();
    for c in &cfg.curves {
        let eta = impact_curve_analytic(&c.spec, &grid, &config)?.eta;
        summary.push(CurveSummary {
            label: c.label.clone(),
            final_value: *eta.last().unwrap(),
            permanent: permanent_impact(&c.spec).ok(),
        });
        etas.push(eta);
        if let (Some(s_max), Some((t0, duration, _))) = (cfg.rescaled_s_max, c.spec.schedule.as_constant()) {
            let n = (s_max * 100.0 + 1e-9).floor() as usize;
            let s: Vec<f64> = (0..=n).map(|k| k as f64 / 100.0).collect();
            let t: Vec<f64> = s.iter().map(|s| t0 + s * duration).collect();
            let eta = impact_curve_analytic(&c.spec, &t, &config)?.eta;
            let curve = ImpactCurve::from_values(s, eta)?;
            out.csv(format!("rescaled_{}.csv", c.label), |w| curve.write_csv(w));
        }
    }
    out.csv("curves.csv", |w| {
        let labels: Vec<&str> = cfg.curves.iter().map(|c| c.label.as_str()).collect();
        writeln!(w, "t,{}", labels.join(","))?;
        for (k, t) in grid.iter().enumerate() {
            let row: Vec<String> = etas.iter().map(|e| e[k].to_string()).collect();
            writeln!(w, "{t},{}", row.join(","))?;
        }
        Ok(())
    });
    let series: Vec<Series> =
        cfg.curves.iter().zip(&etas).map(|(c, e)| Series { label: &c.label, x: &grid, y: e }).collect();
    out.text("curves.svg", line_chart("Analytic impact", "t (s)", "impact", &series));
    out.json("summary.json", &summary)?;
    out.json(SIDECAR, &sidecar("curve", seed, &cfg)?)?;
    Ok(out)
}
