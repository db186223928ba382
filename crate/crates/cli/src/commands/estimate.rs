//! `him estimate`: rescaled impact curve, direct regressions, residual
//! traces, conditional slices, bootstrap and anticipation check.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use hawkes_impact::estimation::{
    anticipation_groups, bootstrap_exponent, decay_loglog, direct_regression, quantile_slices, read_metaorders,
    read_price_series, rescaled_average, residual_trace, trace_slope, transient_fit, AnticipationOptions,
    BootstrapOptions, Loss, MetaorderRecord, PriceStore, RecordFilter, RegressionOptions, RescaleOptions,
    ResponseTransform, Variable, DEFAULT_TRANSIENT_RANGE,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{resolve, sidecar, Invocation, ResolvePaths, SIDECAR};
use crate::output::Outputs;
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub metaorders: PathBuf,
    /// Directory of `{instrument}_{date}.csv` price files.
    pub prices_dir: PathBuf,
    #[serde(default)]
    pub filter: RecordFilter,
    #[serde(default)]
    pub rescale: RescaleOptions,
    #[serde(default = "default_range")]
    pub transient_range: (f64, f64),
    #[serde(default)]
    pub regression: RegressionSection,
    #[serde(default)]
    pub slices: SliceSection,
    #[serde(default)]
    pub bootstrap: Option<BootstrapOptions>,
    #[serde(default)]
    pub anticipation: Option<AnticipationSection>,
}

fn default_range() -> (f64, f64) {
    DEFAULT_TRANSIENT_RANGE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionSection {
    pub variables: Vec<Variable>,
    pub losses: Vec<Loss>,
    pub options: RegressionOptions,
    /// Residuals of the L2 fit are traced along these variables.
    pub trace_variables: Vec<Variable>,
    pub trace_buckets: usize,
}

impl Default for RegressionSection {
    fn default() -> Self {
        Self {
            variables: vec![Variable::DailyParticipation],
            losses: vec![Loss::L1, Loss::L2, Loss::Loglog],
            options: RegressionOptions::default(),
            trace_variables: vec![Variable::Duration, Variable::Volatility],
            trace_buckets: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceSection {
    pub variables: Vec<Variable>,
    pub buckets: usize,
}

impl Default for SliceSection {
    fn default() -> Self {
        Self { variables: vec![Variable::DailyParticipation, Variable::TradingRate], buckets: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnticipationSection {
    /// Base daily participation `R0`.
    pub r0: f64,
    /// Base duration `T0`, seconds.
    pub t0: f64,
    #[serde(default)]
    pub options: AnticipationOptions,
}

impl ResolvePaths for EstimateConfig {
    fn resolve_paths(&mut self, base: &std::path::Path) {
        resolve(base, &mut self.metaorders);
        resolve(base, &mut self.prices_dir);
    }
}

fn load_prices(dir: &std::path::Path, records: &[MetaorderRecord]) -> Result<PriceStore> {
    let mut store = PriceStore::new();
    for r in records {
        if store.get(&r.instrument, &r.date).is_some() {
            continue;
        }
        let path = dir.join(format!("{}_{}.csv", r.instrument, r.date));
        if !path.exists() {
            continue;
        }
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let series = read_price_series(file).with_context(|| format!("reading {}", path.display()))?;
        store.insert(r.instrument.clone(), r.date.clone(), series);
    }
    Ok(store)
}

fn or_error<T: Serialize>(r: hawkes_impact::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn run(inv: &Invocation) -> Result<Outputs> {
    let (seed, cfg): (u64, EstimateConfig) = inv.load("estimate")?;
    let file = File::open(&cfg.metaorders).with_context(|| format!("opening {}", cfg.metaorders.display()))?;
    let all = read_metaorders(file).with_context(|| format!("reading {}", cfg.metaorders.display()))?;
    if all.is_empty() {
        bail!(hawkes_impact::Error::InsufficientData("no metaorders in input".into()));
    }
    let filtered = cfg.filter.apply(&all);
    let prices = load_prices(&cfg.prices_dir, &filtered)?;
    let records: Vec<MetaorderRecord> =
        filtered.iter().filter(|r| prices.for_record(r).is_some()).cloned().collect();
    if records.is_empty() {
        bail!(hawkes_impact::Error::InsufficientData("no metaorders left after filtering and price lookup".into()));
    }
    let transform: ResponseTransform = cfg.rescale.transform;
    let mut out = Outputs::new();

    let curve = rescaled_average(&records, &prices, &cfg.rescale)?;
    out.csv("curve.csv", |w| curve.write_csv(w));
    out.text(
        "curve.svg",
        line_chart("Rescaled impact", "s", "impact", &[Series { label: "mean", x: &curve.s, y: &curve.mean }]),
    );
    let transient = transient_fit(&curve, cfg.transient_range);
    let decay = decay_loglog(&curve);
    if let Ok(d) = &decay {
        out.csv("decay_loglog.csv", |w| {
            writeln!(w, "log_s_minus_1,log_excess")?;
            for (x, y) in d.x.iter().zip(&d.y) {
                writeln!(w, "{x},{y}")?;
            }
            Ok(())
        });
    }

    let mut regressions = Vec::new();
    let mut traces = serde_json::Map::new();
    for &loss in &cfg.regression.losses {
        let fit = direct_regression(&records, &prices, &cfg.regression.variables, loss, transform, &cfg.regression.options)?;
        if loss == Loss::L2 {
            for &v in &cfg.regression.trace_variables {
                let along: Vec<f64> = records.iter().map(|r| v.of(r)).collect();
                match residual_trace(&fit, &along, cfg.regression.trace_buckets) {
                    Ok(trace) => {
                        out.csv(format!("trace_{}.csv", v.name()), |w| {
                            writeln!(w, "lower,upper,mean_value,mean_residual,stderr,count")?;
                            for p in &trace {
                                writeln!(w, "{},{},{},{},{},{}", p.lower, p.upper, p.mean_y, p.mean_residual, p.stderr, p.count)?;
                            }
                            Ok(())
                        });
                        traces.insert(v.name().into(), or_error(trace_slope(&trace)));
                    }
                    Err(e) => {
                        traces.insert(v.name().into(), json!({ "error": e.to_string() }));
                    }
                }
            }
        }
        regressions.push(fit);
    }
    out.csv("regressions.csv", |w| {
        let names: Vec<String> = cfg.regression.variables.iter().map(|v| format!("exponent_{}", v.name())).collect();
        writeln!(w, "loss,prefactor,{},loss_value,dropped,converged", names.join(","))?;
        for r in &regressions {
            let exps: Vec<String> = r.exponents.iter().map(f64::to_string).collect();
            let loss = serde_json::to_value(r.loss).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            writeln!(w, "{loss},{},{},{},{},{}", r.prefactor, exps.join(","), r.loss_value, r.dropped, r.converged)?;
        }
        Ok(())
    });

    for &v in &cfg.slices.variables {
        if let Ok(buckets) = quantile_slices(&records, &prices, |r| v.of(r), cfg.slices.buckets, transform) {
            out.csv(format!("slices_{}.csv", v.name()), |w| {
                writeln!(w, "lower,upper,mean_value,impact,count")?;
                for b in &buckets {
                    writeln!(w, "{},{},{},{},{}", b.lower, b.upper, b.mean_x, b.impact, b.count)?;
                }
                Ok(())
            });
        }
    }

    let bootstrap = cfg.bootstrap.as_ref().map(|opts| bootstrap_exponent(&records, &prices, opts, seed));
    if let Some(Ok(stats)) = &bootstrap {
        out.csv("bootstrap.csv", |w| {
            writeln!(w, "draw,exponent")?;
            for (i, e) in stats.exponents.iter().enumerate() {
                writeln!(w, "{i},{e}")?;
            }
            Ok(())
        });
    }
    let anticipation = cfg
        .anticipation
        .as_ref()
        .map(|a| anticipation_groups(&records, &prices, a.r0, a.t0, &a.options));
    if let Some(Ok(report)) = &anticipation {
        out.json("anticipation.json", report)?;
    }

    let summary = json!({
        "input_records": all.len(),
        "after_filter": filtered.len(),
        "with_prices": records.len(),
        "skipped_coverage": curve.skipped,
        "transient_fit": or_error(transient),
        "decay_dropped": decay.as_ref().map(|d| d.dropped).ok(),
        "trace_slopes": traces,
        "bootstrap": bootstrap.map(|b| or_error(b.map(|mut s| { s.exponents.clear(); s }))),
        "anticipation_error": anticipation.and_then(|a| a.err().map(|e| e.to_string())),
    });
    out.json("summary.json", &summary)?;
    let results: Vec<Value> = regressions
        .iter()
        .map(|r| {
            json!({
                "loss": r.loss, "prefactor": r.prefactor, "exponents": r.exponents, "variables": r.variables,
                "loss_value": r.loss_value, "dropped": r.dropped, "converged": r.converged, "sweeps": r.sweeps,
            })
        })
        .collect();
    out.json("regressions.json", &results)?;
    out.json(SIDECAR, &sidecar("estimate", seed, &cfg)?)?;
    Ok(out)
}
