//! `him simulate`: one event stream, its price path, a Monte Carlo impact
//! curve next to the analytic one, and optionally a metaorder dataset.

use std::path::Path;

use anyhow::{ensure, Result};
use hawkes_impact::estimation::{write_metaorders, write_price_series, MetaorderRecord, PriceSeries, Side};
use hawkes_impact::hawkes_sim::{
    him_exogenous, monte_carlo_impact, price_path, simulate, simulate_path, HawkesSpec, SimOptions, DOWN, UP,
};
use hawkes_impact::him_model::{impact_curve_analytic, CurveConfig, HimSpec, TradingSchedule};
use hawkes_impact::kernels::DEFAULT_DT;
use hawkes_impact::stats::stream_rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linspace;
use crate::config::{sidecar, Invocation, ResolvePaths, SIDECAR};
use crate::output::Outputs;
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub spec: HimSpec,
    /// Defaults to twice the end of the schedule.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_paths")]
    pub n_paths: u64,
    #[serde(default = "default_points")]
    pub grid_points: usize,
    /// Grid step of the analytic reference curve.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
}

fn default_paths() -> u64 {
    1000
}

fn default_points() -> usize {
    101
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl ResolvePaths for SimulateConfig {}

/// Synthetic metaorders, each executed at a constant rate on its own day
/// with the price following a simulated path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n_metaorders: usize,
    /// Duration range in seconds.
    pub duration: (f64, f64),
    pub trading_rate: (f64, f64),
    pub daily_participation: (f64, f64),
    pub start_time: f64,
    pub price: f64,
    pub tick: f64,
    pub sigma: f64,
    pub spread: f64,
    pub n_child: u32,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_metaorders: 100,
            duration: (300.0, 1800.0),
            trading_rate: (0.03, 0.4),
            daily_participation: (0.001, 0.05),
            start_time: 36_000.0,
            price: 100.0,
            tick: 0.01,
            sigma: 0.02,
            spread: 0.0001,
            n_child: 20,
        }
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

// Dataset paths use streams above every Monte Carlo path index.
const DATASET_STREAM: u64 = 1 << 40;

/// Metaorders plus `(file name, price series)` pairs.
pub fn dataset(spec: &HimSpec, cfg: &DatasetConfig, seed: u64) -> Result<(Vec<MetaorderRecord>, Vec<(String, PriceSeries)>)> {
    ensure!(cfg.n_metaorders > 0, "dataset.n_metaorders must be >= 1");
    for (name, (lo, hi)) in [
        ("duration", cfg.duration),
        ("trading_rate", cfg.trading_rate),
        ("daily_participation", cfg.daily_participation),
    ] {
        ensure!(lo > 0.0 && lo <= hi, "dataset.{name} needs 0 < lo <= hi");
    }
    ensure!(cfg.price > 0.0 && cfg.tick > 0.0, "dataset price and tick must be > 0");
    let rows: Vec<Result<(MetaorderRecord, (String, PriceSeries))>> = (0..cfg.n_metaorders)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, DATASET_STREAM + 2 * i as u64);
            let duration = uniform(&mut rng, cfg.duration);
            let rate = uniform(&mut rng, cfg.trading_rate);
            let participation = uniform(&mut rng, cfg.daily_participation);
            let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
            let mut him = spec.clone();
            him.schedule = TradingSchedule::constant(0.0, duration, rate)?;
            let hawkes = HawkesSpec::from_him(&him, 2.0 * duration)?;
            let stream = simulate_path(
                &hawkes,
                &him_exogenous(&him),
                seed,
                DATASET_STREAM + 2 * i as u64 + 1,
                SimOptions::default(),
            )?;
            let path = price_path(&stream, UP, DOWN)?;
            let t0 = cfg.start_time;
            let mut times = vec![t0];
            let mut prices = vec![cfg.price];
            for (&t, &p) in path.times.iter().zip(&path.values) {
                times.push(t0 + t);
                prices.push(cfg.price + side.sign() * cfg.tick * p as f64);
            }
            times.push(t0 + 2.0 * duration);
            prices.push(*prices.last().unwrap());
            let volume = 1e6 * participation;
            let record = MetaorderRecord {
                id: format!("m{i:05}"),
                instrument: "SIM".into(),
                date: format!("day{i:05}"),
                t0,
                duration,
                side,
                volume,
                daily_volume: 1e6,
                window_volume: volume / rate,
                sigma: cfg.sigma,
                spread: cfg.spread,
                n_child: Some(cfg.n_child),
            };
            let file = format!("{}_{}.csv", record.instrument, record.date);
            Ok((record, (file, PriceSeries::new(times, prices)?)))
        })
        .collect();
    let rows: Vec<_> = rows.into_iter().collect::<Result<_>>()?;
    Ok(rows.into_iter().unzip())
}

pub fn run(inv: &Invocation) -> Result<Outputs> {
    let (seed, mut cfg): (u64, SimulateConfig) = inv.load("simulate")?;
    if let Some(dt) = inv.dt {
        cfg.dt = dt;
    }
    cfg.spec.validate()?;
    let horizon = *cfg.horizon.get_or_insert(2.0 * cfg.spec.schedule.end());
    ensure!(horizon > 0.0, "horizon must be > 0");
    ensure!(cfg.grid_points >= 2, "grid_points must be >= 2");
    let mut out = Outputs::new();

    let hawkes = HawkesSpec::from_him(&cfg.spec, horizon)?;
    let stream = simulate(&hawkes, &him_exogenous(&cfg.spec), seed)?;
    let path = price_path(&stream, UP, DOWN)?;
    out.csv("events.csv", |w| stream.write_csv(w));
    out.csv("price_path.csv", |w| {
        use std::io::Write;
        writeln!(w, "time,price")?;
        writeln!(w, "0,0")?;
        for (t, p) in path.times.iter().zip(&path.values) {
            writeln!(w, "{t},{p}")?;
        }
        Ok(())
    });

    let grid = linspace(horizon, cfg.grid_points);
    let mc = monte_carlo_impact(&cfg.spec, cfg.n_paths, &grid, seed)?;
    let analytic = impact_curve_analytic(&cfg.spec, &grid, &CurveConfig::with_dt(cfg.dt))?;
    out.csv("mc_curve.csv", |w| mc.write_csv(w));
    out.csv("analytic_curve.csv", |w| analytic.write_csv(w));
    out.text(
        "impact.svg",
        line_chart(
            "Mean impact",
            "t (s)",
            "price (ticks)",
            &[
                Series { label: "Monte Carlo", x: &mc.t, y: &mc.mean },
                Series { label: "analytic", x: &analytic.t, y: &analytic.eta },
            ],
        ),
    );

    if let Some(ds) = &cfg.dataset {
        let (records, series) = dataset(&cfg.spec, ds, seed)?;
        out.csv(Path::new("dataset").join("metaorders.csv"), |w| write_metaorders(w, &records));
        for (file, s) in &series {
            out.csv(Path::new("dataset").join("prices").join(file), |w| write_price_series(w, s));
        }
    }
    out.json(SIDECAR, &sidecar("simulate", seed, &cfg)?)?;
    Ok(out)
}
