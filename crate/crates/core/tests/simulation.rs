use hawkes_impact::daily::{capm_decompose, synthetic_cohort, CohortConfig};
use hawkes_impact::estimation::{MetaorderRecord, RecordFilter, Side};
use hawkes_impact::hawkes_sim::monte_carlo_impact;
use hawkes_impact::him_model::{HimSpec, ImpactFunction, TradingSchedule};
use hawkes_impact::kernels::ExponentialKernel;
use proptest::prelude::*;

fn spec(f: ImpactFunction) -> HimSpec {
    HimSpec::new(
        1.0,
        ExponentialKernel::new(0.5, 1.0).unwrap(),
        0.5,
        f,
        TradingSchedule::constant(0.0, 10.0, 0.5).unwrap(),
    )
    .unwrap()
}

#[test]
fn no_trading_impact_means_no_drift() {
    let grid: Vec<f64> = (0..=8).map(|k| 5.0 * k as f64).collect();
    let mc = monte_carlo_impact(&spec(ImpactFunction::Power { a: 0.0, p: 1.0 }), 4000, &grid, 1).unwrap();
    for (m, se) in mc.mean.iter().zip(&mc.stderr) {
        assert!(m.abs() <= 4.0 * se.max(1e-12), "mean {m} se {se}");
    }
}

#[test]
fn stderr_shrinks_with_path_count() {
    let grid = [20.0];
    let small = monte_carlo_impact(&spec(ImpactFunction::Identity), 2000, &grid, 2).unwrap();
    let large = monte_carlo_impact(&spec(ImpactFunction::Identity), 8000, &grid, 3).unwrap();
    let ratio = large.stderr[0] / small.stderr[0];
    assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn cohort_betas_are_recovered() {
    let config = CohortConfig { n_records: 300, ..CohortConfig::default() };
    let (data, truth) = synthetic_cohort(&config, 5).unwrap();
    let (records, _) = data.records().unwrap();
    assert_eq!(records.len(), 300);
    let errors: Vec<f64> = records
        .iter()
        .map(|r| capm_decompose(r).unwrap().beta - truth[&r.instrument])
        .collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let rms = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    assert!(mean.abs() < 0.02, "mean error {mean}");
    assert!(rms < 0.15, "rms error {rms}");
}

fn record(duration: f64, volume: f64, window_volume: f64, n_child: Option<u32>, t0: f64) -> MetaorderRecord {
    MetaorderRecord {
        id: "m".into(),
        instrument: "X".into(),
        date: "d".into(),
        t0,
        duration,
        side: Side::Buy,
        volume,
        daily_volume: 1e6,
        window_volume,
        sigma: 0.02,
        spread: 1e-4,
        n_child,
    }
}

proptest! {
    #[test]
    fn filter_matches_brute_force(
        rows in prop::collection::vec(
            (1.0f64..4000.0, 100.0f64..50_000.0, 1.0f64..10.0, prop::option::of(0u32..100), 30_000.0f64..55_000.0),
            0..40,
        ),
        min_child in prop::option::of(0u32..100),
        min_duration in prop::option::of(0.0f64..3000.0),
        rate_hi in prop::option::of(0.05f64..1.0),
        close in prop::option::of(40_000.0f64..60_000.0),
    ) {
        let records: Vec<_> = rows
            .iter()
            .map(|&(d, v, mult, n, t0)| record(d, v, v * mult, n, t0))
            .collect();
        let filter = RecordFilter {
            min_child_orders: min_child,
            min_duration,
            trading_rate: rate_hi.map(|hi| (0.0, hi)),
            daily_participation: None,
            close_time: close,
        };
        let kept = filter.apply(&records);
        let expected: Vec<_> = records
            .iter()
            .filter(|r| {
                let child_ok = match (min_child, r.n_child) {
                    (Some(m), Some(n)) => n >= m,
                    _ => true,
                };
                let duration_ok = min_duration.map_or(true, |m| r.duration > m);
                let rate_ok = rate_hi.map_or(true, |hi| r.volume / r.window_volume <= hi);
                let close_ok = close.map_or(true, |c| r.t0 + 2.0 * r.duration < c);
                child_ok && duration_ok && rate_ok && close_ok
            })
            .cloned()
            .collect();
        prop_assert_eq!(kept, expected);
    }
}
