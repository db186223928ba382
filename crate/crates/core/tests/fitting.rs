use hawkes_impact::estimation::ImpactCurve;
use hawkes_impact::him_model::{impact_curve_analytic, CurveConfig, HimSpec, ImpactFunction, TradingSchedule};
use hawkes_impact::kernels::PowerLawKernel;
use hawkes_impact::model_fit::{fit, objective, FitConfig, FitParams, FitProblem};
use hawkes_impact::stats::stream_rng;
use rand::Rng;

const CONTRARIAN: [f64; 2] = [0.6, 0.85];
const DURATIONS: [f64; 2] = [600.0, 1800.0];

/// Model curves on `s = k/100`, each point scaled by `1 + noise·u`, `u ~ U(-1, 1)`.
fn problem(noise: f64, seed: u64) -> FitProblem {
    let mut rng = stream_rng(seed, 0);
    let s: Vec<f64> = (0..=200).map(|k| k as f64 / 100.0).collect();
    let curves = CONTRARIAN
        .iter()
        .zip(&DURATIONS)
        .map(|(&c, &d)| {
            let spec = HimSpec::new(
                1.0,
                PowerLawKernel::with_l1_norm(0.8456, -1.5, 15.0).unwrap(),
                c,
                ImpactFunction::Identity,
                TradingSchedule::constant(0.0, d, 0.1).unwrap(),
            )
            .unwrap();
            let t: Vec<f64> = s.iter().map(|x| x * d).collect();
            let eta = impact_curve_analytic(&spec, &t, &CurveConfig::with_dt(0.1)).unwrap().eta;
            let noisy = eta.iter().map(|v| v * (1.0 + noise * rng.random_range(-1.0..1.0))).collect();
            ImpactCurve::from_values(s.clone(), noisy).unwrap()
        })
        .collect();
    let mut problem = FitProblem::new(curves, DURATIONS.to_vec()).unwrap();
    problem.dt = 0.05;
    problem
}

fn quick() -> FitConfig {
    FitConfig { starts: Some(vec![(0.7, -1.3), (0.9, -1.7)]), ..FitConfig::default() }
}

#[test]
fn noisy_curves_still_recover_contrarian_fractions() {
    let result = fit(&problem(0.01, 1), &quick()).unwrap();
    for (got, want) in result.contrarian.iter().zip(CONTRARIAN) {
        assert!((got - want).abs() < 0.15, "C {got} vs {want}");
    }
    assert!((result.b + 1.5).abs() < 0.3, "b {}", result.b);
}

#[test]
fn optimum_beats_random_draws() {
    let problem = problem(0.0, 2);
    let result = fit(&problem, &quick()).unwrap();
    let mut rng = stream_rng(3, 0);
    for _ in 0..32 {
        let params = FitParams {
            norm: rng.random_range(problem.norm_bounds.0..problem.norm_bounds.1),
            b: rng.random_range(problem.b_bounds.0..problem.b_bounds.1),
            contrarian: (0..CONTRARIAN.len()).map(|_| rng.random_range(0.0..problem.c_max)).collect(),
        };
        assert!(result.objective <= objective(&params, &problem).unwrap());
    }
}
