use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::thinning::Simulator;
use super::{check_exogenous, him_exogenous, price_path, EventStream, HawkesSpec, IntensityFn, SimOptions, DOWN, UP};
use crate::error::{ensure_finite, Error, Result};
use crate::him_model::HimSpec;
use crate::stats::stream_rng as rng_for;

// Paths are summed sequentially inside fixed-size chunks and the chunks
// are combined in index order, so results do not depend on scheduling.
const CHUNK: u64 = 64;

/// Pathwise mean of an observable on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCurve {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: usize,
}

impl MonteCarloCurve {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,mean,stderr,n")?;
        for i in 0..self.t.len() {
            writeln!(w, "{},{},{},{}", self.t[i], self.mean[i], self.stderr[i], self.n)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonteCarloOptions {
    pub sim: SimOptions,
}

/// Averages `observe(path, t_grid)` over `n_paths` independent paths.
pub fn monte_carlo_mean<F>(
    spec: &HawkesSpec,
    exogenous: &[Vec<IntensityFn>],
    n_paths: u64,
    t_grid: &[f64],
    seed: u64,
    options: MonteCarloOptions,
    observe: F,
) -> Result<MonteCarloCurve>
where
    F: Fn(&EventStream, &[f64]) -> Vec<f64> + Sync,
{
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be >= 1"));
    }
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "must not be empty"));
    }
    for &t in t_grid {
        ensure_finite("t_grid", t)?;
    }
    spec.validate()?;
    check_exogenous(exogenous, spec.dim())?;
    let sim = Simulator::new(spec, exogenous, options.sim)?;
    let m = t_grid.len();
    let chunks = n_paths.div_ceil(CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0.0; m];
            let mut sq = vec![0.0; m];
            for path in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let stream = sim.run(rng_for(seed, path));
                let values = observe(&stream, t_grid);
                if values.len() != m {
                    return Err(Error::param("observe", "must return one value per grid time"));
                }
                for (k, v) in values.into_iter().enumerate() {
                    sum[k] += v;
                    sq[k] += v * v;
                }
            }
            Ok((sum, sq))
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; m];
    let mut sq = vec![0.0; m];
    for (s, q) in &partial {
        for k in 0..m {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let n = n_paths as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr = if n_paths > 1 {
        sq.iter()
            .zip(&mean)
            .map(|(q, mu)| ((q - n * mu * mu).max(0.0) / (n - 1.0) / n).sqrt())
            .collect()
    } else {
        vec![f64::NAN; m]
    };
    Ok(MonteCarloCurve { t: t_grid.to_vec(), mean, stderr, n: n_paths as usize })
}

/// Monte Carlo estimate of `η_t = E[P_t]` for an impulsive HIM.
pub fn monte_carlo_impact(him: &HimSpec, n_paths: u64, t_grid: &[f64], seed: u64) -> Result<MonteCarloCurve> {
    let horizon = t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(horizon > 0.0) {
        return Err(Error::param("t_grid", "needs a positive time"));
    }
    let spec = HawkesSpec::from_him(him, horizon)?;
    let exo = him_exogenous(him);
    monte_carlo_mean(&spec, &exo, n_paths, t_grid, seed, MonteCarloOptions::default(), |stream, grid| {
        let path = price_path(stream, UP, DOWN).expect("two-dimensional stream");
        grid.iter().map(|&t| path.value_at(t) as f64).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::him_model::{ImpactFunction, TradingSchedule};
    use crate::kernels::ExponentialKernel;

    fn him(c: f64, a: f64) -> HimSpec {
        HimSpec::new(
            1.0,
            ExponentialKernel::new(0.5, 1.0).unwrap(),
            c,
            ImpactFunction::Power { a, p: 1.0 },
            TradingSchedule::constant(0.0, 10.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn no_metaorder_is_flat() {
        let t = [5.0, 10.0, 20.0];
        let c = monte_carlo_impact(&him(0.0, 0.0), 2000, &t, 4).unwrap();
        for k in 0..t.len() {
            assert!(c.mean[k].abs() < 3.5 * c.stderr[k], "{c:?}");
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let spec = him(0.5, 0.3);
        let t = [5.0, 15.0];
        let a = monte_carlo_impact(&spec, 300, &t, 21).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| monte_carlo_impact(&spec, 300, &t, 21).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn doubling_f_doubles_impact() {
        let t = [10.0, 30.0];
        let one = monte_carlo_impact(&him(0.5, 0.5), 4000, &t, 2).unwrap();
        let two = monte_carlo_impact(&him(0.5, 1.0), 4000, &t, 3).unwrap();
        for k in 0..t.len() {
            let diff = two.mean[k] - 2.0 * one.mean[k];
            let se = (two.stderr[k].powi(2) + 4.0 * one.stderr[k].powi(2)).sqrt();
            assert!(diff.abs() < 3.5 * se, "{k}: {diff} vs {se}");
        }
    }

    #[test]
    fn zero_paths_rejected() {
        assert!(monte_carlo_impact(&him(0.5, 1.0), 0, &[1.0], 0).is_err());
    }
}
