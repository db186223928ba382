use rand::Rng;

use super::{check_exogenous, Event, EventStream, HawkesSpec, IntensityFn};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::stats::stream_rng as rng_for;

/// Tuning of the thinning loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Longest stretch over which one dominating rate is used. Defaults to
    /// `horizon / 256`.
    pub max_step: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { max_step: None }
    }
}

/// One path with stream index 0.
pub fn simulate(spec: &HawkesSpec, exogenous: &[Vec<IntensityFn>], seed: u64) -> Result<EventStream> {
    spec.validate()?;
    check_exogenous(exogenous, spec.dim())?;
    Ok(Simulator::new(spec, exogenous, SimOptions::default())?.run(rng_for(seed, 0)))
}

/// Path `path_index` of the family seeded by `seed`.
pub fn simulate_path(
    spec: &HawkesSpec,
    exogenous: &[Vec<IntensityFn>],
    seed: u64,
    path_index: u64,
    options: SimOptions,
) -> Result<EventStream> {
    spec.validate()?;
    check_exogenous(exogenous, spec.dim())?;
    Ok(Simulator::new(spec, exogenous, options)?.run(rng_for(seed, path_index)))
}


/// Exponential excitation `S·e^{−β(t − last)}` kept in O(1).
#[derive(Debug, Clone, Copy)]
struct Decaying {
    alpha: f64,
    beta: f64,
    level: f64,
    last: f64,
}

impl Decaying {
    fn at(&self, t: f64) -> f64 {
        self.level * (-self.beta * (t - self.last)).exp()
    }

    fn bump(&mut self, t: f64) {
        self.level = self.at(t) + self.alpha;
        self.last = t;
    }
}

/// Pre-validated spec, reusable across paths.
pub(crate) struct Simulator<'a> {
    spec: &'a HawkesSpec,
    exogenous: &'a [Vec<IntensityFn>],
    breakpoints: Vec<f64>,
    max_step: f64,
}

impl<'a> Simulator<'a> {
    pub(crate) fn new(spec: &'a HawkesSpec, exogenous: &'a [Vec<IntensityFn>], options: SimOptions) -> Result<Self> {
        let max_step = options.max_step.unwrap_or(spec.horizon / 256.0);
        if !(max_step > 0.0) {
            return Err(Error::param("max_step", "must be > 0"));
        }
        let mut breakpoints: Vec<f64> = spec
            .baseline
            .iter()
            .flat_map(|b| b.breakpoints())
            .chain(exogenous.iter().flatten().flat_map(|e| e.breakpoints()))
            .filter(|&t| t > 0.0 && t < spec.horizon)
            .collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(Self { spec, exogenous, breakpoints, max_step })
    }

    pub(crate) fn run(&self, mut rng: impl Rng) -> EventStream {
        let spec = self.spec;
        let d = spec.dim();
        let horizon = spec.horizon;
        let mut decaying: Vec<Vec<Option<Decaying>>> = spec
            .kernels
            .iter()
            .map(|row| {
                row.iter()
                    .map(|k| match k {
                        Some(Kernel::Exponential(e)) if e.alpha > 0.0 => {
                            Some(Decaying { alpha: e.alpha, beta: e.beta, level: 0.0, last: 0.0 })
                        }
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        let mut history: Vec<Vec<f64>> = vec![Vec::new(); d];
        let mut events = Vec::new();
        let mut rates = vec![0.0; d];

        let excitation = |i: usize, t: f64, decaying: &[Vec<Option<Decaying>>], history: &[Vec<f64>]| -> f64 {
            let mut total = 0.0;
            for j in 0..d {
                match (&spec.kernels[i][j], &decaying[i][j]) {
                    (_, Some(state)) => total += state.at(t),
                    (Some(Kernel::PowerLaw(k)), None) if k.alpha > 0.0 => {
                        total += history[j].iter().map(|&s| k.value(t - s)).sum::<f64>();
                    }
                    _ => {}
                }
            }
            total
        };

        let mut t = 0.0;
        let mut next_break = 0;
        while t < horizon {
            while next_break < self.breakpoints.len() && self.breakpoints[next_break] <= t {
                next_break += 1;
            }
            let mut block_end = (t + self.max_step).min(horizon);
            if let Some(&b) = self.breakpoints.get(next_break) {
                block_end = block_end.min(b);
            }
            let bound: f64 = (0..d)
                .map(|i| {
                    excitation(i, t, &decaying, &history)
                        + spec.baseline[i].upper_bound(t, block_end)
                        + self.exogenous[i].iter().map(|e| e.upper_bound(t, block_end)).sum::<f64>()
                })
                .sum();
            if bound <= 0.0 {
                t = block_end;
                continue;
            }
            let u: f64 = rng.random();
            let wait = -(1.0 - u).ln() / bound;
            if t + wait >= block_end {
                t = block_end;
                continue;
            }
            t += wait;
            let mut total = 0.0;
            for (i, rate) in rates.iter_mut().enumerate() {
                *rate = excitation(i, t, &decaying, &history)
                    + spec.baseline[i].value(t)
                    + self.exogenous[i].iter().map(|e| e.value(t)).sum::<f64>();
                total += *rate;
            }
            debug_assert!(total <= bound * (1.0 + 1e-9), "dominating rate violated: {total} > {bound}");
            let v: f64 = rng.random::<f64>() * bound;
            if v >= total {
                continue;
            }
            let mut acc = 0.0;
            let mut dim = d - 1;
            for (i, &rate) in rates.iter().enumerate() {
                acc += rate;
                if v < acc {
                    dim = i;
                    break;
                }
            }
            for row in decaying.iter_mut() {
                if let Some(state) = &mut row[dim] {
                    state.bump(t);
                }
            }
            history[dim].push(t);
            events.push(Event { time: t, dim });
        }
        EventStream { events, horizon, dims: d }
    }
}
