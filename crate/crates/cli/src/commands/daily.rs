//! `him daily`: betas, raw and debiased post-execution profiles, and the
//! autocorrelation of daily metaorder flow.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hawkes_impact::daily::{
    capm_decompose, day_zero_responses, debias_profiles, fit_sqrt_model, participation_autocorr, postexec_profile,
    profile_bootstrap, read_closes, read_daily_metaorders, read_index_map, record_profile, synthetic_cohort,
    write_closes, write_daily_metaorders, write_index_map, CohortConfig, DailyDataset, RecordProfile, FOLLOW_DAYS,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{resolve, sidecar, Invocation, ResolvePaths, SIDECAR};
use crate::output::Outputs;
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DailyInputs {
    /// `instrument,date,close`.
    pub closes: PathBuf,
    /// `index,date,close`.
    pub index_closes: PathBuf,
    /// `instrument,index`.
    pub index_map: PathBuf,
    /// `id,instrument,date,side,participation`.
    pub metaorders: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DailyConfig {
    /// Data files; exactly one of `inputs` and `synthetic` is required.
    #[serde(default)]
    pub inputs: Option<DailyInputs>,
    /// Generates a cohort from the seed and also writes it out.
    #[serde(default)]
    pub synthetic: Option<CohortConfig>,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    #[serde(default = "default_boot")]
    pub n_boot: usize,
    #[serde(default = "default_levels")]
    pub levels: (f64, f64),
    #[serde(default = "default_lag")]
    pub max_lag: usize,
}

fn default_exponent() -> f64 {
    0.5
}

fn default_boot() -> usize {
    500
}

fn default_levels() -> (f64, f64) {
    (0.025, 0.975)
}

fn default_lag() -> usize {
    FOLLOW_DAYS
}

impl ResolvePaths for DailyConfig {
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(i) = &mut self.inputs {
            for p in [&mut i.closes, &mut i.index_closes, &mut i.index_map, &mut i.metaorders] {
                resolve(base, p);
            }
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn load(inputs: &DailyInputs) -> Result<DailyDataset> {
    let ctx = |p: &Path| format!("reading {}", p.display());
    Ok(DailyDataset {
        closes: read_closes(open(&inputs.closes)?, "instrument").with_context(|| ctx(&inputs.closes))?,
        index_closes: read_closes(open(&inputs.index_closes)?, "index").with_context(|| ctx(&inputs.index_closes))?,
        index_map: read_index_map(open(&inputs.index_map)?).with_context(|| ctx(&inputs.index_map))?,
        metaorders: read_daily_metaorders(open(&inputs.metaorders)?).with_context(|| ctx(&inputs.metaorders))?,
    })
}

fn profile_csv(out: &mut Outputs, name: &str, profiles: &[RecordProfile], cfg: &DailyConfig, seed: u64) -> Result<Vec<f64>> {
    let profile = postexec_profile(profiles)?;
    out.csv(format!("profile_{name}.csv"), |w| profile.write_csv(w));
    let bands = profile_bootstrap(profiles, cfg.n_boot, cfg.levels, seed)?;
    out.csv(format!("bands_{name}.csv"), |w| bands.write_csv(w));
    Ok(profile.idiosyncratic)
}

pub fn run(inv: &Invocation) -> Result<Outputs> {
    let (seed, cfg): (u64, DailyConfig) = inv.load("daily")?;
    let mut out = Outputs::new();
    let (data, truth) = match (&cfg.inputs, &cfg.synthetic) {
        (Some(inputs), None) => (load(inputs)?, None),
        (None, Some(cohort)) => {
            let (data, betas) = synthetic_cohort(cohort, seed)?;
            out.csv("data/closes.csv", |w| write_closes(w, &data.closes, "instrument"));
            out.csv("data/index_closes.csv", |w| write_closes(w, &data.index_closes, "index"));
            out.csv("data/index_map.csv", |w| write_index_map(w, &data.index_map));
            out.csv("data/metaorders.csv", |w| write_daily_metaorders(w, &data.metaorders));
            (data, Some(betas))
        }
        _ => bail!("set exactly one of `inputs` and `synthetic`"),
    };
    let (records, skipped) = data.records()?;
    if records.is_empty() {
        bail!(hawkes_impact::Error::InsufficientData("no metaorder has a full 42-day window".into()));
    }

    let decompositions = records.iter().map(capm_decompose).collect::<hawkes_impact::Result<Vec<_>>>()?;
    out.csv("betas.csv", |w| {
        writeln!(w, "id,instrument,beta{}", if truth.is_some() { ",true_beta" } else { "" })?;
        for (r, d) in records.iter().zip(&decompositions) {
            match truth.as_ref().and_then(|t| t.get(&r.instrument)) {
                Some(b) => writeln!(w, "{},{},{},{b}", r.id, r.instrument, d.beta)?,
                None => writeln!(w, "{},{},{}", r.id, r.instrument, d.beta)?,
            }
        }
        Ok(())
    });

    let raw: Vec<RecordProfile> = records.iter().map(record_profile).collect::<hawkes_impact::Result<_>>()?;
    let (participation, responses) = day_zero_responses(&records)?;
    let model = fit_sqrt_model(&participation, &responses, cfg.exponent)?;
    let debiased = debias_profiles(&records, &model)?;
    let raw_idio = profile_csv(&mut out, "raw", &raw, &cfg, seed)?;
    let debiased_idio = profile_csv(&mut out, "debiased", &debiased, &cfg, seed)?;
    let days: Vec<f64> = (0..raw_idio.len()).map(|d| d as f64).collect();
    out.text(
        "profile.svg",
        line_chart(
            "Idiosyncratic post-execution profile",
            "days after execution",
            "bp",
            &[
                Series { label: "raw", x: &days, y: &raw_idio },
                Series { label: "debiased", x: &days, y: &debiased_idio },
            ],
        ),
    );

    let flows = data.flow_series();
    let autocorr = participation_autocorr(&flows, cfg.max_lag, cfg.n_boot, seed);
    match &autocorr {
        Ok(ac) => out.csv("autocorr.csv", |w| ac.write_csv(w)),
        Err(e) => eprintln!("warning: autocorrelation skipped: {e}"),
    }
    out.json(
        "summary.json",
        &json!({
            "records": records.len(),
            "skipped": skipped,
            "sqrt_model": model,
            "autocorr_error": autocorr.err().map(|e| e.to_string()),
        }),
    )?;
    out.json(SIDECAR, &sidecar("daily", seed, &cfg)?)?;
    Ok(out)
}
