//! Daily-scale post-execution analysis.
//!
//! Each metaorder executed on day `D` gets a window of 42 closes
//! (`D−21 ..= D+20`) for its stock and its index. Stock log-returns are
//! split into a market part `β·ΔlogI` and an idiosyncratic residual, then
//! accumulated relative to the `D−1` close and signed by the metaorder side.
//! Averages are in basis points.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::estimation::data::{column_index, csv_error, parse_field};
use crate::estimation::Side;
use crate::stats::{mean, quantile_sorted, std_error, stream_rng};

/// Closes before the execution day (the first one only anchors a return).
pub const LOOKBACK_DAYS: usize = 21;
/// Days after the execution day.
pub const FOLLOW_DAYS: usize = 20;
pub const WINDOW_CLOSES: usize = LOOKBACK_DAYS + 1 + FOLLOW_DAYS;
pub const WINDOW_RETURNS: usize = WINDOW_CLOSES - 1;
/// Profile offsets `0..=FOLLOW_DAYS`.
pub const PROFILE_LEN: usize = FOLLOW_DAYS + 1;

const BASIS_POINTS: f64 = 1e4;
// Index of the execution-day return within the window returns.
const DAY_ZERO_RETURN: usize = LOOKBACK_DAYS - 1;

/// A metaorder with its close-price window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub id: String,
    pub instrument: String,
    pub date: String,
    pub side: Side,
    /// Daily participation `R`.
    pub participation: f64,
    /// Stock closes `D−21 ..= D+20`.
    pub closes: Vec<f64>,
    /// Index closes on the same days.
    pub index_closes: Vec<f64>,
    /// Net signed participation of other same-instrument metaorders on
    /// `D+1 ..= D+20`.
    pub followup: Vec<f64>,
}

impl DailyRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, xs) in [("closes", &self.closes), ("index_closes", &self.index_closes)] {
            if xs.len() != WINDOW_CLOSES {
                return Err(Error::InsufficientData(format!(
                    "{}: {name} has {} values, need {WINDOW_CLOSES}",
                    self.id,
                    xs.len()
                )));
            }
            if xs.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::NonPositive(format!("{}: {name}", self.id)));
            }
        }
        ensure_finite("participation", self.participation)?;
        if self.participation < 0.0 {
            return Err(Error::param("participation", format!("{}: must be >= 0", self.id)));
        }
        if self.followup.len() != FOLLOW_DAYS {
            return Err(Error::param("followup", format!("{}: need {FOLLOW_DAYS} values", self.id)));
        }
        for &f in &self.followup {
            ensure_finite("followup", f)?;
        }
        Ok(())
    }
}

fn log_returns(closes: &[f64]) -> Vec<f64> {
    closes.windows(2).map(|w| w[1].ln() - w[0].ln()).collect()
}

/// Market beta and idiosyncratic residuals of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub beta: f64,
    pub stock_returns: Vec<f64>,
    pub index_returns: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Least squares (no intercept) of the 41 stock log-returns on the index
/// log-returns.
pub fn capm_decompose(record: &DailyRecord) -> Result<Decomposition> {
    record.validate()?;
    let stock = log_returns(&record.closes);
    let index = log_returns(&record.index_closes);
    let sxx: f64 = index.iter().map(|x| x * x).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate(format!("{}: index returns have zero variance", record.id)));
    }
    let beta = index.iter().zip(&stock).map(|(x, y)| x * y).sum::<f64>() / sxx;
    let residuals = stock.iter().zip(&index).map(|(y, x)| y - beta * x).collect();
    Ok(Decomposition { beta, stock_returns: stock, index_returns: index, residuals })
}

/// Side-signed cumulative components of one record, in basis points
/// relative to the `D−1` close, for offsets `0..=20`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordProfile {
    pub systematic: Vec<f64>,
    pub idiosyncratic: Vec<f64>,
    pub total: Vec<f64>,
}

impl RecordProfile {
    pub fn new(record: &DailyRecord, decomposition: &Decomposition) -> Self {
        let sign = record.side.sign() * BASIS_POINTS;
        let mut systematic = Vec::with_capacity(PROFILE_LEN);
        let mut idiosyncratic = Vec::with_capacity(PROFILE_LEN);
        let mut total = Vec::with_capacity(PROFILE_LEN);
        let (mut sys, mut idio) = (0.0, 0.0);
        for d in 0..PROFILE_LEN {
            let j = DAY_ZERO_RETURN + d;
            sys += decomposition.beta * decomposition.index_returns[j];
            idio += decomposition.residuals[j];
            systematic.push(sign * sys);
            idiosyncratic.push(sign * idio);
            total.push(sign * (sys + idio));
        }
        Self { systematic, idiosyncratic, total }
    }
}

pub fn record_profile(record: &DailyRecord) -> Result<RecordProfile> {
    Ok(RecordProfile::new(record, &capm_decompose(record)?))
}

/// Average post-execution profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostExecProfile {
    pub day_offset: Vec<usize>,
    pub systematic: Vec<f64>,
    pub idiosyncratic: Vec<f64>,
    pub total: Vec<f64>,
    pub systematic_se: Vec<f64>,
    pub idiosyncratic_se: Vec<f64>,
    pub total_se: Vec<f64>,
    pub n: usize,
}

impl PostExecProfile {
    /// `day_offset,systematic_bp,idiosyncratic_bp,total_bp`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "day_offset,systematic_bp,idiosyncratic_bp,total_bp")?;
        for d in 0..self.day_offset.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.day_offset[d], self.systematic[d], self.idiosyncratic[d], self.total[d]
            )?;
        }
        Ok(())
    }
}

fn column(profiles: &[RecordProfile], d: usize, pick: fn(&RecordProfile) -> &Vec<f64>) -> Vec<f64> {
    profiles.iter().map(|p| pick(p)[d]).collect()
}

const COMPONENTS: [fn(&RecordProfile) -> &Vec<f64>; 3] = [|p| &p.systematic, |p| &p.idiosyncratic, |p| &p.total];

/// Pointwise mean (and standard error) over records.
pub fn postexec_profile(profiles: &[RecordProfile]) -> Result<PostExecProfile> {
    if profiles.is_empty() {
        return Err(Error::InsufficientData("no records for the profile".into()));
    }
    let mut means = [vec![], vec![], vec![]];
    let mut ses = [vec![], vec![], vec![]];
    for d in 0..PROFILE_LEN {
        for (c, pick) in COMPONENTS.iter().enumerate() {
            let xs = column(profiles, d, *pick);
            means[c].push(mean(&xs));
            ses[c].push(if xs.len() > 1 { std_error(&xs) } else { f64::NAN });
        }
    }
    let [systematic, idiosyncratic, total] = means;
    let [systematic_se, idiosyncratic_se, total_se] = ses;
    Ok(PostExecProfile {
        day_offset: (0..PROFILE_LEN).collect(),
        systematic,
        idiosyncratic,
        total,
        systematic_se,
        idiosyncratic_se,
        total_se,
        n: profiles.len(),
    })
}

/// Percentile bootstrap band of the mean profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBands {
    pub levels: (f64, f64),
    pub systematic: (Vec<f64>, Vec<f64>),
    pub idiosyncratic: (Vec<f64>, Vec<f64>),
    pub total: (Vec<f64>, Vec<f64>),
}

impl ProfileBands {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "day_offset,systematic_lo,systematic_hi,idiosyncratic_lo,idiosyncratic_hi,total_lo,total_hi"
        )?;
        for d in 0..self.total.0.len() {
            writeln!(
                w,
                "{d},{},{},{},{},{},{}",
                self.systematic.0[d],
                self.systematic.1[d],
                self.idiosyncratic.0[d],
                self.idiosyncratic.1[d],
                self.total.0[d],
                self.total.1[d]
            )?;
        }
        Ok(())
    }
}

/// Resamples records with replacement `n_boot` times.
pub fn profile_bootstrap(profiles: &[RecordProfile], n_boot: usize, levels: (f64, f64), seed: u64) -> Result<ProfileBands> {
    if profiles.len() < 2 {
        return Err(Error::InsufficientData("bootstrap needs at least two records".into()));
    }
    if n_boot < 2 {
        return Err(Error::param("n_boot", "must be >= 2"));
    }
    if !(0.0 <= levels.0 && levels.0 < levels.1 && levels.1 <= 1.0) {
        return Err(Error::param("levels", "need 0 <= lo < hi <= 1"));
    }
    let n = profiles.len();
    let draws: Vec<[Vec<f64>; 3]> = (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let mut sums = [vec![0.0; PROFILE_LEN], vec![0.0; PROFILE_LEN], vec![0.0; PROFILE_LEN]];
            for _ in 0..n {
                let p = &profiles[rng.random_range(0..n)];
                for (c, pick) in COMPONENTS.iter().enumerate() {
                    for (s, v) in sums[c].iter_mut().zip(pick(p)) {
                        *s += v;
                    }
                }
            }
            sums.map(|s| s.into_iter().map(|x| x / n as f64).collect())
        })
        .collect();
    let band = |c: usize| -> (Vec<f64>, Vec<f64>) {
        (0..PROFILE_LEN)
            .map(|d| {
                let mut xs: Vec<f64> = draws.iter().map(|dr| dr[c][d]).collect();
                xs.sort_by(f64::total_cmp);
                (quantile_sorted(&xs, levels.0), quantile_sorted(&xs, levels.1))
            })
            .unzip()
    };
    Ok(ProfileBands { levels, systematic: band(0), idiosyncratic: band(1), total: band(2) })
}

/// Temporary impact `a·|R|^p` of a day's net participation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqrtModel {
    pub coefficient: f64,
    pub exponent: f64,
}

impl SqrtModel {
    pub fn new(coefficient: f64, exponent: f64) -> Result<Self> {
        let m = Self { coefficient, exponent };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("coefficient", self.coefficient)?;
        if self.coefficient < 0.0 {
            return Err(Error::param("coefficient", "must be >= 0"));
        }
        check_exponent(self.exponent)
    }

    /// Signed impact of a net signed participation.
    pub fn impact(&self, net: f64) -> f64 {
        net.signum() * self.coefficient * net.abs().powf(self.exponent)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(0.4..=0.7).contains(&p) {
        return Err(Error::param("exponent", "must lie in [0.4, 0.7]"));
    }
    Ok(())
}

/// Closed-form least squares of `y = a·R^p`.
pub fn fit_sqrt_model(participations: &[f64], responses: &[f64], exponent: f64) -> Result<SqrtModel> {
    check_exponent(exponent)?;
    if participations.len() != responses.len() {
        return Err(Error::param("responses", "one response per participation"));
    }
    let (mut syz, mut szz) = (0.0, 0.0);
    for (&r, &y) in participations.iter().zip(responses) {
        ensure_finite("participation", r)?;
        ensure_finite("response", y)?;
        if r < 0.0 {
            return Err(Error::param("participation", "must be >= 0"));
        }
        let z = r.powf(exponent);
        syz += y * z;
        szz += z * z;
    }
    if !(szz > 0.0) {
        return Err(Error::Degenerate("all participations are zero".into()));
    }
    Ok(SqrtModel { coefficient: (syz / szz).max(0.0), exponent })
}

/// `(R, ε·idiosyncratic day-0 log-return)` for every record.
pub fn day_zero_responses(records: &[DailyRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<(f64, f64)> = records
        .par_iter()
        .map(|r| Ok((r.participation, r.side.sign() * capm_decompose(r)?.residuals[DAY_ZERO_RETURN])))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().unzip())
}

/// Removes the temporary impact of each follow-up day's net flow from the
/// idiosyncratic and total components.
pub fn debias_profile(record: &DailyRecord, profile: &RecordProfile, model: &SqrtModel) -> RecordProfile {
    let sign = record.side.sign() * BASIS_POINTS;
    let mut out = profile.clone();
    for (k, &net) in record.followup.iter().enumerate() {
        let shift = sign * model.impact(net);
        out.idiosyncratic[k + 1] -= shift;
        out.total[k + 1] -= shift;
    }
    out
}

pub fn debias_profiles(records: &[DailyRecord], model: &SqrtModel) -> Result<Vec<RecordProfile>> {
    model.validate()?;
    records
        .par_iter()
        .map(|r| Ok(debias_profile(r, &record_profile(r)?, model)))
        .collect()
}

/// Lagged autocorrelation with bootstrap quartiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrCurve {
    pub lags: Vec<usize>,
    pub estimate: Vec<f64>,
    pub q25: Vec<f64>,
    pub q50: Vec<f64>,
    pub q75: Vec<f64>,
}

impl AutocorrCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lag,estimate,q25,q50,q75")?;
        for i in 0..self.lags.len() {
            writeln!(w, "{},{},{},{},{}", self.lags[i], self.estimate[i], self.q25[i], self.q50[i], self.q75[i])?;
        }
        Ok(())
    }
}

/// Pooled autocorrelation of demeaned series at lags `1..=max_lag`.
fn pooled_autocorr(series: &[&[f64]], max_lag: usize) -> Option<Vec<f64>> {
    let mut cov = vec![0.0; max_lag];
    let mut var = 0.0;
    for xs in series {
        let m = mean(xs);
        let c: Vec<f64> = xs.iter().map(|x| x - m).collect();
        var += c.iter().map(|x| x * x).sum::<f64>();
        for (lag, acc) in cov.iter_mut().enumerate() {
            let lag = lag + 1;
            *acc += c.iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    (var > 0.0).then(|| cov.into_iter().map(|c| c / var).collect())
}

/// Autocorrelation of daily net signed participation, one series per
/// instrument. Quartiles come from resampling instruments.
pub fn participation_autocorr(series: &[Vec<f64>], max_lag: usize, n_boot: usize, seed: u64) -> Result<AutocorrCurve> {
    if series.is_empty() || max_lag == 0 {
        return Err(Error::InsufficientData("need at least one series and one lag".into()));
    }
    for xs in series {
        if xs.len() <= max_lag {
            return Err(Error::InsufficientData(format!("series of length {} for max lag {max_lag}", xs.len())));
        }
        for &x in xs {
            ensure_finite("participation", x)?;
        }
    }
    if n_boot == 0 {
        return Err(Error::param("n_boot", "must be >= 1"));
    }
    let all: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
    let estimate = pooled_autocorr(&all, max_lag).ok_or_else(|| Error::Degenerate("constant series".into()))?;
    let n = series.len();
    let draws: Vec<Vec<f64>> = (0..n_boot as u64)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = stream_rng(seed, b);
            let pick: Vec<&[f64]> = (0..n).map(|_| all[rng.random_range(0..n)]).collect();
            pooled_autocorr(&pick, max_lag)
        })
        .collect();
    if draws.is_empty() {
        return Err(Error::Degenerate("every bootstrap draw was constant".into()));
    }
    let mut q = [vec![], vec![], vec![]];
    for lag in 0..max_lag {
        let mut xs: Vec<f64> = draws.iter().map(|d| d[lag]).collect();
        xs.sort_by(f64::total_cmp);
        for (k, level) in [0.25, 0.5, 0.75].into_iter().enumerate() {
            q[k].push(quantile_sorted(&xs, level));
        }
    }
    let [q25, q50, q75] = q;
    Ok(AutocorrCurve { lags: (1..=max_lag).collect(), estimate, q25, q50, q75 })
}

/// One metaorder in the daily table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyMetaorder {
    pub id: String,
    pub instrument: String,
    pub date: String,
    pub side: Side,
    pub participation: f64,
}

/// Close series keyed by name, each sorted by date.
pub type CloseTable = BTreeMap<String, Vec<(String, f64)>>;

/// Inputs of the daily pipeline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DailyDataset {
    pub closes: CloseTable,
    pub index_closes: CloseTable,
    /// Instrument to index name.
    pub index_map: BTreeMap<String, String>,
    pub metaorders: Vec<DailyMetaorder>,
}

impl DailyDataset {
    /// Net signed participation per instrument and date.
    fn net_flow(&self) -> BTreeMap<(&str, &str), f64> {
        let mut flow = BTreeMap::new();
        for m in &self.metaorders {
            *flow.entry((m.instrument.as_str(), m.date.as_str())).or_insert(0.0) += m.side.sign() * m.participation;
        }
        flow
    }

    /// Records with a full window; the second value counts those skipped.
    pub fn records(&self) -> Result<(Vec<DailyRecord>, usize)> {
        let flow = self.net_flow();
        let mut out = Vec::new();
        let mut skipped = 0;
        for m in &self.metaorders {
            match self.window(m, &flow)? {
                Some(r) => out.push(r),
                None => skipped += 1,
            }
        }
        Ok((out, skipped))
    }

    fn window(&self, m: &DailyMetaorder, flow: &BTreeMap<(&str, &str), f64>) -> Result<Option<DailyRecord>> {
        let Some(series) = self.closes.get(&m.instrument) else { return Ok(None) };
        let Some(index_name) = self.index_map.get(&m.instrument) else { return Ok(None) };
        let Some(index) = self.index_closes.get(index_name) else { return Ok(None) };
        let Ok(pos) = series.binary_search_by(|(d, _)| d.as_str().cmp(&m.date)) else { return Ok(None) };
        if pos < LOOKBACK_DAYS || pos + FOLLOW_DAYS >= series.len() {
            return Ok(None);
        }
        let days = &series[pos - LOOKBACK_DAYS..=pos + FOLLOW_DAYS];
        let mut index_closes = Vec::with_capacity(WINDOW_CLOSES);
        for (date, _) in days {
            match index.binary_search_by(|(d, _)| d.cmp(date)) {
                Ok(i) => index_closes.push(index[i].1),
                Err(_) => return Ok(None),
            }
        }
        let followup = days[LOOKBACK_DAYS + 1..]
            .iter()
            .map(|(d, _)| flow.get(&(m.instrument.as_str(), d.as_str())).copied().unwrap_or(0.0))
            .collect();
        let record = DailyRecord {
            id: m.id.clone(),
            instrument: m.instrument.clone(),
            date: m.date.clone(),
            side: m.side,
            participation: m.participation,
            closes: days.iter().map(|(_, p)| *p).collect(),
            index_closes,
            followup,
        };
        record.validate()?;
        Ok(Some(record))
    }

    /// Net signed participation of each instrument over its trading days.
    pub fn flow_series(&self) -> Vec<Vec<f64>> {
        let flow = self.net_flow();
        self.closes
            .iter()
            .map(|(name, days)| {
                days.iter()
                    .map(|(d, _)| flow.get(&(name.as_str(), d.as_str())).copied().unwrap_or(0.0))
                    .collect()
            })
            .collect()
    }
}

/// Reads `name,date,close` with `name` the given key column.
pub fn read_closes(reader: impl Read, key: &str) -> Result<CloseTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (ki, di, ci) = (column_index(&headers, key)?, column_index(&headers, "date")?, column_index(&headers, "close")?);
    let mut table = CloseTable::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let close = parse_field(&row, ci, "close", k + 2)?;
        if !(close > 0.0) {
            return Err(Error::NonPositive(format!("close on line {}", k + 2)));
        }
        table
            .entry(row.get(ki).unwrap_or("").to_string())
            .or_default()
            .push((row.get(di).unwrap_or("").to_string(), close));
    }
    for (name, days) in &mut table {
        days.sort_by(|a, b| a.0.cmp(&b.0));
        if days.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("date", format!("duplicate date for {name}")));
        }
    }
    Ok(table)
}

pub fn write_closes(mut w: impl Write, table: &CloseTable, key: &str) -> std::io::Result<()> {
    writeln!(w, "{key},date,close")?;
    for (name, days) in table {
        for (d, p) in days {
            writeln!(w, "{name},{d},{p}")?;
        }
    }
    Ok(())
}

/// Reads `instrument,index`.
pub fn read_index_map(reader: impl Read) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (ii, xi) = (column_index(&headers, "instrument")?, column_index(&headers, "index")?);
    let mut map = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        map.insert(row.get(ii).unwrap_or("").to_string(), row.get(xi).unwrap_or("").to_string());
    }
    Ok(map)
}

pub fn write_index_map(mut w: impl Write, map: &BTreeMap<String, String>) -> std::io::Result<()> {
    writeln!(w, "instrument,index")?;
    for (k, v) in map {
        writeln!(w, "{k},{v}")?;
    }
    Ok(())
}

/// Reads `id,instrument,date,side,participation`.
pub fn read_daily_metaorders(reader: impl Read) -> Result<Vec<DailyMetaorder>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols: Vec<usize> = ["id", "instrument", "date", "side", "participation"]
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let line = k + 2;
        let text = |i: usize| row.get(cols[i]).unwrap_or("").to_string();
        let participation = parse_field(&row, cols[4], "participation", line)?;
        if participation < 0.0 {
            return Err(Error::param("participation", format!("line {line}: must be >= 0")));
        }
        out.push(DailyMetaorder {
            id: text(0),
            instrument: text(1),
            date: text(2),
            side: Side::parse(&text(3)).map_err(|e| Error::param("side", format!("line {line}: {e}")))?,
            participation,
        });
    }
    Ok(out)
}

pub fn write_daily_metaorders(mut w: impl Write, rows: &[DailyMetaorder]) -> std::io::Result<()> {
    writeln!(w, "id,instrument,date,side,participation")?;
    for m in rows {
        writeln!(w, "{},{},{},{},{}", m.id, m.instrument, m.date, m.side.code(), m.participation)?;
    }
    Ok(())
}

/// Synthetic cohort whose post-execution drift comes only from follow-up
/// metaorders.
///
/// Every record sits on its own instrument with exactly one window of
/// closes. The idiosyncratic log-price is a random walk plus the temporary
/// impact `a·|F_d|^p` of the day's net flow `F_d`, which lasts for that day
/// only. Follow-up metaorders on later days share the record's side with
/// probability `same_side`, which is the only source of drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortConfig {
    pub n_records: usize,
    pub coefficient: f64,
    pub exponent: f64,
    pub participation: (f64, f64),
    pub followup_prob: f64,
    pub same_side: f64,
    pub beta: (f64, f64),
    pub index_vol: f64,
    pub idio_vol: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_records: 2000,
            coefficient: 0.02,
            exponent: 0.5,
            participation: (0.005, 0.05),
            followup_prob: 0.8,
            same_side: 0.9,
            beta: (0.5, 1.5),
            index_vol: 0.01,
            idio_vol: 0.003,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::param("n_records", "must be >= 1"));
        }
        SqrtModel::new(self.coefficient, self.exponent)?;
        let (lo, hi) = self.participation;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::param("participation", "need 0 < lo <= hi"));
        }
        for (name, p) in [("followup_prob", self.followup_prob), ("same_side", self.same_side)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, "must be a probability"));
            }
        }
        if !(self.beta.0 <= self.beta.1) || !self.beta.0.is_finite() || !self.beta.1.is_finite() {
            return Err(Error::param("beta", "need lo <= hi"));
        }
        for (name, v) in [("index_vol", self.index_vol), ("idio_vol", self.idio_vol)] {
            ensure_finite(name, v)?;
            if !(v > 0.0) {
                return Err(Error::param(name, "must be > 0"));
            }
        }
        Ok(())
    }
}

/// True betas of a generated cohort, by instrument.
pub type TrueBetas = BTreeMap<String, f64>;

pub const SYNTHETIC_INDEX: &str = "IDX";

fn day_label(k: usize) -> String {
    format!("d{k:07}")
}

/// Builds a seeded [`DailyDataset`] per [`CohortConfig`].
///
/// Record `i` trades on its own instrument with a window starting on day `i`
/// of a shared index series, so the records sample many index paths.
pub fn synthetic_cohort(config: &CohortConfig, seed: u64) -> Result<(DailyDataset, TrueBetas)> {
    config.validate()?;
    let model = SqrtModel::new(config.coefficient, config.exponent)?;
    let mut rng = stream_rng(seed, u64::MAX);
    let index_step = Normal::new(0.0, config.index_vol).map_err(|e| Error::param("index_vol", e.to_string()))?;
    let index_days = config.n_records + WINDOW_CLOSES - 1;
    let mut log_index = vec![0.0; index_days];
    for k in 1..index_days {
        log_index[k] = log_index[k - 1] + index_step.sample(&mut rng);
    }
    let mut data = DailyDataset::default();
    data.index_closes.insert(
        SYNTHETIC_INDEX.into(),
        log_index.iter().enumerate().map(|(k, x)| (day_label(k), 1000.0 * x.exp())).collect(),
    );
    let idio_step = Normal::new(0.0, config.idio_vol).map_err(|e| Error::param("idio_vol", e.to_string()))?;
    let mut betas = TrueBetas::new();
    let draw_r = |rng: &mut rand_chacha::ChaCha8Rng| {
        let (lo, hi) = config.participation;
        if hi > lo { rng.random_range(lo..hi) } else { lo }
    };
    for i in 0..config.n_records {
        let mut rng = stream_rng(seed, i as u64);
        let name = format!("S{i:05}");
        let beta = if config.beta.1 > config.beta.0 { rng.random_range(config.beta.0..config.beta.1) } else { config.beta.0 };
        let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
        let mut flow = vec![0.0; WINDOW_CLOSES];
        let own = draw_r(&mut rng);
        flow[LOOKBACK_DAYS] = side.sign() * own;
        data.metaorders.push(DailyMetaorder {
            id: format!("{name}-0"),
            instrument: name.clone(),
            date: day_label(i + LOOKBACK_DAYS),
            side,
            participation: own,
        });
        for k in LOOKBACK_DAYS + 1..WINDOW_CLOSES {
            if rng.random_bool(config.followup_prob) {
                let s = if rng.random_bool(config.same_side) { side } else { side.flipped() };
                let r = draw_r(&mut rng);
                flow[k] += s.sign() * r;
                data.metaorders.push(DailyMetaorder {
                    id: format!("{name}-{}", k - LOOKBACK_DAYS),
                    instrument: name.clone(),
                    date: day_label(i + k),
                    side: s,
                    participation: r,
                });
            }
        }
        let mut walk = 0.0;
        let closes = (0..WINDOW_CLOSES)
            .map(|k| {
                if k > 0 {
                    walk += idio_step.sample(&mut rng);
                }
                let log_p = 100f64.ln() + beta * log_index[i + k] + walk + model.impact(flow[k]);
                (day_label(i + k), log_p.exp())
            })
            .collect();
        data.closes.insert(name.clone(), closes);
        data.index_map.insert(name.clone(), SYNTHETIC_INDEX.into());
        betas.insert(name, beta);
    }
    Ok((data, betas))
}
