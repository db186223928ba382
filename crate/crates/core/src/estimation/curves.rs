use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{MetaorderRecord, PriceSeries, PriceStore, ResponseTransform};
use crate::error::{ensure_finite, Error, Result};
use crate::stats::{mean, ols, quantile_sorted, quantiles, stream_rng as rng_for};

/// Default rescaled-time window of the transient fit.
pub const DEFAULT_TRANSIENT_RANGE: (f64, f64) = (0.05, 1.0);

/// `(P_t − P_t0)/P_t0` using the last samples at or before `t0` and `t`.
pub fn return_proxy(series: &PriceSeries, t0: f64, t: f64) -> Result<f64> {
    if t < t0 {
        return Err(Error::OutOfRange(format!("query time {t} precedes the start {t0}")));
    }
    let p0 = series.price_at(t0)?;
    Ok((series.price_at(t)? - p0) / p0)
}

/// Quantile band of an impact curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub level: f64,
    pub values: Vec<f64>,
}

/// Average signed impact against rescaled time `s = (t − t0)/T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactCurve {
    pub s: Vec<f64>,
    pub mean: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(default)]
    pub bands: Vec<Band>,
    /// Records left out for lack of price coverage.
    #[serde(default)]
    pub skipped: usize,
}

impl ImpactCurve {
    /// A curve given directly by its values, e.g. from a model.
    pub fn from_values(s: Vec<f64>, mean: Vec<f64>) -> Result<Self> {
        if s.len() != mean.len() || s.is_empty() {
            return Err(Error::param("curve", "s and values must be non-empty and of equal length"));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("curve", "s must be increasing"));
        }
        let n = s.len();
        Ok(Self { s, mean, counts: vec![1; n], bands: Vec::new(), skipped: 0 })
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Linear interpolation of the mean; `None` outside the grid.
    pub fn value_at(&self, s: f64) -> Option<f64> {
        let (first, last) = (self.s[0], self.s_max());
        if s < first - 1e-12 || s > last + 1e-12 {
            return None;
        }
        let k = self.s.partition_point(|&x| x <= s);
        if k == 0 {
            return Some(self.mean[0]);
        }
        if k >= self.s.len() {
            return Some(*self.mean.last().unwrap());
        }
        let (s0, s1) = (self.s[k - 1], self.s[k]);
        let w = (s - s0) / (s1 - s0);
        Some(self.mean[k - 1] + w * (self.mean[k] - self.mean[k - 1]))
    }

    pub fn scale(&self) -> f64 {
        self.mean.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "s,mean,count")?;
        for b in &self.bands {
            write!(w, ",q{}", b.level)?;
        }
        writeln!(w)?;
        for i in 0..self.s.len() {
            write!(w, "{},{},{}", self.s[i], self.mean[i], self.counts[i])?;
            for b in &self.bands {
                write!(w, ",{}", b.values[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads `s,mean[,count[,q…]]`.
    pub fn read_csv(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::param("csv", e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::param(name, "missing column in curve CSV header"))
        };
        let si = col("s")?;
        let mi = col("mean")?;
        let ci = headers.iter().position(|h| h == "count");
        let band_cols: Vec<(usize, f64)> = headers
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.strip_prefix('q').and_then(|l| l.parse().ok()).map(|l| (i, l)))
            .collect();
        let mut curve = ImpactCurve {
            s: Vec::new(),
            mean: Vec::new(),
            counts: Vec::new(),
            bands: band_cols.iter().map(|&(_, level)| Band { level, values: Vec::new() }).collect(),
            skipped: 0,
        };
        for (k, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| Error::param("csv", e.to_string()))?;
            let num = |i: usize, name: &str| -> Result<f64> {
                let t = row.get(i).unwrap_or("");
                t.parse().map_err(|_| Error::param(name, format!("line {}: cannot parse {t:?}", k + 2)))
            };
            curve.s.push(num(si, "s")?);
            curve.mean.push(num(mi, "mean")?);
            curve.counts.push(match ci {
                Some(i) => num(i, "count")? as usize,
                None => 1,
            });
            for (b, &(i, _)) in curve.bands.iter_mut().zip(&band_cols) {
                b.values.push(num(i, "quantile band")?);
            }
        }
        if curve.s.is_empty() {
            return Err(Error::InsufficientData("curve CSV has no rows".into()));
        }
        Ok(curve)
    }
}

/// Grid and response settings for rescaled averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescaleOptions {
    /// Grid points per unit of rescaled time.
    #[serde(default = "default_points")]
    pub points_per_unit: usize,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_bands")]
    pub band_levels: Vec<f64>,
    #[serde(default)]
    pub transform: ResponseTransform,
}

fn default_points() -> usize {
    100
}

fn default_s_max() -> f64 {
    2.0
}

fn default_bands() -> Vec<f64> {
    vec![0.25, 0.75]
}

impl Default for RescaleOptions {
    fn default() -> Self {
        Self {
            points_per_unit: default_points(),
            s_max: default_s_max(),
            band_levels: default_bands(),
            transform: ResponseTransform::Relative,
        }
    }
}

impl RescaleOptions {
    pub fn with_s_max(s_max: f64) -> Self {
        Self { s_max, ..Self::default() }
    }

    /// `s_k = k / points_per_unit` up to `s_max`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        ensure_finite("s_max", self.s_max)?;
        if self.points_per_unit == 0 || !(self.s_max > 0.0) {
            return Err(Error::param("grid", "needs points_per_unit >= 1 and s_max > 0"));
        }
        let n = (self.s_max * self.points_per_unit as f64 + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| k as f64 / self.points_per_unit as f64).collect())
    }
}

/// Signed rescaled path `ε·ΔP(t0 + s·T)` of every covered record, in input
/// order, plus the number skipped.
pub(crate) fn rescaled_paths(
    records: &[MetaorderRecord],
    prices: &PriceStore,
    grid: &[f64],
    transform: ResponseTransform,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let s_max = *grid.last().unwrap();
    let per_record: Vec<Option<Result<Vec<f64>>>> = records
        .par_iter()
        .map(|r| {
            let series = prices.for_record(r)?;
            if !series.covers(r.t0, r.t0 + s_max * r.duration) {
                return None;
            }
            Some(
                grid.iter()
                    .map(|&s| {
                        let rel = return_proxy(series, r.t0, r.t0 + s * r.duration)?;
                        Ok(r.side.sign() * transform.apply(r, rel)?)
                    })
                    .collect(),
            )
        })
        .collect();
    let mut paths = Vec::new();
    let mut used = Vec::new();
    for (i, p) in per_record.into_iter().enumerate() {
        if let Some(p) = p {
            paths.push(p?);
            used.push(i);
        }
    }
    Ok((paths, used))
}

fn average_paths(grid: &[f64], paths: &[&Vec<f64>], band_levels: &[f64], skipped: usize) -> ImpactCurve {
    let n = paths.len();
    let mut column = vec![0.0; n];
    let mut mean_v = Vec::with_capacity(grid.len());
    let mut bands: Vec<Band> = band_levels.iter().map(|&l| Band { level: l, values: Vec::new() }).collect();
    for k in 0..grid.len() {
        for (c, p) in column.iter_mut().zip(paths) {
            *c = p[k];
        }
        mean_v.push(mean(&column));
        if !bands.is_empty() {
            let q = quantiles(&column, band_levels);
            for (b, v) in bands.iter_mut().zip(q) {
                b.values.push(v);
            }
        }
    }
    ImpactCurve { s: grid.to_vec(), mean: mean_v, counts: vec![n; grid.len()], bands, skipped }
}

/// Mean over records of `ε·ΔP` at `t0 + s·T` on the rescaled grid.
///
/// Records whose price series does not cover `[t0, t0 + s_max·T]` are
/// skipped and counted; it is an error if none remain.
pub fn rescaled_average(records: &[MetaorderRecord], prices: &PriceStore, options: &RescaleOptions) -> Result<ImpactCurve> {
    let grid = options.grid()?;
    let (paths, used) = rescaled_paths(records, prices, &grid, options.transform)?;
    if paths.is_empty() {
        return Err(Error::InsufficientData(format!(
            "none of the {} records has price coverage up to s = {}",
            records.len(),
            options.s_max
        )));
    }
    let refs: Vec<&Vec<f64>> = paths.iter().collect();
    Ok(average_paths(&grid, &refs, &options.band_levels, records.len() - used.len()))
}

/// Equal-count buckets of `values`: sorted indices (stable on ties) cut at
/// `⌊kN/K⌋`.
pub fn quantile_buckets(values: &[f64], k: usize) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::param("K", "need at least two buckets"));
    }
    if k > values.len() {
        return Err(Error::InsufficientData(format!("{k} buckets for {} records", values.len())));
    }
    for &v in values {
        ensure_finite("bucket variable", v)?;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    if values[order[0]] == values[*order.last().unwrap()] {
        return Err(Error::Degenerate("bucketing variable is constant".into()));
    }
    let n = values.len();
    Ok((0..k).map(|b| order[b * n / k..(b + 1) * n / k].to_vec()).collect())
}

/// One conditional-impact bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lower: f64,
    pub upper: f64,
    pub indices: Vec<usize>,
    pub mean_x: f64,
    /// Mean signed impact at `s = 1` over covered records.
    pub impact: f64,
    pub count: usize,
}

/// Conditional temporary impact per equal-count bucket of `x(record)`.
pub fn quantile_slices(
    records: &[MetaorderRecord],
    prices: &PriceStore,
    x: impl Fn(&MetaorderRecord) -> f64,
    k: usize,
    transform: ResponseTransform,
) -> Result<Vec<Bucket>> {
    let values: Vec<f64> = records.iter().map(&x).collect();
    let buckets = quantile_buckets(&values, k)?;
    let options = RescaleOptions { points_per_unit: 1, s_max: 1.0, band_levels: vec![], transform };
    buckets
        .into_iter()
        .map(|idx| {
            let subset: Vec<MetaorderRecord> = idx.iter().map(|&i| records[i].clone()).collect();
            let curve = rescaled_average(&subset, prices, &options)?;
            let xs: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            Ok(Bucket {
                lower: xs.iter().copied().fold(f64::INFINITY, f64::min),
                upper: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_x: mean(&xs),
                impact: *curve.mean.last().unwrap(),
                count: curve.counts[0],
                indices: idx,
            })
        })
        .collect()
}

/// Log-log fit `η̂_s ≈ prefactor·s^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub points: usize,
}

pub fn transient_fit(curve: &ImpactCurve, range: (f64, f64)) -> Result<TransientFit> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::param("range", "need 0 < lo < hi"));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&s, &v) in curve.s.iter().zip(&curve.mean) {
        if s >= lo - 1e-12 && s <= hi + 1e-12 {
            if !(v > 0.0) {
                return Err(Error::NonPositive(format!("curve value {v} at s = {s}")));
            }
            x.push(s.ln());
            y.push(v.ln());
        }
    }
    let (slope, intercept) = ols(&x, &y)?;
    Ok(TransientFit { exponent: slope, prefactor: intercept.exp(), points: x.len() })
}

/// `(log(s − 1), log(η̂_s − η̂_2))` for `s ∈ (1, 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayLoglog {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Points with `η̂_s ≤ η̂_2`.
    pub dropped: usize,
}

impl DecayLoglog {
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Slope on `s − 1 ∈ [lo, hi]`.
    pub fn slope(&self, lo: f64, hi: f64) -> Result<f64> {
        let (a, b) = (lo.ln(), hi.ln());
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .x
            .iter()
            .zip(&self.y)
            .filter(|(x, _)| **x >= a - 1e-12 && **x <= b + 1e-12)
            .map(|(x, y)| (*x, *y))
            .unzip();
        Ok(ols(&x, &y)?.0)
    }
}

pub fn decay_loglog(curve: &ImpactCurve) -> Result<DecayLoglog> {
    if curve.s_max() < 2.0 - 1e-9 {
        return Err(Error::OutOfRange(format!("curve ends at s = {}, need s_max >= 2", curve.s_max())));
    }
    let end = curve.value_at(2.0).unwrap();
    let mut out = DecayLoglog { x: Vec::new(), y: Vec::new(), dropped: 0 };
    for (&s, &v) in curve.s.iter().zip(&curve.mean) {
        if s > 1.0 + 1e-12 && s < 2.0 - 1e-12 {
            let d = v - end;
            if d > 0.0 {
                out.x.push((s - 1.0).ln());
                out.y.push(d.ln());
            } else {
                out.dropped += 1;
            }
        }
    }
    Ok(out)
}

/// Settings of the subsampling bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapOptions {
    #[serde(default = "default_draws")]
    pub n_draws: usize,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_range")]
    pub range: (f64, f64),
    #[serde(default)]
    pub transform: ResponseTransform,
}

fn default_draws() -> usize {
    500
}

fn default_fraction() -> f64 {
    0.8
}

fn default_range() -> (f64, f64) {
    DEFAULT_TRANSIENT_RANGE
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            n_draws: default_draws(),
            fraction: default_fraction(),
            range: DEFAULT_TRANSIENT_RANGE,
            transform: ResponseTransform::Relative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStats {
    pub mean: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub exponents: Vec<f64>,
}

/// Transient exponent refitted on `n_draws` subsamples of `fraction` of
/// the records drawn without replacement.
pub fn bootstrap_exponent(
    records: &[MetaorderRecord],
    prices: &PriceStore,
    options: &BootstrapOptions,
    seed: u64,
) -> Result<BootstrapStats> {
    if records.len() < 10 {
        return Err(Error::InsufficientData(format!("bootstrap needs >= 10 records, got {}", records.len())));
    }
    if !(options.fraction > 0.0 && options.fraction <= 1.0) || options.n_draws == 0 {
        return Err(Error::param("bootstrap", "need 0 < fraction <= 1 and n_draws >= 1"));
    }
    let rescale = RescaleOptions { s_max: options.range.1.max(1.0), band_levels: vec![], ..RescaleOptions::default() };
    let grid = rescale.grid()?;
    let (paths, _) = rescaled_paths(records, prices, &grid, options.transform)?;
    if paths.len() < 10 {
        return Err(Error::InsufficientData(format!("only {} records have price coverage", paths.len())));
    }
    let m = ((paths.len() as f64 * options.fraction).floor() as usize).max(2);
    let exponents = (0..options.n_draws as u64)
        .into_par_iter()
        .map(|draw| {
            let mut rng = rng_for(seed, draw);
            let picked: Vec<&Vec<f64>> = sample(&mut rng, paths.len(), m).into_iter().map(|i| &paths[i]).collect();
            let curve = average_paths(&grid, &picked, &[], 0);
            transient_fit(&curve, options.range).map(|f| f.exponent)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = exponents.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapStats {
        mean: mean(&exponents),
        q05: quantile_sorted(&sorted, 0.05),
        q25: quantile_sorted(&sorted, 0.25),
        q50: quantile_sorted(&sorted, 0.50),
        q75: quantile_sorted(&sorted, 0.75),
        q95: quantile_sorted(&sorted, 0.95),
        exponents,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnticipationOptions {
    #[serde(default = "default_groups")]
    pub i_max: usize,
    /// Pairs whose sup distance exceeds this fraction of the curve scale
    /// are flagged.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub transform: ResponseTransform,
}

fn default_groups() -> usize {
    5
}

fn default_threshold() -> f64 {
    0.02
}

impl Default for AnticipationOptions {
    fn default() -> Self {
        Self { i_max: default_groups(), threshold: default_threshold(), transform: ResponseTransform::Relative }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurve {
    pub index: usize,
    pub count: usize,
    pub curve: Option<ImpactCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    /// Compares group `lower` with group `lower + 1`.
    pub lower: usize,
    pub distance: f64,
    pub scale: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticipationReport {
    pub groups: Vec<GroupCurve>,
    pub pairs: Vec<PairDistance>,
    /// Pairs skipped because a group was empty.
    pub skipped_pairs: Vec<usize>,
}

/// Groups `A_i = {R ∈ [2^{i−1}R0, 2^i R0), T ∈ [2^{i−1}T0, 2^i T0)}` share
/// `ν̇` ranges; without anticipation the curve of group `i` at `s` equals
/// that of group `i + 1` at `s/2`.
pub fn anticipation_groups(
    records: &[MetaorderRecord],
    prices: &PriceStore,
    r0: f64,
    t0: f64,
    options: &AnticipationOptions,
) -> Result<AnticipationReport> {
    if !(r0 > 0.0 && t0 > 0.0) {
        return Err(Error::param("R0/T0", "must be > 0"));
    }
    if options.i_max == 0 {
        return Err(Error::param("i_max", "must be >= 1"));
    }
    let rescale = RescaleOptions { s_max: 1.0, band_levels: vec![], transform: options.transform, ..RescaleOptions::default() };
    let mut groups = Vec::with_capacity(options.i_max);
    for i in 1..=options.i_max {
        let lo = 2f64.powi(i as i32 - 1);
        let members: Vec<MetaorderRecord> = records
            .iter()
            .filter(|r| {
                let p = r.daily_participation();
                p >= lo * r0 && p < 2.0 * lo * r0 && r.duration >= lo * t0 && r.duration < 2.0 * lo * t0
            })
            .cloned()
            .collect();
        let curve = if members.is_empty() {
            None
        } else {
            match rescaled_average(&members, prices, &rescale) {
                Ok(c) => Some(c),
                Err(Error::InsufficientData(_)) => None,
                Err(e) => return Err(e),
            }
        };
        groups.push(GroupCurve { index: i, count: curve.as_ref().map_or(0, |c| c.counts[0]), curve });
    }
    let mut pairs = Vec::new();
    let mut skipped_pairs = Vec::new();
    for w in groups.windows(2) {
        match (&w[0].curve, &w[1].curve) {
            (Some(a), Some(b)) => {
                let mut distance = 0.0f64;
                for (&s, &v) in a.s.iter().zip(&a.mean) {
                    let other = b.value_at(0.5 * s).unwrap();
                    distance = distance.max((v - other).abs());
                }
                let scale = a.scale().max(b.scale());
                pairs.push(PairDistance {
                    lower: w[0].index,
                    distance,
                    scale,
                    flagged: distance > options.threshold * scale,
                });
            }
            _ => skipped_pairs.push(w[0].index),
        }
    }
    Ok(AnticipationReport { groups, pairs, skipped_pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::data::Side;
    use rand::Rng;

    fn record(i: usize, side: Side, duration: f64) -> MetaorderRecord {
        MetaorderRecord {
            id: format!("m{i}"),
            instrument: "X".into(),
            date: format!("{i}"),
            t0: 100.0,
            duration,
            side,
            volume: 100.0,
            daily_volume: 10_000.0,
            window_volume: 1_000.0,
            sigma: 0.02,
            spread: 0.001,
            n_child: None,
        }
    }

    /// Price sampled every `step` seconds from `t0` following `eta(s)`.
    fn series_from(r: &MetaorderRecord, s_max: f64, steps: usize, eta: impl Fn(f64) -> f64) -> PriceSeries {
        let times: Vec<f64> = (0..=steps).map(|k| r.t0 + s_max * r.duration * k as f64 / steps as f64).collect();
        let prices = times
            .iter()
            .map(|&t| 100.0 * (1.0 + r.side.sign() * eta((t - r.t0) / r.duration)))
            .collect();
        PriceSeries::new(times, prices).unwrap()
    }

    #[test]
    fn return_proxy_examples() {
        let s = PriceSeries::new(vec![0.0, 5.0], vec![100.0, 101.0]).unwrap();
        assert!((return_proxy(&s, 0.0, 6.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(return_proxy(&s, 0.0, 0.0).unwrap(), 0.0);
        let s = PriceSeries::new(vec![0.0, 5.0], vec![50.0, 49.0]).unwrap();
        assert!((return_proxy(&s, 0.0, 5.0).unwrap() + 0.02).abs() < 1e-15);
        assert!(return_proxy(&s, 3.0, 1.0).is_err());
    }

    #[test]
    fn grid_has_unit_node() {
        let g = RescaleOptions::default().grid().unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g[100], 1.0);
    }

    #[test]
    fn mirrored_buy_and_sell_agree() {
        let buy = record(0, Side::Buy, 60.0);
        let sell = record(1, Side::Sell, 60.0);
        let mut store = PriceStore::new();
        store.insert("X", "0", series_from(&buy, 2.0, 400, |s| 0.01 * s.min(1.0)));
        store.insert("X", "1", series_from(&sell, 2.0, 400, |s| 0.01 * s.min(1.0)));
        let a = rescaled_average(&[buy.clone()], &store, &RescaleOptions::default()).unwrap();
        let b = rescaled_average(&[sell], &store, &RescaleOptions::default()).unwrap();
        for (x, y) in a.mean.iter().zip(&b.mean) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.value_at(1.0).unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn deterministic_ensemble_is_pointwise_mean() {
        let recs: Vec<_> = (0..4).map(|i| record(i, Side::Buy, 30.0 + 10.0 * i as f64)).collect();
        let mut store = PriceStore::new();
        for (i, r) in recs.iter().enumerate() {
            let c = 0.001 * (i + 1) as f64;
            store.insert("X", r.date.clone(), series_from(r, 2.0, 200, move |s| c * s));
        }
        let opts = RescaleOptions::default();
        let curve = rescaled_average(&recs, &store, &opts).unwrap();
        let grid = opts.grid().unwrap();
        for (k, &s) in grid.iter().enumerate() {
            let direct: f64 = recs
                .iter()
                .map(|r| return_proxy(store.for_record(r).unwrap(), r.t0, r.t0 + s * r.duration).unwrap())
                .sum::<f64>()
                / 4.0;
            assert_eq!(curve.mean[k], direct);
        }
        assert!(curve.counts.iter().all(|&c| c == 4));
    }

    #[test]
    fn coverage_gaps_are_skipped() {
        let recs: Vec<_> = (0..3).map(|i| record(i, Side::Buy, 60.0)).collect();
        let mut store = PriceStore::new();
        store.insert("X", "0", series_from(&recs[0], 2.0, 100, |s| s));
        store.insert("X", "1", series_from(&recs[1], 1.0, 100, |s| s));
        let c = rescaled_average(&recs, &store, &RescaleOptions::default()).unwrap();
        assert_eq!(c.skipped, 2);
        assert_eq!(c.counts[0], 1);
        assert!(rescaled_average(&recs[1..], &store, &RescaleOptions::default()).is_err());
    }

    #[test]
    fn buckets_are_equal_count() {
        let b = quantile_buckets(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(b, vec![vec![0, 1], vec![2, 3]]);
        let b = quantile_buckets(&[3.0, 1.0, 2.0, 2.0, 5.0], 2).unwrap();
        assert_eq!(b, vec![vec![1, 2], vec![3, 0, 4]]);
        assert!(quantile_buckets(&[1.0, 1.0, 1.0], 2).is_err());
        assert!(quantile_buckets(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn slices_monotone_in_x() {
        let mut rng = rng_for(5, 0);
        let mut recs = Vec::new();
        let mut store = PriceStore::new();
        for i in 0..400 {
            let mut r = record(i, Side::Buy, 60.0);
            r.volume = 10.0 + 990.0 * rng.random::<f64>();
            let target = 0.01 * r.daily_participation().sqrt() + 0.0005 * (rng.random::<f64>() - 0.5);
            store.insert("X", r.date.clone(), series_from(&r, 1.0, 10, move |s| target * s));
            recs.push(r);
        }
        let b = quantile_slices(&recs, &store, |r| r.daily_participation(), 5, ResponseTransform::Relative).unwrap();
        assert!(b.windows(2).all(|w| w[1].impact > w[0].impact));
        assert_eq!(b.iter().map(|b| b.count).sum::<usize>(), 400);
    }

    #[test]
    fn transient_fit_exact() {
        let s: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
        let c = ImpactCurve::from_values(s.clone(), s.iter().map(|x| 3.0 * x.powf(0.5)).collect()).unwrap();
        let f = transient_fit(&c, DEFAULT_TRANSIENT_RANGE).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12 && (f.prefactor - 3.0).abs() < 1e-12);
        let c = ImpactCurve::from_values(s.clone(), s.iter().map(|x| x.powf(0.64)).collect()).unwrap();
        assert!((transient_fit(&c, DEFAULT_TRANSIENT_RANGE).unwrap().exponent - 0.64).abs() < 1e-12);
        let c = ImpactCurve::from_values(s.clone(), s.iter().map(|x| x - 0.5).collect()).unwrap();
        assert!(transient_fit(&c, DEFAULT_TRANSIENT_RANGE).is_err());
    }

    #[test]
    fn decay_loglog_cases() {
        let s: Vec<f64> = (0..=200).map(|k| k as f64 / 100.0).collect();
        let values = s
            .iter()
            .map(|&x| if x > 1.0 && x < 2.0 { 1.0 + (x - 1.0).sqrt() } else { 1.0 })
            .collect();
        let d = decay_loglog(&ImpactCurve::from_values(s.clone(), values).unwrap()).unwrap();
        assert_eq!(d.x.len(), 99);
        assert!((d.slope(0.01, 0.99).unwrap() - 0.5).abs() < 1e-12);

        let flat = ImpactCurve::from_values(s.clone(), vec![2.0; s.len()]).unwrap();
        let d = decay_loglog(&flat).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.dropped, 99);

        let short = ImpactCurve::from_values(s[..150].to_vec(), vec![1.0; 150]).unwrap();
        assert!(decay_loglog(&short).is_err());
    }

    #[test]
    fn curve_csv_round_trip() {
        let c = ImpactCurve {
            s: vec![0.0, 0.5, 1.0],
            mean: vec![0.0, 0.25, 0.5],
            counts: vec![3, 3, 3],
            bands: vec![Band { level: 0.25, values: vec![0.0, 0.1, 0.2] }],
            skipped: 0,
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(ImpactCurve::read_csv(buf.as_slice()).unwrap(), c);
        assert!(ImpactCurve::read_csv("x,mean\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn bootstrap_on_noiseless_power_law() {
        let recs: Vec<_> = (0..40).map(|i| record(i, Side::Buy, 60.0 + i as f64)).collect();
        let mut store = PriceStore::new();
        for r in &recs {
            store.insert("X", r.date.clone(), series_from(r, 1.0, 100, |s| 0.01 * s.powf(0.7)));
        }
        let opts = BootstrapOptions { n_draws: 50, ..BootstrapOptions::default() };
        let stats = bootstrap_exponent(&recs, &store, &opts, 1).unwrap();
        // Prices are sampled at the grid nodes, so rounding in the lookup
        // can shift a node to its neighbour.
        for q in [stats.q05, stats.q25, stats.q50, stats.q75, stats.q95] {
            assert!((q - 0.7).abs() < 1e-3, "{q}");
        }
        assert!(bootstrap_exponent(&recs[..5], &store, &opts, 1).is_err());
    }

    #[test]
    fn single_group_has_no_pairs() {
        let recs: Vec<_> = (0..5).map(|i| record(i, Side::Buy, 60.0)).collect();
        let mut store = PriceStore::new();
        for r in &recs {
            store.insert("X", r.date.clone(), series_from(r, 1.0, 100, |s| 0.001 * s));
        }
        let opts = AnticipationOptions { i_max: 1, ..AnticipationOptions::default() };
        let rep = anticipation_groups(&recs, &store, 0.01, 60.0, &opts).unwrap();
        assert_eq!(rep.groups.len(), 1);
        assert_eq!(rep.groups[0].count, 5);
        assert!(rep.pairs.is_empty());
    }
}
