use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Direction of a metaorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }

    pub fn flipped(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// Accepts `B`/`S` and `1`/`-1` (also `+1`).
    pub fn parse(text: &str) -> Result<Side> {
        match text.trim() {
            "B" | "b" | "1" | "+1" | "1.0" => Ok(Side::Buy),
            "S" | "s" | "-1" | "−1" | "-1.0" => Ok(Side::Sell),
            other => Err(Error::param("side", format!("expected B, S, 1 or -1, got {other:?}"))),
        }
    }

    pub(crate) fn code(self) -> &'static str {
        match self {
            Side::Buy => "B",
            Side::Sell => "S",
        }
    }
}

/// One executed metaorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaorderRecord {
    pub id: String,
    pub instrument: String,
    pub date: String,
    /// Start of execution, intraday seconds.
    pub t0: f64,
    /// Execution duration `T`, seconds.
    pub duration: f64,
    pub side: Side,
    /// Executed shares `v`.
    pub volume: f64,
    /// Daily market volume `V`.
    pub daily_volume: f64,
    /// Market volume during the execution window `v̄`.
    pub window_volume: f64,
    /// Daily volatility (fraction).
    pub sigma: f64,
    /// Average bid-ask spread (fraction).
    pub spread: f64,
    /// Number of child orders, when known.
    pub n_child: Option<u32>,
}

impl MetaorderRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t0_seconds", self.t0),
            ("duration_seconds", self.duration),
            ("v", self.volume),
            ("V", self.daily_volume),
            ("vbar", self.window_volume),
            ("sigma", self.sigma),
            ("psi", self.spread),
        ] {
            ensure_finite(name, v)?;
        }
        let bad = |name: &str, reason: &str| Err(Error::param(name, format!("record {}: {reason}", self.id)));
        if !(self.duration > 0.0) {
            return bad("duration_seconds", "must be > 0");
        }
        if !(self.volume > 0.0) {
            return bad("v", "must be > 0");
        }
        if self.volume > self.daily_volume {
            return bad("V", "daily volume must be >= v");
        }
        if self.volume > self.window_volume {
            return bad("vbar", "window volume must be >= v");
        }
        if self.sigma < 0.0 || self.spread < 0.0 {
            return bad("sigma/psi", "must be >= 0");
        }
        Ok(())
    }

    /// `R = v/V`.
    pub fn daily_participation(&self) -> f64 {
        self.volume / self.daily_volume
    }

    /// `r = v/v̄`.
    pub fn trading_rate(&self) -> f64 {
        self.volume / self.window_volume
    }

    /// `ν̇ = R/T`.
    pub fn participation_speed(&self) -> f64 {
        self.daily_participation() / self.duration
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.duration
    }

    pub fn key(&self) -> (String, String) {
        (self.instrument.clone(), self.date.clone())
    }
}

/// A per-record explanatory variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// `R = v/V`.
    DailyParticipation,
    /// `r = v/v̄`.
    TradingRate,
    /// `T` in seconds.
    Duration,
    Volatility,
    Spread,
    /// `ν̇ = R/T`.
    ParticipationSpeed,
}

impl Variable {
    pub fn of(self, r: &MetaorderRecord) -> f64 {
        match self {
            Variable::DailyParticipation => r.daily_participation(),
            Variable::TradingRate => r.trading_rate(),
            Variable::Duration => r.duration,
            Variable::Volatility => r.sigma,
            Variable::Spread => r.spread,
            Variable::ParticipationSpeed => r.participation_speed(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::DailyParticipation => "daily_participation",
            Variable::TradingRate => "trading_rate",
            Variable::Duration => "duration",
            Variable::Volatility => "volatility",
            Variable::Spread => "spread",
            Variable::ParticipationSpeed => "participation_speed",
        }
    }
}

/// How a relative price move is turned into a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseTransform {
    /// `(P_t − P_t0)/P_t0`.
    #[default]
    Relative,
    /// Relative move divided by the record's spread.
    PerSpread,
}

impl ResponseTransform {
    pub(crate) fn apply(self, record: &MetaorderRecord, relative: f64) -> Result<f64> {
        match self {
            ResponseTransform::Relative => Ok(relative),
            ResponseTransform::PerSpread => {
                if record.spread > 0.0 {
                    Ok(relative / record.spread)
                } else {
                    Err(Error::NonPositive(format!("record {} has zero spread", record.id)))
                }
            }
        }
    }
}

/// Mid-price samples, read as a step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    times: Vec<f64>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(times: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if times.len() != prices.len() {
            return Err(Error::param("prices", "times and prices differ in length"));
        }
        if times.is_empty() {
            return Err(Error::InsufficientData("empty price series".into()));
        }
        for (&t, &p) in times.iter().zip(&prices) {
            ensure_finite("time_seconds", t)?;
            ensure_finite("mid_price", p)?;
            if !(p > 0.0) {
                return Err(Error::NonPositive(format!("mid price {p} at t = {t}")));
            }
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("time_seconds", "must be sorted"));
        }
        Ok(Self { times, prices })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Last sample at or before `t`.
    pub fn price_at(&self, t: f64) -> Result<f64> {
        let n = self.times.partition_point(|&s| s <= t);
        if n == 0 {
            return Err(Error::OutOfRange(format!("no price sample at or before t = {t}")));
        }
        Ok(self.prices[n - 1])
    }

    pub fn covers(&self, from: f64, to: f64) -> bool {
        self.first_time() <= from && self.last_time() >= to
    }

    /// Same path reflected through the first price: `P₀²/P`.
    pub fn mirrored(&self) -> PriceSeries {
        let p0 = self.prices[0];
        PriceSeries {
            times: self.times.clone(),
            prices: self.prices.iter().map(|p| p0 * p0 / p).collect(),
        }
    }
}

/// Price series keyed by `(instrument, date)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceStore {
    series: BTreeMap<(String, String), PriceSeries>,
}

impl PriceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, instrument: impl Into<String>, date: impl Into<String>, series: PriceSeries) {
        self.series.insert((instrument.into(), date.into()), series);
    }

    pub fn get(&self, instrument: &str, date: &str) -> Option<&PriceSeries> {
        self.series.get(&(instrument.to_string(), date.to_string()))
    }

    pub fn for_record(&self, record: &MetaorderRecord) -> Option<&PriceSeries> {
        self.get(&record.instrument, &record.date)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &PriceSeries)> {
        self.series.iter()
    }
}

/// Ingestion filters on metaorders. Unset fields do not filter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordFilter {
    /// Minimum number of child orders; records without a count pass.
    #[serde(default)]
    pub min_child_orders: Option<u32>,
    /// Strict lower bound on `T` in seconds.
    #[serde(default)]
    pub min_duration: Option<f64>,
    /// Inclusive range for `r`.
    #[serde(default)]
    pub trading_rate: Option<(f64, f64)>,
    /// Inclusive range for `R`.
    #[serde(default)]
    pub daily_participation: Option<(f64, f64)>,
    /// Requires `t0 + 2T` strictly before this intraday time.
    #[serde(default)]
    pub close_time: Option<f64>,
}

impl RecordFilter {
    pub fn matches(&self, r: &MetaorderRecord) -> bool {
        let within = |range: Option<(f64, f64)>, x: f64| range.is_none_or(|(lo, hi)| x >= lo && x <= hi);
        self.min_child_orders.is_none_or(|m| r.n_child.is_none_or(|n| n >= m))
            && self.min_duration.is_none_or(|m| r.duration > m)
            && within(self.trading_rate, r.trading_rate())
            && within(self.daily_participation, r.daily_participation())
            && self.close_time.is_none_or(|c| r.t0 + 2.0 * r.duration < c)
    }

    pub fn apply(&self, records: &[MetaorderRecord]) -> Vec<MetaorderRecord> {
        records.iter().filter(|r| self.matches(r)).cloned().collect()
    }
}

const METAORDER_COLUMNS: [&str; 11] = [
    "id",
    "instrument",
    "date",
    "t0_seconds",
    "duration_seconds",
    "side",
    "v",
    "V",
    "vbar",
    "sigma",
    "psi",
];

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::param("csv", e.to_string())
}

pub(crate) fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::param(name, "missing column in CSV header"))
}

pub(crate) fn parse_field(row: &csv::StringRecord, idx: usize, name: &str, line: usize) -> Result<f64> {
    let text = row.get(idx).unwrap_or("").trim();
    text.parse::<f64>()
        .map_err(|_| Error::param(name, format!("line {line}: cannot parse {text:?} as a number")))
}

/// Reads the metaorder CSV. Required columns:
/// `id,instrument,date,t0_seconds,duration_seconds,side,v,V,vbar,sigma,psi`;
/// an optional `n_child` column is used by the child-order filter.
pub fn read_metaorders(reader: impl Read) -> Result<Vec<MetaorderRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx: Vec<usize> = METAORDER_COLUMNS
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<_>>()?;
    let n_child = headers.iter().position(|h| h.trim() == "n_child");
    let mut out = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let line = k + 2;
        let text = |i: usize| row.get(idx[i]).unwrap_or("").to_string();
        let num = |i: usize| parse_field(&row, idx[i], METAORDER_COLUMNS[i], line);
        let record = MetaorderRecord {
            id: text(0),
            instrument: text(1),
            date: text(2),
            t0: num(3)?,
            duration: num(4)?,
            side: Side::parse(&text(5)).map_err(|e| Error::param("side", format!("line {line}: {e}")))?,
            volume: num(6)?,
            daily_volume: num(7)?,
            window_volume: num(8)?,
            sigma: num(9)?,
            spread: num(10)?,
            n_child: match n_child.and_then(|i| row.get(i)).map(str::trim) {
                None | Some("") => None,
                Some(t) => Some(
                    t.parse()
                        .map_err(|_| Error::param("n_child", format!("line {line}: cannot parse {t:?}")))?,
                ),
            },
        };
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_metaorders(mut w: impl Write, records: &[MetaorderRecord]) -> std::io::Result<()> {
    writeln!(w, "{},n_child", METAORDER_COLUMNS.join(","))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.id,
            r.instrument,
            r.date,
            r.t0,
            r.duration,
            r.side.code(),
            r.volume,
            r.daily_volume,
            r.window_volume,
            r.sigma,
            r.spread,
            r.n_child.map(|n| n.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Reads a `time_seconds,mid_price` CSV.
pub fn read_price_series(reader: impl Read) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let ti = column_index(&headers, "time_seconds")?;
    let pi = column_index(&headers, "mid_price")?;
    let mut times = Vec::new();
    let mut prices = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_error)?;
        times.push(parse_field(&row, ti, "time_seconds", k + 2)?);
        prices.push(parse_field(&row, pi, "mid_price", k + 2)?);
    }
    PriceSeries::new(times, prices)
}

pub fn write_price_series(mut w: impl Write, series: &PriceSeries) -> std::io::Result<()> {
    writeln!(w, "time_seconds,mid_price")?;
    for (t, p) in series.times.iter().zip(&series.prices) {
        writeln!(w, "{t},{p}")?;
    }
    Ok(())
}
