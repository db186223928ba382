//! Empirical impact estimators for metaorder data.
//!
//! Inputs are [`MetaorderRecord`]s plus mid-price series keyed by
//! `(instrument, date)`. Everything here is a pure function of those inputs;
//! randomized procedures take an explicit seed.

mod curves;
pub(crate) mod data;
mod regression;

pub use curves::{
    anticipation_groups, bootstrap_exponent, decay_loglog, quantile_buckets, quantile_slices, rescaled_average,
    return_proxy, transient_fit, AnticipationOptions, AnticipationReport, Band, BootstrapOptions, BootstrapStats,
    Bucket, DecayLoglog, GroupCurve, ImpactCurve, PairDistance, RescaleOptions, TransientFit,
    DEFAULT_TRANSIENT_RANGE,
};
pub use data::{
    read_metaorders, read_price_series, write_metaorders, write_price_series, MetaorderRecord, PriceSeries,
    PriceStore, RecordFilter, ResponseTransform, Side, Variable,
};
pub use regression::{
    direct_regression, fit_power_law, residual_trace, trace_slope, Loss, RegressionOptions, RegressionResult,
    TracePoint,
};
