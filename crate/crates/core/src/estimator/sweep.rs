use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::Serialize;

use super::bins::{bin_panel, Target, DEFAULT_BINS, DEFAULT_MIN_COUNT};
use super::regimes::{split_regimes_with, Average, RegimeSplit};
use super::regression::{GrowthFit, Regime};
use super::trend::{trend_test, TrendResult};
use crate::error::{Error, Result};
use crate::panel::{build_panel, filter_active, BalanceSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorSettings {
    pub n_bins: usize,
    pub min_count: usize,
    pub target: Target,
    pub s_star_average: Average,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            n_bins: DEFAULT_BINS,
            min_count: DEFAULT_MIN_COUNT,
            target: Target::Ratio,
            s_star_average: Average::Linear,
        }
    }
}

/// Per-regime parameters with per-day rates derived from the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeParamsAt {
    pub regime: Regime,
    pub alpha_drift: f64,
    pub alpha_vol: Option<f64>,
    pub mu_dt: f64,
    pub sigma_sqrtdt: Option<f64>,
    pub mu: f64,
    pub sigma: Option<f64>,
}

impl RegimeParamsAt {
    pub fn from_fit(f: &GrowthFit, dt_days: u32) -> Self {
        let dt = dt_days as f64;
        RegimeParamsAt {
            regime: f.regime,
            alpha_drift: f.alpha_drift,
            alpha_vol: f.alpha_vol,
            mu_dt: f.mu_dt,
            sigma_sqrtdt: f.sigma_sqrtdt,
            mu: f.mu_dt / dt,
            sigma: f.sigma_sqrtdt.map(|s| s / dt.sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub dt_days: u32,
    pub retained_bins: usize,
    pub split: RegimeSplit,
    pub params: Vec<RegimeParamsAt>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedHorizon {
    pub dt_days: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterTrend {
    pub regime: Regime,
    pub parameter: &'static str,
    pub trend: TrendResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonSweep {
    pub t0: NaiveDate,
    pub settings: EstimatorSettings,
    /// Strictly increasing in `dt_days`.
    pub entries: Vec<SweepEntry>,
    pub skipped: Vec<SkippedHorizon>,
    pub trends: Vec<ParameterTrend>,
}

/// One-shot pipeline: join, keep active users, bin by ratio, split regimes.
pub fn estimate_pair(s0: &BalanceSnapshot, s1: &BalanceSnapshot, settings: &EstimatorSettings) -> Result<SweepEntry> {
    let panel = build_panel(s0, s1)?;
    let (active, _) = filter_active(&panel);
    let bins = bin_panel(&active.rows, settings.n_bins, settings.min_count, Target::Ratio)?;
    let split = split_regimes_with(&bins, settings.s_star_average)?;
    let params = [split.poor.as_ref(), split.wealthy.as_ref()]
        .into_iter()
        .flatten()
        .map(|f| RegimeParamsAt::from_fit(f, panel.dt_days))
        .collect();
    Ok(SweepEntry {
        dt_days: panel.dt_days,
        retained_bins: bins.bins.len(),
        split,
        params,
    })
}

type Extract = fn(&RegimeParamsAt) -> Option<f64>;

const TRACKED: [(&str, Extract); 6] = [
    ("alpha_drift", |p| Some(p.alpha_drift)),
    ("alpha_vol", |p| p.alpha_vol),
    ("mu_dt", |p| Some(p.mu_dt)),
    ("sigma_sqrtdt", |p| p.sigma_sqrtdt),
    ("mu", |p| Some(p.mu)),
    ("sigma", |p| p.sigma),
];

pub fn horizon_sweep(snapshots: &[BalanceSnapshot], t0: NaiveDate, dts: &[u32], settings: &EstimatorSettings) -> Result<HorizonSweep> {
    let base = snapshots
        .iter()
        .find(|s| s.date() == t0)
        .ok_or_else(|| Error::invalid(format!("no snapshot dated {t0}")))?;
    let mut dts: Vec<u32> = dts.to_vec();
    dts.sort_unstable();
    dts.dedup();
    let results: Vec<std::result::Result<SweepEntry, SkippedHorizon>> = dts
        .par_iter()
        .map(|&dt| {
            let date = t0 + Duration::days(dt as i64);
            let later = snapshots.iter().find(|s| s.date() == date).ok_or_else(|| SkippedHorizon {
                dt_days: dt,
                reason: format!("no snapshot dated {date}"),
            })?;
            estimate_pair(base, later, settings).map_err(|e| SkippedHorizon {
                dt_days: dt,
                reason: e.to_string(),
            })
        })
        .collect();
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(s) => {
                log::warn!("horizon {} days skipped: {}", s.dt_days, s.reason);
                skipped.push(s);
            }
        }
    }

    let mut trends = Vec::new();
    for regime in [Regime::Poor, Regime::Wealthy] {
        for (name, get) in TRACKED {
            let series: Vec<(f64, f64)> = entries
                .iter()
                .filter_map(|e| {
                    let p = e.params.iter().find(|p| p.regime == regime)?;
                    Some((e.dt_days as f64, get(p)?))
                })
                .collect();
            if let Ok(trend) = trend_test(&series) {
                trends.push(ParameterTrend { regime, parameter: name, trend });
            }
        }
    }
    Ok(HorizonSweep {
        t0,
        settings: *settings,
        entries,
        skipped,
        trends,
    })
}
