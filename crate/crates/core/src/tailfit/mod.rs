//! Power-law and log-normal tail models and the tests that compare them.

mod compare;
mod lognormal;
mod power_law;
mod umpu;

pub use compare::{compare_tails, compare_tails_at_level, threshold_grid, threshold_sweep, threshold_sweep_with, Grid, Preferred, ComparisonResult, DEFAULT_LEVEL, MIN_SWEEP_TAIL};
pub use lognormal::fit_lognormal;
pub use power_law::{fit_power_law, MIN_SCAN_TAIL};
pub use umpu::{umpu_sweep, umpu_wilks, Method, UmpuOptions, UmpuResult, MIN_UMPU_TAIL};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{normal_cdf, LN_SQRT_2PI};
use crate::truncnorm::TruncNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    PowerLaw,
    LogNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TailParams {
    PowerLaw { a: f64 },
    /// Location and scale of `ln x`.
    LogNormal { m: f64, v: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFitResult {
    #[serde(flatten)]
    pub params: TailParams,
    /// Lower cutoff; 0 for an untruncated log-normal fit.
    pub xmin: f64,
    pub n_tail: usize,
    pub log_likelihood: f64,
    pub ks_distance: f64,
    /// Log-normal supremum reached only in the exponential limit; `m`, `v`
    /// then describe a near-limit member.
    pub at_boundary: bool,
}

impl TailFitResult {
    pub fn family(&self) -> Family {
        match self.params {
            TailParams::PowerLaw { .. } => Family::PowerLaw,
            TailParams::LogNormal { .. } => Family::LogNormal,
        }
    }

    /// Log density at `x` (zero mass below `xmin`).
    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_pdf_fn()(x)
    }

    /// `ln_pdf` with the normalization computed once, for evaluation on many points.
    pub fn ln_pdf_fn(&self) -> impl Fn(f64) -> f64 {
        let xmin = self.xmin;
        let lx = if xmin > 0.0 { xmin.ln() } else { 0.0 };
        let (params, trunc) = match self.params {
            TailParams::LogNormal { m, v } if xmin > 0.0 => (self.params, Some(TruncNormal::from_location_scale(m - lx, v).ln_pdf_fn())),
            p => (p, None),
        };
        move |x: f64| {
            if x < xmin || x <= 0.0 {
                return f64::NEG_INFINITY;
            }
            match (params, &trunc) {
                (TailParams::PowerLaw { a }, _) => (a - 1.0).ln() - lx - a * (x.ln() - lx),
                (_, Some(d)) => d(x.ln() - lx) - x.ln(),
                (TailParams::LogNormal { m, v }, None) => {
                    let z = (x.ln() - m) / v;
                    -0.5 * z * z - LN_SQRT_2PI - v.ln() - x.ln()
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.xmin || x <= 0.0 {
            return 0.0;
        }
        match self.params {
            TailParams::PowerLaw { a } => -((1.0 - a) * (x / self.xmin).ln()).exp_m1(),
            TailParams::LogNormal { m, v } => {
                if self.xmin > 0.0 {
                    TruncNormal::from_location_scale(m - self.xmin.ln(), v).cdf((x / self.xmin).ln())
                } else {
                    normal_cdf((x.ln() - m) / v)
                }
            }
        }
    }
}

pub(crate) fn check_positive(data: &[f64]) -> Result<()> {
    match data.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        Some(i) => Err(Error::invalid(format!("data value #{i} = {} is not a positive finite number", data[i]))),
        None => Ok(()),
    }
}

/// Tail `x >= xmin`, sorted ascending.
pub(crate) fn tail_sorted(data: &[f64], xmin: f64) -> Vec<f64> {
    let mut t: Vec<f64> = data.iter().copied().filter(|&x| x >= xmin).collect();
    t.sort_by(f64::total_cmp);
    t
}

/// Two-sided KS distance between the empirical law of sorted `xs` and `cdf`.
pub(crate) fn ks_sorted(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}
