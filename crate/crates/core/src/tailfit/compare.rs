use rayon::prelude::*;
use serde::Serialize;

use super::{check_positive, fit_lognormal, fit_power_law, tail_sorted, TailParams};
use crate::error::{Error, Result};
use crate::special::two_sided_normal_p;

pub const DEFAULT_LEVEL: f64 = 0.05;
/// The threshold sweep stops once fewer tail points remain.
pub const MIN_SWEEP_TAIL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preferred {
    PowerLaw,
    LogNormal,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonResult {
    pub xmin: f64,
    pub n_tail: usize,
    /// Sum of per-point log-likelihood differences over `sqrt(n)` times their
    /// sample standard deviation; positive favors the power law.
    pub normalized_lr: f64,
    pub p_value: f64,
    pub preferred: Preferred,
    pub level: f64,
}

pub fn compare_tails(data: &[f64], xmin: f64) -> Result<ComparisonResult> {
    compare_tails_at_level(data, xmin, DEFAULT_LEVEL)
}

pub fn compare_tails_at_level(data: &[f64], xmin: f64, level: f64) -> Result<ComparisonResult> {
    check_positive(data)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("significance level must lie in (0, 1)"));
    }
    let tail = tail_sorted(data, xmin);
    compare_sorted(&tail, xmin, level)
}

fn compare_sorted(tail: &[f64], xmin: f64, level: f64) -> Result<ComparisonResult> {
    let pl = fit_power_law(tail, Some(xmin))?;
    let ln = fit_lognormal(tail, Some(xmin))?;
    let n = tail.len();
    let tie = ComparisonResult {
        xmin,
        n_tail: n,
        normalized_lr: 0.0,
        p_value: 1.0,
        preferred: Preferred::Inconclusive,
        level,
    };
    // The log-normal optimum on the exponential edge is the power law itself.
    if ln.at_boundary {
        return Ok(tie);
    }
    let (fp, fl) = (pl.ln_pdf_fn(), ln.ln_pdf_fn());
    let diffs: Vec<f64> = tail.iter().map(|&x| fp(x) - fl(x)).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Ok(tie);
    }
    let normalized_lr = mean * nf / (nf.sqrt() * sd);
    let p_value = two_sided_normal_p(normalized_lr);
    let preferred = if p_value > level {
        Preferred::Inconclusive
    } else if normalized_lr > 0.0 {
        Preferred::PowerLaw
    } else {
        Preferred::LogNormal
    };
    debug_assert!(matches!(pl.params, TailParams::PowerLaw { .. }));
    Ok(ComparisonResult {
        xmin,
        n_tail: n,
        normalized_lr,
        p_value,
        preferred,
        level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    /// `start`, then every multiple of `step` above `start`.
    #[default]
    Multiples,
    /// `start + k * step`.
    Arithmetic,
}

/// Thresholds of the sweep grid up to `upper` inclusive.
pub fn threshold_grid(start: f64, step: f64, grid: Grid, upper: f64) -> Vec<f64> {
    let mut out = vec![start];
    let mut k = match grid {
        Grid::Multiples => (start / step).floor() + 1.0,
        Grid::Arithmetic => 1.0,
    };
    loop {
        let t = match grid {
            Grid::Multiples => k * step,
            Grid::Arithmetic => start + k * step,
        };
        if t > upper {
            break;
        }
        out.push(t);
        k += 1.0;
    }
    out
}

/// Repeated comparisons on an increasing threshold grid while at least
/// `MIN_SWEEP_TAIL` points remain. Thresholds where a fit fails are skipped.
pub fn threshold_sweep(data: &[f64], start: f64, step: f64) -> Result<Vec<ComparisonResult>> {
    threshold_sweep_with(data, start, step, Grid::Multiples, DEFAULT_LEVEL)
}

pub fn threshold_sweep_with(data: &[f64], start: f64, step: f64, grid: Grid, level: f64) -> Result<Vec<ComparisonResult>> {
    check_positive(data)?;
    if !(start > 0.0 && step > 0.0 && start.is_finite() && step.is_finite()) {
        return Err(Error::invalid("threshold start and step must be positive"));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() < MIN_SWEEP_TAIL {
        return Ok(Vec::new());
    }
    // largest threshold still leaving MIN_SWEEP_TAIL points at or above it
    let upper = sorted[sorted.len() - MIN_SWEEP_TAIL];
    let thresholds: Vec<f64> = threshold_grid(start, step, grid, upper);
    let rows: Vec<Option<ComparisonResult>> = thresholds
        .par_iter()
        .map(|&t| {
            let lo = sorted.partition_point(|&x| x < t);
            match compare_sorted(&sorted[lo..], t, level) {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("threshold {t}: comparison skipped ({e})");
                    None
                }
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}
