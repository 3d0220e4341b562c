use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::PanelRow;

pub const DEFAULT_BINS: usize = 300;
pub const DEFAULT_MIN_COUNT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `ds`
    Absolute,
    /// `ds / s0`
    #[default]
    Ratio,
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" | "abs" => Ok(Target::Absolute),
            "ratio" => Ok(Target::Ratio),
            _ => Err(Error::invalid(format!("unknown target {s:?} (expected absolute or ratio)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    /// Geometric mean of the edges.
    pub center: f64,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinSeries {
    pub target: Target,
    pub min_count: usize,
    pub edges: Vec<f64>,
    /// Retained bins in increasing balance order.
    pub bins: Vec<Bin>,
    pub rows_binned: usize,
    pub rows_out_of_range: usize,
}

impl BinSeries {
    pub fn n_bins(&self) -> usize {
        self.edges.len().saturating_sub(1)
    }

    /// Consecutive edge ratio.
    pub fn edge_ratio(&self) -> f64 {
        let n = self.n_bins() as f64;
        (self.edges[self.edges.len() - 1] / self.edges[0]).powf(1.0 / n)
    }

    /// Same edges and settings, different retained bins.
    pub fn with_bins(&self, bins: Vec<Bin>) -> BinSeries {
        BinSeries {
            bins,
            ..self.clone()
        }
    }
}

/// `n` geometric bins between `s_min` and `s_max`.
pub fn make_bins(s_min: f64, s_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(s_min > 0.0 && s_max > s_min && s_max.is_finite()) {
        return Err(Error::invalid(format!("bin bounds must satisfy 0 < s_min < s_max, got {s_min}, {s_max}")));
    }
    if n < 2 {
        return Err(Error::invalid("at least 2 bins are required"));
    }
    let ratio = (s_max / s_min).ln();
    let mut edges: Vec<f64> = (0..=n).map(|k| s_min * (ratio * k as f64 / n as f64).exp()).collect();
    edges[0] = s_min;
    edges[n] = s_max;
    Ok(edges)
}

/// Index of the bin holding `s`; the last bin is closed on the right.
pub fn bin_index(edges: &[f64], s: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(s >= edges[0] && s <= edges[n]) {
        return None;
    }
    let k = edges.partition_point(|&e| e <= s);
    Some((k - 1).min(n - 1))
}

// Sorted first so the result does not depend on row order; shifting by the
// minimum makes a constant bin report exactly zero spread.
fn moments(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let base = values[0];
    let shifted_mean = values.iter().map(|v| v - base).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - base - shifted_mean).powi(2)).sum::<f64>() / n;
    let mean = base + shifted_mean;
    let mut std = var.sqrt();
    // spreads at the level of rounding in ds / s0 are treated as none
    if std <= 1e-13 * mean.abs() {
        std = 0.0;
    }
    (mean, std)
}

/// Per-bin mean and population standard deviation of the target, keeping bins
/// with at least `min_count` rows.
pub fn bin_moments(rows: &[PanelRow], edges: &[f64], min_count: usize, target: Target) -> Result<BinSeries> {
    if min_count < 2 {
        return Err(Error::invalid("min_count must be at least 2"));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("bin edges must be strictly increasing"));
    }
    let n = edges.len() - 1;
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut out_of_range = 0;
    for r in rows {
        if !(r.s0 > 0.0) {
            out_of_range += 1;
            continue;
        }
        match bin_index(edges, r.s0) {
            Some(k) => buckets[k].push(match target {
                Target::Absolute => r.ds,
                Target::Ratio => r.ds / r.s0,
            }),
            None => out_of_range += 1,
        }
    }
    let bins: Vec<Bin> = buckets
        .iter_mut()
        .enumerate()
        .filter(|(_, b)| b.len() >= min_count)
        .map(|(k, b)| {
            let (mean, std) = moments(b);
            Bin {
                lo: edges[k],
                hi: edges[k + 1],
                center: (edges[k] * edges[k + 1]).sqrt(),
                count: b.len(),
                mean,
                std,
            }
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::NoRetainedBins { min_count });
    }
    Ok(BinSeries {
        target,
        min_count,
        edges: edges.to_vec(),
        bins,
        rows_binned: rows.len() - out_of_range,
        rows_out_of_range: out_of_range,
    })
}

/// Geometric bins spanning the rows' positive starting balances.
pub fn bin_panel(rows: &[PanelRow], n_bins: usize, min_count: usize, target: Target) -> Result<BinSeries> {
    let (lo, hi) = rows
        .iter()
        .filter(|r| r.s0 > 0.0)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.s0), hi.max(r.s0)));
    if !(lo < hi) {
        return Err(Error::NoRetainedBins { min_count });
    }
    bin_moments(rows, &make_bins(lo, hi, n_bins)?, min_count, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(s0: f64, s1: f64) -> PanelRow {
        PanelRow::new(String::new(), s0, s1)
    }

    #[test]
    fn geometric_midpoint() {
        let e = make_bins(1.0, 100.0, 2).unwrap();
        for (a, b) in e.iter().zip([1.0, 10.0, 100.0]) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
        let e = make_bins(3.0, 7e12, 300).unwrap();
        let r0 = e[1] / e[0];
        assert!(e.windows(2).all(|w| ((w[1] / w[0]) / r0 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn bad_bounds() {
        assert!(make_bins(0.0, 1.0, 3).is_err());
        assert!(make_bins(2.0, 1.0, 3).is_err());
        assert!(make_bins(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn constant_ratio_has_zero_spread() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<PanelRow> = (0..5000)
            .map(|_| {
                let s0 = (r.random::<f64>() * 20.0).exp().round() + 1.0;
                row(s0, s0 + 0.1 * s0)
            })
            .collect();
        let b = bin_panel(&rows, 30, 20, Target::Ratio).unwrap();
        for bin in &b.bins {
            assert!((bin.mean - 0.1).abs() < 1e-15, "{}", bin.mean);
            assert_eq!(bin.std, 0.0);
        }
    }

    #[test]
    fn nothing_retained() {
        let rows = vec![row(1.0, 2.0), row(10.0, 3.0)];
        assert!(matches!(bin_panel(&rows, 5, 50, Target::Absolute), Err(Error::NoRetainedBins { min_count: 50 })));
    }

    #[test]
    fn matches_brute_force_and_is_order_free() {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let mut rows: Vec<PanelRow> = (0..20_000)
            .map(|_| {
                let s0 = (r.random::<f64>() * 25.0).exp() + 1.0;
                let s1 = s0 * (0.5 + r.random::<f64>());
                row(s0, s1)
            })
            .collect();
        let a = bin_panel(&rows, 60, 50, Target::Absolute).unwrap();
        for bin in &a.bins {
            // single pass over all rows with the bin's own membership rule
            let vals: Vec<f64> = rows
                .iter()
                .filter(|x| x.s0 >= bin.lo && (x.s0 < bin.hi || bin.hi == *a.edges.last().unwrap()))
                .map(|x| x.ds)
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert_eq!(vals.len(), bin.count);
            assert!((mean - bin.mean).abs() <= 1e-12 * mean.abs().max(1.0));
            assert!((std - bin.std).abs() <= 1e-12 * std);
        }
        rows.shuffle(&mut r);
        let b = bin_panel(&rows, 60, 50, Target::Absolute).unwrap();
        assert_eq!(a, b);
    }
}
