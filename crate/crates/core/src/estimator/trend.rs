//! Mann-Kendall monotonic trend test.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::two_sided_normal_p;

/// Largest untied series evaluated with the exact null distribution.
const EXACT_MAX_N: usize = 60;
pub const TREND_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendResult {
    pub direction: Direction,
    /// Kendall tau-b between position and value.
    pub tau: f64,
    pub s: i64,
    pub p_value: f64,
    pub n: usize,
    pub exact: bool,
}

/// Two-sided p-value of `|S| >= |s|` for `n` untied values, from the
/// distribution of inversion counts.
pub fn exact_p(n: usize, s: i64) -> f64 {
    let max = n * (n - 1) / 2;
    // probabilities of k inversions, built one element at a time
    let mut dist = vec![0.0f64; max + 1];
    dist[0] = 1.0;
    let mut top = 0;
    for m in 1..n {
        // appending element m+1 adds 0..=m inversions, uniformly
        // direct sums of non-negative terms keep far-tail probabilities accurate
        let mut next = vec![0.0f64; max + 1];
        let w = 1.0 / (m as f64 + 1.0);
        for (k, slot) in next.iter_mut().enumerate().take(top + m + 1) {
            let lo = k.saturating_sub(m);
            *slot = dist[lo..=k.min(top)].iter().sum::<f64>() * w;
        }
        top += m;
        dist = next;
    }
    // S = max - 2 I
    let s_abs = s.unsigned_abs() as usize;
    let mut p = 0.0;
    for (i, pr) in dist.iter().enumerate() {
        let si = max as i64 - 2 * i as i64;
        if si.unsigned_abs() as usize >= s_abs {
            p += pr;
        }
    }
    p.min(1.0)
}

pub fn trend_test(series: &[(f64, f64)]) -> Result<TrendResult> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    if series.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("trend series must be finite"));
    }
    let mut pts = series.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();

    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += match y[j].partial_cmp(&y[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }

    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let tied_pairs: f64 = groups.iter().map(|&t| (t * (t - 1) / 2) as f64).sum();
    let none = TrendResult { direction: Direction::None, tau: 0.0, s, p_value: 1.0, n, exact: false };
    if tied_pairs >= n0 {
        return Ok(none);
    }
    let tau = s as f64 / (n0 * (n0 - tied_pairs)).sqrt();

    let has_ties = groups.iter().any(|&t| t > 1);
    let (p_value, exact) = if !has_ties && n <= EXACT_MAX_N {
        (exact_p(n, s), true)
    } else {
        let nf = n as f64;
        let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0)
            - groups.iter().map(|&t| {
                let t = t as f64;
                t * (t - 1.0) * (2.0 * t + 5.0)
            }).sum::<f64>())
            / 18.0;
        let z = if s > 0 {
            (s as f64 - 1.0) / var.sqrt()
        } else if s < 0 {
            (s as f64 + 1.0) / var.sqrt()
        } else {
            0.0
        };
        (two_sided_normal_p(z), false)
    };
    let direction = if p_value < TREND_LEVEL {
        if s > 0 {
            Direction::Increasing
        } else {
            Direction::Decreasing
        }
    } else {
        Direction::None
    };
    Ok(TrendResult { direction, tau, s, p_value, n, exact })
}
