//! Exponential-versus-truncated-normal Wilks test on log-transformed tails.
//!
//! Under the exponential null both the statistic and the moment ratio
//! `T = n Σy² / (Σy)²` are scale-free, and the Wilks statistic is a
//! non-increasing function of `T` that is zero for `T >= 2`. Bootstrap
//! replicates are therefore ranked by `(W, -T)`: the first key is the statistic
//! itself, the second breaks the ties at `W = 0` so the p-value stays uniform
//! under the null. Replicate `j` always draws from substream `j`, and a tail of
//! size `k` uses the first `k` draws, so the single-threshold test and the rank
//! sweep agree.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use super::check_positive;
use crate::error::{Error, Result};
use crate::rng::{substream, Domain, DEFAULT_SEED};
use crate::special::chi2_1_sf;
use crate::truncnorm::{exponential_loglik, fit_excess, ExcessStats, TruncFit};

pub const MIN_UMPU_TAIL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    MonteCarlo,
    /// Half point mass at zero, half chi-squared(1). Approximate.
    Asymptotic,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MonteCarlo => "monte_carlo",
            Method::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UmpuOptions {
    pub method: Method,
    pub reps: usize,
    pub seed: u64,
}

impl Default for UmpuOptions {
    fn default() -> Self {
        UmpuOptions {
            method: Method::MonteCarlo,
            reps: 1000,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UmpuResult {
    pub threshold: f64,
    /// Descending rank of the threshold value (1 = largest datum).
    pub rank: usize,
    pub n_tail: usize,
    pub wilks_w: f64,
    pub moment_ratio: f64,
    pub p_value: f64,
    pub method: Method,
}

/// Wilks statistic and moment ratio of excesses.
fn wilks(stats: &ExcessStats) -> Result<(f64, f64)> {
    let t = stats.moment_ratio();
    if !(t > 1.0) {
        return Err(Error::DegenerateTail);
    }
    if t >= 2.0 {
        return Ok((0.0, t));
    }
    let w = match fit_excess(stats)? {
        TruncFit::Interior { loglik, .. } => 2.0 * (loglik - exponential_loglik(stats)),
        TruncFit::Boundary { .. } => 0.0,
    };
    Ok((w.max(0.0), t))
}

fn asymptotic_p(w: f64) -> f64 {
    if w > 0.0 {
        0.5 * chi2_1_sf(w)
    } else {
        1.0
    }
}

/// For each requested tail size (ascending) paired with an observed moment
/// ratio, count replicates whose ratio is at most the observed one.
fn bootstrap_counts(queries: &[(usize, f64)], reps: usize, seed: u64) -> Vec<u32> {
    let kmax = queries.last().map_or(0, |q| q.0);
    (0..reps as u64)
        .into_par_iter()
        .fold(
            || vec![0u32; queries.len()],
            |mut acc, j| {
                let mut rng = substream(seed, Domain::Bootstrap, j);
                let (mut s1, mut s2) = (0.0f64, 0.0f64);
                let mut k = 0;
                let mut q = 0;
                while k < kmax {
                    let e: f64 = Exp1.sample(&mut rng);
                    s1 += e;
                    s2 += e * e;
                    k += 1;
                    while q < queries.len() && queries[q].0 == k {
                        if k as f64 * s2 / (s1 * s1) <= queries[q].1 {
                            acc[q] += 1;
                        }
                        q += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; queries.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn check_options(opts: &UmpuOptions) -> Result<()> {
    if opts.method == Method::MonteCarlo && opts.reps == 0 {
        return Err(Error::invalid("monte carlo replicate count must be at least 1"));
    }
    Ok(())
}

/// Test the tail strictly above `threshold`.
pub fn umpu_wilks(data: &[f64], threshold: f64, opts: &UmpuOptions) -> Result<UmpuResult> {
    check_positive(data)?;
    check_options(opts)?;
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::invalid("threshold must be positive"));
    }
    let mut tail: Vec<f64> = data.iter().copied().filter(|&x| x > threshold).collect();
    if tail.len() < MIN_UMPU_TAIL {
        return Err(Error::InsufficientData {
            needed: MIN_UMPU_TAIL,
            got: tail.len(),
        });
    }
    tail.sort_by(|a, b| b.total_cmp(a));
    let stats = ExcessStats::from_excesses(tail.iter().map(|x| (x / threshold).ln()));
    let (wilks_w, t) = wilks(&stats)?;
    let n = tail.len();
    let p_value = match opts.method {
        Method::Asymptotic => asymptotic_p(wilks_w),
        Method::MonteCarlo => {
            let c = bootstrap_counts(&[(n, t)], opts.reps, opts.seed)[0];
            (1.0 + c as f64) / (opts.reps as f64 + 1.0)
        }
    };
    Ok(UmpuResult {
        threshold,
        rank: n + 1,
        n_tail: n,
        wilks_w,
        moment_ratio: t,
        p_value,
        method: opts.method,
    })
}

/// Run the test with the threshold at every descending rank `r` whose strict
/// tail still holds at least `MIN_UMPU_TAIL` points, in rank order.
pub fn umpu_sweep(data: &[f64], opts: &UmpuOptions) -> Result<Vec<UmpuResult>> {
    check_positive(data)?;
    check_options(opts)?;
    let mut desc = data.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));

    // Running excess sums. Lowering the threshold by d shifts every current
    // excess by d; the update only adds non-negative terms.
    let mut rows: Vec<(usize, f64, usize, ExcessStats)> = Vec::new();
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    let mut k = 0usize;
    let mut prev_ln = f64::NAN;
    for r in 1..=desc.len() {
        let t = desc[r - 1];
        let lt = t.ln();
        if k > 0 {
            let d = prev_ln - lt;
            s2 += 2.0 * d * s1 + k as f64 * d * d;
            s1 += k as f64 * d;
        }
        // absorb points strictly above t
        while k < r - 1 && desc[k] > t {
            let y = (desc[k] / t).ln();
            s1 += y;
            s2 += y * y;
            k += 1;
        }
        prev_ln = lt;
        if k >= MIN_UMPU_TAIL {
            rows.push((r, t, k, ExcessStats { n: k, sum: s1, sum_sq: s2 }));
        }
    }

    let stats: Vec<Result<(f64, f64)>> = rows.par_iter().map(|row| wilks(&row.3)).collect();
    let mut kept = Vec::with_capacity(rows.len());
    for (row, s) in rows.iter().zip(stats) {
        match s {
            Ok((w, t)) => kept.push((row.0, row.1, row.2, w, t)),
            Err(e) => log::warn!("rank {}: test skipped ({e})", row.0),
        }
    }

    let p: Vec<f64> = match opts.method {
        Method::Asymptotic => kept.iter().map(|r| asymptotic_p(r.3)).collect(),
        Method::MonteCarlo => {
            let queries: Vec<(usize, f64)> = kept.iter().map(|r| (r.2, r.4)).collect();
            bootstrap_counts(&queries, opts.reps, opts.seed)
                .into_iter()
                .map(|c| (1.0 + c as f64) / (opts.reps as f64 + 1.0))
                .collect()
        }
    };
    Ok(kept
        .into_iter()
        .zip(p)
        .map(|((rank, threshold, n_tail, wilks_w, moment_ratio), p_value)| UmpuResult {
            threshold,
            rank,
            n_tail,
            wilks_w,
            moment_ratio,
            p_value,
            method: opts.method,
        })
        .collect())
}
