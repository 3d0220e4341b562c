use rayon::prelude::*;

use super::{check_positive, ks_sorted, tail_sorted, TailFitResult, TailParams};
use crate::error::{Error, Result};

/// Smallest tail the xmin scan will consider.
pub const MIN_SCAN_TAIL: usize = 10;
/// Cap on xmin candidates; larger candidate sets are thinned evenly by rank.
const MAX_CANDIDATES: usize = 2000;

/// Fit on an ascending tail whose smallest admissible value is `xmin`.
fn fit_sorted_tail(tail: &[f64], xmin: f64) -> Result<TailFitResult> {
    let n = tail.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let sum_log: f64 = tail.iter().map(|x| (x / xmin).ln()).sum();
    if !(sum_log > 0.0) {
        return Err(Error::DegenerateTail);
    }
    let nf = n as f64;
    let a = 1.0 + nf / sum_log;
    let log_likelihood = nf * (a - 1.0).ln() - nf * xmin.ln() - a * sum_log;
    let ks_distance = ks_sorted(tail, |x| -((1.0 - a) * (x / xmin).ln()).exp_m1());
    Ok(TailFitResult {
        params: TailParams::PowerLaw { a },
        xmin,
        n_tail: n,
        log_likelihood,
        ks_distance,
        at_boundary: false,
    })
}

/// Continuous power-law MLE. Without `xmin`, the cutoff minimizing the KS
/// distance over distinct data values is chosen.
pub fn fit_power_law(data: &[f64], xmin: Option<f64>) -> Result<TailFitResult> {
    check_positive(data)?;
    if let Some(xmin) = xmin {
        if !(xmin > 0.0 && xmin.is_finite()) {
            return Err(Error::invalid("xmin must be positive"));
        }
        return fit_sorted_tail(&tail_sorted(data, xmin), xmin);
    }

    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    // start index of each distinct value leaving at least MIN_SCAN_TAIL points
    let mut starts: Vec<usize> = Vec::new();
    for i in 0..sorted.len() {
        if sorted.len() - i < MIN_SCAN_TAIL {
            break;
        }
        if i == 0 || sorted[i] != sorted[i - 1] {
            starts.push(i);
        }
    }
    if starts.is_empty() {
        return Err(Error::InsufficientData {
            needed: MIN_SCAN_TAIL,
            got: sorted.len(),
        });
    }
    if starts.len() > MAX_CANDIDATES {
        let k = starts.len();
        starts = (0..MAX_CANDIDATES).map(|j| starts[j * (k - 1) / (MAX_CANDIDATES - 1)]).collect();
        starts.dedup();
    }
    let fits: Vec<Option<TailFitResult>> = starts
        .par_iter()
        .map(|&i| fit_sorted_tail(&sorted[i..], sorted[i]).ok())
        .collect();
    // first minimum wins, so ties go to the smallest xmin
    fits.into_iter()
        .flatten()
        .fold(None, |best: Option<TailFitResult>, f| match best {
            Some(b) if b.ks_distance <= f.ks_distance => Some(b),
            _ => Some(f),
        })
        .ok_or(Error::DegenerateTail)
}
