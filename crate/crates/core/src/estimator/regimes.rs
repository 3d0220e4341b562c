use serde::Serialize;

use super::bins::{Bin, BinSeries, Target};
use super::regression::{fit_ratio_bins, GrowthFit, Regime};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Average {
    #[default]
    Linear,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSplit {
    pub s_star: Option<f64>,
    pub s_star_average: Average,
    /// Number of retained bins assigned to the poor side.
    pub cut: usize,
    /// Bins whose sign disagrees with their side; excluded from the fits.
    pub inconsistent_bins: usize,
    pub poor: Option<GrowthFit>,
    pub wealthy: Option<GrowthFit>,
    /// Sign of each retained bin mean: 1, -1 or 0.
    pub sign_pattern: Vec<i8>,
}

fn sign(b: &Bin) -> i8 {
    if b.mean > 0.0 {
        1
    } else if b.mean < 0.0 {
        -1
    } else {
        0
    }
}

/// Split retained ratio bins into a growing (poor) side and a shrinking
/// (wealthy) side and fit each.
pub fn split_regimes(bins: &BinSeries) -> Result<RegimeSplit> {
    split_regimes_with(bins, Average::Linear)
}

pub fn split_regimes_with(bins: &BinSeries, average: Average) -> Result<RegimeSplit> {
    if bins.target != Target::Ratio {
        return Err(Error::invalid("regime split needs a ratio bin series"));
    }
    let b = &bins.bins;
    if b.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: b.len() });
    }
    let signs: Vec<i8> = b.iter().map(sign).collect();

    // score(c) = positives before c + negatives from c on; ties favour larger c
    let total_neg = signs.iter().filter(|&&s| s < 0).count();
    let (mut pos_before, mut neg_before) = (0, 0);
    let mut best = (0usize, total_neg);
    for c in 1..=b.len() {
        match signs[c - 1] {
            1 => pos_before += 1,
            -1 => neg_before += 1,
            _ => {}
        }
        let score = pos_before + (total_neg - neg_before);
        if score >= best.1 {
            best = (c, score);
        }
    }
    let cut = best.0;
    let blue: Vec<Bin> = b[..cut].iter().filter(|x| x.mean > 0.0).copied().collect();
    let red: Vec<Bin> = b[cut..].iter().filter(|x| x.mean < 0.0).copied().collect();

    let fit = |side: &[Bin], regime: Regime| -> Option<GrowthFit> {
        if side.is_empty() {
            return None;
        }
        match fit_ratio_bins(side, regime) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("{regime:?} regime not fitted: {e}");
                None
            }
        }
    };

    let s_star = match (blue.last(), red.first()) {
        (Some(x), Some(y)) => Some(match average {
            Average::Linear => 0.5 * (x.center + y.center),
            Average::Geometric => (x.center * y.center).sqrt(),
        }),
        _ => None,
    };
    Ok(RegimeSplit {
        s_star,
        s_star_average: average,
        cut,
        inconsistent_bins: b.len() - best.1 - signs.iter().filter(|&&s| s == 0).count(),
        poor: fit(&blue, Regime::Poor),
        wealthy: fit(&red, Regime::Wealthy),
        sign_pattern: signs,
    })
}
