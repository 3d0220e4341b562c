//! Binned regressions for the growth exponents.

use serde::Serialize;

use super::bins::{Bin, BinSeries, Target};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub se_intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Ordinary least squares of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::SingularDesign("all bin centers coincide"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        se_slope: (s2 / sxx).sqrt(),
        se_intercept: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        r2,
        n_points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProportionalFit {
    pub mu_dt: f64,
    pub se_mu_dt: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftFit {
    pub alpha: f64,
    pub mu_dt: f64,
    pub se_alpha: f64,
    pub se_mu_dt: f64,
    pub r2: f64,
    pub n_points: usize,
    /// Same data with the exponent pinned at 1.
    pub alpha_one: ProportionalFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolFit {
    pub alpha: f64,
    pub sigma_sqrtdt: f64,
    pub se_alpha: f64,
    pub se_sigma_sqrtdt: f64,
    pub r2: f64,
    pub n_points: usize,
}

fn require_target(bins: &BinSeries, target: Target) -> Result<()> {
    if bins.target != target {
        return Err(Error::invalid(format!("expected {target:?} bin series, got {:?}", bins.target)));
    }
    Ok(())
}

const ALPHA_GRID: (f64, f64, usize) = (-2.0, 4.0, 601);

/// Nonlinear least squares of `mean = mu_dt * s^alpha` on the linear scale.
/// The coefficient is profiled out, so both signs of `mu_dt` are covered.
pub fn fit_drift_abs(bins: &BinSeries) -> Result<DriftFit> {
    require_target(bins, Target::Absolute)?;
    fit_power_curve(&bins.bins)
}

fn fit_power_curve(bins: &[Bin]) -> Result<DriftFit> {
    let k = bins.len();
    if k < 3 {
        return Err(Error::InsufficientData { needed: 3, got: k });
    }
    let ls: Vec<f64> = bins.iter().map(|b| b.center.ln()).collect();
    let lref = ls.iter().sum::<f64>() / k as f64;
    if ls.iter().all(|l| *l == ls[0]) {
        return Err(Error::SingularDesign("all bin centers coincide"));
    }
    // normalized log balance keeps u^alpha in range
    let lu: Vec<f64> = ls.iter().map(|l| l - lref).collect();
    let m: Vec<f64> = bins.iter().map(|b| b.mean).collect();

    let profile = |alpha: f64| -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        for (l, y) in lu.iter().zip(&m) {
            let u = (alpha * l).exp();
            num += y * u;
            den += u * u;
        }
        let c = num / den;
        let rss = lu.iter().zip(&m).map(|(l, y)| (y - c * (alpha * l).exp()).powi(2)).sum::<f64>();
        (c, rss)
    };

    let (lo, hi, steps) = ALPHA_GRID;
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    for i in 0..steps {
        let a = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
        let (c, rss) = profile(a);
        if rss < best.2 {
            best = (a, c, rss);
        }
    }

    // Levenberg-Marquardt polish on (alpha, c).
    let (mut alpha, mut c, mut rss) = best;
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (mut jtj, mut jtr) = ([0.0f64; 3], [0.0f64; 2]);
        for (l, y) in lu.iter().zip(&m) {
            let u = (alpha * l).exp();
            let r = y - c * u;
            let ja = c * u * l;
            let jc = u;
            jtj[0] += ja * ja;
            jtj[1] += ja * jc;
            jtj[2] += jc * jc;
            jtr[0] += ja * r;
            jtr[1] += jc * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let a11 = jtj[0] * (1.0 + lambda);
            let a22 = jtj[2] * (1.0 + lambda);
            let det = a11 * a22 - jtj[1] * jtj[1];
            if !(det.abs() > 0.0) {
                break;
            }
            let da = (a22 * jtr[0] - jtj[1] * jtr[1]) / det;
            let dc = (a11 * jtr[1] - jtj[1] * jtr[0]) / det;
            let (na, nc) = (alpha + da, c + dc);
            let nrss = lu.iter().zip(&m).map(|(l, y)| (y - nc * (na * l).exp()).powi(2)).sum::<f64>();
            if nrss <= rss {
                let small = da.abs() <= 1e-15 * alpha.abs().max(1.0) && dc.abs() <= 1e-15 * c.abs().max(f64::MIN_POSITIVE);
                alpha = na;
                c = nc;
                rss = nrss;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let mean_m = m.iter().sum::<f64>() / k as f64;
    let tss: f64 = m.iter().map(|y| (y - mean_m).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    // covariance of (alpha, c) from the Jacobian, then delta method for mu_dt
    let (mut j11, mut j12, mut j22) = (0.0, 0.0, 0.0);
    for l in &lu {
        let u = (alpha * l).exp();
        let ja = c * u * l;
        j11 += ja * ja;
        j12 += ja * u;
        j22 += u * u;
    }
    let s2 = if k > 2 { rss / (k as f64 - 2.0) } else { 0.0 };
    let det = j11 * j22 - j12 * j12;
    let (va, vac, vc) = (s2 * j22 / det, -s2 * j12 / det, s2 * j11 / det);
    let scale = (-alpha * lref).exp();
    let mu_dt = c * scale;
    // d mu/d alpha = -lref * mu, d mu/d c = scale
    let g = [-lref * mu_dt, scale];
    let var_mu = g[0] * g[0] * va + 2.0 * g[0] * g[1] * vac + g[1] * g[1] * vc;

    // alpha = 1: one-parameter least squares through the origin
    let s: Vec<f64> = ls.iter().map(|l| l.exp()).collect();
    let sxx: f64 = s.iter().map(|x| x * x).sum();
    let mu1 = s.iter().zip(&m).map(|(x, y)| x * y).sum::<f64>() / sxx;
    let rss1: f64 = s.iter().zip(&m).map(|(x, y)| (y - mu1 * x).powi(2)).sum();
    let alpha_one = ProportionalFit {
        mu_dt: mu1,
        se_mu_dt: (rss1 / (k as f64 - 1.0) / sxx).sqrt(),
        r2: if tss > 0.0 { 1.0 - rss1 / tss } else { 1.0 },
    };

    Ok(DriftFit {
        alpha,
        mu_dt,
        se_alpha: va.max(0.0).sqrt(),
        se_mu_dt: var_mu.max(0.0).sqrt(),
        r2,
        n_points: k,
        alpha_one,
    })
}

fn log_log_vol(bins: &[Bin], slope_offset: f64) -> Result<VolFit> {
    let used: Vec<&Bin> = bins.iter().filter(|b| b.std > 0.0 && b.std.is_finite()).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: used.len() });
    }
    let x: Vec<f64> = used.iter().map(|b| b.center.ln()).collect();
    let y: Vec<f64> = used.iter().map(|b| b.std.ln()).collect();
    let f = ols(&x, &y)?;
    let sigma_sqrtdt = f.intercept.exp();
    Ok(VolFit {
        alpha: f.slope + slope_offset,
        sigma_sqrtdt,
        se_alpha: f.se_slope,
        se_sigma_sqrtdt: sigma_sqrtdt * f.se_intercept,
        r2: f.r2,
        n_points: used.len(),
    })
}

/// `ln std(ds) = alpha ln s + ln(sigma sqrt(dt))`; zero-spread bins are skipped.
pub fn fit_vol_abs(bins: &BinSeries) -> Result<VolFit> {
    require_target(bins, Target::Absolute)?;
    log_log_vol(&bins.bins, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Poor,
    Wealthy,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub regime: Regime,
    pub alpha_drift: f64,
    /// Carries the regime sign.
    pub mu_dt: f64,
    /// Absent when fewer than three bins have positive spread.
    pub alpha_vol: Option<f64>,
    pub sigma_sqrtdt: Option<f64>,
    pub drift: LineFit,
    pub vol: Option<LineFit>,
    pub center_min: f64,
    pub center_max: f64,
}

/// Log-log regressions of `mean(ds/s)` and `std(ds/s)` on the bin center.
pub fn fit_ratio(bins: &BinSeries) -> Result<GrowthFit> {
    require_target(bins, Target::Ratio)?;
    fit_ratio_bins(&bins.bins, Regime::All)
}

pub(crate) fn fit_ratio_bins(bins: &[Bin], regime: Regime) -> Result<GrowthFit> {
    if bins.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: bins.len() });
    }
    let pos = bins.iter().any(|b| b.mean > 0.0);
    let neg = bins.iter().any(|b| b.mean < 0.0);
    if pos && neg {
        return Err(Error::RegimeMix);
    }
    let sign = if neg { -1.0 } else { 1.0 };
    let used: Vec<&Bin> = bins.iter().filter(|b| b.mean != 0.0).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: used.len() });
    }
    let x: Vec<f64> = used.iter().map(|b| b.center.ln()).collect();
    let y: Vec<f64> = used.iter().map(|b| (sign * b.mean).ln()).collect();
    let drift = ols(&x, &y)?;

    let vol_bins: Vec<&Bin> = bins.iter().filter(|b| b.std > 0.0 && b.std.is_finite()).collect();
    let vol = if vol_bins.len() >= 3 {
        let x: Vec<f64> = vol_bins.iter().map(|b| b.center.ln()).collect();
        let y: Vec<f64> = vol_bins.iter().map(|b| b.std.ln()).collect();
        Some(ols(&x, &y)?)
    } else {
        None
    };

    let regime = match regime {
        Regime::All if neg => Regime::Wealthy,
        Regime::All if pos => Regime::Poor,
        r => r,
    };
    Ok(GrowthFit {
        regime,
        alpha_drift: drift.slope + 1.0,
        mu_dt: sign * drift.intercept.exp(),
        alpha_vol: vol.map(|v| v.slope + 1.0),
        sigma_sqrtdt: vol.map(|v| v.intercept.exp()),
        drift,
        vol,
        center_min: bins.iter().map(|b| b.center).fold(f64::INFINITY, f64::min),
        center_max: bins.iter().map(|b| b.center).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(target: Target, f: impl Fn(f64) -> (f64, f64)) -> BinSeries {
        let edges = super::super::bins::make_bins(1e3, 1e11, 40).unwrap();
        let bins = edges
            .windows(2)
            .map(|w| {
                let center = (w[0] * w[1]).sqrt();
                let (mean, std) = f(center);
                Bin { lo: w[0], hi: w[1], center, count: 100, mean, std }
            })
            .collect();
        BinSeries { target, min_count: 50, edges, bins, rows_binned: 4000, rows_out_of_range: 0 }
    }

    #[test]
    fn exact_linear_drift() {
        let b = series(Target::Absolute, |s| (2.0 * s, 1.0));
        let f = fit_drift_abs(&b).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-10 && (f.mu_dt / 2.0 - 1.0).abs() < 1e-10, "{f:?}");
        assert!((f.alpha_one.mu_dt - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sublinear_drift_and_negative_sign() {
        let f = fit_drift_abs(&series(Target::Absolute, |s| (3.0 * s.powf(0.7), 1.0))).unwrap();
        assert!((f.alpha - 0.7).abs() < 0.02 && (f.mu_dt / 3.0 - 1.0).abs() < 0.05);
        let f = fit_drift_abs(&series(Target::Absolute, |s| (-0.5 * s.powf(1.1), 1.0))).unwrap();
        assert!((f.alpha - 1.1).abs() < 1e-8 && (f.mu_dt / -0.5 - 1.0).abs() < 1e-8, "{f:?}");
    }

    #[test]
    fn refit_on_predictions_is_stable() {
        let b = series(Target::Absolute, |s| (3.0 * s.powf(0.7) * (1.0 + 0.3 * (s.ln()).sin()), 1.0));
        let f = fit_drift_abs(&b).unwrap();
        let pred = b.with_bins(b.bins.iter().map(|x| Bin { mean: f.mu_dt * x.center.powf(f.alpha), ..*x }).collect());
        let g = fit_drift_abs(&pred).unwrap();
        assert!((g.alpha - f.alpha).abs() < 1e-9);
        assert!((g.mu_dt / f.mu_dt - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_centers_are_singular() {
        let mut b = series(Target::Absolute, |s| (s, 1.0));
        for x in b.bins.iter_mut() {
            x.center = 5.0;
        }
        assert!(matches!(fit_drift_abs(&b), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn exact_vol_power_laws() {
        let f = fit_vol_abs(&series(Target::Absolute, |s| (0.0, 5.0 * s))).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-12 && (f.sigma_sqrtdt - 5.0).abs() < 1e-9);
        let f = fit_vol_abs(&series(Target::Absolute, |s| (0.0, s.powf(0.739)))).unwrap();
        assert!((f.alpha - 0.739).abs() < 0.01);
        assert!((f.r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_spread_bins_are_dropped() {
        let mut b = series(Target::Absolute, |s| (0.0, s));
        for x in b.bins.iter_mut().skip(2) {
            x.std = 0.0;
        }
        assert!(matches!(fit_vol_abs(&b), Err(Error::InsufficientData { needed: 3, got: 2 })));
    }

    #[test]
    fn gibrat_ratio_case() {
        let f = fit_ratio(&series(Target::Ratio, |_| (0.05, 0.2))).unwrap();
        assert!((f.alpha_drift - 1.0).abs() < 1e-12 && (f.mu_dt - 0.05).abs() < 1e-14);
        assert!((f.alpha_vol.unwrap() - 1.0).abs() < 1e-12 && (f.sigma_sqrtdt.unwrap() - 0.2).abs() < 1e-14);
        assert_eq!(f.regime, Regime::Poor);
    }

    #[test]
    fn ratio_shapes() {
        let f = fit_ratio(&series(Target::Ratio, |s| (0.3 * s.powf(-0.25), 0.1))).unwrap();
        assert!((f.alpha_drift - 0.75).abs() < 0.01);
        let f = fit_ratio(&series(Target::Ratio, |s| (-0.02 * s.powf(0.05), 0.1))).unwrap();
        assert!(f.mu_dt < 0.0 && (f.alpha_drift - 1.05).abs() < 0.01);
        assert_eq!(f.regime, Regime::Wealthy);
    }

    #[test]
    fn mixed_signs_need_a_split() {
        let b = series(Target::Ratio, |s| (if s < 1e7 { 0.1 } else { -0.1 }, 0.1));
        assert!(matches!(fit_ratio(&b), Err(Error::RegimeMix)));
    }
}
