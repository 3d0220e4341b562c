use super::{check_positive, ks_sorted, tail_sorted, TailFitResult, TailParams};
use crate::error::{Error, Result};
use crate::special::{normal_cdf, LN_SQRT_2PI};
use crate::truncnorm::{fit_excess, ExcessStats, TruncFit};

/// Log-normal MLE on `x >= xmin`, renormalized by the mass above `xmin`.
/// With no `xmin` the fit is untruncated and closed-form.
pub fn fit_lognormal(data: &[f64], xmin: Option<f64>) -> Result<TailFitResult> {
    check_positive(data)?;
    match xmin {
        None => untruncated(data),
        Some(xmin) => {
            if !(xmin > 0.0 && xmin.is_finite()) {
                return Err(Error::invalid("xmin must be positive"));
            }
            truncated(&tail_sorted(data, xmin), xmin)
        }
    }
}

fn untruncated(data: &[f64]) -> Result<TailFitResult> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let logs: Vec<f64> = data.iter().map(|x| x.ln()).collect();
    let m = logs.iter().sum::<f64>() / nf;
    let var = logs.iter().map(|l| (l - m) * (l - m)).sum::<f64>() / nf;
    if !(var > 0.0) {
        return Err(Error::DegenerateTail);
    }
    let v = var.sqrt();
    let log_likelihood = -nf * (LN_SQRT_2PI + v.ln() + 0.5) - logs.iter().sum::<f64>();
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ks_distance = ks_sorted(&sorted, |x| normal_cdf((x.ln() - m) / v));
    Ok(TailFitResult {
        params: TailParams::LogNormal { m, v },
        xmin: 0.0,
        n_tail: n,
        log_likelihood,
        ks_distance,
        at_boundary: false,
    })
}

fn truncated(tail: &[f64], xmin: f64) -> Result<TailFitResult> {
    let distinct = tail.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!tail.is_empty());
    if distinct < 3 {
        return Err(Error::InsufficientData { needed: 3, got: distinct });
    }
    let lx = xmin.ln();
    let ys: Vec<f64> = tail.iter().map(|x| (x / xmin).ln()).collect();
    let stats = ExcessStats::from_excesses(ys.iter().copied());
    let fit = fit_excess(&stats)?;
    let dist = fit.dist();
    let sum_log: f64 = tail.iter().map(|x| x.ln()).sum();
    let ks_distance = ks_sorted(&ys, dist.cdf_fn());
    Ok(TailFitResult {
        params: TailParams::LogNormal {
            m: lx + dist.mu(),
            v: dist.sigma(),
        },
        xmin,
        n_tail: tail.len(),
        log_likelihood: fit.loglik() - sum_log,
        ks_distance,
        at_boundary: matches!(fit, TruncFit::Boundary { .. }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, LogNormal};
    use std::f64::consts::E;

    fn params(f: &TailFitResult) -> (f64, f64) {
        match f.params {
            TailParams::LogNormal { m, v } => (m, v),
            _ => unreachable!(),
        }
    }

    // Independent truncated log-normal log-likelihood: Gaussian density of ln x
    // from its sums, mass above xmin from the statrs normal law.
    struct Sums {
        n: f64,
        l1: f64,
        l2: f64,
    }

    fn sums(tail: &[f64]) -> Sums {
        Sums {
            n: tail.len() as f64,
            l1: tail.iter().map(|x| x.ln()).sum(),
            l2: tail.iter().map(|x| x.ln() * x.ln()).sum(),
        }
    }

    fn oracle_ll(s: &Sums, xmin: f64, m: f64, v: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let mass = Normal::new(m, v).unwrap().sf(xmin.ln());
        let quad = s.l2 - 2.0 * m * s.l1 + s.n * m * m;
        -quad / (2.0 * v * v) - s.n * (v.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln() + mass.ln()) - s.l1
    }

    #[test]
    fn untruncated_two_points() {
        let f = fit_lognormal(&[1.0, E * E], None).unwrap();
        let (m, v) = params(&f);
        assert!((m - 1.0).abs() < 1e-15 && (v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_distinct() {
        assert!(matches!(
            fit_lognormal(&[2.0, 2.0, 3.0, 3.0], Some(1.0)),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn truncated_fit_beats_grid_oracle() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let law = LogNormal::new(0.0, 2.0).unwrap();
        let data: Vec<f64> = (0..200_000).map(|_| law.sample(&mut r)).filter(|&x| x >= 1.0).take(100_000).collect();
        let f = fit_lognormal(&data, Some(1.0)).unwrap();
        let (m, v) = params(&f);
        let tail = tail_sorted(&data, 1.0);
        let s = sums(&tail);
        let ll = oracle_ll(&s, 1.0, m, v);
        assert!((ll - f.log_likelihood).abs() < 1e-8 * ll.abs());

        // 200x200 lattice around the truth
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..200 {
            for j in 0..200 {
                let gm = -1.0 + 2.0 * i as f64 / 199.0;
                let gv = 1.5 + 1.0 * j as f64 / 199.0;
                let l = oracle_ll(&s, 1.0, gm, gv);
                if l > best.0 {
                    best = (l, gm, gv);
                }
            }
        }
        assert!(f.log_likelihood >= best.0 - 1e-6 * best.0.abs());
        assert!(f.log_likelihood >= best.0);
        // within one lattice cell of the oracle optimum
        assert!((m - best.1).abs() <= 2.0 / 199.0 + 1e-9, "m {m} vs {}", best.1);
        assert!((v - best.2).abs() <= 1.0 / 199.0 + 1e-9, "v {v} vs {}", best.2);
    }

    #[test]
    fn location_shifts_with_scale() {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let law = LogNormal::new(18.0, 2.5).unwrap();
        let data: Vec<f64> = (0..5000).map(|_| law.sample(&mut r)).collect();
        let c = 37.0_f64;
        let scaled: Vec<f64> = data.iter().map(|x| x * c).collect();
        let f0 = fit_lognormal(&data, Some(1e7)).unwrap();
        let f1 = fit_lognormal(&scaled, Some(1e7 * c)).unwrap();
        let ((m0, v0), (m1, v1)) = (params(&f0), params(&f1));
        assert!((m1 - m0 - c.ln()).abs() < 1e-7, "{m0} {m1}");
        assert!((v1 - v0).abs() < 1e-7);
    }

    #[test]
    fn exponential_tail_reports_boundary() {
        // Weibull quantiles with shape below one are over-dispersed in log space
        let n = 500;
        let data: Vec<f64> = (1..=n)
            .map(|i| {
                let u = (i as f64 - 0.5) / n as f64;
                (1e6f64.ln() + (-(1.0 - u).ln()).powf(1.3)).exp()
            })
            .collect();
        let f = fit_lognormal(&data, Some(1e6)).unwrap();
        assert!(f.at_boundary);
        assert!(f.log_likelihood.is_finite() && f.ks_distance <= 1.0);
    }
}
