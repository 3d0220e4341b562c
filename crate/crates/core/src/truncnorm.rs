//! Maximum likelihood for a normal law truncated to `y >= 0`.
//!
//! The density is written in natural parameters, `f(y) ∝ exp(-beta*y - gamma*y^2)`
//! with `gamma > 0`, so the log-likelihood depends on the data only through
//! `(n, Σy, Σy²)` and is concave. The exponential law is the `gamma -> 0` edge
//! of the family; when the sample is at least as dispersed as an exponential
//! (moment ratio `n Σy² / (Σy)² >= 2`) the supremum sits on that edge and no
//! interior maximizer exists.

use crate::error::{Error, Result};
use crate::special::{excess_moments, mean_excess, scaled_ln_sf, LN_SQRT_2PI};

pub const MAX_ITER: usize = 500;
const REL_TOL: f64 = 1e-12;
const BOUNDARY_REL_LOSS: f64 = 1e-10;

/// Sufficient statistics of non-negative excesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessStats {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl ExcessStats {
    pub fn from_excesses(ys: impl IntoIterator<Item = f64>) -> Self {
        let mut n = 0;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for y in ys {
            n += 1;
            sum += y;
            sum_sq += y * y;
        }
        ExcessStats { n, sum, sum_sq }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// `n Σy² / (Σy)²`; equals 2 in expectation for exponential data.
    pub fn moment_ratio(&self) -> f64 {
        self.n as f64 * self.sum_sq / (self.sum * self.sum)
    }

    fn scaled(&self) -> (ExcessStats, f64) {
        let ybar = self.mean();
        (
            ExcessStats {
                n: self.n,
                sum: self.n as f64,
                sum_sq: self.sum_sq / (ybar * ybar),
            },
            ybar,
        )
    }
}

/// Truncated normal in natural parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormal {
    pub beta: f64,
    pub gamma: f64,
}

impl TruncNormal {
    pub fn from_location_scale(mu: f64, sigma: f64) -> Self {
        let gamma = 1.0 / (2.0 * sigma * sigma);
        TruncNormal {
            beta: -mu / (sigma * sigma),
            gamma,
        }
    }

    pub fn sigma(&self) -> f64 {
        (2.0 * self.gamma).sqrt().recip()
    }

    pub fn mu(&self) -> f64 {
        -self.beta / (2.0 * self.gamma)
    }

    /// Standardized truncation point `(0 - mu) / sigma`.
    pub fn a(&self) -> f64 {
        self.beta * self.sigma()
    }

    pub fn ln_norm(&self) -> f64 {
        self.sigma().ln() + LN_SQRT_2PI + scaled_ln_sf(self.a())
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        -self.beta * y - self.gamma * y * y - self.ln_norm()
    }

    /// `ln P(Y > y)`.
    pub fn ln_sf(&self, y: f64) -> f64 {
        let a = self.a();
        let delta = y / self.sigma();
        scaled_ln_sf(a + delta) - scaled_ln_sf(a) - self.beta * y - 0.5 * delta * delta
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.cdf_fn()(y)
    }

    /// `ln_pdf` with the normalizer evaluated once.
    pub fn ln_pdf_fn(&self) -> impl Fn(f64) -> f64 {
        let (beta, gamma, norm) = (self.beta, self.gamma, self.ln_norm());
        move |y| -beta * y - gamma * y * y - norm
    }

    /// `cdf` with the truncation term evaluated once.
    pub fn cdf_fn(&self) -> impl Fn(f64) -> f64 {
        let (a, sigma, beta) = (self.a(), self.sigma(), self.beta);
        let base = scaled_ln_sf(a);
        move |y| {
            if y <= 0.0 {
                return 0.0;
            }
            let delta = y / sigma;
            -(scaled_ln_sf(a + delta) - base - beta * y - 0.5 * delta * delta).exp_m1()
        }
    }

    pub fn loglik(&self, stats: &ExcessStats) -> f64 {
        -self.beta * stats.sum - self.gamma * stats.sum_sq - stats.n as f64 * self.ln_norm()
    }

    /// Rescale for data multiplied by `c`.
    fn rescaled(&self, c: f64) -> Self {
        TruncNormal {
            beta: self.beta / c,
            gamma: self.gamma / (c * c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncFit {
    Interior {
        dist: TruncNormal,
        loglik: f64,
        iterations: usize,
    },
    /// Supremum on the exponential edge. `proxy` is a member whose
    /// log-likelihood is within a relative `1e-10` of the supremum.
    Boundary {
        rate: f64,
        loglik: f64,
        proxy: TruncNormal,
    },
}

impl TruncFit {
    pub fn loglik(&self) -> f64 {
        match self {
            TruncFit::Interior { loglik, .. } | TruncFit::Boundary { loglik, .. } => *loglik,
        }
    }

    pub fn dist(&self) -> TruncNormal {
        match self {
            TruncFit::Interior { dist, .. } => *dist,
            TruncFit::Boundary { proxy, .. } => *proxy,
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, TruncFit::Boundary { .. })
    }
}

/// Exponential log-likelihood at its MLE, `-n ln(ybar) - n`.
pub fn exponential_loglik(stats: &ExcessStats) -> f64 {
    let n = stats.n as f64;
    -n * stats.mean().ln() - n
}

struct Local {
    value: f64,
    grad: [f64; 2],
    // negated Hessian, packed (h11, h12, h22)
    info: [f64; 3],
}

fn central_moments(a: f64) -> (f64, f64, f64, f64) {
    if a <= 0.0 {
        // Raw moments of X | X > a stay O(1) here.
        let lam = crate::special::normal_pdf(a) / crate::special::normal_sf(a);
        let x1 = lam;
        let x2 = 1.0 + a * lam;
        let x3 = 2.0 * x1 + a * a * lam;
        let x4 = 3.0 * x2 + a * a * a * lam;
        let k2 = x2 - x1 * x1;
        let k3 = x3 - 3.0 * x1 * x2 + 2.0 * x1.powi(3);
        let k4 = x4 - 4.0 * x1 * x3 + 6.0 * x1 * x1 * x2 - 3.0 * x1.powi(4);
        (mean_excess(a), k2, k3, k4)
    } else {
        let [m1, m2, m3, m4] = excess_moments(a);
        let k2 = m2 - m1 * m1;
        let k3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
        let k4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
        (m1, k2, k3, k4)
    }
}

fn local(dist: &TruncNormal, stats: &ExcessStats) -> Local {
    let n = stats.n as f64;
    let v = dist.sigma();
    let (m1, k2, k3, k4) = central_moments(dist.a());
    let ey = v * m1;
    let ey2 = v * v * (k2 + m1 * m1);
    let var_y = v * v * k2;
    let cov = v.powi(3) * (k3 + 2.0 * m1 * k2);
    let var_y2 = v.powi(4) * (4.0 * m1 * m1 * k2 + 4.0 * m1 * k3 + k4 - k2 * k2);
    Local {
        value: dist.loglik(stats),
        grad: [-stats.sum + n * ey, -stats.sum_sq + n * ey2],
        info: [n * var_y, n * cov, n * var_y2],
    }
}

/// Maximize the truncated-normal likelihood of the excesses.
pub fn fit_excess(stats: &ExcessStats) -> Result<TruncFit> {
    if stats.n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: stats.n,
        });
    }
    if stats.sum <= 0.0 {
        return Err(Error::DegenerateTail);
    }
    let (scaled, ybar) = stats.scaled();
    let ratio = scaled.moment_ratio();
    let n = scaled.n as f64;

    if ratio >= 2.0 {
        let ll_exp = exponential_loglik(&scaled);
        // ll(1, g) - ll_exp ≈ -g (Σy² - 2n) for small g
        let excess = (scaled.sum_sq - 2.0 * n).max(1e-3 * n);
        let gamma = BOUNDARY_REL_LOSS * ll_exp.abs().max(1.0) / excess;
        let proxy = TruncNormal { beta: 1.0, gamma }.rescaled(ybar);
        return Ok(TruncFit::Boundary {
            rate: 1.0 / ybar,
            loglik: exponential_loglik(stats),
            proxy,
        });
    }

    // Start from the untruncated moments of the scaled excesses.
    let var = (scaled.sum_sq / n - 1.0).max(1e-12);
    let mut cur = TruncNormal::from_location_scale(1.0, var.sqrt());
    let mut here = local(&cur, &scaled);
    let mut best = (cur, here.value);

    for it in 0..MAX_ITER {
        let [h11, h12, h22] = here.info;
        let det = h11 * h22 - h12 * h12;
        let (db, dg) = if det > 0.0 && det.is_finite() {
            (
                (h22 * here.grad[0] - h12 * here.grad[1]) / det,
                (h11 * here.grad[1] - h12 * here.grad[0]) / det,
            )
        } else {
            // fall back to a scaled gradient step
            let s = 1.0 / (h11.abs() + h22.abs()).max(1.0);
            (s * here.grad[0], s * here.grad[1])
        };
        let decrement = db * here.grad[0] + dg * here.grad[1];
        if decrement.abs() * 0.5 <= REL_TOL * here.value.abs().max(1.0) {
            let loglik = here.value - n * ybar.ln();
            return Ok(TruncFit::Interior {
                dist: cur.rescaled(ybar),
                loglik,
                iterations: it,
            });
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = TruncNormal {
                beta: cur.beta + step * db,
                gamma: cur.gamma + step * dg,
            };
            if cand.gamma > 0.0 && cand.beta.is_finite() {
                let val = cand.loglik(&scaled);
                if val.is_finite() && val >= here.value + 1e-4 * step * decrement.min(0.0) {
                    cur = cand;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            // no ascent left in floating point; accept if already flat
            if decrement.abs() * 0.5 <= 1e-9 * here.value.abs().max(1.0) {
                return Ok(TruncFit::Interior {
                    dist: cur.rescaled(ybar),
                    loglik: here.value - n * ybar.ln(),
                    iterations: it,
                });
            }
            break;
        }
        here = local(&cur, &scaled);
        if here.value > best.1 {
            best = (cur, here.value);
        }
    }

    let dist = best.0.rescaled(ybar);
    Err(Error::FitFailure {
        iterations: MAX_ITER,
        best_mu: dist.mu(),
        best_sigma: dist.sigma(),
        best_loglik: best.1 - n * ybar.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_loglik(ys: &[f64], mu: f64, sigma: f64) -> f64 {
        use statrs::distribution::{Continuous, ContinuousCDF, Normal};
        let nd = Normal::new(mu, sigma).unwrap();
        let tail = 1.0 - nd.cdf(0.0);
        ys.iter().map(|&y| nd.pdf(y).ln() - tail.ln()).sum()
    }

    fn sample(mu: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(mu, sigma).unwrap();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let y: f64 = nd.sample(&mut rng);
            if y >= 0.0 {
                out.push(y);
            }
        }
        out
    }

    #[test]
    fn loglik_matches_direct_density() {
        let ys = sample(0.5, 1.3, 200, 1);
        let stats = ExcessStats::from_excesses(ys.iter().copied());
        let d = TruncNormal::from_location_scale(0.5, 1.3);
        let direct = brute_loglik(&ys, 0.5, 1.3);
        assert!((d.loglik(&stats) - direct).abs() < 1e-9 * direct.abs());
    }

    #[test]
    fn recovers_parameters_and_beats_neighbours() {
        let ys = sample(1.0, 0.8, 20_000, 7);
        let stats = ExcessStats::from_excesses(ys.iter().copied());
        let fit = fit_excess(&stats).unwrap();
        let d = fit.dist();
        assert!(!fit.is_boundary());
        assert!((d.mu() - 1.0).abs() < 0.05, "mu {}", d.mu());
        assert!((d.sigma() - 0.8).abs() < 0.05, "sigma {}", d.sigma());
        let best = brute_loglik(&ys, d.mu(), d.sigma());
        assert!((best - fit.loglik()).abs() < 1e-7 * best.abs());
        for (dm, ds) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
            assert!(brute_loglik(&ys, d.mu() + dm, d.sigma() + ds) <= best);
        }
    }

    #[test]
    fn exponential_data_hits_boundary() {
        // Weibull quantiles with shape < 1 are more dispersed than exponential.
        let n = 500;
        let ys: Vec<f64> = (0..n)
            .map(|i| (-(1.0 - (i as f64 + 0.5) / n as f64).ln()).powf(1.3))
            .collect();
        let stats = ExcessStats::from_excesses(ys.iter().copied());
        assert!(stats.moment_ratio() > 2.0);
        let fit = fit_excess(&stats).unwrap();
        assert!(fit.is_boundary());
        let proxy_ll = fit.dist().loglik(&stats);
        let sup = exponential_loglik(&stats);
        assert!((proxy_ll - sup).abs() <= 1e-9 * sup.abs());
        assert!(proxy_ll <= sup + 1e-9);
    }

    #[test]
    fn near_boundary_converges() {
        // mixture just lighter than exponential
        let n = 1000;
        let mut ys: Vec<f64> = (0..n)
            .map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln())
            .collect();
        let stats0 = ExcessStats::from_excesses(ys.iter().copied());
        // shrink the top until the ratio drops just below 2
        ys.sort_by(f64::total_cmp);
        let mut k = n - 1;
        let mut stats = stats0;
        while stats.moment_ratio() >= 1.99 {
            ys[k] *= 0.9;
            k = if k == 0 { n - 1 } else { k - 1 };
            stats = ExcessStats::from_excesses(ys.iter().copied());
        }
        let fit = fit_excess(&stats).unwrap();
        assert!(!fit.is_boundary());
        assert!(fit.loglik() >= exponential_loglik(&stats) - 1e-9);
    }

    #[test]
    fn cdf_is_monotone_and_bounded() {
        let d = TruncNormal::from_location_scale(-3.0, 0.7);
        let mut prev = 0.0;
        for i in 1..200 {
            let c = d.cdf(i as f64 * 0.05);
            assert!(c >= prev && c <= 1.0);
            prev = c;
        }
    }
}
