//! Normal-tail special functions used by the truncated-normal likelihood.
//!
//! Everything here is expressed through the standardized truncation point `a`
//! and the excess `D = X - a` of a standard normal `X` conditioned on `X > a`.
//! Far in the upper tail the excess is almost exponential with rate `a`, and the
//! naive formulas lose all precision; the continued fraction and the series in
//! `1/a^2` below keep the relative error near machine precision there.

use libm::erfc;
use std::f64::consts::SQRT_2;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// The mean excess loses digits to cancellation in closed form, so the
// continued fraction takes over early; it needs more depth as `a` shrinks.
const CF_THRESHOLD: f64 = 0.5;
// Above this the a^2/2 term of the closed-form scaled tail cancels too much.
const LN_SF_CF_THRESHOLD: f64 = 5.0;
const SERIES_THRESHOLD: f64 = 25.0;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `Q(a) = P(X > a)`.
pub fn normal_sf(a: f64) -> f64 {
    0.5 * erfc(a / SQRT_2)
}

/// `1/(a + 2/(a + 3/(a + ...)))`, the mean excess `E[X - a | X > a]` for large `a`.
fn excess_cf(a: f64) -> f64 {
    let depth = 40 + (1600.0 / (a * a)) as usize;
    let mut f = a;
    for j in (1..depth).rev() {
        f = a + (j as f64 + 1.0) / f;
    }
    1.0 / f
}

/// Mean excess `E[X - a | X > a]` (equals the inverse Mills ratio minus `a`).
pub fn mean_excess(a: f64) -> f64 {
    if a > CF_THRESHOLD {
        excess_cf(a)
    } else {
        let q = normal_sf(a);
        normal_pdf(a) / q - a
    }
}

/// `ln Q(a) + a^2/2`, finite for every `a`.
pub fn scaled_ln_sf(a: f64) -> f64 {
    if a > LN_SF_CF_THRESHOLD {
        -LN_SQRT_2PI - (a + excess_cf(a)).ln()
    } else {
        normal_sf(a).ln() + 0.5 * a * a
    }
}

/// `ln Q(a)`.
pub fn ln_sf(a: f64) -> f64 {
    scaled_ln_sf(a) - 0.5 * a * a
}

/// Raw moments `E[D^k]`, `k = 1..=4`, of the excess over a truncation at `a`.
pub fn excess_moments(a: f64) -> [f64; 4] {
    if a > SERIES_THRESHOLD {
        return excess_moments_series(a);
    }
    let m1 = mean_excess(a);
    let m2 = 1.0 - a * m1;
    let m3 = 2.0 * m1 - a * m2;
    let m4 = 3.0 * m2 - a * m3;
    [m1, m2, m3, m4]
}

// With u = a*D the excess density is proportional to exp(-u - eps*u^2/2),
// eps = 1/a^2; expanding the Gaussian factor gives moments of an exponential.
fn excess_moments_series(a: f64) -> [f64; 4] {
    let eps = 1.0 / (a * a);
    let terms = 16;
    let mut numer = [0.0f64; 5];
    for (k, slot) in numer.iter_mut().enumerate() {
        let mut coef = 1.0; // (-eps/2)^j / j!
        let mut sum = 0.0;
        for j in 0..terms {
            let order = k + 2 * j;
            sum += coef * factorial(order);
            coef *= -eps / 2.0 / (j as f64 + 1.0);
        }
        *slot = sum;
    }
    let mut out = [0.0; 4];
    let mut scale = 1.0;
    for k in 1..=4 {
        scale *= a;
        out[k - 1] = numer[k] / numer[0] / scale;
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Upper tail of the chi-squared distribution with one degree of freedom.
pub fn chi2_1_sf(w: f64) -> f64 {
    if w <= 0.0 {
        1.0
    } else {
        erfc((w / 2.0).sqrt())
    }
}

/// Two-sided standard normal p-value for a z score.
pub fn two_sided_normal_p(z: f64) -> f64 {
    erfc(z.abs() / SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments_by_quadrature(a: f64) -> [f64; 4] {
        // Simpson on the excess density exp(-a d - d^2/2) out to where it is negligible.
        let upper = if a > 0.0 { 40.0 / a.max(1.0) + 10.0 } else { -a + 12.0 };
        let n = 200_000;
        let h = upper / n as f64;
        let mut acc = [0.0f64; 5];
        for i in 0..=n {
            let d = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let f = (-a * d - 0.5 * d * d).exp() * w;
            let mut p = 1.0;
            for slot in acc.iter_mut() {
                *slot += f * p;
                p *= d;
            }
        }
        [acc[1] / acc[0], acc[2] / acc[0], acc[3] / acc[0], acc[4] / acc[0]]
    }

    #[test]
    fn moments_match_quadrature_across_regimes() {
        for &a in &[-6.0, -1.0, 0.0, 0.5, 3.9, 4.1, 10.0, 24.0, 26.0, 80.0] {
            let got = excess_moments(a);
            let want = moments_by_quadrature(a);
            for k in 0..4 {
                let rel = (got[k] - want[k]).abs() / want[k].abs();
                assert!(rel < 1e-7, "a={a} k={} got {} want {}", k + 1, got[k], want[k]);
            }
        }
    }

    #[test]
    fn cf_and_direct_agree_at_switch() {
        let a = CF_THRESHOLD;
        let direct = normal_pdf(a) / normal_sf(a) - a;
        assert!((excess_cf(a) - direct).abs() < 1e-10);
        let direct_ln = normal_sf(a).ln() + 0.5 * a * a;
        assert!((scaled_ln_sf(a + 1e-12) - direct_ln).abs() < 1e-10);
        // reference value of E[X - 1 | X > 1]
        assert!((mean_excess(1.0) - 0.525_135_276_160_981_2).abs() < 1e-15);
    }

    #[test]
    fn ln_sf_far_tail_is_finite() {
        let v = ln_sf(60.0);
        assert!(v.is_finite());
        // Q(a) ~ phi(a)/a
        let approx = -0.5 * 3600.0 - LN_SQRT_2PI - 60f64.ln();
        assert!((v - approx).abs() < 1e-3);
    }

    #[test]
    fn chi2_half_point() {
        assert!((chi2_1_sf(3.841_458_820_694_124) - 0.05).abs() < 1e-9);
        assert_eq!(chi2_1_sf(0.0), 1.0);
    }
}
