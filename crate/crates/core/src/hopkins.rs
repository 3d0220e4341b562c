//! Hopkins clustering-tendency statistic on 2-D points.
//!
//! Nearest-neighbour distances are raised to the dimension (squared in 2-D) so
//! that under a homogeneous Poisson null both sums are Gamma(m) and
//! `H ~ Beta(m, m)`.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Raw,
    /// `sign(x) ln(1 + |x|)` on both axes.
    SymLog,
}

fn symlog(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

fn nearest_sq(points: &[[f64; 2]], q: [f64; 2], skip: Option<usize>) -> f64 {
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let dx = p[0] - q[0];
        let dy = p[1] - q[1];
        let d = dx * dx + dy * dy;
        if d < best {
            best = d;
        }
    }
    best
}

pub fn hopkins(points: &[[f64; 2]], m: usize, seed: u64) -> Result<f64> {
    hopkins_scaled(points, m, seed, Scale::Raw)
}

pub fn hopkins_scaled(points: &[[f64; 2]], m: usize, seed: u64, scale: Scale) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("hopkins sample size m must be at least 1"));
    }
    if points.len() < 2 * m {
        return Err(Error::InsufficientData {
            needed: 2 * m,
            got: points.len(),
        });
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::invalid("hopkins points must be finite"));
    }
    let owned;
    let pts: &[[f64; 2]] = match scale {
        Scale::Raw => points,
        Scale::SymLog => {
            owned = points.iter().map(|p| [symlog(p[0]), symlog(p[1])]).collect::<Vec<_>>();
            &owned
        }
    };

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }

    let mut rng = substream(seed, Domain::Hopkins, 0);
    let chosen = sample(&mut rng, pts.len(), m).into_vec();
    let probes: Vec<[f64; 2]> = (0..m)
        .map(|_| {
            let x = lo[0] + (hi[0] - lo[0]) * rng.random::<f64>();
            let y = lo[1] + (hi[1] - lo[1]) * rng.random::<f64>();
            [x, y]
        })
        .collect();

    // Per-item distances are collected in order, then summed serially, so the
    // result does not depend on the thread count.
    let u: Vec<f64> = probes.par_iter().map(|&q| nearest_sq(pts, q, None)).collect();
    let w: Vec<f64> = chosen.par_iter().map(|&i| nearest_sq(pts, pts[i], Some(i))).collect();
    let su: f64 = u.iter().sum();
    let sw: f64 = w.iter().sum();
    if sw == 0.0 {
        return Ok(1.0);
    }
    Ok(su / (su + sw))
}

/// One-sided p-value toward clustering under the `Beta(m, m)` null.
pub fn hopkins_p_value(h: f64, m: usize) -> Result<f64> {
    let beta = Beta::new(m as f64, m as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(beta.sf(h).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HopkinsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub m: usize,
}

pub fn hopkins_test(points: &[[f64; 2]], m: usize, seed: u64) -> Result<HopkinsResult> {
    hopkins_test_scaled(points, m, seed, Scale::Raw)
}

pub fn hopkins_test_scaled(points: &[[f64; 2]], m: usize, seed: u64, scale: Scale) -> Result<HopkinsResult> {
    let statistic = hopkins_scaled(points, m, seed, scale)?;
    Ok(HopkinsResult {
        statistic,
        p_value: hopkins_p_value(statistic, m)?,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn uniform(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [r.random::<f64>() * 3.0, r.random::<f64>()]).collect()
    }

    fn blobs(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let off = if i % 2 == 0 { 0.0 } else { 20.0 };
                let x: f64 = StandardNormal.sample(&mut r);
                let y: f64 = StandardNormal.sample(&mut r);
                [x + off, y]
            })
            .collect()
    }

    #[test]
    fn identical_points_give_one() {
        let pts = vec![[3.0, -1.0]; 50];
        assert_eq!(hopkins(&pts, 5, 1).unwrap(), 1.0);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![[0.0, 0.0]; 9];
        assert!(matches!(hopkins(&pts, 5, 1), Err(Error::InsufficientData { needed: 10, got: 9 })));
    }

    #[test]
    fn median_of_null_is_half() {
        assert!((hopkins_p_value(0.5, 100).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deterministic_to_the_bit() {
        let pts = uniform(2000, 3);
        let a = hopkins(&pts, 50, 11).unwrap();
        let b = hopkins(&pts, 50, 11).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, hopkins(&pts, 50, 12).unwrap());
    }

    #[test]
    fn uniform_box_is_near_half() {
        let pts = uniform(10_000, 7);
        let inside = (0..100)
            .filter(|&s| {
                let h = hopkins(&pts, 100, s).unwrap();
                (0.4..=0.6).contains(&h)
            })
            .count();
        assert!(inside >= 95, "{inside}");
    }

    #[test]
    fn separated_blobs_cluster() {
        let pts = blobs(10_000, 9);
        let hits = (0..100).filter(|&s| hopkins(&pts, 100, s).unwrap() > 0.75).count();
        assert!(hits >= 95, "{hits}");
        let t = hopkins_test(&pts, 100, 1).unwrap();
        assert!(t.p_value < 1e-3, "{t:?}");
    }

    #[test]
    fn null_p_values_are_uniform() {
        let mut ps: Vec<f64> = (0..200)
            .map(|s| hopkins_test(&uniform(10_000, 1000 + s), 100, s).unwrap().p_value)
            .collect();
        ps.sort_by(f64::total_cmp);
        let n = ps.len() as f64;
        let ks = ps
            .iter()
            .enumerate()
            .map(|(i, &p)| ((i as f64 + 1.0) / n - p).max(p - i as f64 / n))
            .fold(0.0, f64::max);
        assert!(ks < 0.1, "ks {ks}");
    }

    #[test]
    fn symlog_variant_runs_on_satoshi_scale() {
        let pts: Vec<[f64; 2]> = uniform(1000, 5).iter().map(|p| [p[0] * 1e12, (p[1] - 0.5) * 1e10]).collect();
        let h = hopkins_scaled(&pts, 20, 1, Scale::SymLog).unwrap();
        assert!((0.0..=1.0).contains(&h));
    }
}
