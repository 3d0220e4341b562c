use chrono::Duration;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{InitialLaw, Model, RegimeMode, RegimeParams, SimConfig};
use crate::error::{Error, Result};
use crate::panel::{BalanceSnapshot, PanelRow, TransitionPanel};
use crate::rng::{substream, Domain};

/// Largest balance kept; beyond it a path is flagged as overflowed.
pub const MAX_BALANCE: f64 = 9_007_199_254_740_992.0; // 2^53

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SimReport {
    pub n_users: usize,
    pub overflowed: usize,
    pub absorbed: usize,
}

fn draw_initial(law: &InitialLaw, rng: &mut ChaCha8Rng) -> f64 {
    match *law {
        InitialLaw::LogNormal { m, v } => {
            let z: f64 = StandardNormal.sample(rng);
            (m + v * z).exp()
        }
        InitialLaw::Pareto { a, xmin } => {
            let u: f64 = 1.0 - rng.random::<f64>();
            xmin * u.powf(-1.0 / (a - 1.0))
        }
        InitialLaw::PointMass { value } => value,
    }
}

#[inline]
fn pow_or_zero(s: f64, alpha: f64) -> f64 {
    if s > 0.0 {
        s.powf(alpha)
    } else {
        0.0
    }
}

/// One user's balances at each emit step index. `None` on overflow.
fn user_path(cfg: &SimConfig, times: &[u32], emit_steps: &[usize], index: u64) -> Option<Vec<f64>> {
    let mut rng = substream(cfg.seed, Domain::SimUser, index);
    let s0 = draw_initial(&cfg.initial, &mut rng);
    let mut out = Vec::with_capacity(emit_steps.len());
    let mut s = s0;
    match cfg.model {
        Model::GbmExact => {
            let mut prev = 0u32;
            for &k in times {
                if k > prev {
                    let t0 = prev as f64;
                    let dt = (k - prev) as f64;
                    let mu = cfg.poor.mu.at(t0);
                    let sigma = cfg.poor.sigma.at(t0);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    s *= ((mu - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp();
                    if !(s <= MAX_BALANCE) {
                        return None;
                    }
                    prev = k;
                }
                out.push(s);
            }
        }
        Model::Euler => {
            let h = cfg.step_days;
            let sqrt_h = h.sqrt();
            let fixed_wealthy = match (cfg.s_star, cfg.regime_mode) {
                (Some(star), RegimeMode::Initial) => Some(s0 >= star),
                _ => None,
            };
            let mut step = 0usize;
            for &k in emit_steps {
                while step < k {
                    if s > 0.0 {
                        let t = step as f64 * h;
                        let wealthy = fixed_wealthy.unwrap_or_else(|| cfg.s_star.is_some_and(|star| s >= star));
                        let p: &RegimeParams = match (&cfg.wealthy, wealthy) {
                            (Some(w), true) => w,
                            _ => &cfg.poor,
                        };
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let drift = pow_or_zero(s, p.alpha_drift.at(t)) * p.mu.at(t) * h;
                        let diffusion = pow_or_zero(s, p.alpha_vol.at(t)) * p.sigma.at(t) * sqrt_h * z;
                        s += drift + diffusion;
                        if !(s <= MAX_BALANCE) {
                            return None;
                        }
                        if s <= 0.0 {
                            s = 0.0;
                        }
                    }
                    step += 1;
                }
                out.push(s);
            }
        }
    }
    Some(out)
}

fn emit_steps(cfg: &SimConfig, times: &[u32]) -> Vec<usize> {
    times.iter().map(|&t| (t as f64 / cfg.step_days).round() as usize).collect()
}

/// Balances of every user at each time, in user order; overflowed users are `None`.
pub fn simulate_paths(cfg: &SimConfig, times: &[u32]) -> Result<Vec<Option<Vec<f64>>>> {
    cfg.validate()?;
    if times.iter().any(|&t| t > cfg.horizon_days) || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("emit times must be increasing and within the horizon"));
    }
    if cfg.model == Model::Euler {
        let off_grid = times.iter().any(|&t| {
            let k = t as f64 / cfg.step_days;
            (k - k.round()).abs() > 1e-9 * k.max(1.0)
        });
        if off_grid {
            return Err(Error::invalid("emit times must fall on integration steps"));
        }
    }
    let steps = emit_steps(cfg, times);
    Ok((0..cfg.n_users as u64)
        .into_par_iter()
        .map(|i| user_path(cfg, times, &steps, i))
        .collect())
}

pub fn user_id(index: usize, n_users: usize) -> String {
    let width = (n_users.saturating_sub(1)).to_string().len().max(7);
    format!("u{index:0width$}")
}

fn panel_from_paths(cfg: &SimConfig, paths: Vec<Option<Vec<f64>>>) -> (TransitionPanel, SimReport) {
    let mut report = SimReport {
        n_users: cfg.n_users,
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(paths.len());
    for (i, p) in paths.into_iter().enumerate() {
        match p {
            Some(v) => {
                if v[1] == 0.0 {
                    report.absorbed += 1;
                }
                rows.push(PanelRow::new(user_id(i, cfg.n_users), v[0], v[1]));
            }
            None => report.overflowed += 1,
        }
    }
    if report.overflowed > 0 {
        log::warn!("{} simulated users overflowed and were excluded", report.overflowed);
    }
    (
        TransitionPanel {
            t0: cfg.start_date,
            dt_days: cfg.horizon_days,
            rows,
        },
        report,
    )
}

/// Run the configured model from start to horizon.
pub fn simulate(cfg: &SimConfig) -> Result<(TransitionPanel, SimReport)> {
    let paths = simulate_paths(cfg, &[0, cfg.horizon_days])?;
    Ok(panel_from_paths(cfg, paths))
}

/// `s1 = s0 exp((mu - sigma^2/2) T + sigma sqrt(T) Z)`, no time stepping.
pub fn simulate_gbm_exact(n_users: usize, s0_law: InitialLaw, mu: f64, sigma: f64, horizon_days: u32, seed: u64) -> Result<TransitionPanel> {
    let mut cfg = SimConfig::new(n_users, s0_law, RegimeParams::gibrat(mu, sigma), horizon_days);
    cfg.model = Model::GbmExact;
    cfg.step_days = horizon_days as f64;
    cfg.seed = seed;
    Ok(simulate(&cfg)?.0)
}

/// Euler-Maruyama on `dS = S^a1 mu dt + S^a2 sigma dW`, absorbed at zero.
pub fn simulate_power_sde(
    n_users: usize,
    s0_law: InitialLaw,
    params: RegimeParams,
    step_days: f64,
    horizon_days: u32,
    seed: u64,
) -> Result<(TransitionPanel, SimReport)> {
    let mut cfg = SimConfig::new(n_users, s0_law, params, horizon_days);
    cfg.step_days = step_days;
    cfg.seed = seed;
    simulate(&cfg)
}

/// Two-regime process: poor parameters below `s_star`, wealthy at or above.
pub fn simulate_two_regime(cfg: &SimConfig) -> Result<(TransitionPanel, SimReport)> {
    if cfg.model != Model::Euler {
        return Err(Error::invalid("two-regime simulation needs the euler model"));
    }
    simulate(cfg)
}

/// Integer-satoshi snapshots at each emit time (rounded half away from zero).
pub fn snapshot_series(cfg: &SimConfig, emit_days: &[u32]) -> Result<(Vec<BalanceSnapshot>, SimReport)> {
    let paths = simulate_paths(cfg, emit_days)?;
    let mut report = SimReport {
        n_users: cfg.n_users,
        ..Default::default()
    };
    let mut columns: Vec<Vec<(String, u64)>> = vec![Vec::with_capacity(paths.len()); emit_days.len()];
    for (i, p) in paths.into_iter().enumerate() {
        let Some(v) = p else {
            report.overflowed += 1;
            continue;
        };
        if v.last() == Some(&0.0) {
            report.absorbed += 1;
        }
        let id = user_id(i, cfg.n_users);
        for (col, x) in columns.iter_mut().zip(v) {
            col.push((id.clone(), x.round() as u64));
        }
    }
    let snaps = columns
        .into_iter()
        .zip(emit_days)
        .map(|(records, &t)| BalanceSnapshot::new(cfg.start_date + Duration::days(t as i64), records))
        .collect::<Result<Vec<_>>>()?;
    Ok((snaps, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub steps: usize,
    pub step_days: f64,
    pub mean_abs_error: f64,
}

/// Strong error of Euler against the exact GBM solution on shared Brownian
/// paths, for `base_steps * 2^k` steps, `k = 0..levels`.
#[allow(clippy::too_many_arguments)]
pub fn strong_convergence(
    s0: f64,
    mu: f64,
    sigma: f64,
    horizon_days: f64,
    base_steps: usize,
    levels: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<ConvergencePoint>> {
    if levels == 0 || base_steps == 0 || n_paths == 0 {
        return Err(Error::invalid("convergence study needs levels, steps and paths"));
    }
    let fine = base_steps << (levels - 1);
    let hf = horizon_days / fine as f64;
    let errors: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(seed, Domain::Sample, p);
            let dw: Vec<f64> = (0..fine)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * hf.sqrt()
                })
                .collect();
            let w_t: f64 = dw.iter().sum();
            let exact = s0 * ((mu - 0.5 * sigma * sigma) * horizon_days + sigma * w_t).exp();
            (0..levels)
                .map(|k| {
                    let n = base_steps << k;
                    let group = fine / n;
                    let h = horizon_days / n as f64;
                    let mut s = s0;
                    for chunk in dw.chunks(group) {
                        let inc: f64 = chunk.iter().sum();
                        s += s * mu * h + s * sigma * inc;
                    }
                    (s - exact).abs()
                })
                .collect()
        })
        .collect();
    Ok((0..levels)
        .map(|k| {
            let n = base_steps << k;
            ConvergencePoint {
                steps: n,
                step_days: horizon_days / n as f64,
                mean_abs_error: errors.iter().map(|e| e[k]).sum::<f64>() / n_paths as f64,
            }
        })
        .collect())
}
