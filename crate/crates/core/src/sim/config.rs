//! Simulation settings and their flat `key = value` text form.
//!
//! ```text
//! # two-regime population
//! model = euler
//! n_users = 200000
//! seed = 7
//! start_date = 2016-01-23
//! step = 1d
//! horizon = P4W
//! initial = lognormal
//! initial.m = 23.0
//! initial.v = 2.0
//! s_star = 1e10
//! regime_mode = per_step
//! poor.alpha = 0.8
//! poor.mu = 0.003
//! poor.sigma = 0:0.01, 28:0.008
//! wealthy.alpha_drift = 1.05
//! wealthy.alpha_vol = 0.9
//! wealthy.mu = -0.002
//! wealthy.sigma = 0.001
//! emit = 0, 28
//! ```
//!
//! Durations accept `28`, `28d`, `4w`, `P28D` and `P4W`. Rates are per day.

use chrono::NaiveDate;
use serde::Serialize;

use super::schedule::Schedule;
use crate::error::{Error, Result};
use crate::rng::DEFAULT_SEED;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InitialLaw {
    /// `exp(m + v Z)`
    LogNormal { m: f64, v: f64 },
    /// Density proportional to `x^-a` above `xmin`.
    Pareto { a: f64, xmin: f64 },
    PointMass { value: f64 },
}

impl InitialLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialLaw::LogNormal { m, v } => m.is_finite() && v >= 0.0 && v.is_finite(),
            InitialLaw::Pareto { a, xmin } => a > 1.0 && xmin > 0.0 && xmin.is_finite(),
            InitialLaw::PointMass { value } => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config {
                key: "initial".into(),
                msg: format!("invalid parameters {self:?}"),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeParams {
    pub alpha_drift: Schedule,
    /// Per day.
    pub mu: Schedule,
    pub alpha_vol: Schedule,
    /// Per square-root day.
    pub sigma: Schedule,
}

impl RegimeParams {
    pub fn constant(alpha_drift: f64, mu: f64, alpha_vol: f64, sigma: f64) -> Self {
        RegimeParams {
            alpha_drift: Schedule::constant(alpha_drift),
            mu: Schedule::constant(mu),
            alpha_vol: Schedule::constant(alpha_vol),
            sigma: Schedule::constant(sigma),
        }
    }

    /// Proportional growth: both exponents 1.
    pub fn gibrat(mu: f64, sigma: f64) -> Self {
        RegimeParams::constant(1.0, mu, 1.0, sigma)
    }

    fn validate(&self, prefix: &str, horizon: f64) -> Result<()> {
        for (name, s) in [("alpha_drift", &self.alpha_drift), ("mu", &self.mu), ("alpha_vol", &self.alpha_vol), ("sigma", &self.sigma)] {
            if !s.covers(horizon) {
                return Err(Error::Config {
                    key: format!("{prefix}.{name}"),
                    msg: format!("schedule does not span the horizon of {horizon} days"),
                });
            }
        }
        if self.sigma.min_value() < 0.0 {
            return Err(Error::Config {
                key: format!("{prefix}.sigma"),
                msg: "sigma must be non-negative".into(),
            });
        }
        if self.alpha_drift.min_value() <= 0.0 || self.alpha_vol.min_value() <= 0.0 {
            return Err(Error::Config {
                key: format!("{prefix}.alpha"),
                msg: "exponents must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Exact geometric Brownian motion with the poor-regime `mu`, `sigma`.
    GbmExact,
    /// Euler-Maruyama on the general (optionally two-regime) process.
    #[default]
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeMode {
    /// Regime follows the current balance at every step.
    #[default]
    PerStep,
    /// Regime fixed by the starting balance.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub model: Model,
    pub n_users: usize,
    pub initial: InitialLaw,
    pub s_star: Option<f64>,
    pub poor: RegimeParams,
    pub wealthy: Option<RegimeParams>,
    pub regime_mode: RegimeMode,
    pub step_days: f64,
    pub horizon_days: u32,
    pub start_date: NaiveDate,
    pub seed: u64,
    /// Snapshot times in days; defaults to start and horizon.
    pub emit_days: Vec<u32>,
}

pub fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 1, 23).expect("valid date")
}

impl SimConfig {
    pub fn new(n_users: usize, initial: InitialLaw, poor: RegimeParams, horizon_days: u32) -> Self {
        SimConfig {
            model: Model::Euler,
            n_users,
            initial,
            s_star: None,
            poor,
            wealthy: None,
            regime_mode: RegimeMode::PerStep,
            step_days: 1.0,
            horizon_days,
            start_date: default_start_date(),
            seed: DEFAULT_SEED,
            emit_days: vec![0, horizon_days],
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon_days as f64 / self.step_days).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |key: &str, msg: &str| Error::Config {
            key: key.into(),
            msg: msg.into(),
        };
        if self.n_users == 0 {
            return Err(cfg("n_users", "must be at least 1"));
        }
        if self.horizon_days == 0 {
            return Err(cfg("horizon", "must be positive"));
        }
        if !(self.step_days > 0.0 && self.step_days.is_finite()) {
            return Err(cfg("step", "must be positive"));
        }
        let ratio = self.horizon_days as f64 / self.step_days;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            return Err(cfg("step", "must divide the horizon"));
        }
        self.initial.validate()?;
        let h = self.horizon_days as f64;
        self.poor.validate("poor", h)?;
        if let Some(w) = &self.wealthy {
            w.validate("wealthy", h)?;
            match self.s_star {
                Some(s) if s > 0.0 && s.is_finite() => {}
                _ => return Err(cfg("s_star", "a positive s_star is required when wealthy parameters are given")),
            }
        }
        if self.model == Model::GbmExact && self.wealthy.is_some() {
            return Err(cfg("model", "gbm_exact supports a single regime"));
        }
        if self.emit_days.is_empty() {
            return Err(cfg("emit", "at least one emit time is required"));
        }
        for &t in &self.emit_days {
            if t > self.horizon_days {
                return Err(cfg("emit", "emit times must lie within the horizon"));
            }
            let k = t as f64 / self.step_days;
            if self.model == Model::Euler && (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                return Err(cfg("emit", "emit times must fall on integration steps"));
            }
        }
        if self.emit_days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg("emit", "emit times must be strictly increasing"));
        }
        Ok(())
    }

    /// Parse the flat text form; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Malformed {
                line: i + 1,
                msg: format!("expected `key = value`, found {line:?}"),
            })?;
            let k = k.trim().to_string();
            if kv.iter().any(|(x, _)| *x == k) {
                return Err(Error::Config {
                    key: k,
                    msg: "given more than once".into(),
                });
            }
            kv.push((k, v.trim().to_string()));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let bad = |key: &str, e: &dyn std::fmt::Display| Error::Config {
            key: key.into(),
            msg: e.to_string(),
        };
        let num = |key: &str| -> Result<Option<f64>> {
            get(key)
                .map(|v| v.parse::<f64>().map_err(|_| bad(key, &format!("{v:?} is not a number"))))
                .transpose()
        };
        let req = |key: &str| -> Result<f64> { num(key)?.ok_or_else(|| bad(key, &"required")) };

        const KNOWN: &[&str] = &[
            "model", "n_users", "seed", "start_date", "step", "horizon", "initial", "initial.m", "initial.v", "initial.a",
            "initial.xmin", "initial.value", "s_star", "regime_mode", "emit",
        ];
        const REGIME_KEYS: &[&str] = &["alpha", "alpha_drift", "alpha_vol", "mu", "sigma"];
        for (k, _) in &kv {
            let regime_key = k
                .split_once('.')
                .is_some_and(|(p, s)| (p == "poor" || p == "wealthy") && REGIME_KEYS.contains(&s));
            if !KNOWN.contains(&k.as_str()) && !regime_key {
                return Err(bad(k, &"unknown key"));
            }
        }

        let model = match get("model").unwrap_or("euler") {
            "gbm_exact" | "gbm" => Model::GbmExact,
            "euler" | "power_sde" | "two_regime" => Model::Euler,
            other => return Err(bad("model", &format!("unknown model {other:?}"))),
        };
        let n_users = match get("n_users") {
            Some(v) => v.parse::<usize>().map_err(|_| bad("n_users", &format!("{v:?} is not a count")))?,
            None => return Err(bad("n_users", &"required")),
        };
        let seed = match get("seed") {
            Some(v) => v.parse::<u64>().map_err(|_| bad("seed", &format!("{v:?} is not an unsigned integer")))?,
            None => DEFAULT_SEED,
        };
        let start_date = match get("start_date") {
            Some(v) => v.parse::<NaiveDate>().map_err(|e| bad("start_date", &e))?,
            None => default_start_date(),
        };
        let step_days = match get("step") {
            Some(v) => parse_days(v).map_err(|e| bad("step", &e))?,
            None => 1.0,
        };
        let horizon = parse_days(get("horizon").ok_or_else(|| bad("horizon", &"required"))?).map_err(|e| bad("horizon", &e))?;
        if horizon.fract() != 0.0 || horizon < 1.0 || horizon > u32::MAX as f64 {
            return Err(bad("horizon", &"must be a positive whole number of days"));
        }
        let horizon_days = horizon as u32;

        let initial = match get("initial").unwrap_or("lognormal") {
            "lognormal" => InitialLaw::LogNormal { m: req("initial.m")?, v: req("initial.v")? },
            "pareto" => InitialLaw::Pareto { a: req("initial.a")?, xmin: req("initial.xmin")? },
            "point" | "point_mass" => InitialLaw::PointMass { value: req("initial.value")? },
            other => return Err(bad("initial", &format!("unknown law {other:?}"))),
        };

        let regime = |prefix: &str| -> Result<Option<RegimeParams>> {
            let sched = |name: &str| -> Result<Option<Schedule>> {
                let key = format!("{prefix}.{name}");
                get(&key).map(|v| Schedule::parse(v).map_err(|e| bad(&key, &e))).transpose()
            };
            let alpha = sched("alpha")?;
            let (ad, av) = (sched("alpha_drift")?, sched("alpha_vol")?);
            let (mu, sigma) = (sched("mu")?, sched("sigma")?);
            if alpha.is_none() && ad.is_none() && av.is_none() && mu.is_none() && sigma.is_none() {
                return Ok(None);
            }
            if alpha.is_some() && (ad.is_some() || av.is_some()) {
                return Err(bad(&format!("{prefix}.alpha"), &"conflicts with alpha_drift/alpha_vol"));
            }
            let one = || Schedule::constant(1.0);
            Ok(Some(RegimeParams {
                alpha_drift: ad.or_else(|| alpha.clone()).unwrap_or_else(one),
                mu: mu.ok_or_else(|| bad(&format!("{prefix}.mu"), &"required"))?,
                alpha_vol: av.or(alpha).unwrap_or_else(one),
                sigma: sigma.ok_or_else(|| bad(&format!("{prefix}.sigma"), &"required"))?,
            }))
        };
        let poor = regime("poor")?.ok_or_else(|| bad("poor.mu", &"required"))?;
        let wealthy = regime("wealthy")?;
        let regime_mode = match get("regime_mode").unwrap_or("per_step") {
            "per_step" => RegimeMode::PerStep,
            "initial" => RegimeMode::Initial,
            other => return Err(bad("regime_mode", &format!("unknown mode {other:?}"))),
        };
        let emit_days = match get("emit") {
            Some(v) => v
                .split(',')
                .map(|t| {
                    let d = parse_days(t.trim()).map_err(|e| bad("emit", &e))?;
                    if d.fract() != 0.0 || d < 0.0 {
                        return Err(bad("emit", &"emit times must be whole days"));
                    }
                    Ok(d as u32)
                })
                .collect::<Result<Vec<u32>>>()?,
            None => vec![0, horizon_days],
        };
        let config = SimConfig {
            model,
            n_users,
            initial,
            s_star: num("s_star")?,
            poor,
            wealthy,
            regime_mode,
            step_days,
            horizon_days,
            start_date,
            seed,
            emit_days,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Days from `28`, `28d`, `4w`, `P28D`, `P4W` or `P1W3D`.
pub fn parse_days(s: &str) -> Result<f64> {
    let s = s.trim();
    let err = || Error::invalid(format!("unrecognized duration {s:?}"));
    if let Some(rest) = s.strip_prefix('P').or_else(|| s.strip_prefix('p')) {
        let mut total = 0.0;
        let mut num = String::new();
        for ch in rest.chars() {
            match ch.to_ascii_uppercase() {
                c if c.is_ascii_digit() || c == '.' => num.push(c),
                'D' | 'W' => {
                    let v: f64 = num.parse().map_err(|_| err())?;
                    total += if ch.eq_ignore_ascii_case(&'W') { 7.0 * v } else { v };
                    num.clear();
                }
                _ => return Err(err()),
            }
        }
        if !num.is_empty() || rest.is_empty() {
            return Err(err());
        }
        return Ok(total);
    }
    let (body, mult) = match s.chars().last() {
        Some('d') | Some('D') => (&s[..s.len() - 1], 1.0),
        Some('w') | Some('W') => (&s[..s.len() - 1], 7.0),
        _ => (s, 1.0),
    };
    let v: f64 = body.trim().parse().map_err(|_| err())?;
    if !v.is_finite() || v < 0.0 {
        return Err(err());
    }
    Ok(v * mult)
}
