use serde::Serialize;

use crate::error::{Error, Result};

/// Piecewise-linear function of elapsed days, flat beyond its end knots.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Schedule {
    knots: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Schedule { knots: vec![(0.0, v)] }
    }

    pub fn table(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("schedule needs at least one knot"));
        }
        if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::invalid("schedule knots must be finite"));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("schedule knot times must be distinct"));
        }
        Ok(Schedule { knots })
    }

    pub fn is_constant(&self) -> bool {
        self.knots.len() == 1
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        let last = k[k.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let i = k.partition_point(|p| p.0 <= t);
        let (t0, v0) = k[i - 1];
        let (t1, v1) = k[i];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Tables must span `[0, horizon]`; constants always do.
    pub fn covers(&self, horizon: f64) -> bool {
        self.is_constant() || (self.knots[0].0 <= 0.0 && self.knots[self.knots.len() - 1].0 >= horizon)
    }

    pub fn min_value(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }

    /// `"0.003"` or `"0:0.003, 365:0.001"` (day:value pairs).
    pub fn parse(s: &str) -> Result<Self> {
        if !s.contains(':') {
            let v = s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("not a number: {s:?}")))?;
            return Ok(Schedule::constant(v));
        }
        let mut knots = Vec::new();
        for part in s.split(',') {
            let (t, v) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("schedule entry {part:?} is not day:value")))?;
            let t = super::config::parse_days(t.trim())?;
            let v = v.trim().parse::<f64>().map_err(|_| Error::invalid(format!("not a number: {v:?}")))?;
            knots.push((t, v));
        }
        Schedule::table(knots)
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_constant() {
            return write!(f, "{}", self.knots[0].1);
        }
        let parts: Vec<String> = self.knots.iter().map(|(t, v)| format!("{t}:{v}")).collect();
        write!(f, "{}", parts.join(", "))
    }
}
