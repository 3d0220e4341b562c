use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{Duration, NaiveDate};
use clap::Args;
use serde::Serialize;

use super::output::units;
use super::series::{csv_buffer, date_in_name, finish_csv, fmt_opt, num};
use super::{start_run, BinFlags, Global};
use crate::error::{Error, Result};
use crate::estimator::{horizon_sweep, EstimatorSettings, HorizonSweep, Regime, Target};
use crate::panel::BalanceSnapshot;
use crate::sim::parse_days;

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Directory of snapshot CSVs named with their date (`*YYYY-MM-DD*.csv`)
    pub snapshot_dir: PathBuf,
    /// Start date of every horizon
    #[arg(long)]
    pub t0: NaiveDate,
    /// Horizons, comma separated (`28,56`, `4w`, `P28D`)
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_dt)]
    pub dts: Vec<u32>,
    #[command(flatten)]
    pub flags: BinFlags,
    /// Base name of the output files
    #[arg(long, default_value = "sweep")]
    pub name: String,
}

fn parse_dt(s: &str) -> std::result::Result<u32, String> {
    let d = parse_days(s.trim()).map_err(|e| e.to_string())?;
    if d >= 1.0 && d.fract() == 0.0 && d <= u32::MAX as f64 {
        Ok(d as u32)
    } else {
        Err(format!("{s:?} is not a whole positive number of days"))
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Poor => "poor",
        Regime::Wealthy => "wealthy",
        Regime::All => "all",
    }
}

/// Snapshot files in `dir` keyed by the date in their name.
fn index_dir(dir: &std::path::Path) -> Result<BTreeMap<NaiveDate, PathBuf>> {
    let mut out = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        if let Some(d) = date_in_name(&p) {
            if let Some(prev) = out.insert(d, p.clone()) {
                return Err(Error::invalid(format!("two snapshots dated {d}: {} and {}", prev.display(), p.display())));
            }
        }
    }
    Ok(out)
}

pub fn run(global: &Global, args: &SweepArgs) -> Result<()> {
    let mut run = start_run(global, "sweep", &args.name, args, None)?;
    let stem = run.stem().to_string();
    let files = index_dir(&args.snapshot_dir)?;

    let mut wanted: Vec<NaiveDate> = vec![args.t0];
    wanted.extend(args.dts.iter().map(|&dt| args.t0 + Duration::days(dt as i64)));
    wanted.sort();
    wanted.dedup();
    let mut snapshots = Vec::new();
    for d in wanted {
        match files.get(&d) {
            Some(p) => snapshots.push(BalanceSnapshot::read_csv(d, run.read_input(p)?.as_slice())?),
            None if d == args.t0 => return Err(Error::invalid(format!("no snapshot dated {d} in {}", args.snapshot_dir.display()))),
            None => {}
        }
    }

    let settings = EstimatorSettings {
        n_bins: args.flags.bins,
        min_count: args.flags.min_count,
        target: Target::Ratio,
        s_star_average: args.flags.s_star_average.into(),
    };
    let sweep: HorizonSweep = horizon_sweep(&snapshots, args.t0, &args.dts, &settings)?;

    let mut w = csv_buffer();
    w.write_record(["dt_days", "regime", "alpha_drift", "alpha_vol", "mu_dt", "sigma_sqrtdt", "mu", "sigma"])?;
    for e in &sweep.entries {
        for p in &e.params {
            w.write_record([
                e.dt_days.to_string(),
                regime_name(p.regime).to_string(),
                num(p.alpha_drift),
                fmt_opt(p.alpha_vol),
                num(p.mu_dt),
                fmt_opt(p.sigma_sqrtdt),
                num(p.mu),
                fmt_opt(p.sigma),
            ])?;
        }
    }
    let param_units = units(&[
        ("dt_days", "days"),
        ("alpha_drift", "dimensionless"),
        ("alpha_vol", "dimensionless"),
        ("mu_dt", "per horizon"),
        ("sigma_sqrtdt", "per sqrt(horizon)"),
        ("mu", "per day"),
        ("sigma", "per sqrt(day)"),
    ]);
    run.write(format!("{stem}.csv"), &finish_csv(w)?, param_units.clone())?;

    let mut w = csv_buffer();
    w.write_record(["regime", "parameter", "direction", "tau", "s", "p_value", "n", "exact"])?;
    for t in &sweep.trends {
        let dir = serde_json::to_value(t.trend.direction)?;
        w.write_record([
            regime_name(t.regime).to_string(),
            t.parameter.to_string(),
            dir.as_str().unwrap_or_default().to_string(),
            num(t.trend.tau),
            t.trend.s.to_string(),
            num(t.trend.p_value),
            t.trend.n.to_string(),
            t.trend.exact.to_string(),
        ])?;
    }
    run.write(format!("{stem}.trends.csv"), &finish_csv(w)?, units(&[("tau", "dimensionless"), ("p_value", "probability"), ("n", "horizons")]))?;

    #[derive(Serialize)]
    struct Report<'a> {
        #[serde(flatten)]
        sweep: &'a HorizonSweep,
        units: super::output::Units,
    }
    let mut json_units = param_units;
    json_units.insert("s_star", "satoshi");
    json_units.insert("center_min", "satoshi");
    json_units.insert("center_max", "satoshi");
    let report = Report { sweep: &sweep, units: json_units.clone() };
    run.write_json(format!("{stem}.json"), &report, json_units)?;
    run.finish()?;
    Ok(())
}
