use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use super::output::{units, Units};
use super::series::{csv_buffer, finish_csv, fmt_opt, num};
use super::{start_run, BinFlags, Global, TargetArg};
use crate::error::Result;
use crate::estimator::sweep::RegimeParamsAt;
use crate::estimator::{bin_panel, fit_drift_abs, fit_vol_abs, split_regimes_with, BinSeries, DriftFit, GrowthFit, RegimeSplit, Target, VolFit};
use crate::panel::{filter_active, read_panel_csv, FilterReport, TransitionPanel};

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    /// Panel CSV (`user_id,s0,s1,ds,group`)
    pub panel: PathBuf,
    #[command(flatten)]
    pub flags: BinFlags,
    /// Bin `ds / s0` (ratio) or `ds` (absolute)
    #[arg(long, value_enum, default_value_t = TargetArg::Ratio)]
    pub target: TargetArg,
    /// Horizon of the panel in days; adds per-day rates to the report
    #[arg(long)]
    pub dt_days: Option<u32>,
    /// Bin every row with a positive s0, not only users whose balance changed
    #[arg(long)]
    pub keep_inactive: bool,
    /// Base name of the output files
    #[arg(long, default_value = "estimate")]
    pub name: String,
}

#[derive(Serialize)]
struct Settings {
    n_bins: usize,
    min_count: usize,
    target: Target,
    s_star_average: super::AverageArg,
}

#[derive(Serialize)]
struct AbsoluteFits {
    drift: DriftFit,
    vol: Option<VolFit>,
}

#[derive(Serialize)]
struct EstimateReport {
    settings: Settings,
    panel_rows: usize,
    filter: Option<FilterReport>,
    retained_bins: usize,
    rows_binned: usize,
    rows_out_of_range: usize,
    edge_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<RegimeSplit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_day: Option<Vec<RegimeParamsAt>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    absolute: Option<AbsoluteFits>,
    units: Units,
}

fn bins_csv(bins: &BinSeries) -> Result<Vec<u8>> {
    let mut w = csv_buffer();
    w.write_record(["bin_lo", "bin_hi", "center", "count", "mean", "std"])?;
    for b in &bins.bins {
        w.write_record([num(b.lo), num(b.hi), num(b.center), b.count.to_string(), num(b.mean), num(b.std)])?;
    }
    finish_csv(w)
}

fn ratio_line(f: &GrowthFit, c: f64) -> (f64, Option<f64>) {
    let mean = f.mu_dt * c.powf(f.alpha_drift - 1.0);
    let std = f.alpha_vol.zip(f.sigma_sqrtdt).map(|(a, s)| s * c.powf(a - 1.0));
    (mean, std)
}

pub fn run(global: &Global, args: &EstimateArgs) -> Result<()> {
    let mut run = start_run(global, "estimate", &args.name, args, None)?;
    let rows = read_panel_csv(run.read_input(&args.panel)?.as_slice())?;
    let stem = run.stem().to_string();
    let panel_rows = rows.len();
    let (rows, filter) = if args.keep_inactive {
        (rows, None)
    } else {
        let panel = TransitionPanel {
            t0: chrono::NaiveDate::MIN,
            dt_days: args.dt_days.unwrap_or(1),
            rows,
        };
        let (p, r) = filter_active(&panel);
        (p.rows, Some(r))
    };

    let target: Target = args.target.into();
    let bins = bin_panel(&rows, args.flags.bins, args.flags.min_count, target)?;
    let (ratio_u, abs_u) = match target {
        Target::Ratio => ("per horizon", "per horizon"),
        Target::Absolute => ("satoshi per horizon", "satoshi^(1-alpha) per horizon"),
    };
    let bin_units = units(&[("bin_lo", "satoshi"), ("bin_hi", "satoshi"), ("center", "satoshi"), ("count", "users"), ("mean", ratio_u), ("std", ratio_u)]);
    run.write(format!("{stem}.bins.csv"), &bins_csv(&bins)?, bin_units)?;

    let mut lines = csv_buffer();
    lines.write_record(["center", "regime", "mean_fit", "std_fit", "mean_fit_alpha_one"])?;
    let (split, absolute) = match target {
        Target::Ratio => {
            let split = split_regimes_with(&bins, args.flags.s_star_average.into())?;
            for (i, b) in bins.bins.iter().enumerate() {
                let (name, fit) = if i < split.cut { ("poor", split.poor.as_ref()) } else { ("wealthy", split.wealthy.as_ref()) };
                if let Some(f) = fit {
                    let (m, s) = ratio_line(f, b.center);
                    lines.write_record([num(b.center), name.to_string(), num(m), fmt_opt(s), String::new()])?;
                }
            }
            (Some(split), None)
        }
        Target::Absolute => {
            let drift = fit_drift_abs(&bins)?;
            let vol = match fit_vol_abs(&bins) {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("volatility fit skipped: {e}");
                    None
                }
            };
            for b in &bins.bins {
                let c = b.center;
                let m = drift.mu_dt * c.powf(drift.alpha);
                let s = vol.map(|v| v.sigma_sqrtdt * c.powf(v.alpha));
                lines.write_record([num(c), "all".to_string(), num(m), fmt_opt(s), num(drift.alpha_one.mu_dt * c)])?;
            }
            (None, Some(AbsoluteFits { drift, vol }))
        }
    };
    let line_units = units(&[("center", "satoshi"), ("mean_fit", ratio_u), ("std_fit", ratio_u), ("mean_fit_alpha_one", ratio_u)]);
    run.write(format!("{stem}.fit.csv"), &finish_csv(lines)?, line_units)?;

    let per_day = match (&split, args.dt_days) {
        (Some(s), Some(dt)) => Some([s.poor.as_ref(), s.wealthy.as_ref()].into_iter().flatten().map(|f| RegimeParamsAt::from_fit(f, dt)).collect()),
        _ => None,
    };
    let report = EstimateReport {
        settings: Settings {
            n_bins: args.flags.bins,
            min_count: args.flags.min_count,
            target,
            s_star_average: args.flags.s_star_average,
        },
        panel_rows,
        filter,
        retained_bins: bins.bins.len(),
        rows_binned: bins.rows_binned,
        rows_out_of_range: bins.rows_out_of_range,
        edge_ratio: bins.edge_ratio(),
        split,
        per_day,
        absolute,
        units: units(&[
            ("s_star", "satoshi"),
            ("center_min", "satoshi"),
            ("center_max", "satoshi"),
            ("alpha_drift", "dimensionless"),
            ("alpha_vol", "dimensionless"),
            ("mu_dt", abs_u),
            ("sigma_sqrtdt", abs_u),
            ("mu", "per day"),
            ("sigma", "per sqrt(day)"),
            ("edge_ratio", "dimensionless"),
        ]),
    };
    run.write_json(format!("{stem}.json"), &report, units(&[("s_star", "satoshi"), ("mu", "per day"), ("sigma", "per sqrt(day)")]))?;
    run.finish()?;
    Ok(())
}
