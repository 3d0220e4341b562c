use std::path::PathBuf;

use chrono::NaiveDate;
use clap::Args;
use rand::seq::index::sample;
use serde::Serialize;

use super::output::units;
use super::series::{csv_buffer, date_in_name, finish_csv, log_histogram, num};
use super::{start_run, Global, ScaleArg};
use crate::error::{Error, Result};
use crate::hopkins::{hopkins_test_scaled, HopkinsResult};
use crate::panel::{build_panel, classify_line, filter_active, taxonomy, write_panel_csv, BalanceSnapshot, FilterReport, Line, ScatterTaxonomy};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Args, Serialize)]
pub struct PanelArgs {
    /// Earlier snapshot CSV (`user_id,balance`)
    pub snap0: PathBuf,
    /// Later snapshot CSV
    pub snap1: PathBuf,
    /// Date of the earlier snapshot; read from its file name when omitted
    #[arg(long)]
    pub date0: Option<NaiveDate>,
    /// Date of the later snapshot; read from its file name when omitted
    #[arg(long)]
    pub date1: Option<NaiveDate>,
    /// Keep only users with a positive starting balance that changed
    #[arg(long)]
    pub filter_active: bool,
    /// Starting balances up to this value count as the vertical line
    #[arg(long, default_value_t = 0.0)]
    pub epsilon_v: f64,
    /// Base name of the output files
    #[arg(long, default_value = "panel")]
    pub name: String,
    /// Logarithmic bins of the balance histograms
    #[arg(long, default_value_t = 100)]
    pub hist_bins: usize,
    /// Rows in the scatter sample (0 disables it)
    #[arg(long, default_value_t = 10_000)]
    pub scatter_sample: usize,
    /// Run the Hopkins test on (s0, ds) with this many probes
    #[arg(long)]
    pub hopkins: Option<usize>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Raw)]
    pub hopkins_scale: ScaleArg,
}

#[derive(Serialize)]
struct HopkinsReport {
    #[serde(flatten)]
    result: HopkinsResult,
    scale: ScaleArg,
}

#[derive(Serialize)]
struct PanelReport {
    t0: NaiveDate,
    t1: NaiveDate,
    dt_days: u32,
    users: usize,
    rows_written: usize,
    /// Over the unfiltered panel.
    taxonomy: ScatterTaxonomy,
    filter: Option<FilterReport>,
    hopkins: Option<HopkinsReport>,
    units: super::output::Units,
}

fn line_name(l: Line) -> &'static str {
    match l {
        Line::Vertical => "vertical",
        Line::Horizontal => "horizontal",
        Line::Diagonal => "diagonal",
        Line::Interior => "interior",
    }
}

fn snapshot_date(given: Option<NaiveDate>, path: &std::path::Path, flag: &str) -> Result<NaiveDate> {
    given.or_else(|| date_in_name(path)).ok_or_else(|| {
        Error::invalid(format!("no date in file name {}; pass {flag}", path.display()))
    })
}

pub fn run(global: &Global, args: &PanelArgs) -> Result<()> {
    let mut run = start_run(global, "panel", &args.name, args, None)?;
    let d0 = snapshot_date(args.date0, &args.snap0, "--date0")?;
    let d1 = snapshot_date(args.date1, &args.snap1, "--date1")?;
    let s0 = BalanceSnapshot::read_csv(d0, run.read_input(&args.snap0)?.as_slice())?;
    let s1 = BalanceSnapshot::read_csv(d1, run.read_input(&args.snap1)?.as_slice())?;

    let panel = build_panel(&s0, &s1)?;
    let tax = taxonomy(&panel.rows, args.epsilon_v)?;
    let (kept, filter) = if args.filter_active {
        let (p, r) = filter_active(&panel);
        (p, Some(r))
    } else {
        (panel.clone(), None)
    };

    let mut buf = Vec::new();
    write_panel_csv(&kept.rows, &mut buf)?;
    let balance_units = units(&[("s0", "satoshi"), ("s1", "satoshi"), ("ds", "satoshi")]);
    run.write(format!("{}.csv", run.stem()), &buf, balance_units.clone())?;

    let hopkins = match args.hopkins {
        Some(m) => {
            let pts: Vec<[f64; 2]> = kept.rows.iter().map(|r| [r.s0, r.ds]).collect();
            Some(HopkinsReport {
                result: hopkins_test_scaled(&pts, m, run.seed(), args.hopkins_scale.into())?,
                scale: args.hopkins_scale,
            })
        }
        None => None,
    };

    // balance densities of both snapshots on one shared grid
    let positive = |s: &BalanceSnapshot| s.records().iter().filter(|r| r.1 > 0).map(|r| r.1 as f64).collect::<Vec<f64>>();
    let (v0, v1) = (positive(&s0), positive(&s1));
    let lo = v0.iter().chain(&v1).copied().fold(f64::INFINITY, f64::min);
    let hi = v0.iter().chain(&v1).copied().fold(0.0, f64::max);
    if hi > lo {
        let mut w = csv_buffer();
        w.write_record(["date", "bin_lo", "bin_hi", "center", "count", "density"])?;
        for (date, v) in [(d0, &v0), (d1, &v1)] {
            for b in log_histogram(v, lo, hi, args.hist_bins, v.len())? {
                w.write_record([date.to_string(), num(b.lo), num(b.hi), num(b.center), b.count.to_string(), num(b.density)])?;
            }
        }
        let u = units(&[("bin_lo", "satoshi"), ("bin_hi", "satoshi"), ("center", "satoshi"), ("count", "users"), ("density", "per satoshi")]);
        run.write(format!("{}.hist.csv", run.stem()), &finish_csv(w)?, u)?;
    } else {
        log::warn!("fewer than two distinct positive balances; histogram skipped");
    }

    if args.scatter_sample > 0 {
        let n = panel.rows.len();
        let mut idx: Vec<usize> = if n <= args.scatter_sample {
            (0..n).collect()
        } else {
            sample(&mut substream(run.seed(), Domain::Sample, 0), n, args.scatter_sample).into_vec()
        };
        idx.sort_unstable();
        let mut w = csv_buffer();
        w.write_record(["user_id", "s0", "ds", "line"])?;
        for i in idx {
            let r = &panel.rows[i];
            w.write_record([r.user_id.as_str(), &num(r.s0), &num(r.ds), line_name(classify_line(r, args.epsilon_v))])?;
        }
        run.write(format!("{}.scatter.csv", run.stem()), &finish_csv(w)?, units(&[("s0", "satoshi"), ("ds", "satoshi")]))?;
    }

    let report = PanelReport {
        t0: d0,
        t1: d1,
        dt_days: panel.dt_days,
        users: panel.rows.len(),
        rows_written: kept.rows.len(),
        taxonomy: tax,
        filter,
        hopkins,
        units: units(&[("dt_days", "days"), ("epsilon_v", "satoshi"), ("statistic", "dimensionless"), ("p_value", "probability")]),
    };
    run.write_json(format!("{}.taxonomy.json", run.stem()), &report, units(&[("dt_days", "days"), ("epsilon_v", "satoshi")]))?;
    run.finish()?;
    Ok(())
}
