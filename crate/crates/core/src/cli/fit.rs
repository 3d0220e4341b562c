use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use super::output::units;
use super::series::{csv_buffer, finish_csv, log_grid, log_histogram, num, read_values};
use super::{start_run, Global, GridArg, MethodArg};
use crate::error::{Error, Result};
use crate::tailfit::{compare_tails_at_level, fit_lognormal, fit_power_law, threshold_sweep_with, umpu_sweep, Preferred, UmpuOptions, DEFAULT_LEVEL};

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// CSV of balances; a header row selects the column
    pub data: PathBuf,
    /// Column to read [default: `balance`, or the only column]
    #[arg(long)]
    pub column: Option<String>,
    /// Fix the tail threshold instead of scanning for it (satoshi)
    #[arg(long)]
    pub xmin: Option<f64>,
    /// Compare the tails at a grid of thresholds with this spacing (satoshi)
    #[arg(long)]
    pub sweep_step: Option<f64>,
    /// First threshold of the sweep, in satoshi
    #[arg(long, default_value_t = 1.0, requires = "sweep_step")]
    pub sweep_start: f64,
    #[arg(long, value_enum, default_value_t = GridArg::Multiples, requires = "sweep_step")]
    pub sweep_grid: GridArg,
    /// Significance level of the tail comparison
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: f64,
    /// Test exponential against log-normal tails at every rank
    #[arg(long)]
    pub umpu: bool,
    #[arg(long, value_enum, default_value_t = MethodArg::MonteCarlo, requires = "umpu")]
    pub umpu_method: MethodArg,
    /// Bootstrap replicates per test
    #[arg(long, default_value_t = 1000)]
    pub mc_reps: usize,
    /// Logarithmic bins of the histogram
    #[arg(long, default_value_t = 100)]
    pub hist_bins: usize,
    /// Points on each fitted curve
    #[arg(long, default_value_t = 200)]
    pub curve_points: usize,
    /// Base name of the output files
    #[arg(long, default_value = "fit")]
    pub name: String,
}

fn preferred_name(p: Preferred) -> &'static str {
    match p {
        Preferred::PowerLaw => "power_law",
        Preferred::LogNormal => "log_normal",
        Preferred::Inconclusive => "inconclusive",
    }
}

pub fn run(global: &Global, args: &FitArgs) -> Result<()> {
    let mut run = start_run(global, "fit", &args.name, args, None)?;
    let data = read_values(&run.read_input(&args.data)?, args.column.as_deref())?;
    let stem = run.stem().to_string();

    let pl = fit_power_law(&data, args.xmin)?;
    let ln = fit_lognormal(&data, Some(pl.xmin))?;
    let cmp = compare_tails_at_level(&data, pl.xmin, args.level)?;
    let fit_units = units(&[
        ("a", "dimensionless"),
        ("m", "ln satoshi"),
        ("v", "ln satoshi"),
        ("xmin", "satoshi"),
        ("n_tail", "count"),
        ("log_likelihood", "nats"),
        ("ks_distance", "dimensionless"),
    ]);
    let cmp_units = units(&[("xmin", "satoshi"), ("n_tail", "count"), ("normalized_lr", "dimensionless"), ("p_value", "probability"), ("level", "probability")]);
    let records: Vec<Value> = vec![
        json!({ "kind": "fit", "result": pl, "n_data": data.len(), "units": fit_units }),
        json!({ "kind": "fit", "result": ln, "n_data": data.len(), "units": fit_units }),
        json!({ "kind": "comparison", "result": cmp, "units": cmp_units }),
    ];
    let mut all_units = fit_units.clone();
    all_units.extend(cmp_units.clone());
    run.write_jsonl(format!("{stem}.jsonl"), &records, all_units)?;

    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(0.0, f64::max);
    if hi > lo {
        let mut w = csv_buffer();
        w.write_record(["bin_lo", "bin_hi", "center", "count", "density"])?;
        for b in log_histogram(&data, lo, hi, args.hist_bins, data.len())? {
            w.write_record([num(b.lo), num(b.hi), num(b.center), b.count.to_string(), num(b.density)])?;
        }
        let u = units(&[("bin_lo", "satoshi"), ("bin_hi", "satoshi"), ("center", "satoshi"), ("count", "values"), ("density", "per satoshi")]);
        run.write(format!("{stem}.hist.csv"), &finish_csv(w)?, u)?;
    }

    // tail densities scaled by the tail share so they overlay the histogram
    let mut w = csv_buffer();
    w.write_record(["x", "power_law_pdf", "log_normal_pdf"])?;
    let share = pl.n_tail as f64 / data.len() as f64;
    for x in log_grid(pl.xmin, hi.max(pl.xmin), args.curve_points) {
        let p = share * pl.ln_pdf(x).exp();
        let q = share * ln.ln_pdf(x).exp();
        w.write_record([num(x), num(p), num(q)])?;
    }
    let u = units(&[("x", "satoshi"), ("power_law_pdf", "per satoshi"), ("log_normal_pdf", "per satoshi")]);
    run.write(format!("{stem}.curve.csv"), &finish_csv(w)?, u)?;

    if let Some(step) = args.sweep_step {
        if !(step > 0.0) {
            return Err(Error::invalid("--sweep-step must be positive"));
        }
        let start = args.sweep_start;
        let sweep = threshold_sweep_with(&data, start, step, args.sweep_grid.into(), args.level)?;
        let mut w = csv_buffer();
        w.write_record(["xmin", "normalized_lr", "p_value", "preferred"])?;
        for r in &sweep {
            w.write_record([num(r.xmin), num(r.normalized_lr), num(r.p_value), preferred_name(r.preferred).to_string()])?;
        }
        let u = units(&[("xmin", "satoshi"), ("normalized_lr", "dimensionless"), ("p_value", "probability")]);
        run.write(format!("{stem}.sweep.csv"), &finish_csv(w)?, u)?;
    }

    if args.umpu {
        let opts = UmpuOptions {
            method: args.umpu_method.into(),
            reps: args.mc_reps,
            seed: run.seed(),
        };
        let rows = umpu_sweep(&data, &opts)?;
        let mut w = csv_buffer();
        w.write_record(["rank", "threshold", "n_tail", "wilks_w", "p_value", "method"])?;
        for r in &rows {
            w.write_record([r.rank.to_string(), num(r.threshold), r.n_tail.to_string(), num(r.wilks_w), num(r.p_value), r.method.as_str().to_string()])?;
        }
        let u = units(&[("rank", "count"), ("threshold", "satoshi"), ("n_tail", "count"), ("wilks_w", "dimensionless"), ("p_value", "probability")]);
        run.write(format!("{stem}.umpu.csv"), &finish_csv(w)?, u)?;
    }

    run.finish()?;
    Ok(())
}
