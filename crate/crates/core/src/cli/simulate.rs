use std::path::PathBuf;

use chrono::NaiveDate;
use clap::Args;
use serde::Serialize;

use super::output::units;
use super::{start_run, Global};
use crate::error::Result;
use crate::panel::{build_panel, write_panel_csv};
use crate::sim::{snapshot_series, SimConfig, SimReport};

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Flat `key = value` config file
    pub config: PathBuf,
    /// Base name of the output files; snapshots are `<name>-YYYY-MM-DD.csv`
    #[arg(long, default_value = "sim")]
    pub name: String,
}

#[derive(Serialize)]
struct SnapshotInfo {
    day: u32,
    date: NaiveDate,
    file: String,
    users: usize,
}

#[derive(Serialize)]
struct SimulateReport {
    config: SimConfig,
    report: SimReport,
    snapshots: Vec<SnapshotInfo>,
    panel: Option<String>,
    units: super::output::Units,
}

pub fn run(global: &Global, args: &SimulateArgs) -> Result<()> {
    // the config file fixes the seed unless a flag overrides it
    let text = super::output::read_file(&args.config)?;
    let mut cfg = SimConfig::parse(&String::from_utf8_lossy(&text))?;
    let mut run = start_run(global, "simulate", &args.name, args, Some(cfg.seed))?;
    run.record_input(&args.config, &text);
    cfg.seed = run.seed();
    cfg.validate()?;
    let stem = run.stem().to_string();

    let (snaps, report) = snapshot_series(&cfg, &cfg.emit_days)?;
    if report.overflowed > 0 {
        log::warn!("{} of {} users exceeded the largest representable balance and were dropped", report.overflowed, report.n_users);
    }
    let snap_units = units(&[("balance", "satoshi")]);
    let mut infos = Vec::new();
    for (snap, &day) in snaps.iter().zip(&cfg.emit_days) {
        let file = format!("{stem}-{}.csv", snap.date());
        let mut buf = Vec::new();
        snap.write_csv(&mut buf)?;
        run.write(file.clone(), &buf, snap_units.clone())?;
        infos.push(SnapshotInfo {
            day,
            date: snap.date(),
            file,
            users: snap.len(),
        });
    }

    let panel = match (snaps.first(), snaps.last()) {
        (Some(a), Some(b)) if snaps.len() >= 2 => {
            let p = build_panel(a, b)?;
            let mut buf = Vec::new();
            write_panel_csv(&p.rows, &mut buf)?;
            let file = format!("{stem}.panel.csv");
            run.write(file.clone(), &buf, units(&[("s0", "satoshi"), ("s1", "satoshi"), ("ds", "satoshi")]))?;
            Some(file)
        }
        _ => None,
    };

    let out = SimulateReport {
        config: cfg,
        report,
        snapshots: infos,
        panel,
        units: units(&[
            ("day", "days"),
            ("step_days", "days"),
            ("horizon_days", "days"),
            ("s_star", "satoshi"),
            ("m", "ln satoshi"),
            ("v", "ln satoshi"),
            ("xmin", "satoshi"),
            ("value", "satoshi"),
            ("mu", "per day"),
            ("sigma", "per sqrt(day)"),
        ]),
    };
    run.write_json(format!("{stem}.json"), &out, units(&[("s_star", "satoshi"), ("mu", "per day"), ("sigma", "per sqrt(day)")]))?;
    run.finish()?;
    Ok(())
}
