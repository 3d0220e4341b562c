//! Balance snapshots, transition panels and the scatter-line taxonomy.
//!
//! Balances are in satoshi (1 bitcoin = 10^8 satoshi). Panel rows keep
//! balances as `f64`; every integer balance below 2^53 is exact, which covers
//! the whole supply, and simulated panels can carry fractional satoshi.

use std::collections::HashSet;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SATOSHI_PER_BITCOIN: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceSnapshot {
    date: NaiveDate,
    /// Sorted by user id, ids unique.
    records: Vec<(String, u64)>,
}

impl BalanceSnapshot {
    pub fn new(date: NaiveDate, mut records: Vec<(String, u64)>) -> Result<Self> {
        records.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = records.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateUser {
                user: w[0].0.clone(),
            });
        }
        Ok(BalanceSnapshot { date, records })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn records(&self) -> &[(String, u64)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn balance(&self, user: &str) -> Option<u64> {
        self.records
            .binary_search_by(|(u, _)| u.as_str().cmp(user))
            .ok()
            .map(|i| self.records[i].1)
    }

    /// Parse `user_id,balance` CSV. Errors name the offending line.
    pub fn read_csv<R: Read>(date: NaiveDate, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "user_id" || &headers[1] != "balance" {
            return Err(Error::Malformed {
                line: 1,
                msg: format!("expected header `user_id,balance`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Malformed {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != 2 {
                return Err(Error::Malformed {
                    line,
                    msg: format!("expected 2 fields, found {}", rec.len()),
                });
            }
            let user = rec[0].to_string();
            if user.is_empty() {
                return Err(Error::Malformed {
                    line,
                    msg: "empty user_id".into(),
                });
            }
            let balance: u64 = rec[1].parse().map_err(|_| Error::Malformed {
                line,
                msg: format!("balance {:?} is not a non-negative integer", &rec[1]),
            })?;
            if !seen.insert(user.clone()) {
                return Err(Error::DuplicateUser { user });
            }
            records.push((user, balance));
        }
        BalanceSnapshot::new(date, records)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["user_id", "balance"])?;
        for (user, bal) in &self.records {
            w.write_record([user.as_str(), &bal.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Positive starting balance, balance changed.
    A,
    /// Positive starting balance, balance unchanged.
    B,
}

impl Group {
    pub fn classify(s0: f64, ds: f64) -> Option<Group> {
        if s0 > 0.0 {
            Some(if ds != 0.0 { Group::A } else { Group::B })
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub user_id: String,
    pub s0: f64,
    pub s1: f64,
    pub ds: f64,
    pub group: Option<Group>,
}

impl PanelRow {
    pub fn new(user_id: String, s0: f64, s1: f64) -> Self {
        let ds = s1 - s0;
        PanelRow {
            user_id,
            s0,
            s1,
            ds,
            group: Group::classify(s0, ds),
        }
    }

    pub fn ratio(&self) -> f64 {
        self.ds / self.s0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPanel {
    pub t0: NaiveDate,
    pub dt_days: u32,
    pub rows: Vec<PanelRow>,
}

/// Join two snapshots. Users missing on one side hold 0 there.
pub fn build_panel(snap0: &BalanceSnapshot, snap1: &BalanceSnapshot) -> Result<TransitionPanel> {
    let days = (snap1.date - snap0.date).num_days();
    if days <= 0 {
        return Err(Error::HorizonZero(snap0.date, snap1.date));
    }
    let (a, b) = (snap0.records(), snap1.records());
    let mut rows = Vec::with_capacity(a.len().max(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                rows.push(PanelRow::new(a[i].0.clone(), a[i].1 as f64, 0.0));
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                rows.push(PanelRow::new(b[j].0.clone(), 0.0, b[j].1 as f64));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                rows.push(PanelRow::new(a[i].0.clone(), a[i].1 as f64, b[j].1 as f64));
                i += 1;
                j += 1;
            }
        }
    }
    Ok(TransitionPanel {
        t0: snap0.date,
        dt_days: days as u32,
        rows,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub retained: usize,
    /// Group B rows (positive balance, no change).
    pub removed_inactive: usize,
    /// Rows starting at zero balance.
    pub removed_unlabeled: usize,
}

/// Keep group A only.
pub fn filter_active(panel: &TransitionPanel) -> (TransitionPanel, FilterReport) {
    let mut report = FilterReport::default();
    let rows: Vec<PanelRow> = panel
        .rows
        .iter()
        .filter(|r| match r.group {
            Some(Group::A) => true,
            Some(Group::B) => {
                report.removed_inactive += 1;
                false
            }
            None => {
                report.removed_unlabeled += 1;
                false
            }
        })
        .cloned()
        .collect();
    report.retained = rows.len();
    (
        TransitionPanel {
            t0: panel.t0,
            dt_days: panel.dt_days,
            rows,
        },
        report,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Line {
    Vertical,
    Horizontal,
    Diagonal,
    Interior,
}

/// Which scatter line a row sits on. Unchanged balances take precedence.
pub fn classify_line(row: &PanelRow, epsilon_v: f64) -> Line {
    if row.ds == 0.0 {
        Line::Horizontal
    } else if row.s0 <= epsilon_v && row.ds > 0.0 {
        Line::Vertical
    } else if row.s1 == 0.0 && row.s0 > 0.0 {
        Line::Diagonal
    } else {
        Line::Interior
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScatterTaxonomy {
    pub epsilon_v: f64,
    pub vertical: usize,
    pub horizontal: usize,
    pub diagonal: usize,
    pub interior: usize,
}

impl ScatterTaxonomy {
    pub fn total(&self) -> usize {
        self.vertical + self.horizontal + self.diagonal + self.interior
    }
}

pub fn taxonomy(rows: &[PanelRow], epsilon_v: f64) -> Result<ScatterTaxonomy> {
    if !(epsilon_v >= 0.0) {
        return Err(Error::invalid("epsilon_v must be non-negative"));
    }
    let mut t = ScatterTaxonomy {
        epsilon_v,
        ..Default::default()
    };
    for row in rows {
        match classify_line(row, epsilon_v) {
            Line::Vertical => t.vertical += 1,
            Line::Horizontal => t.horizontal += 1,
            Line::Diagonal => t.diagonal += 1,
            Line::Interior => t.interior += 1,
        }
    }
    Ok(t)
}

fn fmt_balance(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Write `user_id,s0,s1,ds,group`.
pub fn write_panel_csv<W: Write>(rows: &[PanelRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["user_id", "s0", "s1", "ds", "group"])?;
    for r in rows {
        let group = match r.group {
            Some(Group::A) => "A",
            Some(Group::B) => "B",
            None => "",
        };
        w.write_record([
            r.user_id.as_str(),
            &fmt_balance(r.s0),
            &fmt_balance(r.s1),
            &fmt_balance(r.ds),
            group,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a panel CSV; `ds` and `group` are re-derived and checked.
pub fn read_panel_csv<R: Read>(reader: R) -> Result<Vec<PanelRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["user_id", "s0", "s1", "ds", "group"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Malformed {
            line: 1,
            msg: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Malformed {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|_| Error::Malformed {
                line,
                msg: format!("column {} value {:?} is not a number", expected[k], &rec[k]),
            })
        };
        let (s0, s1, ds) = (num(1)?, num(2)?, num(3)?);
        if s0 < 0.0 || s1 < 0.0 {
            return Err(Error::Malformed {
                line,
                msg: "negative balance".into(),
            });
        }
        let row = PanelRow::new(rec[0].to_string(), s0, s1);
        if row.ds != ds {
            return Err(Error::Malformed {
                line,
                msg: format!("ds {ds} differs from s1 - s0 = {}", row.ds),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn snap(d: &str, recs: &[(&str, u64)]) -> BalanceSnapshot {
        BalanceSnapshot::new(date(d), recs.iter().map(|(u, b)| (u.to_string(), *b)).collect()).unwrap()
    }

    #[test]
    fn absent_in_later_snapshot_is_full_sellout() {
        let p = build_panel(&snap("2016-01-23", &[("u", 5)]), &snap("2016-02-20", &[])).unwrap();
        let r = &p.rows[0];
        assert_eq!((r.s0, r.s1, r.ds), (5.0, 0.0, -5.0));
        assert_eq!(r.group, Some(Group::A));
        assert_eq!(classify_line(r, 0.0), Line::Diagonal);
        assert_eq!(p.dt_days, 28);
    }

    #[test]
    fn identical_snapshots_are_all_group_b() {
        let recs = [("a", 10), ("b", 0), ("c", 7)];
        let p = build_panel(&snap("2016-01-23", &recs), &snap("2016-03-01", &recs)).unwrap();
        for r in &p.rows {
            assert_eq!(r.ds, 0.0);
            if r.s0 > 0.0 {
                assert_eq!(r.group, Some(Group::B));
            } else {
                assert_eq!(r.group, None);
            }
        }
    }

    #[test]
    fn same_date_is_rejected() {
        let s = snap("2016-01-23", &[("a", 1)]);
        assert!(matches!(build_panel(&s, &s), Err(Error::HorizonZero(..))));
    }

    #[test]
    fn duplicate_user_is_rejected() {
        let csv = "user_id,balance\na,1\nb,2\na,3\n";
        let err = BalanceSnapshot::read_csv(date("2016-01-23"), csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DuplicateUser { ref user } if user == "a"));
    }

    #[test]
    fn malformed_row_names_line() {
        let csv = "user_id,balance\na,1\nb,-2\n";
        match BalanceSnapshot::read_csv(date("2016-01-23"), csv.as_bytes()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vertical_line_row_is_filtered() {
        let p = TransitionPanel {
            t0: date("2016-01-23"),
            dt_days: 28,
            rows: vec![PanelRow::new("v".into(), 0.0, 1e9), PanelRow::new("a".into(), 10.0, 12.0)],
        };
        let (f, rep) = filter_active(&p);
        assert_eq!(f.rows.len(), 1);
        assert_eq!(f.rows[0].user_id, "a");
        assert_eq!(rep.removed_unlabeled, 1);
    }

    #[test]
    fn all_horizontal_filters_to_empty() {
        let p = TransitionPanel {
            t0: date("2016-01-23"),
            dt_days: 28,
            rows: (1..5).map(|i| PanelRow::new(i.to_string(), i as f64, i as f64)).collect(),
        };
        let (f, rep) = filter_active(&p);
        assert!(f.rows.is_empty());
        assert_eq!(rep.removed_inactive, 4);
    }

    #[test]
    fn taxonomy_recovers_constructed_mixture() {
        let mut rows = Vec::new();
        for i in 0..30 {
            rows.push(PanelRow::new(format!("v{i}"), 0.0, 100.0 + i as f64));
            rows.push(PanelRow::new(format!("h{i}"), 50.0 + i as f64, 50.0 + i as f64));
            rows.push(PanelRow::new(format!("d{i}"), 70.0 + i as f64, 0.0));
        }
        for i in 0..10 {
            rows.push(PanelRow::new(format!("i{i}"), 40.0 + i as f64, 20.0));
        }
        let t = taxonomy(&rows, 0.0).unwrap();
        assert_eq!((t.vertical, t.horizontal, t.diagonal, t.interior), (30, 30, 30, 10));
        assert_eq!(t.total(), rows.len());
    }

    #[test]
    fn epsilon_widens_vertical_line() {
        let rows = vec![PanelRow::new("x".into(), 3.0, 500.0)];
        assert_eq!(taxonomy(&rows, 0.0).unwrap().interior, 1);
        assert_eq!(taxonomy(&rows, 5.0).unwrap().vertical, 1);
    }

    #[test]
    fn panel_csv_round_trip() {
        let rows = vec![PanelRow::new("a".into(), 5.0, 0.0), PanelRow::new("b".into(), 0.0, 3.0)];
        let mut buf = Vec::new();
        write_panel_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "user_id,s0,s1,ds,group\na,5,0,-5,A\nb,0,3,3,\n");
        assert_eq!(read_panel_csv(buf.as_slice()).unwrap(), rows);
    }
}
