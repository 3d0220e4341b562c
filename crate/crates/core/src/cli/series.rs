//! Input readers and the plot-ready series shared by the subcommands.

use std::path::Path;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;

use crate::error::{Error, Result};
use crate::estimator::bins::{bin_index, make_bins};

fn date_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d{4}-\d{2}-\d{2})").expect("valid pattern"))
}

/// The first `YYYY-MM-DD` embedded in a file name, if it is a real date.
pub fn date_in_name(path: &Path) -> Option<NaiveDate> {
    let name = path.file_name()?.to_str()?;
    date_pattern()
        .captures_iter(name)
        .find_map(|c| NaiveDate::parse_from_str(&c[1], "%Y-%m-%d").ok())
}

/// Positive values of one CSV column. The column is `column` if given, else
/// `balance`, else the only column; a header row is detected when its cells
/// do not parse as numbers.
pub fn read_values(bytes: &[u8], column: Option<&str>) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(false).from_reader(bytes);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::InsufficientData { needed: 1, got: 0 }),
    };
    let is_header = first.iter().all(|c| c.trim().parse::<f64>().is_err());
    let idx = if is_header {
        let want = column.unwrap_or("balance");
        match first.iter().position(|c| c.trim() == want) {
            Some(i) => i,
            None if column.is_none() && first.len() == 1 => 0,
            None => return Err(Error::invalid(format!("no column named {want:?}"))),
        }
    } else if let Some(c) = column {
        return Err(Error::invalid(format!("column {c:?} requested but the file has no header")));
    } else if first.len() == 1 {
        0
    } else {
        return Err(Error::invalid("headerless input must have a single column"));
    };

    let mut out = Vec::new();
    let mut push = |rec: &csv::StringRecord| -> Result<()> {
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let cell = rec.get(idx).ok_or_else(|| Error::Malformed { line, msg: "missing value".into() })?;
        let v: f64 = cell.trim().parse().map_err(|_| Error::Malformed {
            line,
            msg: format!("value {cell:?} is not a number"),
        })?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Malformed {
                line,
                msg: format!("value {v} is not positive"),
            });
        }
        out.push(v);
        Ok(())
    };
    if !is_header {
        push(&first)?;
    }
    for rec in records {
        push(&rec?)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub count: usize,
    /// Count over total and width: a probability density.
    pub density: f64,
}

/// Logarithmic bins spanning `[lo, hi]`; `total` normalizes the density.
pub fn log_histogram(values: &[f64], lo: f64, hi: f64, n_bins: usize, total: usize) -> Result<Vec<HistBin>> {
    let edges = make_bins(lo, hi, n_bins)?;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        if let Some(i) = bin_index(&edges, v) {
            counts[i] += 1;
        }
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let (lo, hi) = (edges[i], edges[i + 1]);
            HistBin {
                lo,
                hi,
                center: (lo * hi).sqrt(),
                count,
                density: count as f64 / (total as f64 * (hi - lo)),
            }
        })
        .collect())
}

/// `n` points evenly spaced in log between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Shortest round-trip form; switches to exponent notation for very small or
/// large magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// A CSV writer into memory with LF line endings.
pub fn csv_buffer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

pub fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_from_file_names() {
        assert_eq!(date_in_name(Path::new("dir/snap-2016-01-23.csv")), NaiveDate::from_ymd_opt(2016, 1, 23));
        assert_eq!(date_in_name(Path::new("2016-13-40_2016-02-20.csv")), NaiveDate::from_ymd_opt(2016, 2, 20));
        assert_eq!(date_in_name(Path::new("balances.csv")), None);
    }

    #[test]
    fn values_by_header_or_single_column() {
        assert_eq!(read_values(b"user_id,balance\na,5\nb,7\n", None).unwrap(), vec![5.0, 7.0]);
        assert_eq!(read_values(b"3\n4.5\n", None).unwrap(), vec![3.0, 4.5]);
        assert_eq!(read_values(b"x,y\n1,2\n", Some("y")).unwrap(), vec![2.0]);
        assert!(read_values(b"x,y\n1,2\n", None).is_err());
        match read_values(b"user_id,balance\na,5\nb,0\n", None) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn histogram_density_integrates_to_one() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let h = log_histogram(&v, 1.0, 1000.0, 100, v.len()).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 1000);
        let mass: f64 = h.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(10.0, 1e5, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 10.0);
        assert_eq!(g[4], 1e5);
        assert!((g[2] - 1000.0).abs() < 1e-9);
    }
}
