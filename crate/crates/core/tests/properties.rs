use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use gibrat::estimator::{bin_panel, trend_test, Target};
use gibrat::hopkins::hopkins;
use gibrat::panel::{build_panel, filter_active, read_panel_csv, taxonomy, write_panel_csv, BalanceSnapshot, PanelRow};
use gibrat::tailfit::{fit_power_law, TailParams};

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 1, d).unwrap()
}

fn balances() -> impl Strategy<Value = BTreeMap<String, u64>> {
    prop::collection::btree_map("[a-h]{1,3}", prop_oneof![Just(0u64), 1u64..1_000_000_000_000], 0..40)
}

fn snap(date: NaiveDate, m: &BTreeMap<String, u64>) -> BalanceSnapshot {
    BalanceSnapshot::new(date, m.iter().map(|(k, v)| (k.clone(), *v)).collect()).unwrap()
}

fn rows() -> impl Strategy<Value = Vec<PanelRow>> {
    prop::collection::vec((1e3f64..1e12, -0.9f64..2.0), 1..300).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (s0, r))| PanelRow::new(format!("u{i}"), s0.round(), (s0 * (1.0 + r)).round()))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn join_is_the_union_with_zero_fill(a in balances(), b in balances()) {
        let p = build_panel(&snap(day(1), &a), &snap(day(29), &b)).unwrap();
        prop_assert_eq!(p.dt_days, 28);
        let users: Vec<&String> = a.keys().chain(b.keys()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        prop_assert_eq!(p.rows.len(), users.len());
        for (row, u) in p.rows.iter().zip(users) {
            prop_assert_eq!(&row.user_id, u);
            let s0 = a.get(u).copied().unwrap_or(0) as f64;
            let s1 = b.get(u).copied().unwrap_or(0) as f64;
            prop_assert_eq!((row.s0, row.s1, row.ds), (s0, s1, s1 - s0));
        }
    }

    #[test]
    fn taxonomy_and_filter_partition_the_rows(a in balances(), b in balances(), eps in 0.0f64..1e6) {
        let p = build_panel(&snap(day(1), &a), &snap(day(8), &b)).unwrap();
        let t = taxonomy(&p.rows, eps).unwrap();
        prop_assert_eq!(t.total(), p.rows.len());
        let (kept, r) = filter_active(&p);
        prop_assert_eq!(r.retained + r.removed_inactive + r.removed_unlabeled, p.rows.len());
        prop_assert_eq!(kept.rows.len(), r.retained);
        prop_assert!(kept.rows.iter().all(|row| row.s0 > 0.0 && row.ds != 0.0));
    }

    #[test]
    fn panel_csv_round_trips(rows in rows()) {
        let mut buf = Vec::new();
        write_panel_csv(&rows, &mut buf).unwrap();
        let back = read_panel_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn snapshot_csv_round_trips(a in balances()) {
        let s = snap(day(3), &a);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = BalanceSnapshot::read_csv(day(3), buf.as_slice()).unwrap();
        prop_assert_eq!(back.records(), s.records());
    }

    #[test]
    fn binning_ignores_row_order(rows in rows(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = bin_panel(&rows, 12, 1, Target::Ratio);
        let b = bin_panel(&shuffled, 12, 1, Target::Ratio);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.bins.len(), b.bins.len());
                for (x, y) in a.bins.iter().zip(&b.bins) {
                    prop_assert_eq!((x.lo, x.hi, x.count), (y.lo, y.hi, y.count));
                    prop_assert!((x.mean - y.mean).abs() <= 1e-12 * (1.0 + x.mean.abs()));
                    prop_assert!((x.std - y.std).abs() <= 1e-9 * (1.0 + x.std));
                }
                prop_assert_eq!(a.bins.iter().map(|b| b.count).sum::<usize>(), a.rows_binned);
            }
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn hopkins_lies_in_the_unit_interval(pts in prop::collection::vec((0.0f64..1e6, -1e6f64..1e6), 20..200), seed in any::<u64>()) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let h = hopkins(&pts, 5, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert_eq!(h, hopkins(&pts, 5, seed).unwrap());
    }

    #[test]
    fn reversing_a_series_negates_tau(ys in prop::collection::vec(-100.0f64..100.0, 4..30)) {
        let fwd: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
        let rev: Vec<(f64, f64)> = ys.iter().rev().enumerate().map(|(i, &y)| (i as f64, y)).collect();
        let (f, r) = (trend_test(&fwd).unwrap(), trend_test(&rev).unwrap());
        prop_assert!((-1.0..=1.0).contains(&f.tau));
        prop_assert!(f.p_value > 0.0 && f.p_value <= 1.0);
        prop_assert!((f.tau + r.tau).abs() < 1e-12);
        prop_assert!((f.p_value - r.p_value).abs() < 1e-12);
    }

    #[test]
    fn power_law_exponent_is_scale_free(xs in prop::collection::vec(1.0f64..1e4, 3..200), c in 1e-3f64..1e6) {
        prop_assume!(xs.iter().any(|&x| x > 1.0));
        let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
        let a = fit_power_law(&xs, Some(1.0)).unwrap();
        let b = fit_power_law(&scaled, Some(c)).unwrap();
        match (a.params, b.params) {
            (TailParams::PowerLaw { a: pa }, TailParams::PowerLaw { a: pb }) => prop_assert!((pa - pb).abs() <= 1e-9 * pa),
            _ => prop_assert!(false),
        }
    }
}
