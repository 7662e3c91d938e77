//! Per-trial reports for a fixed seeded run, frozen in `fixtures/report_6x10.csv`.
//! Discrete columns must match exactly; floats to 1e-9 relative, which leaves
//! room for libm differences across platforms.

use lp_recovery::harness::{
    emit_report, run_montecarlo, ConfigOverrides, ReportFormat, TrialRecord,
};

fn frozen_run() -> Vec<TrialRecord> {
    let cfg = ConfigOverrides::from_toml("m = 6\nn = 10\nk = 2\ntrials = 5\nseed = 11\nepsilon = 0.001\n")
        .unwrap()
        .resolve()
        .unwrap();
    run_montecarlo(&cfg).unwrap().records
}

fn same_field(col: &str, got: &str, want: &str) {
    match (got.parse::<f64>(), want.parse::<f64>()) {
        (Ok(g), Ok(w)) if col != "trial" && col != "seed_offset" && col != "iterations" => {
            let scale = w.abs().max(1e-300);
            assert!((g - w).abs() / scale <= 1e-9, "{col}: {got} vs {want}");
        }
        _ => assert_eq!(got, want, "column {col}"),
    }
}

#[test]
fn csv_matches_fixture() {
    let mut buf = Vec::new();
    emit_report(&frozen_run(), ReportFormat::Csv, &mut buf).unwrap();
    let got = String::from_utf8(buf).unwrap();
    let want = include_str!("fixtures/report_6x10.csv");

    let got_lines: Vec<&str> = got.lines().collect();
    let want_lines: Vec<&str> = want.lines().collect();
    assert_eq!(got_lines.len(), want_lines.len());
    assert_eq!(got_lines[0], want_lines[0], "header changed");
    let header: Vec<&str> = want_lines[0].split(',').collect();
    for (g, w) in got_lines[1..].iter().zip(&want_lines[1..]) {
        let gf: Vec<&str> = g.split(',').collect();
        let wf: Vec<&str> = w.split(',').collect();
        assert_eq!(gf.len(), header.len());
        for ((col, a), b) in header.iter().zip(&gf).zip(&wf) {
            same_field(col, a, b);
        }
    }
}

#[test]
fn jsonl_round_trips() {
    let records = frozen_run();
    let mut buf = Vec::new();
    emit_report(&records, ReportFormat::Jsonl, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let back: Vec<TrialRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(back, records);
}

#[test]
fn csv_round_trips_through_the_csv_reader() {
    let records = frozen_run();
    let mut buf = Vec::new();
    emit_report(&records, ReportFormat::Csv, &mut buf).unwrap();
    let back: Vec<TrialRecord> = csv::Reader::from_reader(buf.as_slice())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(back, records);
}

#[test]
fn empty_report_is_an_error() {
    assert!(emit_report(&[], ReportFormat::Csv, Vec::new()).is_err());
}
