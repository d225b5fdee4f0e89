use proptest::prelude::*;

use super::*;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

/// Straightforward two-pass mean and SEM.
fn two_pass(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn plan() -> BenchPlan {
    BenchPlan::load(format!("{FIXTURES}/bench-arduino.json")).unwrap()
}

#[test]
fn known_statistics() {
    let (m, s) = mean_sem(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(m, 2.0);
    assert!((s - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    assert_eq!(format!("{s:.3}"), "0.577");
    assert_eq!(mean_sem(&[5.0; 4]), Some((5.0, 0.0)));
    assert_eq!(mean_sem(&[7.5]), Some((7.5, 0.0)));
    assert_eq!(mean_sem(&[]), None);
}

proptest! {
    #[test]
    fn matches_two_pass(xs in prop::collection::vec(0.0f64..5000.0, 2..200)) {
        let (m, s) = mean_sem(&xs).unwrap();
        let (om, os) = two_pass(&xs);
        prop_assert!(close(m, om), "{} vs {}", m, om);
        prop_assert!(close(s, os) || (s - os).abs() < 1e-12, "{} vs {}", s, os);
    }
}

#[test]
fn plan_defaults_and_errors() {
    let p = BenchPlan::from_json(r#"{"td": "x.json", "transport": "host", "property": "p"}"#).unwrap();
    assert_eq!(p.repetitions, 25);
    assert_eq!(p.warmup, 1);
    assert_eq!(p.operations, [BenchOperation::Connect, BenchOperation::Read, BenchOperation::Disconnect]);
    assert_eq!(p.policy, ConnectionPolicy::KeepConnected);
    assert!(BenchPlan::from_json(r#"{"td": "x", "transport": "host", "repetitions": 0, "operations": ["connect"]}"#)
        .is_err());
    assert!(BenchPlan::from_json(r#"{"td": "x", "transport": "host"}"#).is_err());
    assert!(BenchPlan::from_json(r#"{"td": "x", "transport": "tcp:1", "operations": ["connect"]}"#).is_err());
    assert!(BenchPlan::from_json(r#"{"td": "x", "transport": "host", "operations": ["scan"]}"#).is_err());
    let p = BenchPlan::from_json(
        r#"{"td": "x", "transport": "host", "operations": ["connect"], "policy": "reconnect-per-operation"}"#,
    )
    .unwrap();
    assert_eq!(p.policy, ConnectionPolicy::ReconnectPerOperation);
}

#[test]
fn paths_resolve_against_plan() {
    let p = plan();
    assert_eq!(p.td_path(), Path::new(FIXTURES).join("arduino.td.json"));
    assert_eq!(p.transport_selection().unwrap(), TransportSelection::Sim(Path::new(FIXTURES).join("net.json")));
}

#[test]
fn virtual_runs_are_repeatable() {
    let a = run_bench(&plan()).unwrap();
    let b = run_bench(&plan()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.device, "Arduino GATT Server");
    assert_eq!(a.device_id, "24-0A-C4-01-02-03");
    for s in &a.stats {
        assert_eq!(s.n, 25);
        assert_eq!(s.failures, 0);
        let (m, e) = two_pass(&s.samples_ms);
        assert!(close(s.mean_ms, m) && close(s.sem_ms, e));
    }
    // advertising 200 ms, connect 25 ms, discover 15 ms
    let connect = a.get(BenchOperation::Connect).unwrap();
    assert!(connect.samples_ms.iter().all(|t| (40.0..=240.0 + 1e-6).contains(t)), "{connect:?}");
    let disconnect = a.get(BenchOperation::Disconnect).unwrap();
    assert!(disconnect.samples_ms.iter().all(|t| (t - 8.0).abs() < 1e-6));
    let read = a.get(BenchOperation::Read).unwrap();
    assert!(read.samples_ms.iter().all(|t| (t - 4.0).abs() < 1e-6));

    let mut other = plan();
    other.seed = Some(2);
    assert_ne!(run_bench(&other).unwrap().get(BenchOperation::Connect), Some(connect));
}

#[test]
fn reconnecting_reads_include_connection() {
    let mut p = plan();
    p.policy = ConnectionPolicy::ReconnectPerOperation;
    p.operations = vec![BenchOperation::Read];
    let r = run_bench(&p).unwrap();
    let read = r.get(BenchOperation::Read).unwrap();
    // connect + discover + read + disconnect at least
    assert!(read.samples_ms.iter().all(|t| *t >= 25.0 + 15.0 + 4.0 + 8.0 - 1e-6));
}

#[test]
fn failures_are_counted() {
    let td = parse_td(&std::fs::read_to_string(format!("{FIXTURES}/lamp.td.json")).unwrap()).unwrap();
    let opened = plan().transport_selection().unwrap().open(&OpenOptions::default()).unwrap();
    let thing = consume(td, opened.transport, ConnectionPolicy::KeepConnected).unwrap();
    assert!(time_operation(BenchOperation::Disconnect, &thing, None).is_err());
    let settings = BenchSettings {
        operations: vec![BenchOperation::Connect, BenchOperation::Read],
        repetitions: 3,
        warmup: 0,
        property: Some("power".into()),
    };
    // power is write-only
    assert!(matches!(bench_thing(&thing, &settings), Err(BenchError::AllFailed(BenchOperation::Read))));
}

#[test]
fn csv_round_trip() {
    let r = run_bench(&plan()).unwrap();
    let text = to_csv(&r.stats).unwrap();
    assert!(text.starts_with("operation,n,mean_ms,sem_ms\n"));
    let rows = parse_csv(&text).unwrap();
    let expected: Vec<CsvRow> = r.stats.iter().map(CsvRow::from).collect();
    assert_eq!(rows, expected);
}

#[test]
fn table_layout() {
    let stats = vec![
        BenchStats::from_samples(BenchOperation::Connect, vec![1.0, 2.0, 3.0], 0).unwrap(),
        BenchStats::from_samples(BenchOperation::Read, vec![5.0; 4], 1).unwrap(),
    ];
    let report = BenchReport { device: "Lamp".into(), device_id: "BE-58-30-00-CC-11".into(), stats };
    assert_eq!(
        format_table(&[report]),
        "Device | Connect / ms | Disconnect / ms | read / ms\nLamp | 2.00 ± 0.58 | - | 5.00 ± 0.00\n"
    );
}
