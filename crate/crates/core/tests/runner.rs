use algas4::config::parse_str;
use algas4::runner::{run_scenario, run_to_writer};
use algas4::trace::{read_trace, TraceWriter};

const FAULTED: &str = r#"{
    "scenario": {"duration_ticks": 1500, "seed": 21},
    "faults": [{"corner": 1, "sensor": "lidar", "start_tick": 500, "end_tick": 560, "kind": "stuck_at", "level": 0.9}],
    "fabric": {"failures": [{"core": 0, "tick": 1000}]}
}"#;

#[test]
fn file_trace_matches_in_memory_trace() {
    let cfg = parse_str(FAULTED).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let from_file = run_scenario(&cfg, &path).unwrap();
    let (in_memory, bytes) = run_to_writer(&cfg, Vec::new()).unwrap();
    assert_eq!(from_file, in_memory);
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
}

#[test]
fn reruns_are_byte_identical_and_reparse_cleanly() {
    let cfg = parse_str(FAULTED).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    run_scenario(&cfg, &a).unwrap();
    run_scenario(&cfg, &b).unwrap();
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let rows = read_trace(bytes.as_slice()).unwrap();
    let mut w = TraceWriter::new(Vec::new()).unwrap();
    for r in &rows {
        w.write_row(r).unwrap();
    }
    assert_eq!(w.finish().unwrap(), bytes);
}

#[test]
fn summary_reflects_fault_and_failure() {
    let cfg = parse_str(FAULTED).unwrap();
    let (summary, bytes) = run_to_writer(&cfg, Vec::new()).unwrap();
    let first = summary.cores[1]
        .first_alarm_tick
        .expect("stuck lidar alarms");
    assert!((500..=516).contains(&first), "first alarm {first}");
    assert_eq!(summary.cores[0].failed_at, Some(1000));
    assert!(summary
        .cores
        .iter()
        .enumerate()
        .all(|(i, c)| i == 1 || c.alarm_ticks == 0));

    let rows = read_trace(bytes.as_slice()).unwrap();
    assert_eq!(rows.len() as u64, summary.trace_rows);
    let alarm_rows = rows.iter().filter(|r| r.apmu_alarm == 1).count() as u64;
    assert_eq!(alarm_rows, summary.total_alarm_ticks());
    assert!(rows.iter().all(|r| r.tick < 1000 || r.core_id != 0));
}
