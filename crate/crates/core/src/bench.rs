//! Fabric throughput measurement.

use std::time::Instant;

use serde::Serialize;

use crate::config::RunConfig;
use crate::runner::{run_to_writer, RunError};
use crate::scenario::{Scenario, ScenarioSpec};
use crate::trace::DigestSink;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRun {
    pub workers: usize,
    pub seconds: f64,
    pub ticks_per_second: f64,
    pub trace_digest: String,
    pub trace_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub ticks: u64,
    pub runs: Vec<BenchRun>,
    pub traces_match: bool,
}

/// Runs a fault-free copy of `config` for `ticks` ticks once per entry of
/// `worker_counts`, hashing the trace instead of storing it.
pub fn bench(
    config: &RunConfig,
    ticks: u64,
    worker_counts: &[usize],
) -> Result<BenchReport, RunError> {
    let spec = ScenarioSpec {
        duration_ticks: ticks.max(1),
        ..config.scenario.spec().clone()
    };
    let mut clean = config.clone();
    clean.scenario = Scenario::new(spec, Vec::new()).expect("fault-free scenario is valid");
    clean.failures.clear();

    let mut runs = Vec::with_capacity(worker_counts.len());
    for &workers in worker_counts {
        let cfg = clean.clone().with_workers(workers);
        let start = Instant::now();
        let (summary, sink) = run_to_writer(&cfg, DigestSink::default())?;
        let seconds = start.elapsed().as_secs_f64();
        runs.push(BenchRun {
            workers: cfg.fabric.workers,
            seconds,
            ticks_per_second: summary.ticks as f64 / seconds.max(f64::MIN_POSITIVE),
            trace_digest: format!("{:016x}", sink.digest()),
            trace_bytes: sink.bytes(),
        });
    }
    let traces_match = runs
        .windows(2)
        .all(|w| w[0].trace_digest == w[1].trace_digest);
    Ok(BenchReport {
        ticks: ticks.max(1),
        runs,
        traces_match,
    })
}
