//! Batch execution of a configured scenario.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::corner::CoreId;
use crate::fabric::{FabricError, LinkStats, System, SystemMode, SystemOutput};
use crate::trace::TraceWriter;

/// Ticks of sensor readings generated per batch.
pub const BLOCK_TICKS: u64 = 1024;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write trace {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trace serialization failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Fabric(#[from] FabricError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreSummary {
    pub core_id: CoreId,
    pub first_alarm_tick: Option<u64>,
    pub alarm_ticks: u64,
    pub no_rule_fired_ticks: u64,
    pub siu_clamps: u64,
    pub failed_at: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModeTransition {
    pub tick: u64,
    pub from: &'static str,
    pub to: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LinkSummary {
    pub from: CoreId,
    pub to: CoreId,
    #[serde(flatten)]
    pub stats: LinkStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub ticks: u64,
    pub seed: u64,
    pub workers: usize,
    pub trace_rows: u64,
    pub cores: Vec<CoreSummary>,
    /// Ticks on which each pair raised its inclination flag.
    pub inclination_flag_ticks: [u64; 2],
    pub initial_mode: &'static str,
    pub final_mode: &'static str,
    pub mode_transitions: Vec<ModeTransition>,
    pub links: Vec<LinkSummary>,
}

impl RunSummary {
    pub fn total_alarm_ticks(&self) -> u64 {
        self.cores.iter().map(|c| c.alarm_ticks).sum()
    }
}

struct Tally {
    cores: Vec<CoreSummary>,
    flags: [u64; 2],
    transitions: Vec<ModeTransition>,
    mode: SystemMode,
}

impl Tally {
    fn new() -> Self {
        let cores = CoreId::ALL
            .iter()
            .map(|&core_id| CoreSummary {
                core_id,
                first_alarm_tick: None,
                alarm_ticks: 0,
                no_rule_fired_ticks: 0,
                siu_clamps: 0,
                failed_at: None,
            })
            .collect();
        Tally {
            cores,
            flags: [0; 2],
            transitions: Vec::new(),
            mode: SystemMode::FullAuto,
        }
    }

    fn observe(&mut self, out: &SystemOutput) {
        for o in out.per_core.iter().flatten() {
            let c = &mut self.cores[o.core_id.index()];
            if o.apmu_verdict.alarm {
                c.alarm_ticks += 1;
                c.first_alarm_tick.get_or_insert(out.tick);
            }
            c.no_rule_fired_ticks += (o.fls_status == crate::fls::FlsStatus::NoRuleFired) as u64;
            c.siu_clamps += o.siu_clamp as u64;
        }
        for (n, flag) in self.flags.iter_mut().zip(out.inclination_flags) {
            *n += (flag == Some(true)) as u64;
        }
        if out.mode != self.mode {
            self.transitions.push(ModeTransition {
                tick: out.tick,
                from: self.mode.as_str(),
                to: out.mode.as_str(),
            });
            self.mode = out.mode;
        }
    }
}

/// Runs the scenario, streaming every tick's trace rows into `sink`.
pub fn run_to_writer<W: Write>(config: &RunConfig, sink: W) -> Result<(RunSummary, W), RunError> {
    let mut system = System::new(&config.settings, config.fabric.clone())?;
    let mut trace = TraceWriter::new(sink)?;
    let mut tally = Tally::new();
    let mut failures = config.failures.iter().peekable();
    let duration = config.scenario.duration();

    let mut start = 0;
    while start < duration {
        let len = BLOCK_TICKS.min(duration - start);
        for (i, readings) in config
            .scenario
            .readings_block(start, len)
            .iter()
            .enumerate()
        {
            let tick = start + i as u64;
            while let Some(f) = failures.next_if(|f| f.tick <= tick) {
                if system.core(f.core).is_healthy() {
                    system.fail_core(f.core);
                    tally.cores[f.core.index()].failed_at = Some(tick);
                }
            }
            let out = system.tick(readings);
            tally.observe(&out);
            trace.write_tick(&out)?;
        }
        start += len;
    }

    let links = CoreId::ALL
        .iter()
        .zip(system.link_stats())
        .map(|(&from, stats)| LinkSummary {
            from,
            to: from.opposite(),
            stats,
        })
        .collect();
    let summary = RunSummary {
        ticks: duration,
        seed: config.scenario.spec().seed,
        workers: config.fabric.workers,
        trace_rows: trace.rows_written(),
        cores: tally.cores,
        inclination_flag_ticks: tally.flags,
        initial_mode: SystemMode::FullAuto.as_str(),
        final_mode: tally.mode.as_str(),
        mode_transitions: tally.transitions,
        links,
    };
    Ok((summary, trace.finish()?))
}

/// Runs the scenario and writes the trace to `out`.
pub fn run_scenario(config: &RunConfig, out: &Path) -> Result<RunSummary, RunError> {
    let io_err = |source| RunError::Output {
        path: out.to_path_buf(),
        source,
    };
    let file = File::create(out).map_err(io_err)?;
    let (summary, mut w) = run_to_writer(config, BufWriter::new(file))?;
    w.flush().map_err(io_err)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_str;
    use crate::trace::read_trace;

    #[test]
    fn clean_run_summary() {
        let cfg = parse_str(r#"{"scenario": {"duration_ticks": 300}}"#).unwrap();
        let (summary, bytes) = run_to_writer(&cfg, Vec::new()).unwrap();
        assert_eq!(summary.ticks, 300);
        assert_eq!(summary.trace_rows, 1200);
        assert_eq!(summary.total_alarm_ticks(), 0);
        assert!(summary.mode_transitions.is_empty());
        assert_eq!(summary.final_mode, "full_auto");
        let rows = read_trace(bytes.as_slice()).unwrap();
        assert_eq!(rows.len(), 1200);
        for pair in rows.windows(2) {
            assert!((pair[0].tick, pair[0].core_id) < (pair[1].tick, pair[1].core_id));
        }
    }

    #[test]
    fn failure_drops_rows_and_degrades() {
        let cfg = parse_str(
            r#"{"scenario": {"duration_ticks": 100},
                "fabric": {"failures": [{"core": 3, "tick": 40}]}}"#,
        )
        .unwrap();
        let (summary, bytes) = run_to_writer(&cfg, Vec::new()).unwrap();
        assert_eq!(summary.cores[3].failed_at, Some(40));
        assert_eq!(summary.trace_rows, 400 - 60);
        assert_eq!(
            summary.mode_transitions,
            vec![ModeTransition {
                tick: 40,
                from: "full_auto",
                to: "degraded_pair"
            }]
        );
        let rows = read_trace(bytes.as_slice()).unwrap();
        assert!(rows.iter().filter(|r| r.tick >= 40).all(|r| r.core_id != 3));
        assert!(rows
            .iter()
            .filter(|r| r.core_id == 1 && r.tick >= 40)
            .all(|r| r.incl_flag_pair.is_none()));
    }

    #[test]
    fn unwritable_output() {
        let cfg = parse_str(r#"{"scenario": {"duration_ticks": 10}}"#).unwrap();
        let err = run_scenario(&cfg, Path::new("/nonexistent/dir/trace.csv")).unwrap_err();
        assert!(matches!(err, RunError::Output { .. }));
    }

    #[test]
    fn block_boundaries_do_not_matter() {
        let cfg = parse_str(r#"{"scenario": {"duration_ticks": 2100, "seed": 3}}"#).unwrap();
        let (_, whole) = run_to_writer(&cfg, Vec::new()).unwrap();
        let mut system = System::new(&cfg.settings, cfg.fabric.clone()).unwrap();
        let mut w = TraceWriter::new(Vec::new()).unwrap();
        for t in 0..2100 {
            w.write_tick(&system.tick(&cfg.scenario.readings(t)))
                .unwrap();
        }
        assert_eq!(w.finish().unwrap(), whole);
    }
}
