//! CSV trace rows, one per live corner per tick.

use std::hash::{DefaultHasher, Hasher};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::fabric::SystemOutput;

pub const COLUMNS: [&str; 12] = [
    "tick",
    "core_id",
    "raw_lidar",
    "raw_radar",
    "filt_lidar",
    "filt_radar",
    "fls_crisp",
    "fls_status",
    "apmu_weight",
    "apmu_alarm",
    "incl_flag_pair",
    "mode",
];

/// Sample columns hold raw integers (U0.16 codes, or the raw APMU weight);
/// flags are 0/1 and `incl_flag_pair` is empty on ticks where the pair was
/// not compared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: u64,
    pub core_id: u8,
    pub raw_lidar: i32,
    pub raw_radar: i32,
    pub filt_lidar: u16,
    pub filt_radar: u16,
    pub fls_crisp: u16,
    pub fls_status: String,
    pub apmu_weight: u32,
    pub apmu_alarm: u8,
    pub incl_flag_pair: Option<u8>,
    pub mode: String,
}

pub fn rows(output: &SystemOutput) -> impl Iterator<Item = TraceRow> + '_ {
    output.per_core.iter().flatten().map(move |o| TraceRow {
        tick: output.tick,
        core_id: o.core_id.index() as u8,
        raw_lidar: o.raw_lidar,
        raw_radar: o.raw_radar,
        filt_lidar: o.filtered_lidar.raw_u16(),
        filt_radar: o.filtered_radar.raw_u16(),
        fls_crisp: o.crisp.raw_u16(),
        fls_status: o.fls_status.as_str().to_string(),
        apmu_weight: o.apmu_verdict.effective_weight,
        apmu_alarm: o.apmu_verdict.alarm as u8,
        incl_flag_pair: output.inclination_flags[o.core_id.pair()].map(u8::from),
        mode: output.mode.as_str().to_string(),
    })
}

pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    rows: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W) -> csv::Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(sink);
        inner.write_record(COLUMNS)?;
        Ok(TraceWriter { inner, rows: 0 })
    }

    pub fn write_row(&mut self, row: &TraceRow) -> csv::Result<()> {
        self.rows += 1;
        self.inner.serialize(row)
    }

    pub fn write_tick(&mut self, output: &SystemOutput) -> csv::Result<()> {
        for row in rows(output) {
            self.write_row(&row)?;
        }
        Ok(())
    }

    pub fn rows_written(&self) -> u64 {
        self.rows
    }

    pub fn finish(self) -> csv::Result<W> {
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}

pub fn read_trace(source: impl Read) -> csv::Result<Vec<TraceRow>> {
    csv::Reader::from_reader(source).deserialize().collect()
}

/// Write sink that keeps only a running hash of the bytes.
#[derive(Default)]
pub struct DigestSink {
    hasher: DefaultHasher,
    bytes: u64,
}

impl DigestSink {
    pub fn digest(&self) -> u64 {
        self.hasher.finish()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }
}

impl Write for DigestSink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.hasher.write(buf);
        self.bytes += buf.len() as u64;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}
