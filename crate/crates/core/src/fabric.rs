//! Four-corner fabric: packet exchange between opposed corners, the
//! differential inclination check, the system mode machine and aggregation.
//!
//! Every tick runs in four phases. Phase 1 ticks each healthy corner; the
//! corners share nothing, so this phase may run on a worker pool. After the
//! barrier the coordinator sends one packet per corner over its link (phase
//! 2), compares the opposite-side distances that were delivered this tick
//! (phase 3), and finally updates the mode and aggregates the commands
//! (phase 4).
//!
//! # Packet wire layout
//!
//! Little-endian, fields in order, 21 bytes total:
//!
//! | bytes | field      |
//! |-------|------------|
//! | 0..4  | seq (u32)  |
//! | 4..12 | tick (u64) |
//! | 12    | core id    |
//! | 13..15| distance (U0.16) |
//! | 15..17| crisp (U0.16)    |
//! | 17    | apmu alarm (0/1) |
//! | 18    | warm-up (0/1)    |
//! | 19..21| checksum (u16)   |
//!
//! The checksum is the 16-bit ones'-complement sum of the payload read as
//! little-endian words, the final odd byte padded with zero.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corner::{CoreError, CoreId, CoreOutput, CoreSettings, CoreState};
use crate::numerics::{abs_diff, FixedSample, QFormat};

pub const PAYLOAD_LEN: usize = 19;
pub const PACKET_LEN: usize = PAYLOAD_LEN + 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("packet must be {PACKET_LEN} bytes, got {0}")]
    Length(usize),
    #[error("checksum mismatch: carried {carried:#06x}, computed {computed:#06x}")]
    Checksum { carried: u16, computed: u16 },
    #[error("invalid field {0}")]
    Field(&'static str),
}

#[derive(Debug, Error)]
pub enum FabricError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("link latency must be at least one tick")]
    Latency,
    #[error("link queue capacity must be at least one packet")]
    Capacity,
    #[error("worker pool: {0}")]
    Workers(String),
}

/// Inter-corner exchange payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DicPacket {
    pub seq: u32,
    pub tick: u64,
    pub core_id: CoreId,
    pub distance: FixedSample,
    pub crisp: FixedSample,
    pub apmu_alarm: bool,
    pub warmup: bool,
}

/// 16-bit ones'-complement sum with end-around carry.
pub fn ones_complement_sum(bytes: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    for chunk in bytes.chunks(2) {
        let word = u16::from_le_bytes([chunk[0], *chunk.get(1).unwrap_or(&0)]);
        sum += word as u32;
        sum = (sum & 0xffff) + (sum >> 16);
    }
    sum as u16
}

impl DicPacket {
    pub fn from_output(seq: u32, out: &CoreOutput) -> Self {
        DicPacket {
            seq,
            tick: out.tick,
            core_id: out.core_id,
            distance: out.distance(),
            crisp: out.crisp,
            apmu_alarm: out.apmu_verdict.alarm,
            warmup: out.warmup,
        }
    }

    pub fn encode(&self) -> [u8; PACKET_LEN] {
        let mut buf = [0u8; PACKET_LEN];
        buf[0..4].copy_from_slice(&self.seq.to_le_bytes());
        buf[4..12].copy_from_slice(&self.tick.to_le_bytes());
        buf[12] = self.core_id.index() as u8;
        buf[13..15].copy_from_slice(&(self.distance.raw() as u16).to_le_bytes());
        buf[15..17].copy_from_slice(&(self.crisp.raw() as u16).to_le_bytes());
        buf[17] = self.apmu_alarm as u8;
        buf[18] = self.warmup as u8;
        let checksum = ones_complement_sum(&buf[..PAYLOAD_LEN]);
        buf[PAYLOAD_LEN..].copy_from_slice(&checksum.to_le_bytes());
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PacketError> {
        if bytes.len() != PACKET_LEN {
            return Err(PacketError::Length(bytes.len()));
        }
        let carried = u16::from_le_bytes([bytes[PAYLOAD_LEN], bytes[PAYLOAD_LEN + 1]]);
        let computed = ones_complement_sum(&bytes[..PAYLOAD_LEN]);
        if carried != computed {
            return Err(PacketError::Checksum { carried, computed });
        }
        let flag = |b: u8, name| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(PacketError::Field(name)),
        };
        let word = |at: usize| u16::from_le_bytes([bytes[at], bytes[at + 1]]);
        Ok(DicPacket {
            seq: u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")),
            tick: u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")),
            core_id: CoreId::new(bytes[12] as usize).ok_or(PacketError::Field("core_id"))?,
            distance: FixedSample::unit(word(13)),
            crisp: FixedSample::unit(word(15)),
            apmu_alarm: flag(bytes[17], "apmu_alarm")?,
            warmup: flag(bytes[18], "warmup")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub latency_ticks: u32,
    pub queue_capacity: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            latency_ticks: 1,
            queue_capacity: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LinkStats {
    pub sent: u64,
    pub delivered: u64,
    pub backpressure: u64,
    pub checksum_failures: u64,
    pub late: u64,
}

/// One direction of the inter-corner link: fixed latency, bounded in-flight
/// queue that drops its oldest frame when full.
#[derive(Debug, Clone)]
pub struct HsdciLink {
    latency: u64,
    capacity: usize,
    queue: VecDeque<(u64, Vec<u8>)>,
    stats: LinkStats,
}

impl HsdciLink {
    pub fn new(config: LinkConfig) -> Result<Self, FabricError> {
        if config.latency_ticks == 0 {
            return Err(FabricError::Latency);
        }
        if config.queue_capacity == 0 {
            return Err(FabricError::Capacity);
        }
        Ok(HsdciLink {
            latency: config.latency_ticks as u64,
            capacity: config.queue_capacity,
            queue: VecDeque::with_capacity(config.queue_capacity),
            stats: LinkStats::default(),
        })
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn send(&mut self, packet: &DicPacket, tick: u64) {
        self.send_frame(packet.encode().to_vec(), tick);
    }

    /// Queues an already-encoded frame; exposed so corrupted frames can be
    /// injected.
    pub fn send_frame(&mut self, frame: Vec<u8>, tick: u64) {
        if self.queue.len() == self.capacity {
            self.queue.pop_front();
            self.stats.backpressure += 1;
        }
        self.queue.push_back((tick, frame));
        self.stats.sent += 1;
    }

    /// Frames whose send tick plus latency equals `tick`, in FIFO order.
    /// Frames failing the checksum are discarded and counted.
    pub fn deliver(&mut self, tick: u64) -> Vec<DicPacket> {
        let mut out = Vec::new();
        while let Some((sent, _)) = self.queue.front() {
            let due = sent + self.latency;
            if due > tick {
                break;
            }
            let (_, frame) = self.queue.pop_front().expect("front exists");
            if due < tick {
                self.stats.late += 1;
                continue;
            }
            match DicPacket::decode(&frame) {
                Ok(p) => {
                    self.stats.delivered += 1;
                    out.push(p);
                }
                Err(_) => self.stats.checksum_failures += 1,
            }
        }
        out
    }

    pub fn clear(&mut self) {
        self.queue.clear();
    }
}

/// Strict comparison: `|a - b| > tolerance`.
pub fn differential_check(a: FixedSample, opposite: FixedSample, tolerance: FixedSample) -> bool {
    abs_diff(a, opposite).raw() > tolerance.raw()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemMode {
    FullAuto,
    DegradedPair,
    SemiAutoHandover,
}

impl SystemMode {
    pub const fn as_str(self) -> &'static str {
        match self {
            SystemMode::FullAuto => "full_auto",
            SystemMode::DegradedPair => "degraded_pair",
            SystemMode::SemiAutoHandover => "semi_auto_handover",
        }
    }
}

/// The system mode state machine. Handover is absorbing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeMachine {
    mode: SystemMode,
    handover_k: u32,
    streaks: [u32; 4],
}

impl ModeMachine {
    pub fn new(handover_k: u32) -> Self {
        ModeMachine {
            mode: SystemMode::FullAuto,
            handover_k: handover_k.max(1),
            streaks: [0; 4],
        }
    }

    pub fn mode(&self) -> SystemMode {
        self.mode
    }

    pub fn streaks(&self) -> [u32; 4] {
        self.streaks
    }

    /// `alarms` from failed corners are ignored.
    pub fn step(
        &mut self,
        healthy: [bool; 4],
        pilot_permit: bool,
        alarms: [bool; 4],
    ) -> SystemMode {
        for ((streak, &ok), &alarm) in self.streaks.iter_mut().zip(&healthy).zip(&alarms) {
            *streak = if ok && alarm {
                (*streak + 1).min(self.handover_k)
            } else {
                0
            };
        }
        if self.mode == SystemMode::SemiAutoHandover {
            return self.mode;
        }
        let sustained = self.streaks.iter().any(|&s| s >= self.handover_k);
        let failed_pairs = (0..2).filter(|&p| !healthy[p] || !healthy[p + 2]).count();
        self.mode = match (sustained, failed_pairs) {
            (true, _) | (_, 2..) => SystemMode::SemiAutoHandover,
            (false, 1) if pilot_permit => SystemMode::DegradedPair,
            (false, 1) => SystemMode::SemiAutoHandover,
            (false, _) => SystemMode::FullAuto,
        };
        self.mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Min,
    Max,
}

impl Aggregation {
    pub fn apply(self, values: &[FixedSample]) -> Option<FixedSample> {
        let raw = values.iter().map(|v| v.raw());
        let agg = match self {
            Aggregation::Mean => {
                let n = values.len() as i64;
                if n == 0 {
                    return None;
                }
                (raw.sum::<i64>() + n / 2) / n
            }
            Aggregation::Min => raw.min()?,
            Aggregation::Max => raw.max()?,
        };
        Some(FixedSample::from_raw(agg, QFormat::U0_16))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FabricConfig {
    pub link: LinkConfig,
    pub tolerance: FixedSample,
    pub aggregation: Aggregation,
    pub handover_k: u32,
    pub pilot_permit: bool,
    pub workers: usize,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig {
            link: LinkConfig::default(),
            tolerance: crate::numerics::quantize(0.05, QFormat::U0_16),
            aggregation: Aggregation::Mean,
            handover_k: 8,
            pilot_permit: true,
            workers: 1,
        }
    }
}

/// Raw sensor codes for one corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SensorReading {
    pub lidar: i32,
    pub radar: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutput {
    pub tick: u64,
    pub per_core: [Option<CoreOutput>; 4],
    /// Pair 0 is corners (0, 2), pair 1 is (1, 3). `None` when the pair
    /// could not be compared this tick.
    pub inclination_flags: [Option<bool>; 2],
    pub aggregate_crisp: Option<FixedSample>,
    pub mode: SystemMode,
}

pub struct System {
    cores: Vec<CoreState>,
    // links[i] carries corner i's packets to its opposite
    links: Vec<HsdciLink>,
    seq: [u32; 4],
    machine: ModeMachine,
    config: FabricConfig,
    tick: u64,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl System {
    pub fn new(settings: &CoreSettings, config: FabricConfig) -> Result<Self, FabricError> {
        let cores = CoreId::ALL
            .iter()
            .map(|&id| CoreState::new(id, settings))
            .collect();
        let links = (0..4)
            .map(|_| HsdciLink::new(config.link))
            .collect::<Result<_, _>>()?;
        #[cfg(feature = "parallel")]
        let pool = if config.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| FabricError::Workers(e.to_string()))?;
            Some(pool)
        } else {
            None
        };
        Ok(System {
            cores,
            links,
            seq: [0; 4],
            machine: ModeMachine::new(config.handover_k),
            config,
            tick: 0,
            #[cfg(feature = "parallel")]
            pool,
        })
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    pub fn core(&self, id: CoreId) -> &CoreState {
        &self.cores[id.index()]
    }

    pub fn core_mut(&mut self, id: CoreId) -> &mut CoreState {
        &mut self.cores[id.index()]
    }

    pub fn link_stats(&self) -> [LinkStats; 4] {
        std::array::from_fn(|i| self.links[i].stats())
    }

    pub fn link_mut(&mut self, from: CoreId) -> &mut HsdciLink {
        &mut self.links[from.index()]
    }

    pub fn mode(&self) -> SystemMode {
        self.machine.mode()
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn healthy(&self) -> [bool; 4] {
        std::array::from_fn(|i| self.cores[i].is_healthy())
    }

    pub fn set_pilot_permit(&mut self, permit: bool) {
        self.config.pilot_permit = permit;
    }

    /// Marks a corner failed and silences its outgoing link.
    pub fn fail_core(&mut self, id: CoreId) {
        self.cores[id.index()].fail();
        self.links[id.index()].clear();
    }

    fn tick_cores(&mut self, readings: &[SensorReading; 4]) -> [Option<CoreOutput>; 4] {
        let step = |core: &mut CoreState, r: &SensorReading| {
            core.is_healthy()
                .then(|| core.tick(r.lidar, r.radar).expect("healthy core ticks"))
        };
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            let cores = &mut self.cores;
            let outs: Vec<Option<CoreOutput>> = pool.install(|| {
                cores
                    .par_iter_mut()
                    .zip(readings.par_iter())
                    .map(|(c, r)| step(c, r))
                    .collect()
            });
            return outs.try_into().expect("four corners");
        }
        let mut outs = [None; 4];
        for ((slot, core), r) in outs.iter_mut().zip(self.cores.iter_mut()).zip(readings) {
            *slot = step(core, r);
        }
        outs
    }

    pub fn tick(&mut self, readings: &[SensorReading; 4]) -> SystemOutput {
        let tick = self.tick;

        // phase 1
        let per_core = self.tick_cores(readings);

        // phase 2
        for (i, out) in per_core.iter().enumerate() {
            if let Some(out) = out {
                let packet = DicPacket::from_output(self.seq[i], out);
                self.seq[i] = self.seq[i].wrapping_add(1);
                self.links[i].send(&packet, tick);
            }
        }
        let delivered: Vec<Option<DicPacket>> = self
            .links
            .iter_mut()
            .map(|l| l.deliver(tick).pop())
            .collect();

        // phase 3
        let healthy = self.healthy();
        let inclination_flags = std::array::from_fn(|pair| {
            let (a, b) = (pair, pair + 2);
            if !(healthy[a] && healthy[b]) {
                return None;
            }
            match (delivered[a], delivered[b]) {
                (Some(pa), Some(pb)) if pa.tick == pb.tick && !pa.warmup && !pb.warmup => Some(
                    differential_check(pa.distance, pb.distance, self.config.tolerance),
                ),
                _ => None,
            }
        });

        // phase 4
        let alarms = per_core.map(|o| o.is_some_and(|o| o.apmu_verdict.alarm));
        let mode = self.machine.step(healthy, self.config.pilot_permit, alarms);
        let crisps: Vec<FixedSample> = (0..2)
            .filter(|&p| healthy[p] && healthy[p + 2])
            .flat_map(|p| [p, p + 2])
            .filter_map(|i| per_core[i].map(|o| o.crisp))
            .collect();
        let aggregate_crisp = self.config.aggregation.apply(&crisps);

        self.tick += 1;
        SystemOutput {
            tick,
            per_core,
            inclination_flags,
            aggregate_crisp,
            mode,
        }
    }
}
