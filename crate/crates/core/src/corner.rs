//! One processing corner: sensor interface, two FIR filters, the fuzzy
//! controller and the malfunction unit, advanced one tick per sample period.
//!
//! A single register sits between the sensor interface and the processing
//! stages, so a sample latched at tick `t` is filtered at tick `t + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apmu::{ApmuConfig, ApmuState, ApmuVerdict};
use crate::fir::FirFilter;
use crate::fls::{Fls, FlsStatus};
use crate::numerics::{FixedSample, QFormat};

pub const LIDAR_BITS: u32 = 11;
pub const RADAR_BITS: u32 = 10;
pub const LIDAR_FULL_SCALE: i32 = (1 << LIDAR_BITS) - 1;
pub const RADAR_FULL_SCALE: i32 = (1 << RADAR_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoreId(u8);

impl CoreId {
    pub const COUNT: usize = 4;
    pub const ALL: [CoreId; 4] = [CoreId(0), CoreId(1), CoreId(2), CoreId(3)];

    pub fn new(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(CoreId(index as u8))
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    /// The spatially opposed corner.
    pub const fn opposite(self) -> CoreId {
        CoreId((self.0 + 2) % 4)
    }

    /// Index of the differential pair this corner belongs to.
    pub const fn pair(self) -> usize {
        (self.0 % 2) as usize
    }
}

impl fmt::Display for CoreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "core{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("{0} has failed and no longer ticks")]
    Failed(CoreId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Healthy,
    Failed,
}

/// Which samples the malfunction unit compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApmuTap {
    /// Normalized sensor samples straight from the interface register.
    #[default]
    Raw,
    /// FIR outputs, fed once both delay lines are primed.
    Filtered,
}

/// Converts sensor codes to U0.16 with a baked multiplier, so full scale
/// lands on the largest U0.16 code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorScale {
    full_scale: i32,
    multiplier: u64,
}

impl SensorScale {
    pub const fn new(full_scale: i32) -> Self {
        let fs = full_scale as u64;
        let multiplier = ((QFormat::U0_16.max_raw() as u64) << 32).div_ceil(fs);
        SensorScale {
            full_scale,
            multiplier,
        }
    }

    pub const fn full_scale(self) -> i32 {
        self.full_scale
    }

    /// Returns the normalized sample and whether the code had to be clamped.
    pub fn normalize(self, code: i32) -> (FixedSample, bool) {
        let clamped = code.clamp(0, self.full_scale);
        let raw = (clamped as u64 * self.multiplier + (1 << 31)) >> 32;
        (
            FixedSample::from_raw(raw as i64, QFormat::U0_16),
            clamped != code,
        )
    }
}

pub const LIDAR_SCALE: SensorScale = SensorScale::new(LIDAR_FULL_SCALE);
pub const RADAR_SCALE: SensorScale = SensorScale::new(RADAR_FULL_SCALE);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiuSample {
    pub lidar: FixedSample,
    pub radar: FixedSample,
    pub clamped: bool,
}

/// Normalizes a (lidar, radar) code pair to the canonical format.
pub fn siu_ingest(raw_lidar: i32, raw_radar: i32) -> SiuSample {
    let (lidar, cl) = LIDAR_SCALE.normalize(raw_lidar);
    let (radar, cr) = RADAR_SCALE.normalize(raw_radar);
    SiuSample {
        lidar,
        radar,
        clamped: cl || cr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreOutput {
    pub tick: u64,
    pub core_id: CoreId,
    pub raw_lidar: i32,
    pub raw_radar: i32,
    pub siu_clamp: bool,
    pub filtered_lidar: FixedSample,
    pub filtered_radar: FixedSample,
    pub crisp: FixedSample,
    pub fls_status: FlsStatus,
    pub apmu_verdict: ApmuVerdict,
    pub warmup: bool,
}

impl CoreOutput {
    /// The corner's representative distance: mean of its filtered channels.
    pub fn distance(&self) -> FixedSample {
        let sum = self.filtered_lidar.raw() + self.filtered_radar.raw();
        FixedSample::from_raw((sum + 1) >> 1, QFormat::U0_16)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreSettings {
    pub lidar_fir: FirFilter,
    pub radar_fir: FirFilter,
    pub fls: Fls,
    pub apmu: ApmuConfig,
    pub apmu_tap: ApmuTap,
}

impl Default for CoreSettings {
    fn default() -> Self {
        CoreSettings {
            lidar_fir: FirFilter::default_lowpass(),
            radar_fir: FirFilter::default_lowpass(),
            fls: Fls::default(),
            apmu: ApmuConfig::default(),
            apmu_tap: ApmuTap::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreState {
    id: CoreId,
    latch: Option<SiuSample>,
    fir_lidar: FirFilter,
    fir_radar: FirFilter,
    filtered: (FixedSample, FixedSample),
    fls: Fls,
    apmu_config: ApmuConfig,
    apmu: ApmuState,
    apmu_tap: ApmuTap,
    last_valid_crisp: FixedSample,
    tick: u64,
    health: Health,
}

impl CoreState {
    pub fn new(id: CoreId, settings: &CoreSettings) -> Self {
        let zero = FixedSample::zero(QFormat::U0_16);
        let mut fir_lidar = settings.lidar_fir.clone();
        let mut fir_radar = settings.radar_fir.clone();
        fir_lidar.reset();
        fir_radar.reset();
        CoreState {
            id,
            latch: None,
            fir_lidar,
            fir_radar,
            filtered: (zero, zero),
            fls: settings.fls.clone(),
            apmu_config: settings.apmu,
            apmu: ApmuState::new(),
            apmu_tap: settings.apmu_tap,
            last_valid_crisp: zero,
            tick: 0,
            health: Health::Healthy,
        }
    }

    pub fn id(&self) -> CoreId {
        self.id
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn health(&self) -> Health {
        self.health
    }

    pub fn is_healthy(&self) -> bool {
        self.health == Health::Healthy
    }

    pub fn fail(&mut self) {
        self.health = Health::Failed;
    }

    pub fn last_valid_crisp(&self) -> FixedSample {
        self.last_valid_crisp
    }

    pub fn apmu_config(&self) -> &ApmuConfig {
        &self.apmu_config
    }

    pub fn apmu_config_mut(&mut self) -> &mut ApmuConfig {
        &mut self.apmu_config
    }

    /// Advances the corner by one sample period.
    pub fn tick(&mut self, raw_lidar: i32, raw_radar: i32) -> Result<CoreOutput, CoreError> {
        if !self.is_healthy() {
            return Err(CoreError::Failed(self.id));
        }
        let incoming = siu_ingest(raw_lidar, raw_radar);
        let latched = self.latch.replace(incoming);

        let mut verdict = ApmuVerdict::IDLE;
        if let Some(sample) = latched {
            self.filtered = (
                self.fir_lidar.step(sample.lidar),
                self.fir_radar.step(sample.radar),
            );
            let primed = self.fir_lidar.is_primed() && self.fir_radar.is_primed();
            verdict = match self.apmu_tap {
                ApmuTap::Raw => self
                    .apmu
                    .step(&self.apmu_config, sample.lidar, sample.radar),
                ApmuTap::Filtered if primed => {
                    self.apmu
                        .step(&self.apmu_config, self.filtered.0, self.filtered.1)
                }
                ApmuTap::Filtered => ApmuVerdict {
                    threshold: self.apmu_config.threshold(),
                    ..verdict
                },
            };
        }
        let fir_warm = self.fir_lidar.is_primed() && self.fir_radar.is_primed();

        let fls = self.fls.eval(self.filtered.0, self.filtered.1);
        let (crisp, fls_status) = match fls.status {
            _ if !fir_warm => (fls.crisp, FlsStatus::Warmup),
            FlsStatus::Valid => {
                self.last_valid_crisp = fls.crisp;
                (fls.crisp, FlsStatus::Valid)
            }
            status => (self.last_valid_crisp, status),
        };

        let out = CoreOutput {
            tick: self.tick,
            core_id: self.id,
            raw_lidar,
            raw_radar,
            siu_clamp: incoming.clamped,
            filtered_lidar: self.filtered.0,
            filtered_radar: self.filtered.1,
            crisp,
            fls_status,
            apmu_verdict: verdict,
            warmup: !fir_warm || verdict.status == crate::apmu::ApmuStatus::Warmup,
        };
        self.tick += 1;
        Ok(out)
    }
}
