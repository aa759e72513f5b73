//! Adaptive prognostic malfunction unit.
//!
//! Every tick the unit stores `|S1 - S2|` in a 16-slot ring and reduces the
//! newest `eww` entries to an effective discrepancy weight, which is compared
//! against a per-window threshold from a lookup table. The reduction is a
//! running sum (or an event count) so the mean never has to be formed: the
//! threshold is pre-scaled by the window width instead.
//!
//! Nothing in this module performs a division.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{abs_diff, quantize, FixedSample, QFormat};

/// Physical slot count of the discrepancy ring.
pub const SLOTS: usize = 16;
/// Windows narrower than this trade false alarms for reaction time.
pub const MIN_DECISION_DEPTH: u8 = 4;
/// Default per-sample tolerance in normalized distance units.
pub const DEFAULT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApmuError {
    #[error("effective window width must be in [1, {SLOTS}], got {0}")]
    WindowWidth(i64),
    #[error("threshold table needs {SLOTS} entries, got {0}")]
    LutSize(usize),
    #[error("activation mask {0:#06x} is not a contiguous newest-first window")]
    Mask(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ApmuMode {
    /// Sum of the newest `eww` absolute differences.
    #[default]
    #[serde(rename = "sum")]
    SumWeight,
    /// Number of the newest `eww` absolute differences above the per-sample
    /// tolerance.
    #[serde(rename = "count")]
    EventCount,
}

/// Frame-size activation mask. Bit 0 is the newest slot; only masks of the
/// form `0b0..01..1` are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivationMask(u16);

impl ActivationMask {
    pub fn new(bits: u32) -> Result<Self, ApmuError> {
        let contiguous = bits != 0 && bits <= 0xffff && (bits & (bits + 1)) == 0;
        if !contiguous {
            return Err(ApmuError::Mask(bits));
        }
        Ok(ActivationMask(bits as u16))
    }

    pub fn for_width(eww: u8) -> Result<Self, ApmuError> {
        check_width(eww as i64)?;
        Ok(ActivationMask(((1u32 << eww) - 1) as u16))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn width(self) -> u8 {
        self.0.count_ones() as u8
    }
}

fn check_width(eww: i64) -> Result<u8, ApmuError> {
    if (1..=SLOTS as i64).contains(&eww) {
        Ok(eww as u8)
    } else {
        Err(ApmuError::WindowWidth(eww))
    }
}

/// Thresholds indexed by window width; entry `k - 1` serves `eww = k`.
/// Values share the LSB of the effective weight (U16.16 in sum mode, plain
/// counts in count mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdLut([u32; SLOTS]);

impl ThresholdLut {
    pub fn from_entries(entries: &[u32]) -> Result<Self, ApmuError> {
        let table: [u32; SLOTS] = entries
            .try_into()
            .map_err(|_| ApmuError::LutSize(entries.len()))?;
        Ok(ThresholdLut(table))
    }

    /// `threshold(k) = k * tolerance`, the sum-mode default.
    pub fn linear(per_sample: FixedSample) -> Self {
        let tau = per_sample.raw() as u32;
        let mut table = [0u32; SLOTS];
        let mut acc = 0u32;
        for slot in table.iter_mut() {
            acc = acc.saturating_add(tau);
            *slot = acc;
        }
        ThresholdLut(table)
    }

    /// Count-mode default: alarm once more than half the window is out of
    /// tolerance.
    pub fn majority() -> Self {
        let mut table = [0u32; SLOTS];
        for (k, slot) in table.iter_mut().enumerate() {
            *slot = ((k + 1) >> 1) as u32;
        }
        ThresholdLut(table)
    }

    pub fn get(&self, eww: u8) -> u32 {
        self.0[eww as usize - 1]
    }

    pub fn entries(&self) -> &[u32; SLOTS] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApmuConfig {
    eww: u8,
    lut: ThresholdLut,
    mode: ApmuMode,
    tolerance: FixedSample,
}

impl Default for ApmuConfig {
    fn default() -> Self {
        let tol = quantize(DEFAULT_TOLERANCE, QFormat::U0_16);
        ApmuConfig::new(
            SLOTS as i64,
            ThresholdLut::linear(tol),
            ApmuMode::SumWeight,
            tol,
        )
        .expect("default config")
    }
}

impl ApmuConfig {
    pub fn new(
        eww: i64,
        lut: ThresholdLut,
        mode: ApmuMode,
        per_sample_tolerance: FixedSample,
    ) -> Result<Self, ApmuError> {
        let eww = check_width(eww)?;
        let tolerance = FixedSample::from_raw(per_sample_tolerance.raw(), QFormat::U0_16);
        Ok(ApmuConfig {
            eww,
            lut,
            mode,
            tolerance,
        })
    }

    /// Config with the mode's default table derived from `tolerance`.
    pub fn with_defaults(
        eww: i64,
        mode: ApmuMode,
        tolerance: FixedSample,
    ) -> Result<Self, ApmuError> {
        let lut = match mode {
            ApmuMode::SumWeight => ThresholdLut::linear(tolerance),
            ApmuMode::EventCount => ThresholdLut::majority(),
        };
        Self::new(eww, lut, mode, tolerance)
    }

    pub fn from_mask(
        mask: ActivationMask,
        lut: ThresholdLut,
        mode: ApmuMode,
        tolerance: FixedSample,
    ) -> Result<Self, ApmuError> {
        Self::new(mask.width() as i64, lut, mode, tolerance)
    }

    pub fn eww(&self) -> u8 {
        self.eww
    }

    pub fn mode(&self) -> ApmuMode {
        self.mode
    }

    pub fn lut(&self) -> &ThresholdLut {
        &self.lut
    }

    pub fn tolerance(&self) -> FixedSample {
        self.tolerance
    }

    pub fn threshold(&self) -> u32 {
        self.lut.get(self.eww)
    }

    pub fn mask(&self) -> ActivationMask {
        ActivationMask::for_width(self.eww).expect("eww validated")
    }

    /// Windows below the minimum decision depth are legal but jumpy.
    pub fn high_sensitivity(&self) -> bool {
        self.eww < MIN_DECISION_DEPTH
    }

    /// Changes the window width; ring contents are untouched.
    pub fn resize(&mut self, new_eww: i64) -> Result<(), ApmuError> {
        self.eww = check_width(new_eww)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApmuStatus {
    Warmup,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApmuVerdict {
    /// Raw effective weight: U16.16 in sum mode, a count in count mode.
    pub effective_weight: u32,
    pub threshold: u32,
    pub alarm: bool,
    pub status: ApmuStatus,
}

impl ApmuVerdict {
    pub const IDLE: ApmuVerdict = ApmuVerdict {
        effective_weight: 0,
        threshold: 0,
        alarm: false,
        status: ApmuStatus::Warmup,
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ApmuState {
    ring: [u16; SLOTS],
    write_index: usize,
    samples_seen: u64,
}

impl ApmuState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn push(&mut self, delta: FixedSample) {
        self.ring[self.write_index] = delta.raw().clamp(0, u16::MAX as i64) as u16;
        self.write_index = (self.write_index + 1) & (SLOTS - 1);
        self.samples_seen += 1;
    }

    /// Newest-first view of the stored differences (at most `SLOTS`).
    pub fn newest(&self) -> impl Iterator<Item = u16> + '_ {
        let filled = self.samples_seen.min(SLOTS as u64) as usize;
        (1..=filled).map(move |back| self.ring[(self.write_index + SLOTS - back) & (SLOTS - 1)])
    }

    fn status(&self, cfg: &ApmuConfig) -> ApmuStatus {
        if self.samples_seen < cfg.eww as u64 {
            ApmuStatus::Warmup
        } else {
            ApmuStatus::Active
        }
    }

    /// Windowed statistic over the newest `eww` entries. During warm-up the
    /// value covers the partial window and is for diagnostics only.
    pub fn effective_weight(&self, cfg: &ApmuConfig) -> (u32, ApmuStatus) {
        let window = self.newest().take(cfg.eww as usize);
        let weight = match cfg.mode {
            ApmuMode::SumWeight => window.fold(0u32, |acc, d| acc.saturating_add(d as u32)),
            ApmuMode::EventCount => {
                let tol = cfg.tolerance.raw() as u16;
                window.filter(|&d| d > tol).count() as u32
            }
        };
        (weight, self.status(cfg))
    }

    pub fn verdict(&self, cfg: &ApmuConfig) -> ApmuVerdict {
        let (effective_weight, status) = self.effective_weight(cfg);
        let threshold = cfg.threshold();
        let alarm = status == ApmuStatus::Active && effective_weight > threshold;
        ApmuVerdict {
            effective_weight,
            threshold,
            alarm,
            status,
        }
    }

    /// Pushes `|s1 - s2|` and returns the verdict for the updated window.
    pub fn step(&mut self, cfg: &ApmuConfig, s1: FixedSample, s2: FixedSample) -> ApmuVerdict {
        self.push(abs_diff(s1, s2));
        self.verdict(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lsb(raw: u16) -> FixedSample {
        FixedSample::unit(raw)
    }

    fn cfg(eww: i64, threshold: u32) -> ApmuConfig {
        ApmuConfig::new(
            eww,
            ThresholdLut([threshold; SLOTS]),
            ApmuMode::SumWeight,
            lsb(0),
        )
        .unwrap()
    }

    fn feed(state: &mut ApmuState, cfg: &ApmuConfig, deltas: &[u16]) -> ApmuVerdict {
        let mut v = ApmuVerdict::IDLE;
        for &d in deltas {
            v = state.step(cfg, lsb(d), lsb(0));
        }
        v
    }

    #[test]
    fn configure_examples() {
        let c = ApmuConfig::with_defaults(16, ApmuMode::SumWeight, lsb(1311)).unwrap();
        assert!(!c.high_sensitivity());
        assert_eq!(c.threshold(), 16 * 1311);
        assert_eq!(
            ApmuConfig::with_defaults(0, ApmuMode::SumWeight, lsb(1)),
            Err(ApmuError::WindowWidth(0))
        );
        assert_eq!(
            ApmuConfig::with_defaults(17, ApmuMode::SumWeight, lsb(1)),
            Err(ApmuError::WindowWidth(17))
        );
        let c = ApmuConfig::with_defaults(2, ApmuMode::SumWeight, lsb(1)).unwrap();
        assert!(c.high_sensitivity());
        assert_eq!(
            ThresholdLut::from_entries(&[1; 15]),
            Err(ApmuError::LutSize(15))
        );
    }

    #[test]
    fn default_config() {
        let c = ApmuConfig::default();
        assert_eq!(c.eww(), 16);
        assert_eq!(c.tolerance().raw(), 1311);
        assert_eq!(c.mode(), ApmuMode::SumWeight);
    }

    #[test]
    fn activation_masks() {
        assert_eq!(ActivationMask::new(0b1111).unwrap().width(), 4);
        assert_eq!(ActivationMask::new(0xffff).unwrap().width(), 16);
        assert!(ActivationMask::new(0).is_err());
        assert!(ActivationMask::new(0b1011).is_err());
        assert!(ActivationMask::new(0b1110).is_err());
        assert!(ActivationMask::new(0x1ffff).is_err());
        let c = ApmuConfig::from_mask(
            ActivationMask::new(0xff).unwrap(),
            ThresholdLut::majority(),
            ApmuMode::EventCount,
            lsb(1),
        )
        .unwrap();
        assert_eq!(c.eww(), 8);
        assert_eq!(c.mask().bits(), 0xff);
    }

    #[test]
    fn identical_streams_never_alarm() {
        let c = cfg(4, 0);
        let mut s = ApmuState::new();
        for raw in [0u16, 100, 65535, 777, 3] {
            let v = s.step(&c, lsb(raw), lsb(raw));
            assert_eq!(v.effective_weight, 0);
            assert!(!v.alarm);
        }
    }

    #[test]
    fn strict_threshold_boundary() {
        let mut s = ApmuState::new();
        let v = feed(&mut s, &cfg(4, 7), &[2, 2, 2, 2]);
        assert_eq!(
            (v.effective_weight, v.alarm, v.status),
            (8, true, ApmuStatus::Active)
        );
        let mut s = ApmuState::new();
        let v = feed(&mut s, &cfg(4, 8), &[2, 2, 2, 2]);
        assert_eq!((v.effective_weight, v.alarm), (8, false));
    }

    #[test]
    fn warmup_suppresses_alarm() {
        let mut s = ApmuState::new();
        let v = feed(&mut s, &cfg(4, 0), &[9, 9, 9]);
        assert_eq!(v.status, ApmuStatus::Warmup);
        assert_eq!(v.effective_weight, 27);
        assert!(!v.alarm);
    }

    #[test]
    fn effective_weight_examples() {
        let s = ApmuState::new();
        assert_eq!(s.effective_weight(&cfg(4, 0)).0, 0);
        let mut s = ApmuState::new();
        feed(&mut s, &cfg(4, 0), &[1, 2, 3, 4]);
        assert_eq!(s.effective_weight(&cfg(4, 0)), (10, ApmuStatus::Active));
        assert_eq!(s.effective_weight(&cfg(2, 0)), (7, ApmuStatus::Active));
    }

    #[test]
    fn event_count_mode() {
        let c = ApmuConfig::new(4, ThresholdLut([2; SLOTS]), ApmuMode::EventCount, lsb(5)).unwrap();
        let mut s = ApmuState::new();
        let v = feed(&mut s, &c, &[5, 6, 1, 9]);
        assert_eq!((v.effective_weight, v.alarm), (2, false));
        let v = feed(&mut s, &c, &[6]);
        assert_eq!((v.effective_weight, v.alarm), (3, true));
    }

    #[test]
    fn resize_examples() {
        let mut c = cfg(16, 0);
        let mut s = ApmuState::new();
        let deltas: Vec<u16> = (1..=16).collect();
        feed(&mut s, &c, &deltas);
        c.resize(4).unwrap();
        let v = s.verdict(&c);
        assert_eq!(v.status, ApmuStatus::Active);
        assert_eq!(v.effective_weight, 13 + 14 + 15 + 16);

        let before = s.verdict(&c);
        c.resize(4).unwrap();
        assert_eq!(s.verdict(&c), before);

        let mut c = cfg(4, 0);
        let mut s = ApmuState::new();
        feed(&mut s, &c, &[1; 8]);
        c.resize(16).unwrap();
        assert_eq!(s.verdict(&c).status, ApmuStatus::Warmup);
        assert_eq!(c.resize(17), Err(ApmuError::WindowWidth(17)));
        assert_eq!(c.eww(), 16);
    }

    #[test]
    fn ring_wraps_after_sixteen() {
        let c = cfg(16, 0);
        let mut s = ApmuState::new();
        let v = feed(&mut s, &c, &[100; 16]);
        assert_eq!(v.effective_weight, 1600);
        let v = feed(&mut s, &c, &[1; 10]);
        assert_eq!(v.effective_weight, 600 + 10);
    }

    #[test]
    fn source_has_no_division() {
        let src = include_str!("apmu.rs");
        let body = src.split("#[cfg(test)]").next().unwrap();
        for line in body.lines() {
            let code = line.split("//").next().unwrap();
            assert!(
                !code.contains(" / ") && !code.contains("/=") && !code.contains(".div("),
                "division in: {line}"
            );
            assert!(
                !code.contains("checked_div") && !code.contains(" % "),
                "in: {line}"
            );
        }
    }
}
