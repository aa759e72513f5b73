//! 15-tap FIR pre-filter, one per sensor channel.

use thiserror::Error;

use crate::numerics::{quantize, round_shift, FixedSample, QFormat};

pub const TAPS: usize = 15;

/// Product scale is 2^-31 (U0.16 sample times Q1.15 coefficient); narrowing
/// back to U0.16 drops 15 bits.
const NARROW_SHIFT: u32 = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FirError {
    #[error("expected {TAPS} taps, got {0}")]
    TapCount(usize),
    #[error("coefficient {index} = {value} is outside the Q1.15 range [-1, 1)")]
    CoefficientRange { index: usize, value: f64 },
}

/// Hamming-windowed sinc low-pass, cutoff 0.1 of the sample rate, normalized
/// so the quantized taps sum to one LSB below unity.
pub fn default_coefficients() -> [f64; TAPS] {
    let cutoff = 0.1f64;
    let mid = (TAPS - 1) as f64 / 2.0;
    let mut taps = [0.0; TAPS];
    for (n, tap) in taps.iter_mut().enumerate() {
        let t = n as f64 - mid;
        let arg = 2.0 * cutoff * t;
        let sinc = if t == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
        };
        let window =
            0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (TAPS - 1) as f64).cos();
        *tap = 2.0 * cutoff * sinc * window;
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|c| *c /= sum);

    // Re-shape the centre tap so the quantized set sums to exactly 1 - 2^-15.
    let mut raw = taps.map(|c| quantize(c, QFormat::Q1_15).raw());
    let centre = TAPS / 2;
    let other: i64 = raw
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != centre)
        .map(|(_, r)| r)
        .sum();
    raw[centre] = QFormat::Q1_15.max_raw() - other;
    raw.map(|r| r as f64 / 32768.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirFilter {
    coeffs: [i32; TAPS],
    delay: [u16; TAPS],
    head: usize,
    samples_seen: u64,
}

impl FirFilter {
    /// Quantizes real-valued taps to Q1.15.
    pub fn new(coeffs: &[f64]) -> Result<Self, FirError> {
        if coeffs.len() != TAPS {
            return Err(FirError::TapCount(coeffs.len()));
        }
        let mut raw = [0i16; TAPS];
        for (i, &c) in coeffs.iter().enumerate() {
            if !(-1.0..1.0).contains(&c) {
                return Err(FirError::CoefficientRange { index: i, value: c });
            }
            raw[i] = quantize(c, QFormat::Q1_15).raw() as i16;
        }
        Self::from_raw(&raw)
    }

    pub fn from_raw(coeffs: &[i16]) -> Result<Self, FirError> {
        if coeffs.len() != TAPS {
            return Err(FirError::TapCount(coeffs.len()));
        }
        let mut taps = [0i32; TAPS];
        for (dst, &c) in taps.iter_mut().zip(coeffs) {
            *dst = c as i32;
        }
        Ok(FirFilter {
            coeffs: taps,
            delay: [0; TAPS],
            head: 0,
            samples_seen: 0,
        })
    }

    pub fn default_lowpass() -> Self {
        Self::new(&default_coefficients()).expect("default taps are in range")
    }

    pub fn coefficients_raw(&self) -> [i32; TAPS] {
        self.coeffs
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    /// True once the delay line holds only real samples.
    pub fn is_primed(&self) -> bool {
        self.samples_seen >= TAPS as u64
    }

    /// Shifts `sample` in and returns the raw accumulator, scale 2^-31.
    pub fn step_wide(&mut self, sample: FixedSample) -> i64 {
        debug_assert_eq!(sample.format(), QFormat::U0_16);
        self.head = if self.head == 0 {
            TAPS - 1
        } else {
            self.head - 1
        };
        self.delay[self.head] = sample.raw() as u16;
        self.samples_seen += 1;

        // delay[head + k] holds x[t - k]
        let (newer, older) = self.delay.split_at(self.head);
        older
            .iter()
            .chain(newer)
            .zip(&self.coeffs)
            .map(|(&x, &c)| x as i64 * c as i64)
            .sum()
    }

    /// One filter step narrowed to U0.16 with saturation.
    pub fn step(&mut self, sample: FixedSample) -> FixedSample {
        let acc = self.step_wide(sample);
        FixedSample::from_raw(round_shift(acc, NARROW_SHIFT), QFormat::U0_16)
    }

    pub fn reset(&mut self) {
        self.delay = [0; TAPS];
        self.head = 0;
        self.samples_seen = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(raw: u16) -> FixedSample {
        FixedSample::unit(raw)
    }

    #[test]
    fn tap_count_enforced() {
        assert_eq!(FirFilter::new(&[0.0; 14]), Err(FirError::TapCount(14)));
        assert_eq!(FirFilter::from_raw(&[0; 16]), Err(FirError::TapCount(16)));
        assert!(matches!(
            FirFilter::new(&[1.5; 15]),
            Err(FirError::CoefficientRange { index: 0, .. })
        ));
    }

    #[test]
    fn zero_filter_outputs_zero() {
        let mut f = FirFilter::new(&[0.0; TAPS]).unwrap();
        for raw in [0, 1, 65535, 1234, 40000] {
            assert_eq!(f.step(unit(raw)).raw(), 0);
        }
    }

    #[test]
    fn default_taps_sum_to_one_minus_lsb() {
        let f = FirFilter::default_lowpass();
        let raw = f.coefficients_raw();
        assert_eq!(raw.iter().sum::<i32>(), 32767);
        for k in 0..TAPS {
            assert_eq!(raw[k], raw[TAPS - 1 - k], "symmetric");
        }
        let dc: f64 = default_coefficients().iter().sum();
        assert!((dc - 1.0).abs() <= 1.0 / 32768.0 + 1e-12);
    }

    #[test]
    fn impulse_wide_equals_taps() {
        let mut f = FirFilter::default_lowpass();
        let taps = f.coefficients_raw();
        let mut got = vec![f.step_wide(unit(1))];
        for _ in 1..TAPS + 3 {
            got.push(f.step_wide(unit(0)));
        }
        for k in 0..TAPS {
            assert_eq!(got[k], taps[k] as i64);
        }
        assert!(got[TAPS..].iter().all(|&v| v == 0));
    }

    #[test]
    fn half_scale_impulse_reads_taps_in_narrow_output() {
        let mut f = FirFilter::default_lowpass();
        let taps = f.coefficients_raw();
        let first = f.step(unit(32768));
        assert_eq!(first.raw(), taps[0].max(0) as i64);
        for &tap in &taps[1..] {
            assert_eq!(f.step(unit(0)).raw(), tap.max(0) as i64);
        }
    }

    #[test]
    fn dc_gain() {
        for c in [1000u16, 32768, 65535] {
            let mut f = FirFilter::default_lowpass();
            let mut y = 0;
            for _ in 0..20 {
                y = f.step(unit(c)).raw();
            }
            let expected = c as f64 * 32767.0 / 32768.0;
            assert!((y as f64 - expected).abs() <= 1.0, "c={c} y={y}");
        }
    }

    #[test]
    fn reset_behaviour() {
        let mut fresh = FirFilter::default_lowpass();
        let mut used = FirFilter::default_lowpass();
        for i in 0..40u16 {
            used.step(unit(i * 1000));
        }
        used.reset();
        assert_eq!(used, fresh);
        let once = used.clone();
        used.reset();
        assert_eq!(used, once);
        for i in 0..30u16 {
            let s = unit(if i == 0 { 40000 } else { i * 7 });
            assert_eq!(used.step(s), fresh.step(s));
        }
    }

    #[test]
    fn reset_mid_stream_erases_history() {
        let mut f = FirFilter::default_lowpass();
        for _ in 0..20 {
            f.step(unit(60000));
        }
        f.reset();
        assert!(!f.is_primed());
        // zeros after reset: nothing from before may leak out
        for _ in 0..TAPS - 1 {
            assert_eq!(f.step(unit(0)).raw(), 0);
        }
    }

    #[test]
    fn priming_counter() {
        let mut f = FirFilter::default_lowpass();
        for i in 0..TAPS as u64 {
            assert!(!f.is_primed());
            f.step(unit(5));
            assert_eq!(f.samples_seen(), i + 1);
        }
        assert!(f.is_primed());
    }
}
