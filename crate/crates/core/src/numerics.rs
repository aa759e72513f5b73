//! Fixed-point sample representation.
//!
//! Every value on the signal path is a scaled integer. Arithmetic saturates at
//! the bounds of the declared [`QFormat`]; nothing wraps. The only place a
//! floating-point number enters is [`quantize`], which is the boundary between
//! the scenario's real-valued world and the processing path.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("total_bits must be in 1..=32, got {0}")]
    TotalBits(u8),
    #[error("frac_bits ({frac}) exceeds total_bits ({total})")]
    FracBits { frac: u8, total: u8 },
}

/// Fixed-point layout: `total_bits` of storage, `frac_bits` of which sit
/// below the binary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QFormat {
    total_bits: u8,
    frac_bits: u8,
    signed: bool,
}

impl QFormat {
    /// Canonical distance/command format: 16-bit unsigned fraction in [0, 1).
    pub const U0_16: QFormat = QFormat {
        total_bits: 16,
        frac_bits: 16,
        signed: false,
    };
    /// Signed FIR coefficient format, range [-1, 1).
    pub const Q1_15: QFormat = QFormat {
        total_bits: 16,
        frac_bits: 15,
        signed: true,
    };
    /// Wide accumulator with the same LSB as [`QFormat::U0_16`].
    pub const U16_16: QFormat = QFormat {
        total_bits: 32,
        frac_bits: 16,
        signed: false,
    };

    pub const fn new(total_bits: u8, frac_bits: u8, signed: bool) -> Result<Self, FormatError> {
        if total_bits == 0 || total_bits > 32 {
            return Err(FormatError::TotalBits(total_bits));
        }
        if frac_bits > total_bits {
            return Err(FormatError::FracBits {
                frac: frac_bits,
                total: total_bits,
            });
        }
        Ok(QFormat {
            total_bits,
            frac_bits,
            signed,
        })
    }

    pub const fn total_bits(self) -> u8 {
        self.total_bits
    }

    pub const fn frac_bits(self) -> u8 {
        self.frac_bits
    }

    pub const fn is_signed(self) -> bool {
        self.signed
    }

    pub const fn min_raw(self) -> i64 {
        if self.signed {
            -(1i64 << (self.total_bits - 1))
        } else {
            0
        }
    }

    pub const fn max_raw(self) -> i64 {
        if self.signed {
            (1i64 << (self.total_bits - 1)) - 1
        } else {
            (1i64 << self.total_bits) - 1
        }
    }

    /// Value of one least-significant bit.
    pub fn lsb(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn min_value(self) -> f64 {
        self.min_raw() as f64 * self.lsb()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 * self.lsb()
    }

    #[inline]
    pub const fn clamp_raw(self, raw: i64) -> i64 {
        if raw < self.min_raw() {
            self.min_raw()
        } else if raw > self.max_raw() {
            self.max_raw()
        } else {
            raw
        }
    }

    /// The unsigned format with the same bit budget, used for magnitudes.
    pub const fn unsigned(self) -> QFormat {
        QFormat {
            signed: false,
            ..self
        }
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int_bits = self.total_bits - self.frac_bits;
        let prefix = if self.signed { "Q" } else { "U" };
        write!(f, "{prefix}{int_bits}.{}", self.frac_bits)
    }
}

/// A scaled integer tagged with its format. `raw` is always inside the
/// format's representable range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedSample {
    raw: i64,
    format: QFormat,
}

impl FixedSample {
    /// Builds a sample from a raw code, saturating into range.
    pub const fn from_raw(raw: i64, format: QFormat) -> Self {
        FixedSample {
            raw: format.clamp_raw(raw),
            format,
        }
    }

    pub const fn zero(format: QFormat) -> Self {
        Self::from_raw(0, format)
    }

    pub const fn max(format: QFormat) -> Self {
        FixedSample {
            raw: format.max_raw(),
            format,
        }
    }

    pub const fn min(format: QFormat) -> Self {
        FixedSample {
            raw: format.min_raw(),
            format,
        }
    }

    /// Shorthand for a canonical U0.16 sample.
    pub const fn unit(raw: u16) -> Self {
        FixedSample {
            raw: raw as i64,
            format: QFormat::U0_16,
        }
    }

    pub const fn raw(self) -> i64 {
        self.raw
    }

    pub const fn format(self) -> QFormat {
        self.format
    }

    pub fn to_f64(self) -> f64 {
        dequantize(self)
    }

    /// Raw code as `u16`, for samples known to be in the canonical format.
    #[inline]
    pub fn raw_u16(self) -> u16 {
        debug_assert_eq!(self.format, QFormat::U0_16);
        self.raw as u16
    }
}

impl fmt::Display for FixedSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}({})", self.to_f64(), self.format)
    }
}

/// Round-half-away-from-zero to the nearest representable value; saturating.
pub fn quantize(value: f64, format: QFormat) -> FixedSample {
    if value.is_nan() {
        return FixedSample::zero(format);
    }
    let scaled = (value * (format.frac_bits as f64).exp2()).round();
    let raw = if scaled >= format.max_raw() as f64 {
        format.max_raw()
    } else if scaled <= format.min_raw() as f64 {
        format.min_raw()
    } else {
        scaled as i64
    };
    FixedSample { raw, format }
}

pub fn dequantize(sample: FixedSample) -> f64 {
    sample.raw as f64 * sample.format.lsb()
}

#[inline]
fn check_formats(a: FixedSample, b: FixedSample) {
    assert_eq!(
        a.format, b.format,
        "fixed-point format mismatch: {} vs {}",
        a.format, b.format
    );
}

/// Saturating addition.
///
/// # Panics
///
/// Panics if the operands carry different formats; pipelines must settle
/// formats at construction time.
#[inline]
pub fn sat_add(a: FixedSample, b: FixedSample) -> FixedSample {
    check_formats(a, b);
    FixedSample::from_raw(a.raw + b.raw, a.format)
}

/// Saturating subtraction. Same panic contract as [`sat_add`].
#[inline]
pub fn sat_sub(a: FixedSample, b: FixedSample) -> FixedSample {
    check_formats(a, b);
    FixedSample::from_raw(a.raw - b.raw, a.format)
}

/// `|a - b|` in the unsigned counterpart of the operands' format.
#[inline]
pub fn abs_diff(a: FixedSample, b: FixedSample) -> FixedSample {
    check_formats(a, b);
    FixedSample::from_raw((a.raw - b.raw).abs(), a.format.unsigned())
}

/// Shifts `value` right by `shift` bits, rounding half away from zero.
#[inline]
pub const fn round_shift(value: i64, shift: u32) -> i64 {
    if shift == 0 {
        return value;
    }
    let half = 1i64 << (shift - 1);
    if value >= 0 {
        (value + half) >> shift
    } else {
        -((-value + half) >> shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const U8: QFormat = match QFormat::new(8, 8, false) {
        Ok(f) => f,
        Err(_) => panic!(),
    };

    fn q(v: f64) -> FixedSample {
        quantize(v, QFormat::U0_16)
    }

    #[test]
    fn format_validation() {
        assert_eq!(QFormat::new(0, 0, false), Err(FormatError::TotalBits(0)));
        assert_eq!(QFormat::new(33, 0, true), Err(FormatError::TotalBits(33)));
        assert_eq!(
            QFormat::new(8, 9, false),
            Err(FormatError::FracBits { frac: 9, total: 8 })
        );
        let f = QFormat::new(32, 0, true).unwrap();
        assert_eq!(f.min_raw(), i32::MIN as i64);
        assert_eq!(f.max_raw(), i32::MAX as i64);
        assert_eq!(QFormat::U0_16.to_string(), "U0.16");
        assert_eq!(QFormat::Q1_15.to_string(), "Q1.15");
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(q(0.0).raw(), 0);
        assert_eq!(q(1.5).raw(), 65535);
        assert_eq!(q(-0.3).raw(), 0);
        let half = q(0.5);
        assert_eq!(half.raw(), 32768);
        assert_eq!(dequantize(half), 0.5);
        // ties go away from zero
        assert_eq!(q(1.5 / 65536.0).raw(), 2);
        assert_eq!(quantize(-1.5 / 32768.0, QFormat::Q1_15).raw(), -2);
        assert_eq!(quantize(f64::NAN, QFormat::U0_16).raw(), 0);
    }

    #[test]
    fn sat_add_examples() {
        let x = q(0.3);
        assert_eq!(sat_add(FixedSample::zero(QFormat::U0_16), x), x);
        let max = FixedSample::max(QFormat::U0_16);
        assert_eq!(sat_add(max, FixedSample::unit(1)), max);
        assert_eq!(sat_add(q(0.25), q(0.5)), q(0.75));
        assert_eq!(sat_sub(q(0.25), q(0.5)).raw(), 0);
    }

    #[test]
    fn abs_diff_examples() {
        let x = q(0.42);
        assert_eq!(abs_diff(x, x).raw(), 0);
        // integer subtraction oracle
        let expected = q(0.7).raw() - q(0.2).raw();
        assert_eq!(abs_diff(q(0.7), q(0.2)).raw(), expected);
        assert_eq!(abs_diff(q(0.2), q(0.7)).raw(), expected);
        assert_eq!(expected, q(0.5).raw());
        let max = FixedSample::max(QFormat::U0_16);
        assert_eq!(abs_diff(max, FixedSample::zero(QFormat::U0_16)), max);
    }

    #[test]
    #[should_panic(expected = "format mismatch")]
    fn mixed_formats_panic() {
        sat_add(q(0.1), quantize(0.1, QFormat::Q1_15));
    }

    #[test]
    fn abs_diff_symmetric_exhaustive_8bit() {
        for a in 0..=255 {
            for b in 0..=255 {
                let fa = FixedSample::from_raw(a, U8);
                let fb = FixedSample::from_raw(b, U8);
                let d = abs_diff(fa, fb);
                assert_eq!(d, abs_diff(fb, fa));
                assert_eq!(d.raw(), (a - b).abs());
                let s = sat_add(fa, fb);
                assert!(s.raw() <= 255 && s.raw() == (a + b).min(255));
            }
        }
    }

    #[test]
    fn round_shift_half_away() {
        assert_eq!(round_shift(3, 1), 2);
        assert_eq!(round_shift(-3, 1), -2);
        assert_eq!(round_shift(5, 2), 1);
        assert_eq!(round_shift(6, 2), 2);
        assert_eq!(round_shift(-6, 2), -2);
        assert_eq!(round_shift(7, 0), 7);
    }

    proptest! {
        #[test]
        fn quantize_roundtrip_within_half_lsb(v in 0.0f64..(65535.0 / 65536.0)) {
            let s = q(v);
            prop_assert!((dequantize(s) - v).abs() <= 0.5 / 65536.0 + 1e-15);
        }

        #[test]
        fn signed_ops_stay_in_range(a in -40000i64..40000, b in -40000i64..40000) {
            let fa = FixedSample::from_raw(a, QFormat::Q1_15);
            let fb = FixedSample::from_raw(b, QFormat::Q1_15);
            for r in [sat_add(fa, fb), sat_sub(fa, fb)] {
                prop_assert!(r.raw() >= -32768 && r.raw() <= 32767);
            }
            let d = abs_diff(fa, fb);
            prop_assert_eq!(d, abs_diff(fb, fa));
            prop_assert!(d.raw() >= 0 && d.raw() <= 65535);
        }

        #[test]
        fn abs_diff_symmetric_16bit(a in 0i64..65536, b in 0i64..65536) {
            let fa = FixedSample::unit(a as u16);
            let fb = FixedSample::unit(b as u16);
            prop_assert_eq!(abs_diff(fa, fb), abs_diff(fb, fa));
            prop_assert_eq!(abs_diff(fa, fb).raw(), (a - b).abs());
        }
    }
}
