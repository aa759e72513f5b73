//! Double-precision oracles for the fixed-point path.
//!
//! These are deliberately naive: straight-line formulas with no shared code
//! from the integer implementations beyond the parameter structs they are
//! built from.

use thiserror::Error;

use crate::fls::{FlsParams, FlsStatus, RuleBase};

/// Activation total below which the reference reports `NoRuleFired`; one
/// U0.16 LSB, matching the fixed path.
pub const NO_RULE_EPSILON: f64 = 1.0 / 65536.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReferenceError {
    #[error("window is empty")]
    EmptyWindow,
    #[error("windows differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefResult {
    pub crisp: f64,
    pub status: FlsStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefFls {
    peaks: [f64; 5],
    centers: [f64; 4],
    rules: RuleBase,
}

impl RefFls {
    pub fn from_params(params: &FlsParams) -> Self {
        RefFls {
            peaks: params.input_peaks,
            centers: params.output_centers,
            rules: params.rules.clone(),
        }
    }

    pub fn fuzzify(&self, x: f64) -> [f64; 5] {
        let p = &self.peaks;
        let mut mu = [0.0; 5];
        for k in 0..5 {
            mu[k] = if k == 0 && x <= p[0] || k == 4 && x >= p[4] {
                1.0
            } else if k > 0 && x > p[k - 1] && x <= p[k] {
                (x - p[k - 1]) / (p[k] - p[k - 1])
            } else if k < 4 && x > p[k] && x < p[k + 1] {
                (p[k + 1] - x) / (p[k + 1] - p[k])
            } else {
                0.0
            };
        }
        mu
    }

    pub fn eval(&self, lidar: f64, radar: f64) -> RefResult {
        let l = self.fuzzify(lidar);
        let r = self.fuzzify(radar);
        let mut act = [0.0f64; 4];
        for rule in self.rules.rules() {
            let w = l[rule.lidar.index()].min(r[rule.radar.index()]);
            act[rule.output.index()] = act[rule.output.index()].max(w);
        }
        let total: f64 = act.iter().sum();
        if total < NO_RULE_EPSILON {
            return RefResult {
                crisp: 0.0,
                status: FlsStatus::NoRuleFired,
            };
        }
        let moment: f64 = act.iter().zip(&self.centers).map(|(w, c)| w * c).sum();
        RefResult {
            crisp: moment / total,
            status: FlsStatus::Valid,
        }
    }
}

/// Mean absolute error between two equal-length windows.
pub fn ref_mae(s1: &[f64], s2: &[f64]) -> Result<f64, ReferenceError> {
    Ok(ref_abs_sum(s1, s2)? / s1.len() as f64)
}

/// Sum of absolute differences, the undivided form of [`ref_mae`].
pub fn ref_abs_sum(s1: &[f64], s2: &[f64]) -> Result<f64, ReferenceError> {
    if s1.len() != s2.len() {
        return Err(ReferenceError::LengthMismatch(s1.len(), s2.len()));
    }
    if s1.is_empty() {
        return Err(ReferenceError::EmptyWindow);
    }
    Ok(s1.iter().zip(s2).map(|(a, b)| (a - b).abs()).sum())
}

/// Direct-form convolution with a zero initial state; output has the same
/// length as `stream`.
pub fn ref_convolve(coeffs: &[f64], stream: &[f64]) -> Vec<f64> {
    (0..stream.len())
        .map(|t| {
            coeffs
                .iter()
                .enumerate()
                .filter(|(k, _)| *k <= t)
                .map(|(k, c)| c * stream[t - k])
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ref_fls_examples() {
        let fls = RefFls::from_params(&FlsParams::default());
        assert_eq!(
            fls.eval(0.0, 0.0),
            RefResult {
                crisp: 0.875,
                status: FlsStatus::Valid
            }
        );
        assert_eq!(fls.eval(1.0, 1.0).crisp, 0.125);
        assert_eq!(fls.eval(0.0, 1.0).status, FlsStatus::NoRuleFired);
        // lidar EN .5/N .5, radar pure EN: EH .5, H .5 -> midpoint
        let r = fls.eval(0.125, 0.0);
        assert_eq!(r.crisp, (0.875 + 0.625) / 2.0);
    }

    #[test]
    fn ref_fuzzify_is_unity() {
        let fls = RefFls::from_params(&FlsParams::default());
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let s: f64 = fls.fuzzify(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn mae_examples() {
        assert_eq!(ref_mae(&[0.3, 0.4], &[0.3, 0.4]), Ok(0.0));
        assert_eq!(ref_mae(&[1.0; 4], &[0.0; 4]), Ok(1.0));
        assert_eq!(ref_mae(&[], &[]), Err(ReferenceError::EmptyWindow));
        assert_eq!(
            ref_mae(&[1.0], &[]),
            Err(ReferenceError::LengthMismatch(1, 0))
        );
    }

    #[test]
    fn convolve_identities() {
        let c = [0.5, 0.25, 0.25];
        assert_eq!(
            ref_convolve(&c, &[1.0, 0.0, 0.0, 0.0]),
            vec![0.5, 0.25, 0.25, 0.0]
        );
        let dc = ref_convolve(&c, &[0.4; 6]);
        assert!(dc[2..].iter().all(|&y| (y - 0.4).abs() < 1e-15));
    }
}
