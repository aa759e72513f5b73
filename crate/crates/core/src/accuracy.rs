//! Fixed-point controller accuracy against the floating-point reference.

use serde::Serialize;

use crate::fls::{Fls, FlsError, FlsParams, FlsStatus};
use crate::numerics::{quantize, QFormat};
use crate::reference::RefFls;

pub const DEFAULT_GRID: usize = 512;
/// Largest allowed relative deviation.
pub const ACCURACY_BOUND: f64 = 0.05;
/// Denominator floor for the relative deviation.
pub const REFERENCE_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstPoint {
    pub lidar: f64,
    pub radar: f64,
    pub fixed: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub grid: usize,
    pub points_compared: u64,
    /// Points skipped because either side reported something other than Valid.
    pub points_skipped: u64,
    pub max_rel_deviation: f64,
    pub mean_rel_deviation: f64,
    pub argmax: WorstPoint,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Copy)]
struct Partial {
    compared: u64,
    skipped: u64,
    sum: f64,
    max: f64,
    worst: WorstPoint,
}

impl Partial {
    fn merge(self, other: Partial) -> Partial {
        let (max, worst) = if other.max > self.max {
            (other.max, other.worst)
        } else {
            (self.max, self.worst)
        };
        Partial {
            compared: self.compared + other.compared,
            skipped: self.skipped + other.skipped,
            sum: self.sum + other.sum,
            max,
            worst,
        }
    }
}

/// Sweeps a `grid`×`grid` lattice over [0, 1]² and compares the fixed-point
/// crisp output with the reference at each point.
pub fn verify_accuracy(params: &FlsParams, grid: usize) -> Result<AccuracyReport, FlsError> {
    let fls = Fls::from_params(params)?;
    let reference = RefFls::from_params(params);
    let grid = grid.max(2);
    let coord = |i: usize| i as f64 / (grid - 1) as f64;

    let row = |i: usize| {
        let lidar = coord(i);
        let ql = quantize(lidar, QFormat::U0_16);
        let mut p = Partial {
            compared: 0,
            skipped: 0,
            sum: 0.0,
            max: -1.0,
            worst: WorstPoint {
                lidar,
                radar: 0.0,
                fixed: 0.0,
                reference: 0.0,
            },
        };
        for j in 0..grid {
            let radar = coord(j);
            let fixed = fls.eval(ql, quantize(radar, QFormat::U0_16));
            let r = reference.eval(lidar, radar);
            if fixed.status != FlsStatus::Valid || r.status != FlsStatus::Valid {
                p.skipped += 1;
                continue;
            }
            let fixed = fixed.crisp.to_f64();
            let dev = (fixed - r.crisp).abs() / r.crisp.max(REFERENCE_FLOOR);
            p.compared += 1;
            p.sum += dev;
            if dev > p.max {
                p.max = dev;
                p.worst = WorstPoint {
                    lidar,
                    radar,
                    fixed,
                    reference: r.crisp,
                };
            }
        }
        p
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Partial> = {
        use rayon::prelude::*;
        (0..grid).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Partial> = (0..grid).map(row).collect();

    let total = rows
        .into_iter()
        .reduce(Partial::merge)
        .expect("grid is non-empty");
    let max = total.max.max(0.0);
    Ok(AccuracyReport {
        grid,
        points_compared: total.compared,
        points_skipped: total.skipped,
        max_rel_deviation: max,
        mean_rel_deviation: if total.compared > 0 {
            total.sum / total.compared as f64
        } else {
            0.0
        },
        argmax: total.worst,
        bound: ACCURACY_BOUND,
        passed: max <= ACCURACY_BOUND,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_passes_on_coarse_grid() {
        let r = verify_accuracy(&FlsParams::default(), 64).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.grid, 64);
        assert_eq!(r.points_compared + r.points_skipped, 64 * 64);
        assert!(r.mean_rel_deviation <= r.max_rel_deviation);
    }

    #[test]
    fn four_bit_internal_format_fails() {
        let params = FlsParams {
            internal_frac_bits: 4,
            ..FlsParams::default()
        };
        let r = verify_accuracy(&params, 64).unwrap();
        assert!(!r.passed, "{r:?}");
    }

    #[test]
    fn report_is_deterministic() {
        let a = verify_accuracy(&FlsParams::default(), 33).unwrap();
        let b = verify_accuracy(&FlsParams::default(), 33).unwrap();
        assert_eq!(a, b);
    }
}
