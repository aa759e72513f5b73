//! Descent profiles, sensor sampling and fault injection.
//!
//! Every random draw comes from a generator keyed by (seed, stream, tick),
//! where a stream is one sensor's measurement noise or one sensor's jamming
//! noise. Generation is therefore a pure function of its inputs: ticks can be
//! produced in any order or in parallel, and adding a fault on one sensor
//! leaves every other stream untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corner::{CoreId, LIDAR_FULL_SCALE, RADAR_FULL_SCALE};
use crate::fabric::SensorReading;

/// Largest `f64` strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    Lidar,
    Radar,
}

impl Sensor {
    pub const fn full_scale(self) -> i32 {
        match self {
            Sensor::Lidar => LIDAR_FULL_SCALE,
            Sensor::Radar => RADAR_FULL_SCALE,
        }
    }

    const fn index(self) -> u64 {
        match self {
            Sensor::Lidar => 0,
            Sensor::Radar => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DescentProfile {
    /// `initial - rate * t`
    Linear {
        rate: f64,
    },
    /// `initial * exp(-t / tau)`
    Exponential {
        tau: f64,
    },
    Hold {
        level: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub duration_ticks: u64,
    pub initial_altitude: f64,
    pub descent: DescentProfile,
    /// Per-corner additive offsets (drone tilt).
    pub corner_offsets: [f64; 4],
    pub lidar_sigma: f64,
    pub radar_sigma: f64,
    pub seed: u64,
    pub ticks_per_unit: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            duration_ticks: 1000,
            initial_altitude: 0.8,
            descent: DescentProfile::Linear { rate: 0.0005 },
            corner_offsets: [0.0; 4],
            lidar_sigma: 0.003,
            radar_sigma: 0.003,
            seed: 0x5eed_a16a_5400_0001,
            ticks_per_unit: 100.0,
        }
    }
}

impl ScenarioSpec {
    pub fn sensor_model(&self, sensor: Sensor) -> SensorModel {
        let sigma = match sensor {
            Sensor::Lidar => self.lidar_sigma,
            Sensor::Radar => self.radar_sigma,
        };
        SensorModel {
            full_scale: sensor.full_scale(),
            sigma,
        }
    }

    /// Tick index for a point on the unit time axis.
    pub fn unit_to_tick(&self, unit: f64) -> u64 {
        (unit * self.ticks_per_unit).round().max(0.0) as u64
    }
}

/// True distance seen by every corner at `tick`, clamped to [0, 1).
pub fn gen_truth(spec: &ScenarioSpec, tick: u64) -> [f64; 4] {
    let t = tick as f64;
    let base = match spec.descent {
        DescentProfile::Linear { rate } => spec.initial_altitude - rate * t,
        DescentProfile::Exponential { tau } => spec.initial_altitude * (-t / tau).exp(),
        DescentProfile::Hold { level } => level,
    };
    spec.corner_offsets
        .map(|off| (base + off).clamp(0.0, BELOW_ONE))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub full_scale: i32,
    pub sigma: f64,
}

impl SensorModel {
    /// Real value in [0, 1] to the nearest code, clamped.
    pub fn code_for(&self, value: f64) -> i32 {
        clamp_code((value * self.full_scale as f64).round(), self.full_scale)
    }
}

fn clamp_code(code: f64, full_scale: i32) -> i32 {
    if code.is_nan() {
        return 0;
    }
    code.clamp(0.0, full_scale as f64) as i32
}

fn gaussian(rng: &mut impl Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    z * sigma
}

/// One noisy reading of `truth` as a sensor code.
pub fn sensor_sample(truth: f64, model: &SensorModel, rng: &mut impl Rng) -> i32 {
    let noisy = truth + gaussian(rng, model.sigma);
    model.code_for(noisy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FaultKind {
    StuckAt {
        level: f64,
    },
    Offset {
        delta: f64,
    },
    JamNoise {
        sigma: f64,
    },
    /// No return: the rangefinder reads full scale.
    Dropout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub corner: CoreId,
    pub sensor: Sensor,
    pub start_tick: u64,
    pub end_tick: u64,
    pub kind: FaultKind,
}

impl FaultSpec {
    pub fn is_active(&self, tick: u64) -> bool {
        (self.start_tick..self.end_tick).contains(&tick)
    }

    pub fn targets(&self, corner: CoreId, sensor: Sensor) -> bool {
        self.corner == corner && self.sensor == sensor
    }
}

/// Applies `fault` to `code` if it is active at `tick`.
pub fn inject_fault(code: i32, fault: &FaultSpec, tick: u64, rng: &mut impl Rng) -> i32 {
    if !fault.is_active(tick) {
        return code;
    }
    let full = fault.sensor.full_scale();
    match fault.kind {
        FaultKind::StuckAt { level } => clamp_code((level * full as f64).round(), full),
        FaultKind::Offset { delta } => {
            clamp_code(code as f64 + (delta * full as f64).round(), full)
        }
        FaultKind::JamNoise { sigma } => clamp_code(
            code as f64 + (gaussian(rng, sigma) * full as f64).round(),
            full,
        ),
        FaultKind::Dropout => full,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StreamKind {
    Noise = 0,
    Jam = 1,
}

/// Generator for one (stream, tick) cell.
fn cell_rng(seed: u64, corner: CoreId, sensor: Sensor, kind: StreamKind, tick: u64) -> ChaCha8Rng {
    let stream = (corner.index() as u64 * 2 + sensor.index()) * 2 + kind as u64;
    let key = splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ tick);
    ChaCha8Rng::seed_from_u64(key)
}

/// A validated scenario with its fault schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    spec: ScenarioSpec,
    faults: Vec<FaultSpec>,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec, faults: Vec<FaultSpec>) -> Result<Self, ScenarioError> {
        if spec.duration_ticks == 0 {
            return Err(invalid("scenario.duration_ticks", "must be positive"));
        }
        if !(0.0..1.0).contains(&spec.initial_altitude) {
            return Err(invalid("scenario.initial_altitude", "must be in [0, 1)"));
        }
        for (name, sigma) in [
            ("lidar_sigma", spec.lidar_sigma),
            ("radar_sigma", spec.radar_sigma),
        ] {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(invalid(
                    format!("scenario.{name}"),
                    "must be a finite value >= 0",
                ));
            }
        }
        if spec.ticks_per_unit.is_nan() || spec.ticks_per_unit <= 0.0 {
            return Err(invalid("scenario.ticks_per_unit", "must be positive"));
        }
        match spec.descent {
            DescentProfile::Exponential { tau } if tau.is_nan() || tau <= 0.0 => {
                return Err(invalid("scenario.descent.tau", "must be positive"));
            }
            _ => {}
        }
        for (i, f) in faults.iter().enumerate() {
            if f.start_tick >= f.end_tick || f.end_tick > spec.duration_ticks {
                return Err(invalid(
                    format!("faults[{i}]"),
                    format!("window must satisfy start < end <= {}", spec.duration_ticks),
                ));
            }
            for (j, g) in faults[..i].iter().enumerate() {
                let overlap = f.start_tick < g.end_tick && g.start_tick < f.end_tick;
                if overlap && f.targets(g.corner, g.sensor) {
                    return Err(invalid(
                        format!("faults[{i}]"),
                        format!("overlaps faults[{j}] on the same sensor"),
                    ));
                }
            }
        }
        Ok(Scenario { spec, faults })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn faults(&self) -> &[FaultSpec] {
        &self.faults
    }

    pub fn duration(&self) -> u64 {
        self.spec.duration_ticks
    }

    fn code(&self, corner: CoreId, sensor: Sensor, truth: f64, tick: u64) -> i32 {
        let seed = self.spec.seed;
        let model = self.spec.sensor_model(sensor);
        let mut rng = cell_rng(seed, corner, sensor, StreamKind::Noise, tick);
        let mut code = sensor_sample(truth, &model, &mut rng);
        for fault in self
            .faults
            .iter()
            .filter(|f| f.targets(corner, sensor) && f.is_active(tick))
        {
            let mut jam = cell_rng(seed, corner, sensor, StreamKind::Jam, tick);
            code = inject_fault(code, fault, tick, &mut jam);
        }
        code
    }

    pub fn readings(&self, tick: u64) -> [SensorReading; 4] {
        let truth = gen_truth(&self.spec, tick);
        CoreId::ALL.map(|id| SensorReading {
            lidar: self.code(id, Sensor::Lidar, truth[id.index()], tick),
            radar: self.code(id, Sensor::Radar, truth[id.index()], tick),
        })
    }

    /// Readings for `start..start + len`, generated in parallel when the
    /// `parallel` feature is on.
    pub fn readings_block(&self, start: u64, len: u64) -> Vec<[SensorReading; 4]> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (start..start + len)
                .into_par_iter()
                .map(|t| self.readings(t))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (start..start + len).map(|t| self.readings(t)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(descent: DescentProfile) -> ScenarioSpec {
        ScenarioSpec {
            descent,
            ..ScenarioSpec::default()
        }
    }

    fn fault(kind: FaultKind) -> FaultSpec {
        FaultSpec {
            corner: CoreId::ALL[0],
            sensor: Sensor::Radar,
            start_tick: 10,
            end_tick: 20,
            kind,
        }
    }

    #[test]
    fn truth_profiles() {
        let s = spec(DescentProfile::Hold { level: 0.5 });
        for t in [0, 1, 999] {
            assert_eq!(gen_truth(&s, t), [0.5; 4]);
        }
        let s = spec(DescentProfile::Linear { rate: 0.001 });
        assert_eq!(gen_truth(&s, 100)[0], 0.8 - 0.001 * 100.0);
        assert_eq!(gen_truth(&s, 5000)[0], 0.0);
        let s = spec(DescentProfile::Exponential { tau: 250.0 });
        for t in [0u64, 1, 250, 777] {
            let expected = 0.8 * (-(t as f64) / 250.0).exp();
            assert!((gen_truth(&s, t)[2] - expected).abs() < 1e-15);
        }
        let s = ScenarioSpec {
            corner_offsets: [0.3, 0.0, 0.0, 0.0],
            ..spec(DescentProfile::Hold { level: 0.9 })
        };
        assert!(gen_truth(&s, 0)[0] < 1.0);
    }

    #[test]
    fn noiseless_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = SensorModel {
            full_scale: 1023,
            sigma: 0.0,
        };
        assert_eq!(sensor_sample(0.5, &model, &mut rng), 512);
        assert_eq!(sensor_sample(1.2, &model, &mut rng), 1023);
        assert_eq!(sensor_sample(-0.1, &model, &mut rng), 0);
    }

    #[test]
    fn noisy_sampling_mean() {
        let model = SensorModel {
            full_scale: 2047,
            sigma: 0.01,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| sensor_sample(0.5, &model, &mut rng) as f64 / 2047.0)
            .sum();
        let mean = sum / n as f64;
        // code rounding adds at most half an LSB of bias
        let bound = 3.0 * 0.01 / (n as f64).sqrt() + 0.5 / 2047.0;
        assert!((mean - 0.5).abs() < bound, "mean {mean}");
    }

    #[test]
    fn fault_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = fault(FaultKind::StuckAt { level: 0.8 });
        assert_eq!(inject_fault(100, &f, 5, &mut rng), 100);
        assert_eq!(
            inject_fault(100, &f, 10, &mut rng),
            (0.8f64 * 1023.0).round() as i32
        );
        assert_eq!(
            inject_fault(900, &f, 19, &mut rng),
            (0.8f64 * 1023.0).round() as i32
        );
        assert_eq!(inject_fault(900, &f, 20, &mut rng), 900);

        let model = SensorModel {
            full_scale: 1023,
            sigma: 0.0,
        };
        let base = sensor_sample(0.5, &model, &mut rng);
        let f = fault(FaultKind::Offset { delta: 0.15 });
        assert_eq!(inject_fault(base, &f, 12, &mut rng), model.code_for(0.65));
        assert_eq!(inject_fault(1000, &f, 12, &mut rng), 1023);

        let f = fault(FaultKind::Dropout);
        assert_eq!(inject_fault(3, &f, 15, &mut rng), 1023);

        let f = fault(FaultKind::JamNoise { sigma: 0.2 });
        let jammed: Vec<i32> = (0..50)
            .map(|_| inject_fault(500, &f, 15, &mut rng))
            .collect();
        assert!(jammed.iter().any(|&c| c != 500));
        assert!(jammed.iter().all(|&c| (0..=1023).contains(&c)));
    }

    #[test]
    fn validation() {
        let ok = Scenario::new(ScenarioSpec::default(), vec![fault(FaultKind::Dropout)]);
        assert!(ok.is_ok());
        let bad = FaultSpec {
            end_tick: 5000,
            ..fault(FaultKind::Dropout)
        };
        assert!(Scenario::new(ScenarioSpec::default(), vec![bad]).is_err());
        let overlapping = vec![
            fault(FaultKind::Dropout),
            FaultSpec {
                start_tick: 15,
                end_tick: 30,
                ..fault(FaultKind::Dropout)
            },
        ];
        assert!(Scenario::new(ScenarioSpec::default(), overlapping).is_err());
        let other_sensor = vec![
            fault(FaultKind::Dropout),
            FaultSpec {
                sensor: Sensor::Lidar,
                ..fault(FaultKind::Dropout)
            },
        ];
        assert!(Scenario::new(ScenarioSpec::default(), other_sensor).is_ok());
        let s = ScenarioSpec {
            lidar_sigma: -1.0,
            ..ScenarioSpec::default()
        };
        assert!(Scenario::new(s, vec![]).is_err());
    }

    #[test]
    fn deterministic_and_order_free() {
        let sc = Scenario::new(
            ScenarioSpec::default(),
            vec![fault(FaultKind::JamNoise { sigma: 0.1 })],
        )
        .unwrap();
        let forward: Vec<_> = (0..200).map(|t| sc.readings(t)).collect();
        let backward: Vec<_> = (0..200).rev().map(|t| sc.readings(t)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        assert_eq!(sc.readings_block(0, 200), forward);
    }

    #[test]
    fn faults_do_not_perturb_other_streams() {
        let clean = Scenario::new(ScenarioSpec::default(), vec![]).unwrap();
        let jam = fault(FaultKind::JamNoise { sigma: 0.2 });
        let faulty = Scenario::new(ScenarioSpec::default(), vec![jam]).unwrap();
        for t in 0..100 {
            let (a, b) = (clean.readings(t), faulty.readings(t));
            if jam.is_active(t) {
                assert_eq!(a[0].lidar, b[0].lidar);
                assert_eq!(a[1..], b[1..]);
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn unit_axis_mapping() {
        let s = ScenarioSpec::default();
        assert_eq!(s.unit_to_tick(3.0), 300);
        assert_eq!(s.unit_to_tick(4.0), 400);
    }
}
