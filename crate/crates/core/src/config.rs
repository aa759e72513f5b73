//! JSON run configuration.
//!
//! The document is walked by hand rather than deserialized with derive, so
//! that one pass can report every problem, each tagged with its key path.
//! Every key is optional; omitted keys take the documented defaults. Unknown
//! keys are errors.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::apmu::{ApmuConfig, ApmuMode, ThresholdLut, DEFAULT_TOLERANCE, SLOTS};
use crate::corner::{ApmuTap, CoreId, CoreSettings};
use crate::fabric::{Aggregation, FabricConfig, LinkConfig};
use crate::fir::{default_coefficients, FirFilter, TAPS};
use crate::fls::{Fls, FlsParams};
use crate::numerics::{quantize, QFormat};
use crate::scenario::{DescentProfile, FaultKind, FaultSpec, Scenario, ScenarioSpec, Sensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{} configuration error(s):\n{}", .0.len(), join_issues(.0))]
    Invalid(Vec<ConfigIssue>),
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigError {
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            ConfigError::Invalid(issues) => issues,
            _ => &[],
        }
    }
}

/// A scheduled corner failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreFailure {
    pub core: CoreId,
    pub tick: u64,
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub fls: FlsParams,
    pub settings: CoreSettings,
    pub fabric: FabricConfig,
    pub failures: Vec<CoreFailure>,
    pub trace_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_str("{}").expect("empty config is valid")
    }
}

impl RunConfig {
    /// Replaces the scenario seed, keeping everything else.
    pub fn with_seed(mut self, seed: u64) -> Self {
        let spec = ScenarioSpec {
            seed,
            ..self.scenario.spec().clone()
        };
        self.scenario =
            Scenario::new(spec, self.scenario.faults().to_vec()).expect("already validated");
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.fabric.workers = workers.max(1);
        self
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Value = serde_json::from_str(text)?;
    let mut w = Walker::default();
    let cfg = w.run_config(&root);
    match cfg {
        Some(cfg) if w.issues.is_empty() => Ok(cfg),
        _ => Err(ConfigError::Invalid(w.issues)),
    }
}

type Obj = Map<String, Value>;

fn join(base: &str, key: &str) -> String {
    if base.is_empty() {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

#[derive(Default)]
struct Walker {
    issues: Vec<ConfigIssue>,
}

impl Walker {
    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    /// Checks that `value` is an object holding only `allowed` keys.
    fn object<'a>(&mut self, value: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Obj> {
        let Some(obj) = value.as_object() else {
            self.issue(
                if path.is_empty() { "<root>" } else { path },
                "expected an object",
            );
            return None;
        };
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.issue(
                    join(path, key),
                    format!("unknown key (allowed: {})", allowed.join(", ")),
                );
            }
        }
        Some(obj)
    }

    fn section<'a>(
        &mut self,
        obj: Option<&'a Obj>,
        base: &str,
        key: &str,
        allowed: &[&str],
    ) -> Option<&'a Obj> {
        static EMPTY: std::sync::OnceLock<Value> = std::sync::OnceLock::new();
        let empty = EMPTY.get_or_init(|| Value::Object(Map::new()));
        let value = obj.and_then(|o| o.get(key)).unwrap_or(empty);
        self.object(value, &join(base, key), allowed)
    }

    fn number(
        &mut self,
        obj: Option<&Obj>,
        base: &str,
        key: &str,
        default: f64,
        ok: impl Fn(f64) -> bool,
        range: &str,
    ) -> f64 {
        let path = join(base, key);
        match obj.and_then(|o| o.get(key)) {
            None => default,
            Some(v) => match v.as_f64() {
                Some(x) if ok(x) => x,
                Some(x) => {
                    self.issue(path, format!("{x} is out of range, expected {range}"));
                    default
                }
                None => {
                    self.issue(path, "expected a number");
                    default
                }
            },
        }
    }

    fn integer(
        &mut self,
        obj: Option<&Obj>,
        base: &str,
        key: &str,
        default: i64,
        lo: i64,
        hi: i64,
    ) -> i64 {
        let path = join(base, key);
        match obj.and_then(|o| o.get(key)) {
            None => default,
            Some(v) => match v.as_i64() {
                Some(x) if (lo..=hi).contains(&x) => x,
                Some(x) => {
                    self.issue(path, format!("{x} is out of range, expected [{lo}, {hi}]"));
                    default
                }
                None => {
                    self.issue(path, "expected an integer");
                    default
                }
            },
        }
    }

    fn unsigned(&mut self, obj: Option<&Obj>, base: &str, key: &str, default: u64) -> u64 {
        let path = join(base, key);
        match obj.and_then(|o| o.get(key)) {
            None => default,
            Some(v) => v.as_u64().unwrap_or_else(|| {
                self.issue(path, "expected a non-negative integer");
                default
            }),
        }
    }

    fn boolean(&mut self, obj: Option<&Obj>, base: &str, key: &str, default: bool) -> bool {
        match obj.and_then(|o| o.get(key)) {
            None => default,
            Some(v) => v.as_bool().unwrap_or_else(|| {
                self.issue(join(base, key), "expected true or false");
                default
            }),
        }
    }

    fn choice<T: Copy>(
        &mut self,
        obj: Option<&Obj>,
        base: &str,
        key: &str,
        default: T,
        options: &[(&str, T)],
    ) -> T {
        let Some(v) = obj.and_then(|o| o.get(key)) else {
            return default;
        };
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        match v
            .as_str()
            .and_then(|s| options.iter().find(|(n, _)| *n == s))
        {
            Some((_, t)) => *t,
            None => {
                self.issue(
                    join(base, key),
                    format!("expected one of: {}", names.join(", ")),
                );
                default
            }
        }
    }

    fn numbers(
        &mut self,
        obj: Option<&Obj>,
        base: &str,
        key: &str,
        expected: usize,
        what: &str,
    ) -> Option<Vec<f64>> {
        let v = obj.and_then(|o| o.get(key))?;
        let path = join(base, key);
        let Some(items) = v.as_array() else {
            self.issue(path, format!("expected an array of {expected} {what}"));
            return None;
        };
        if items.len() != expected {
            self.issue(
                path,
                format!("expected {expected} {what}, got {}", items.len()),
            );
            return None;
        }
        let mut out = Vec::with_capacity(expected);
        for (i, item) in items.iter().enumerate() {
            match item.as_f64() {
                Some(x) => out.push(x),
                None => {
                    self.issue(format!("{path}[{i}]"), "expected a number");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn run_config(&mut self, root: &Value) -> Option<RunConfig> {
        let top = self.object(
            root,
            "",
            &[
                "scenario", "faults", "fir", "fls", "apmu", "core", "link", "fabric", "output",
            ],
        );
        let spec = self.scenario_spec(top);
        let faults = self.faults(top, &spec);
        let scenario = match Scenario::new(spec, faults) {
            Ok(s) => Some(s),
            Err(e) => {
                self.issue("scenario", e.to_string());
                None
            }
        };
        let fls = self.fls(top);
        let settings = self.core_settings(top, &fls);
        let (fabric, failures) = self.fabric(top, scenario.as_ref());
        let output = self.section(top, "", "output", &["trace"]);
        let trace_path = match output.and_then(|o| o.get("trace")) {
            None => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => {
                self.issue("output.trace", "expected a path string");
                None
            }
        };
        Some(RunConfig {
            scenario: scenario?,
            fls,
            settings: settings?,
            fabric,
            failures,
            trace_path,
        })
    }

    fn scenario_spec(&mut self, top: Option<&Obj>) -> ScenarioSpec {
        let d = ScenarioSpec::default();
        let base = "scenario";
        let s = self.section(
            top,
            "",
            base,
            &[
                "duration_ticks",
                "initial_altitude",
                "descent",
                "corner_offsets",
                "lidar_sigma",
                "radar_sigma",
                "seed",
                "ticks_per_unit",
            ],
        );
        let duration_ticks = self.integer(
            s,
            base,
            "duration_ticks",
            d.duration_ticks as i64,
            1,
            i64::MAX,
        ) as u64;
        let initial_altitude = self.number(
            s,
            base,
            "initial_altitude",
            d.initial_altitude,
            |x| (0.0..1.0).contains(&x),
            "[0, 1)",
        );
        let sigma_ok = |x: f64| (0.0..=1.0).contains(&x);
        let lidar_sigma = self.number(s, base, "lidar_sigma", d.lidar_sigma, sigma_ok, "[0, 1]");
        let radar_sigma = self.number(s, base, "radar_sigma", d.radar_sigma, sigma_ok, "[0, 1]");
        let seed = self.unsigned(s, base, "seed", d.seed);
        let ticks_per_unit = self.number(
            s,
            base,
            "ticks_per_unit",
            d.ticks_per_unit,
            |x| x > 0.0,
            "> 0",
        );
        let corner_offsets = match self.numbers(s, base, "corner_offsets", 4, "offsets") {
            Some(v) => [v[0], v[1], v[2], v[3]],
            None => d.corner_offsets,
        };
        let descent = self.descent(s, d.descent);
        ScenarioSpec {
            duration_ticks,
            initial_altitude,
            descent,
            corner_offsets,
            lidar_sigma,
            radar_sigma,
            seed,
            ticks_per_unit,
        }
    }

    fn descent(&mut self, s: Option<&Obj>, default: DescentProfile) -> DescentProfile {
        let base = "scenario.descent";
        if s.and_then(|o| o.get("descent")).is_none() {
            return default;
        }
        let o = self.section(s, "scenario", "descent", &["kind", "rate", "tau", "level"]);
        #[derive(Clone, Copy)]
        enum K {
            Linear,
            Exponential,
            Hold,
        }
        let kind = self.choice(
            o,
            base,
            "kind",
            K::Linear,
            &[
                ("linear", K::Linear),
                ("exponential", K::Exponential),
                ("hold", K::Hold),
            ],
        );
        if o.is_some_and(|o| !o.contains_key("kind")) {
            self.issue(join(base, "kind"), "required (linear | exponential | hold)");
        }
        let extra = |name: &str| o.is_some_and(|o| o.contains_key(name));
        let (param, profile) = match kind {
            K::Linear => (
                "rate",
                DescentProfile::Linear {
                    rate: self.number(o, base, "rate", 0.0005, |x| x >= 0.0, ">= 0"),
                },
            ),
            K::Exponential => (
                "tau",
                DescentProfile::Exponential {
                    tau: self.number(o, base, "tau", 1000.0, |x| x > 0.0, "> 0"),
                },
            ),
            K::Hold => (
                "level",
                DescentProfile::Hold {
                    level: self.number(
                        o,
                        base,
                        "level",
                        0.5,
                        |x| (0.0..1.0).contains(&x),
                        "[0, 1)",
                    ),
                },
            ),
        };
        for other in ["rate", "tau", "level"] {
            if other != param && extra(other) {
                self.issue(join(base, other), "not used by this descent kind");
            }
        }
        profile
    }

    fn faults(&mut self, top: Option<&Obj>, spec: &ScenarioSpec) -> Vec<FaultSpec> {
        let Some(v) = top.and_then(|o| o.get("faults")) else {
            return Vec::new();
        };
        let Some(items) = v.as_array() else {
            self.issue("faults", "expected an array");
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let base = format!("faults[{i}]");
            let keys = [
                "corner",
                "sensor",
                "start_tick",
                "end_tick",
                "start_unit",
                "end_unit",
                "kind",
                "level",
                "delta",
                "sigma",
            ];
            let Some(o) = self.object(item, &base, &keys) else {
                continue;
            };
            let o = Some(o);
            let before = self.issues.len();
            for key in ["corner", "sensor", "kind"] {
                if !o.is_some_and(|o| o.contains_key(key)) {
                    self.issue(join(&base, key), "required");
                }
            }
            let corner = CoreId::new(self.integer(o, &base, "corner", 0, 0, 3) as usize)
                .expect("range checked");
            let sensor = self.choice(
                o,
                &base,
                "sensor",
                Sensor::Lidar,
                &[("lidar", Sensor::Lidar), ("radar", Sensor::Radar)],
            );
            let window = |w: &mut Self, tick_key: &str, unit_key: &str| -> Option<u64> {
                let has = |k: &str| o.is_some_and(|o| o.contains_key(k));
                match (has(tick_key), has(unit_key)) {
                    (true, true) => {
                        w.issue(
                            join(&base, unit_key),
                            format!("give either {tick_key} or {unit_key}, not both"),
                        );
                        None
                    }
                    (true, false) => Some(w.unsigned(o, &base, tick_key, 0)),
                    (false, true) => {
                        let u = w.number(o, &base, unit_key, 0.0, |x| x >= 0.0, ">= 0");
                        Some(spec.unit_to_tick(u))
                    }
                    (false, false) => {
                        w.issue(join(&base, tick_key), format!("required (or {unit_key})"));
                        None
                    }
                }
            };
            let start = window(self, "start_tick", "start_unit");
            let end = window(self, "end_tick", "end_unit");
            #[derive(Clone, Copy, PartialEq)]
            enum K {
                Stuck,
                Offset,
                Jam,
                Dropout,
            }
            let kind = self.choice(
                o,
                &base,
                "kind",
                K::Dropout,
                &[
                    ("stuck_at", K::Stuck),
                    ("offset", K::Offset),
                    ("jam_noise", K::Jam),
                    ("dropout", K::Dropout),
                ],
            );
            let (param, kind) = match kind {
                K::Stuck => (
                    "level",
                    FaultKind::StuckAt {
                        level: self.req_number(
                            o,
                            &base,
                            "level",
                            |x| (0.0..=1.0).contains(&x),
                            "[0, 1]",
                        ),
                    },
                ),
                K::Offset => (
                    "delta",
                    FaultKind::Offset {
                        delta: self.req_number(
                            o,
                            &base,
                            "delta",
                            |x| (-1.0..=1.0).contains(&x),
                            "[-1, 1]",
                        ),
                    },
                ),
                K::Jam => (
                    "sigma",
                    FaultKind::JamNoise {
                        sigma: self.req_number(
                            o,
                            &base,
                            "sigma",
                            |x| (0.0..=1.0).contains(&x),
                            "[0, 1]",
                        ),
                    },
                ),
                K::Dropout => ("", FaultKind::Dropout),
            };
            for other in ["level", "delta", "sigma"] {
                if other != param && o.is_some_and(|o| o.contains_key(other)) {
                    self.issue(join(&base, other), "not used by this fault kind");
                }
            }
            if let (Some(start_tick), Some(end_tick)) = (start, end) {
                if self.issues.len() == before {
                    out.push(FaultSpec {
                        corner,
                        sensor,
                        start_tick,
                        end_tick,
                        kind,
                    });
                }
            }
        }
        out
    }

    fn req_number(
        &mut self,
        o: Option<&Obj>,
        base: &str,
        key: &str,
        ok: impl Fn(f64) -> bool,
        range: &str,
    ) -> f64 {
        if !o.is_some_and(|o| o.contains_key(key)) {
            self.issue(join(base, key), "required for this fault kind");
            return 0.0;
        }
        self.number(o, base, key, 0.0, ok, range)
    }

    fn taps(&mut self, o: Option<&Obj>, key: &str, default: [f64; TAPS]) -> Option<FirFilter> {
        let base = "fir";
        let taps = self
            .numbers(o, base, key, TAPS, "taps")
            .unwrap_or(default.to_vec());
        match FirFilter::new(&taps) {
            Ok(f) => Some(f),
            Err(e) => {
                self.issue(join(base, key), e.to_string());
                None
            }
        }
    }

    fn fls(&mut self, top: Option<&Obj>) -> FlsParams {
        let d = FlsParams::default();
        let base = "fls";
        let o = self.section(
            top,
            "",
            base,
            &["input_peaks", "output_centers", "internal_frac_bits"],
        );
        let peaks = self.numbers(o, base, "input_peaks", 5, "peaks");
        let centers = self.numbers(o, base, "output_centers", 4, "centers");
        let bits = self.integer(
            o,
            base,
            "internal_frac_bits",
            d.internal_frac_bits as i64,
            1,
            16,
        ) as u8;
        let params = FlsParams {
            input_peaks: peaks
                .map(|p| [p[0], p[1], p[2], p[3], p[4]])
                .unwrap_or(d.input_peaks),
            output_centers: centers
                .map(|c| [c[0], c[1], c[2], c[3]])
                .unwrap_or(d.output_centers),
            internal_frac_bits: bits,
            ..d
        };
        if let Err(e) = Fls::from_params(&params) {
            let key = match e {
                crate::fls::FlsError::Peaks(_) => "input_peaks",
                crate::fls::FlsError::Centers(_) => "output_centers",
                crate::fls::FlsError::Precision(_) => "internal_frac_bits",
            };
            self.issue(join(base, key), e.to_string());
            return FlsParams::default();
        }
        params
    }

    fn core_settings(&mut self, top: Option<&Obj>, fls: &FlsParams) -> Option<CoreSettings> {
        let fir = self.section(
            top,
            "",
            "fir",
            &["coefficients", "lidar_coefficients", "radar_coefficients"],
        );
        let shared = self.numbers(fir, "fir", "coefficients", TAPS, "taps");
        let shared = shared
            .map(|v| <[f64; TAPS]>::try_from(v).expect("length checked"))
            .unwrap_or_else(default_coefficients);
        let lidar_fir = self.taps(fir, "lidar_coefficients", shared);
        let radar_fir = self.taps(fir, "radar_coefficients", shared);

        let base = "apmu";
        let a = self.section(
            top,
            "",
            base,
            &["eww", "mode", "per_sample_tolerance", "threshold_lut"],
        );
        let eww = self.integer(a, base, "eww", SLOTS as i64, 1, SLOTS as i64);
        let mode = self.choice(
            a,
            base,
            "mode",
            ApmuMode::SumWeight,
            &[
                ("sum", ApmuMode::SumWeight),
                ("count", ApmuMode::EventCount),
            ],
        );
        let tol = self.number(
            a,
            base,
            "per_sample_tolerance",
            DEFAULT_TOLERANCE,
            |x| (0.0..1.0).contains(&x),
            "[0, 1)",
        );
        let tol = quantize(tol, QFormat::U0_16);
        let lut = match self.numbers(a, base, "threshold_lut", SLOTS, "thresholds") {
            None => None,
            Some(values) => {
                let mut entries = Vec::with_capacity(SLOTS);
                for (i, v) in values.iter().enumerate() {
                    let path = format!("apmu.threshold_lut[{i}]");
                    match mode {
                        ApmuMode::SumWeight if (0.0..=SLOTS as f64).contains(v) => {
                            entries.push(quantize(*v, QFormat::U16_16).raw() as u32)
                        }
                        ApmuMode::SumWeight => {
                            self.issue(path, format!("{v} is out of range, expected [0, {SLOTS}]"))
                        }
                        ApmuMode::EventCount
                            if v.fract() == 0.0 && (0.0..=SLOTS as f64).contains(v) =>
                        {
                            entries.push(*v as u32)
                        }
                        ApmuMode::EventCount => {
                            self.issue(path, format!("expected an event count in [0, {SLOTS}]"))
                        }
                    }
                }
                ThresholdLut::from_entries(&entries).ok()
            }
        };
        let apmu = match lut {
            Some(lut) => ApmuConfig::new(eww, lut, mode, tol),
            None => ApmuConfig::with_defaults(eww, mode, tol),
        };
        let apmu = apmu.map_err(|e| self.issue("apmu.eww", e.to_string())).ok();

        let c = self.section(top, "", "core", &["apmu_tap"]);
        let apmu_tap = self.choice(
            c,
            "core",
            "apmu_tap",
            ApmuTap::Raw,
            &[("raw", ApmuTap::Raw), ("filtered", ApmuTap::Filtered)],
        );
        let fls = Fls::from_params(fls).ok()?;
        Some(CoreSettings {
            lidar_fir: lidar_fir?,
            radar_fir: radar_fir?,
            fls,
            apmu: apmu?,
            apmu_tap,
        })
    }

    fn fabric(
        &mut self,
        top: Option<&Obj>,
        scenario: Option<&Scenario>,
    ) -> (FabricConfig, Vec<CoreFailure>) {
        let d = FabricConfig::default();
        let l = self.section(top, "", "link", &["latency_ticks", "queue_capacity"]);
        let link = LinkConfig {
            latency_ticks: self.integer(
                l,
                "link",
                "latency_ticks",
                d.link.latency_ticks as i64,
                1,
                1 << 20,
            ) as u32,
            queue_capacity: self.integer(
                l,
                "link",
                "queue_capacity",
                d.link.queue_capacity as i64,
                1,
                1 << 20,
            ) as usize,
        };
        let base = "fabric";
        let f = self.section(
            top,
            "",
            base,
            &[
                "tolerance",
                "aggregation",
                "handover_k",
                "pilot_permit",
                "failures",
            ],
        );
        let tolerance = self.number(
            f,
            base,
            "tolerance",
            0.05,
            |x| (0.0..1.0).contains(&x),
            "[0, 1)",
        );
        let aggregation = self.choice(
            f,
            base,
            "aggregation",
            Aggregation::Mean,
            &[
                ("mean", Aggregation::Mean),
                ("min", Aggregation::Min),
                ("max", Aggregation::Max),
            ],
        );
        let handover_k =
            self.integer(f, base, "handover_k", d.handover_k as i64, 1, 1 << 20) as u32;
        let pilot_permit = self.boolean(f, base, "pilot_permit", d.pilot_permit);

        let mut failures = Vec::new();
        if let Some(v) = f.and_then(|o| o.get("failures")) {
            match v.as_array() {
                None => self.issue("fabric.failures", "expected an array"),
                Some(items) => {
                    for (i, item) in items.iter().enumerate() {
                        let path = format!("fabric.failures[{i}]");
                        let Some(o) = self.object(item, &path, &["core", "tick"]) else {
                            continue;
                        };
                        let o = Some(o);
                        for key in ["core", "tick"] {
                            if !o.is_some_and(|o| o.contains_key(key)) {
                                self.issue(join(&path, key), "required");
                            }
                        }
                        let core = CoreId::new(self.integer(o, &path, "core", 0, 0, 3) as usize)
                            .expect("range checked");
                        let tick = self.unsigned(o, &path, "tick", 0);
                        if scenario.is_some_and(|s| tick >= s.duration()) {
                            self.issue(join(&path, "tick"), "must be inside the scenario duration");
                        }
                        failures.push(CoreFailure { core, tick });
                    }
                }
            }
        }
        failures.sort_by_key(|f| (f.tick, f.core));
        let fabric = FabricConfig {
            link,
            tolerance: quantize(tolerance, QFormat::U0_16),
            aggregation,
            handover_k,
            pilot_permit,
            workers: 1,
        };
        (fabric, failures)
    }
}
