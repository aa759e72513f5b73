//! Mamdani fuzzy controller over the lidar/radar distance pair.
//!
//! Pipeline: fuzzify both inputs over a Ruspini partition, fire every rule
//! with min-AND, aggregate consequents with max, then defuzzify with a
//! center-of-sets weighted average. All of it runs on integers; degrees use a
//! U16.16 layout so that full membership (1.0) is representable.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{quantize, FixedSample, QFormat};

/// Full membership in the degree layout.
pub const DEGREE_ONE: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlsError {
    #[error("input peaks must start at 0, end at 1 and strictly increase: {0:?}")]
    Peaks([f64; 5]),
    #[error("output centers must strictly increase inside [0, 1): {0:?}")]
    Centers([f64; 4]),
    #[error("internal precision must be 1..=16 fractional bits, got {0}")]
    Precision(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputTerm {
    #[serde(rename = "EN")]
    ExtremelyNear,
    #[serde(rename = "N")]
    Near,
    #[serde(rename = "M")]
    Middle,
    #[serde(rename = "F")]
    Far,
    #[serde(rename = "EF")]
    ExtremelyFar,
}

impl InputTerm {
    pub const ALL: [InputTerm; 5] = [
        InputTerm::ExtremelyNear,
        InputTerm::Near,
        InputTerm::Middle,
        InputTerm::Far,
        InputTerm::ExtremelyFar,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn symbol(self) -> &'static str {
        match self {
            InputTerm::ExtremelyNear => "EN",
            InputTerm::Near => "N",
            InputTerm::Middle => "M",
            InputTerm::Far => "F",
            InputTerm::ExtremelyFar => "EF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputTerm {
    #[serde(rename = "L")]
    Low,
    #[serde(rename = "M")]
    Middle,
    #[serde(rename = "H")]
    High,
    #[serde(rename = "EH")]
    ExtremelyHigh,
}

impl OutputTerm {
    pub const ALL: [OutputTerm; 4] = [
        OutputTerm::Low,
        OutputTerm::Middle,
        OutputTerm::High,
        OutputTerm::ExtremelyHigh,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn symbol(self) -> &'static str {
        match self {
            OutputTerm::Low => "L",
            OutputTerm::Middle => "M",
            OutputTerm::High => "H",
            OutputTerm::ExtremelyHigh => "EH",
        }
    }
}

impl fmt::Display for InputTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl fmt::Display for OutputTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub lidar: InputTerm,
    pub radar: InputTerm,
    pub output: OutputTerm,
}

impl FuzzyRule {
    pub const fn new(lidar: InputTerm, radar: InputTerm, output: OutputTerm) -> Self {
        FuzzyRule {
            lidar,
            radar,
            output,
        }
    }
}

impl fmt::Display for FuzzyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "if lidar is {} and radar is {} then output is {}",
            self.lidar, self.radar, self.output
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBase {
    rules: Vec<FuzzyRule>,
}

impl RuleBase {
    pub fn new(rules: Vec<FuzzyRule>) -> Self {
        RuleBase { rules }
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Consequent of the first rule with the given antecedent pair.
    pub fn lookup(&self, lidar: InputTerm, radar: InputTerm) -> Option<OutputTerm> {
        self.rules
            .iter()
            .find(|r| r.lidar == lidar && r.radar == radar)
            .map(|r| r.output)
    }
}

impl Default for RuleBase {
    fn default() -> Self {
        default_rulebase()
    }
}

/// The eleven landing rules.
pub fn default_rulebase() -> RuleBase {
    use InputTerm::{ExtremelyFar as EF, ExtremelyNear as EN, Far as F, Middle as M, Near as N};
    use OutputTerm::{ExtremelyHigh, High, Low, Middle};
    RuleBase::new(vec![
        FuzzyRule::new(EN, EN, ExtremelyHigh),
        FuzzyRule::new(N, EN, High),
        FuzzyRule::new(EN, N, High),
        FuzzyRule::new(N, N, High),
        FuzzyRule::new(M, M, Middle),
        FuzzyRule::new(F, M, Middle),
        FuzzyRule::new(F, F, Low),
        FuzzyRule::new(EF, F, Low),
        FuzzyRule::new(F, EF, Low),
        FuzzyRule::new(EF, EF, Low),
        FuzzyRule::new(M, F, Middle),
    ])
}

/// Real-valued controller parameters. Both the fixed-point controller and the
/// floating reference are instantiated from one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlsParams {
    pub input_peaks: [f64; 5],
    pub output_centers: [f64; 4],
    pub rules: RuleBase,
    /// Fractional bits kept by the internal datapath (16 = full U0.16).
    pub internal_frac_bits: u8,
}

impl Default for FlsParams {
    fn default() -> Self {
        FlsParams {
            input_peaks: [0.0, 0.25, 0.5, 0.75, 1.0],
            output_centers: [0.125, 0.375, 0.625, 0.875],
            rules: default_rulebase(),
            internal_frac_bits: 16,
        }
    }
}

impl FlsParams {
    pub fn validate(&self) -> Result<(), FlsError> {
        let p = self.input_peaks;
        let ordered = p.windows(2).all(|w| w[0] < w[1]);
        if p[0] != 0.0 || p[4] != 1.0 || !ordered {
            return Err(FlsError::Peaks(p));
        }
        let c = self.output_centers;
        let ordered = c.windows(2).all(|w| w[0] < w[1]);
        if !ordered || c[0] < 0.0 || c[3] >= 1.0 {
            return Err(FlsError::Centers(c));
        }
        if !(1..=16).contains(&self.internal_frac_bits) {
            return Err(FlsError::Precision(self.internal_frac_bits));
        }
        Ok(())
    }
}

/// Membership degree in U16.16, `0..=DEGREE_ONE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Degree(pub u32);

impl Degree {
    pub const ZERO: Degree = Degree(0);
    pub const ONE: Degree = Degree(DEGREE_ONE);

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / DEGREE_ONE as f64
    }
}

/// Piecewise-linear Ruspini partition with shoulders at both ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipPartition {
    // peaks on the 2^16 grid; the last one is DEGREE_ONE (= 1.0)
    peaks: [u32; 5],
    // round(2^48 / segment width), baked so fuzzification never divides
    reciprocals: [u64; 4],
    mask: u32,
}

impl MembershipPartition {
    pub fn uniform() -> Self {
        Self::from_peaks([0.0, 0.25, 0.5, 0.75, 1.0], 16).expect("uniform partition is valid")
    }

    pub fn from_peaks(peaks: [f64; 5], frac_bits: u8) -> Result<Self, FlsError> {
        let mut grid = [0u32; 5];
        for (dst, &p) in grid.iter_mut().zip(&peaks) {
            *dst = (p * DEGREE_ONE as f64).round() as u32;
        }
        let ordered = grid.windows(2).all(|w| w[0] < w[1]);
        if grid[0] != 0 || grid[4] != DEGREE_ONE || !ordered {
            return Err(FlsError::Peaks(peaks));
        }
        if !(1..=16).contains(&frac_bits) {
            return Err(FlsError::Precision(frac_bits));
        }
        let mut reciprocals = [0u64; 4];
        for (k, r) in reciprocals.iter_mut().enumerate() {
            let width = (grid[k + 1] - grid[k]) as u64;
            *r = ((1u64 << 48) + width / 2) / width;
        }
        Ok(MembershipPartition {
            peaks: grid,
            reciprocals,
            mask: truncation_mask(frac_bits),
        })
    }

    pub fn peaks_raw(&self) -> [u32; 5] {
        self.peaks
    }

    /// Degrees of all five input terms. Exactly two adjacent terms are live
    /// at any point and their degrees sum to [`DEGREE_ONE`].
    pub fn fuzzify(&self, x: FixedSample) -> [Degree; 5] {
        let x = (x.raw().clamp(0, QFormat::U0_16.max_raw()) as u32) & self.mask;
        let k = self.peaks[1..].iter().position(|&p| x < p).unwrap_or(3);
        let offset = (x - self.peaks[k]) as u64;
        let upper = ((offset * self.reciprocals[k] + (1u64 << 31)) >> 32).min(DEGREE_ONE as u64);
        let upper = upper as u32 & self.mask;
        let mut degrees = [Degree::ZERO; 5];
        degrees[k + 1] = Degree(upper);
        degrees[k] = Degree(DEGREE_ONE - upper);
        degrees
    }
}

fn truncation_mask(frac_bits: u8) -> u32 {
    !((1u32 << (16 - frac_bits as u32)) - 1)
}

/// Per-term aggregated activation, indexed by [`OutputTerm::index`].
pub type Activations = [Degree; 4];

/// Min-AND over antecedents, max over rules that share a consequent.
pub fn infer(lidar: &[Degree; 5], radar: &[Degree; 5], rules: &RuleBase) -> Activations {
    let mut out = [Degree::ZERO; 4];
    for rule in rules.rules() {
        let strength = lidar[rule.lidar.index()].min(radar[rule.radar.index()]);
        let slot = &mut out[rule.output.index()];
        *slot = (*slot).max(strength);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlsStatus {
    Valid,
    NoRuleFired,
    Warmup,
}

impl FlsStatus {
    pub const fn as_str(self) -> &'static str {
        match self {
            FlsStatus::Valid => "valid",
            FlsStatus::NoRuleFired => "no_rule_fired",
            FlsStatus::Warmup => "warmup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlsResult {
    pub crisp: FixedSample,
    pub status: FlsStatus,
}

/// Output term centers in U0.16, strictly increasing L < M < H < EH.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputCenters([u16; 4]);

impl OutputCenters {
    pub fn from_f64(centers: [f64; 4]) -> Result<Self, FlsError> {
        let raw = centers.map(|c| quantize(c, QFormat::U0_16).raw() as u16);
        let ordered = raw.windows(2).all(|w| w[0] < w[1]);
        if !ordered || centers[0] < 0.0 || centers[3] >= 1.0 {
            return Err(FlsError::Centers(centers));
        }
        Ok(OutputCenters(raw))
    }

    pub fn raw(&self) -> [u16; 4] {
        self.0
    }

    pub fn center(&self, term: OutputTerm) -> FixedSample {
        FixedSample::unit(self.0[term.index()])
    }
}

impl Default for OutputCenters {
    fn default() -> Self {
        OutputCenters::from_f64([0.125, 0.375, 0.625, 0.875]).expect("default centers")
    }
}

/// Center-of-sets weighted average. An all-zero activation vector yields
/// `NoRuleFired` with a zero crisp value; the caller decides what to hold.
pub fn defuzzify(activations: &Activations, centers: &OutputCenters) -> FlsResult {
    defuzzify_masked(activations, centers, u32::MAX)
}

fn defuzzify_masked(activations: &Activations, centers: &OutputCenters, mask: u32) -> FlsResult {
    let mut weight: u64 = 0;
    let mut moment: u64 = 0;
    for (w, &c) in activations.iter().zip(&centers.0) {
        weight += w.0 as u64;
        moment += w.0 as u64 * c as u64;
    }
    if weight == 0 {
        return FlsResult {
            crisp: FixedSample::zero(QFormat::U0_16),
            status: FlsStatus::NoRuleFired,
        };
    }
    let crisp = ((moment + weight / 2) / weight) as u32 & mask;
    FlsResult {
        crisp: FixedSample::from_raw(crisp as i64, QFormat::U0_16),
        status: FlsStatus::Valid,
    }
}

/// The assembled fixed-point controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fls {
    partition: MembershipPartition,
    rules: RuleBase,
    centers: OutputCenters,
    mask: u32,
}

impl Default for Fls {
    fn default() -> Self {
        Fls::from_params(&FlsParams::default()).expect("default controller")
    }
}

impl Fls {
    pub fn from_params(params: &FlsParams) -> Result<Self, FlsError> {
        params.validate()?;
        Ok(Fls {
            partition: MembershipPartition::from_peaks(
                params.input_peaks,
                params.internal_frac_bits,
            )?,
            rules: params.rules.clone(),
            centers: OutputCenters::from_f64(params.output_centers)?,
            mask: truncation_mask(params.internal_frac_bits),
        })
    }

    pub fn partition(&self) -> &MembershipPartition {
        &self.partition
    }

    pub fn rules(&self) -> &RuleBase {
        &self.rules
    }

    pub fn centers(&self) -> &OutputCenters {
        &self.centers
    }

    pub fn eval(&self, lidar: FixedSample, radar: FixedSample) -> FlsResult {
        let l = self.partition.fuzzify(lidar);
        let r = self.partition.fuzzify(radar);
        let act = infer(&l, &r, &self.rules);
        defuzzify_masked(&act, &self.centers, self.mask)
    }
}
