//! Behavioral simulator of a four-corner landing-guidance fabric.
//!
//! Each corner filters a lidar/radar distance pair, runs an eleven-rule
//! Mamdani controller over it and watches the inter-sensor discrepancy with a
//! sliding-window malfunction detector. Opposed corners cross-check their
//! distances over a latency-modelled link, and the coordinator folds the
//! results into a system mode.
//!
//! The signal path is integer-only; [`reference`] holds the floating-point
//! oracles used for accuracy reports.

#[cfg(feature = "reference")]
pub mod accuracy;
pub mod apmu;
pub mod bench;
pub mod config;
pub mod corner;
pub mod fabric;
pub mod fir;
pub mod fls;
pub mod numerics;
#[cfg(feature = "reference")]
pub mod reference;
pub mod runner;
pub mod scenario;
pub mod trace;

pub use numerics::{FixedSample, QFormat};
