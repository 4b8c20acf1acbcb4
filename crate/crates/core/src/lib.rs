//! Distortion-aware linear precoding for a multiuser MISO downlink whose
//! transmitter uses nonlinear (third-order) power amplifiers.
//!
//! The amplifier output is split with Bussgang's theorem into a linear term
//! and a distortion term that is uncorrelated with the amplifier input. The
//! resulting SINDR-based sum rate is maximized with projected gradient
//! ascent, where the projection rescales the precoder so that the average
//! power *at the amplifier output* meets the budget.
//!
//! Module map:
//!
//! - [`pa`]: amplifier model, Bussgang gain, distortion covariance, output power.
//! - [`channel`]: ULA array response, geometric channel draws, link budget.
//! - [`precoding`]: MRT and ZF baselines and the nonlinear power projection.
//! - [`metrics`]: SINDR, sum rate and far-field radiation patterns.
//! - [`optimizer`]: closed-form gradient and the projected ascent (DAB).
//! - [`harness`]: config-driven experiments writing CSV artifacts.
//! - [`validate`]: quick self-check suite used by the `validate` subcommand.

pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod pa;
pub mod precoding;
pub mod seed;
pub mod units;
pub mod validate;

pub use channel::{ChannelSet, GeometryConfig, LinkBudget};
pub use error::{Error, Result};
pub use optimizer::{AscentTrace, InitLabel, MultiInitResult, OptimizerOptions};
pub use pa::{BussgangGain, DistortionCovariance, PaParams};
pub use precoding::Precoder;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
