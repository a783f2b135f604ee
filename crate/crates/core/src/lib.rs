//! Conveyor-belt clock synchronization toolkit.
//!
//! * [`belt`]: the abstract protocol and its variants (ranging, differential,
//!   rate feedback, periodic ramps), generic over any [`Scalar`] including
//!   exact rationals.
//! * [`optics`]: coherent-state polarization interferometer, fringe scans and
//!   the classical dispersion-immunity condition.
//! * [`biphoton`]: entangled-pair coincidence dip and the relaxed quantum
//!   cancellation condition.
//! * [`estimator`]: shot-noise-limited multi-pulse null search.
//! * [`relativity`]: exact delay and Doppler-scaled dispersion corrections.
//!
//! Generic types default to `f64`; the aliases below name the other
//! instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belt;
pub mod biphoton;
pub mod dispersion;
pub mod estimator;
pub mod optics;
pub mod relativity;
pub mod scalar;

pub use scalar::{lit, Real, Scalar};

/// Exact rational scalar for the belt protocol.
pub type Exact = num_rational::BigRational;

pub type ClockPairExact = belt::ClockPair<Exact>;
pub type BeltScenarioExact = belt::BeltScenario<Exact>;
pub type ClockPairF32 = belt::ClockPair<f32>;
pub type BeltScenarioF32 = belt::BeltScenario<f32>;

pub type RelativisticDriveExact = relativity::RelativisticDrive<Exact>;

pub type PulseSpectrumF32 = optics::PulseSpectrum<f32>;
pub type DelayDriveF32 = optics::DelayDrive<f32>;
pub type DispersionProfileF32 = dispersion::DispersionProfile<f32>;
pub type BiphotonStateF32 = biphoton::BiphotonState<f32>;

/// First-order interferometer in double precision.
pub type FringeModelF64 = optics::FringeModel<f64, optics::DelayDrive<f64>>;
pub type FringeModelF32 = optics::FringeModel<f32, optics::DelayDrive<f32>>;
pub type RelativisticFringeModel = optics::FringeModel<f64, relativity::RelativisticDrive<f64>>;
pub type DipModelF64 = biphoton::DipModel<f64, optics::DelayDrive<f64>>;
pub type DipModelF32 = biphoton::DipModel<f32, optics::DelayDrive<f32>>;
