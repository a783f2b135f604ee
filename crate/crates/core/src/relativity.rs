//! Exact-in-`v/c` corrections to the moving-delay drive.
//!
//! With `chi = (1 + v/c) / (1 - v/c)` the branch that travels against the
//! mirror on the way out sees its outbound dispersion at `omega / chi` and its
//! return dispersion at `omega * chi`, and the other branch the reverse.
//! Polynomials are evaluated at the scaled frequency directly; nothing is
//! re-expanded about the center.
//!
//! `chi`, [`tau_d_rel`] and [`tau_rel`] are rational in `v/c` and work over
//! any [`Scalar`], so the limit identities can be checked exactly.

use log::warn;
use num_complex::Complex;
use thiserror::Error;

use crate::dispersion::DispersionProfile;
use crate::optics::{OpticsError, Propagation};
use crate::scalar::{to_f64, two, Real, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelativityError {
    #[error("|v/c| = {ratio} must be below 1")]
    Superluminal { ratio: f64 },
    #[error("invalid drive: {0}")]
    InvalidDrive(&'static str),
}

impl From<RelativityError> for OpticsError {
    fn from(e: RelativityError) -> Self {
        match e {
            RelativityError::Superluminal { ratio } => OpticsError::Superluminal { ratio },
            RelativityError::InvalidDrive(msg) => OpticsError::InvalidDrive(msg),
        }
    }
}

/// Moving-mirror drive valid for any `|v| < c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativisticDrive<T = f64> {
    pub v: T,
    pub c: T,
    pub distance: T,
    /// Half width (rad/s) about the profile center inside which the
    /// dispersion polynomials are trusted; [`kappa_rel`] warns outside it.
    pub validity_half_width: Option<T>,
}

impl<T: Scalar> RelativisticDrive<T> {
    pub fn new(v: T, c: T, distance: T) -> Result<Self, RelativityError> {
        if c <= T::zero() {
            return Err(RelativityError::InvalidDrive("phase velocity c must be positive"));
        }
        if distance < T::zero() {
            return Err(RelativityError::InvalidDrive("distance L must be non-negative"));
        }
        let ratio = v.clone() / c.clone();
        if ratio.abs() >= T::one() {
            return Err(RelativityError::Superluminal { ratio: to_f64(ratio) });
        }
        Ok(Self {
            v,
            c,
            distance,
            validity_half_width: None,
        })
    }

    pub fn with_validity_band(mut self, half_width: T) -> Self {
        self.validity_half_width = Some(half_width);
        self
    }

    pub fn beta(&self) -> T {
        self.v.clone() / self.c.clone()
    }

    /// `(1 + v/c) / (1 - v/c)`.
    pub fn chi(&self) -> T {
        let b = self.beta();
        (T::one() + b.clone()) / (T::one() - b)
    }

    fn check(&self) -> Result<(), RelativityError> {
        let ratio = self.beta();
        if ratio.abs() >= T::one() {
            return Err(RelativityError::Superluminal { ratio: to_f64(ratio) });
        }
        Ok(())
    }
}

fn tau_d_unchecked<T: Scalar>(drive: &RelativisticDrive<T>, delta_t: T) -> T {
    let b = drive.beta();
    let four = two::<T>() * two::<T>();
    -(four * b.clone()) / (T::one() - b.clone() * b) * delta_t
}

fn tau_unchecked<T: Scalar>(drive: &RelativisticDrive<T>) -> T {
    let b2 = drive.beta() * drive.beta();
    two::<T>() * drive.distance.clone() / drive.c.clone() * (T::one() + b2.clone()) / (T::one() - b2)
}

/// `-(4 v/c) / (1 - (v/c)^2) * delta_t`.
pub fn tau_d_rel<T: Scalar>(drive: &RelativisticDrive<T>, delta_t: T) -> Result<T, RelativityError> {
    drive.check()?;
    Ok(tau_d_unchecked(drive, delta_t))
}

/// `(2 L / c) (1 + (v/c)^2) / (1 - (v/c)^2)`.
pub fn tau_rel<T: Scalar>(drive: &RelativisticDrive<T>) -> Result<T, RelativityError> {
    drive.check()?;
    Ok(tau_unchecked(drive))
}

fn kappa_unchecked<T: Real>(profile: &DispersionProfile<T>, chi: T, omega: T) -> (Complex<T>, Complex<T>) {
    let down = omega / chi - profile.center;
    let up = omega * chi - profile.center;
    let diag = profile.diag_to.eval(down) + profile.diag_from.eval(up);
    let anti = profile.anti_to.eval(up) + profile.anti_from.eval(down);
    (diag, anti)
}

/// Composite `(kappa_diag, kappa_anti)` with Doppler-scaled arguments.
pub fn kappa_rel<T: Real>(
    profile: &DispersionProfile<T>,
    drive: &RelativisticDrive<T>,
    omega: T,
) -> Result<(Complex<T>, Complex<T>), RelativityError> {
    drive.check()?;
    let chi = drive.chi();
    if let Some(band) = drive.validity_half_width {
        for scaled in [omega / chi, omega * chi] {
            if (scaled - profile.center).abs() > band {
                warn!(
                    "scaled frequency {:e} lies outside the dispersion validity band {:e} +/- {:e}",
                    to_f64(scaled),
                    to_f64(profile.center),
                    to_f64(band)
                );
            }
        }
    }
    Ok(kappa_unchecked(profile, chi, omega))
}

impl<T: Real> Propagation<T> for RelativisticDrive<T> {
    fn tau_d(&self, offset: T) -> T {
        tau_d_unchecked(self, offset)
    }

    fn roundtrip_delay(&self) -> T {
        tau_unchecked(self)
    }

    fn branch_dispersion(&self, profile: &DispersionProfile<T>, omega: T) -> (Complex<T>, Complex<T>) {
        kappa_unchecked(profile, self.chi(), omega)
    }
}

/// Relative size of the `tau_D` correction, `(v/c)^2 / (1 - (v/c)^2)`.
pub fn tau_d_correction<T: Scalar>(drive: &RelativisticDrive<T>) -> T {
    let b2 = drive.beta() * drive.beta();
    b2.clone() / (T::one() - b2)
}

/// Relativistic drive matching a first-order one.
impl<T: Real> From<crate::optics::DelayDrive<T>> for RelativisticDrive<T> {
    fn from(d: crate::optics::DelayDrive<T>) -> Self {
        Self {
            v: d.v,
            c: d.c,
            distance: d.distance,
            validity_half_width: None,
        }
    }
}
