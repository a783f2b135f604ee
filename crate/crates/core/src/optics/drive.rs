//! Moving-delay drive and the propagation model the interferometer sees.

use num_complex::Complex;

use crate::dispersion::DispersionProfile;
use crate::scalar::{lit, Real};

use super::OpticsError;

/// How the returning pulse's two branches are delayed and dispersed.
///
/// Implemented by the non-relativistic [`DelayDrive`] and by
/// [`RelativisticDrive`](crate::relativity::RelativisticDrive).
pub trait Propagation<T: Real>: Sync {
    /// Differential delay `tau_D` for a clock offset `t0_b - t0_a`.
    fn tau_d(&self, offset: T) -> T;

    /// Common roundtrip delay `tau`.
    fn roundtrip_delay(&self) -> T;

    /// Composite `(kappa_diag, kappa_anti)` at absolute frequency `omega`.
    fn branch_dispersion(&self, profile: &DispersionProfile<T>, omega: T) -> (Complex<T>, Complex<T>);

    /// `kappa_anti(omega) - kappa_diag(omega)`.
    fn dispersion_difference(&self, profile: &DispersionProfile<T>, omega: T) -> Complex<T> {
        let (diag, anti) = self.branch_dispersion(profile, omega);
        anti - diag
    }

    /// Residual coincidence phase at detuning `x` about `omega0`:
    /// `[k_d(w0+x) + k_a(w0-x)] - [k_d(w0-x) + k_a(w0+x)]`.
    fn quantum_residual(&self, profile: &DispersionProfile<T>, omega0: T, x: T) -> Complex<T> {
        let (d_plus, a_plus) = self.branch_dispersion(profile, omega0 + x);
        let (d_minus, a_minus) = self.branch_dispersion(profile, omega0 - x);
        (d_plus + a_minus) - (d_minus + a_plus)
    }

    /// Fringe angular frequency in offset space, `2 |d tau_D / d offset| omega0`.
    fn fringe_rate(&self, omega0: T) -> T {
        lit::<T>(2.0) * self.tau_d(T::one()).abs() * omega0
    }
}

/// Moving-mirror delay in the `v << c` limit.
///
/// `beta = -4 v / c`, so `tau_D = beta * (t0_b - t0_a)`; the common delay is
/// `tau = 2 L / c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDrive<T = f64> {
    pub v: T,
    pub c: T,
    pub distance: T,
}

/// Largest `v / c` accepted by the first-order drive.
pub const MAX_NONRELATIVISTIC_RATIO: f64 = 0.01;

impl<T: Real> DelayDrive<T> {
    pub fn new(v: T, c: T, distance: T) -> Result<Self, OpticsError> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(OpticsError::InvalidDrive(
                "phase velocity c must be positive and finite",
            ));
        }
        if !(v > T::zero()) || !v.is_finite() {
            return Err(OpticsError::InvalidDrive("mirror speed v must be positive and finite"));
        }
        if !(distance >= T::zero()) || !distance.is_finite() {
            return Err(OpticsError::InvalidDrive("distance L must be non-negative and finite"));
        }
        let ratio = v / c;
        if ratio > lit(MAX_NONRELATIVISTIC_RATIO) {
            return Err(OpticsError::TooFast {
                ratio: crate::scalar::to_f64(ratio),
            });
        }
        Ok(Self { v, c, distance })
    }

    /// Drive whose fringe rate `8 v omega0 / c` equals `rate`.
    pub fn from_fringe_rate(rate: T, omega0: T, c: T, distance: T) -> Result<Self, OpticsError> {
        Self::new(rate * c / (lit::<T>(8.0) * omega0), c, distance)
    }

    pub fn beta(&self) -> T {
        -lit::<T>(4.0) * self.v / self.c
    }

    pub fn tau(&self) -> T {
        lit::<T>(2.0) * self.distance / self.c
    }
}

impl<T: Real> Propagation<T> for DelayDrive<T> {
    fn tau_d(&self, offset: T) -> T {
        -lit::<T>(4.0) * self.v * offset / self.c
    }

    fn roundtrip_delay(&self) -> T {
        self.tau()
    }

    fn branch_dispersion(&self, profile: &DispersionProfile<T>, omega: T) -> (Complex<T>, Complex<T>) {
        let x = omega - profile.center;
        (profile.diag().eval(x), profile.anti().eval(x))
    }

    fn dispersion_difference(&self, profile: &DispersionProfile<T>, omega: T) -> Complex<T> {
        profile.difference().eval(omega - profile.center)
    }

    fn quantum_residual(&self, profile: &DispersionProfile<T>, omega0: T, x: T) -> Complex<T> {
        if omega0 == profile.center {
            profile.quantum_residual_poly().eval(x)
        } else {
            let (d_plus, a_plus) = self.branch_dispersion(profile, omega0 + x);
            let (d_minus, a_minus) = self.branch_dispersion(profile, omega0 - x);
            (d_plus + a_minus) - (d_minus + a_plus)
        }
    }
}

/// Differential delay for the first-order drive; errors above `v/c = 0.01`.
pub fn tau_d<T: Real>(drive: &DelayDrive<T>, offset: T) -> Result<T, OpticsError> {
    let ratio = drive.v / drive.c;
    if ratio > lit(MAX_NONRELATIVISTIC_RATIO) {
        return Err(OpticsError::TooFast {
            ratio: crate::scalar::to_f64(ratio),
        });
    }
    Ok(drive.tau_d(offset))
}
