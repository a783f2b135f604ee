//! Frequency-entangled photon pairs and their coincidence dip.
//!
//! Each pair has one photon at `omega0 + x` and its twin at `omega0 - x`.
//! After the moving delays and the medium, the probability that both detectors
//! fire within the coincidence window is
//!
//! ```text
//! P(dt) = integral |phi(x)|^2 sin^2(-tau_D(dt) x + delta(x) / 2) dx
//! ```
//!
//! normalized so that `P -> 1/2` far from the null. Only the odd part of the
//! dispersion difference survives in `delta`, so even-order mismatches between
//! the branches leave the dip untouched.

use log::warn;
use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::dispersion::{ConditionCheck, DispersionProfile};
use crate::optics::{port_factors, Propagation};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiphotonError {
    #[error("invalid biphoton state: {0}")]
    InvalidState(&'static str),
    #[error("spectral density integrates to {integral}, not 1")]
    Unnormalized { integral: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("offset {0} is not finite")]
    NonFiniteOffset(f64),
    #[error("sin^2 argument changes by {max_step:.3} rad between grid points at offset {offset:e}; use at least {suggested_points} points")]
    UnderResolved {
        offset: f64,
        max_step: f64,
        suggested_points: usize,
    },
}

/// Spectral density `|phi(x)|^2` as a function of detuning `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSpectrum<T> {
    /// Gaussian with standard deviation `sigma_q`.
    Gaussian { sigma_q: T },
    /// Linearly interpolated samples, zero outside; must integrate to 1.
    Tabulated { detuning: Vec<T>, density: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonState<T = f64> {
    pub omega0: T,
    pub phi: PairSpectrum<T>,
    /// Coincidence window `T_c` (s).
    pub coincidence_window: T,
}

/// Tolerance on `integral |phi|^2 = 1` for tabulated spectra.
const NORMALIZATION_TOLERANCE: f64 = 1e-6;

impl<T: Real> BiphotonState<T> {
    pub fn gaussian(omega0: T, sigma_q: T, coincidence_window: T) -> Result<Self, BiphotonError> {
        let s = Self {
            omega0,
            phi: PairSpectrum::Gaussian { sigma_q },
            coincidence_window,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn tabulated(
        omega0: T,
        detuning: Vec<T>,
        density: Vec<T>,
        coincidence_window: T,
    ) -> Result<Self, BiphotonError> {
        let s = Self {
            omega0,
            phi: PairSpectrum::Tabulated { detuning, density },
            coincidence_window,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), BiphotonError> {
        if !(self.omega0 > T::zero()) || !self.omega0.is_finite() {
            return Err(BiphotonError::InvalidState("omega0 must be positive"));
        }
        if !(self.coincidence_window > T::zero()) {
            return Err(BiphotonError::InvalidState("coincidence window must be positive"));
        }
        match &self.phi {
            PairSpectrum::Gaussian { sigma_q } => {
                if !(*sigma_q > T::zero()) || !sigma_q.is_finite() {
                    return Err(BiphotonError::InvalidState("sigma_q must be positive"));
                }
            }
            PairSpectrum::Tabulated { detuning, density } => {
                if detuning.len() < 2 || detuning.len() != density.len() {
                    return Err(BiphotonError::InvalidState(
                        "tabulated spectrum needs matching detuning/density columns of length >= 2",
                    ));
                }
                if detuning.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(BiphotonError::InvalidState("detuning must be strictly increasing"));
                }
                if density.iter().any(|d| !(*d >= T::zero())) {
                    return Err(BiphotonError::InvalidState("density must be non-negative"));
                }
                let integral = to_f64(trapezoid(detuning, density));
                if (integral - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(BiphotonError::Unnormalized { integral });
                }
            }
        }
        let width = self.bandwidth();
        if self.coincidence_window * width < lit(100.0) {
            warn!(
                "coincidence window {:e} s is not much longer than 1/bandwidth = {:e} s",
                to_f64(self.coincidence_window),
                to_f64(T::one() / width)
            );
        }
        Ok(())
    }

    /// RMS width of `|phi|^2`.
    pub fn bandwidth(&self) -> T {
        match &self.phi {
            PairSpectrum::Gaussian { sigma_q } => *sigma_q,
            PairSpectrum::Tabulated { detuning, density } => {
                let norm = trapezoid(detuning, density);
                let weighted: Vec<T> = detuning.iter().zip(density).map(|(&x, &d)| x * d).collect();
                let mean = trapezoid(detuning, &weighted) / norm;
                let second: Vec<T> = detuning
                    .iter()
                    .zip(density)
                    .map(|(&x, &d)| (x - mean) * (x - mean) * d)
                    .collect();
                (trapezoid(detuning, &second) / norm).sqrt()
            }
        }
    }

    fn density(&self, x: T) -> T {
        match &self.phi {
            PairSpectrum::Gaussian { sigma_q } => {
                let z = x / *sigma_q;
                (-z * z / lit(2.0)).exp()
            }
            PairSpectrum::Tabulated { detuning, density } => {
                if x < detuning[0] || x > detuning[detuning.len() - 1] {
                    return T::zero();
                }
                let i = detuning.partition_point(|&d| d <= x).clamp(1, detuning.len() - 1);
                let f = (x - detuning[i - 1]) / (detuning[i] - detuning[i - 1]);
                density[i - 1] + f * (density[i] - density[i - 1])
            }
        }
    }

    fn support(&self, half_span: T) -> (T, T) {
        match &self.phi {
            PairSpectrum::Gaussian { sigma_q } => (-half_span * *sigma_q, half_span * *sigma_q),
            PairSpectrum::Tabulated { detuning, .. } => (detuning[0], detuning[detuning.len() - 1]),
        }
    }
}

fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(w, v)| (w[1] - w[0]) * (v[0] + v[1]) / lit(2.0))
        .sum()
}

/// Normalized coincidence probability at one clock offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipSample<T = f64> {
    pub delta_t: T,
    pub p_coinc: T,
}

/// Detuning grid: midpoints of `points` equal cells over the support
/// (`+/- half_span sigma_q` for Gaussians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipGridSpec {
    pub points: usize,
    pub half_span: f64,
}

impl Default for DipGridSpec {
    fn default() -> Self {
        Self {
            points: 1 << 14,
            half_span: 8.0,
        }
    }
}

/// Precomputed dip for one state, drive and medium.
#[derive(Debug, Clone)]
pub struct DipModel<T: Real, P> {
    drive: P,
    bandwidth: T,
    detuning: Vec<T>,
    weights: Vec<T>,
    /// Residual phase `delta(x)`.
    residual: Vec<Complex<T>>,
    step: T,
    cancelled: bool,
}

impl<T: Real, P: Propagation<T> + Clone> DipModel<T, P> {
    pub fn new(
        state: &BiphotonState<T>,
        drive: &P,
        dispersion: &DispersionProfile<T>,
        grid: DipGridSpec,
    ) -> Result<Self, BiphotonError> {
        state.validate()?;
        if grid.points < 16 {
            return Err(BiphotonError::InvalidGrid("need at least 16 grid points"));
        }
        if !(grid.half_span > 0.0) {
            return Err(BiphotonError::InvalidGrid("half_span must be positive"));
        }
        let (lo, hi) = state.support(lit(grid.half_span));
        let n = T::from_usize(grid.points).expect("grid size");
        let step = (hi - lo) / n;
        let half = lit::<T>(0.5);
        let detuning: Vec<T> = (0..grid.points)
            .map(|i| lo + step * (T::from_usize(i).expect("index") + half))
            .collect();
        let mut weights: Vec<T> = detuning.iter().map(|&x| state.density(x)).collect();
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(BiphotonError::InvalidState("spectral density vanishes on the grid"));
        }
        for w in &mut weights {
            *w = *w / total;
        }
        let residual: Vec<Complex<T>> = detuning
            .iter()
            .map(|&x| drive.quantum_residual(dispersion, state.omega0, x))
            .collect();
        let cancelled = residual.iter().all(|d| d.re.is_zero() && d.im.is_zero());
        Ok(Self {
            drive: drive.clone(),
            bandwidth: state.bandwidth(),
            detuning,
            weights,
            residual,
            step,
            cancelled,
        })
    }

    pub fn with_default_grid(
        state: &BiphotonState<T>,
        drive: &P,
        dispersion: &DispersionProfile<T>,
    ) -> Result<Self, BiphotonError> {
        Self::new(state, drive, dispersion, DipGridSpec::default())
    }

    /// RMS width of the pair spectrum.
    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn drive(&self) -> &P {
        &self.drive
    }

    /// Offset at which the Gaussian dip reaches `(1 - e^-2) / 2`,
    /// `1 / (|d tau_D / d offset| bandwidth)`.
    pub fn dip_width(&self) -> T {
        T::one() / (self.drive.tau_d(T::one()).abs() * self.bandwidth)
    }

    /// Whether the residual phase vanishes identically on the grid.
    pub fn is_cancelled(&self) -> bool {
        self.cancelled
    }

    pub fn sample(&self, offset: T) -> Result<DipSample<T>, BiphotonError> {
        if !offset.is_finite() {
            return Err(BiphotonError::NonFiniteOffset(to_f64(offset)));
        }
        let rate = -self.drive.tau_d(offset);
        let max_step = lit::<T>(2.0) * rate.abs() * self.step;
        if max_step > lit(std::f64::consts::FRAC_PI_2) {
            let factor = to_f64(max_step) / std::f64::consts::FRAC_PI_2;
            let wanted = (self.detuning.len() as f64 * factor).ceil() as usize;
            return Err(BiphotonError::UnderResolved {
                offset: to_f64(offset),
                max_step: to_f64(max_step),
                suggested_points: wanted.next_power_of_two(),
            });
        }
        let p = if self.cancelled {
            self.detuning
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| {
                    let s = (rate * x).sin();
                    w * s * s
                })
                .sum()
        } else {
            let half = lit::<T>(0.5);
            self.detuning
                .iter()
                .zip(&self.weights)
                .zip(&self.residual)
                .map(|((&x, &w), d)| w * port_factors(rate * x + half * d.re, d.im).0)
                .sum()
        };
        Ok(DipSample {
            delta_t: offset,
            p_coinc: p,
        })
    }

    /// Offsets are independent; results come back in input order.
    pub fn scan(&self, offsets: &[T]) -> Result<Vec<DipSample<T>>, BiphotonError> {
        offsets.par_iter().map(|&dt| self.sample(dt)).collect()
    }
}

/// Coincidence probability at one offset, default grid.
pub fn coincidence_probability<T: Real, P: Propagation<T> + Clone>(
    state: &BiphotonState<T>,
    drive: &P,
    dispersion: &DispersionProfile<T>,
    delta_t: T,
) -> Result<DipSample<T>, BiphotonError> {
    DipModel::with_default_grid(state, drive, dispersion)?.sample(delta_t)
}

/// Dip over a list of offsets, default grid.
pub fn dip_scan<T: Real, P: Propagation<T> + Clone>(
    state: &BiphotonState<T>,
    drive: &P,
    dispersion: &DispersionProfile<T>,
    offsets: &[T],
) -> Result<Vec<DipSample<T>>, BiphotonError> {
    DipModel::with_default_grid(state, drive, dispersion)?.scan(offsets)
}

/// Relaxed condition: odd-order coefficients of both composites agree.
pub fn quantum_cancellation_check<T: Real>(dispersion: &DispersionProfile<T>, tolerance: T) -> ConditionCheck<T> {
    dispersion.quantum_check(tolerance)
}
