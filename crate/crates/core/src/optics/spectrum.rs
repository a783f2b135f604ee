//! Coherent-state pulse spectra and the frequency grid they are integrated on.

use log::warn;
use num_complex::Complex;

use crate::scalar::{lit, to_f64, Real};

use super::OpticsError;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralShape<T> {
    /// `|alpha|^2` Gaussian with standard deviation `delta_omega`, flat phase.
    Gaussian,
    /// Samples of `|alpha|^2` and `arg alpha` at increasing frequencies;
    /// linearly interpolated, zero outside the table.
    Tabulated {
        omega: Vec<T>,
        power: Vec<T>,
        phase: Vec<T>,
    },
}

/// Spectral amplitude `alpha(omega)` of the input pulse.
///
/// `delta_omega` is the RMS width of `|alpha|^2`; `total_photons` is
/// `J = 2 pi * integral |alpha|^2 d omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpectrum<T = f64> {
    pub omega0: T,
    pub delta_omega: T,
    pub total_photons: T,
    pub shape: SpectralShape<T>,
}

impl<T: Real> PulseSpectrum<T> {
    pub fn gaussian(omega0: T, delta_omega: T, total_photons: T) -> Result<Self, OpticsError> {
        let s = Self {
            omega0,
            delta_omega,
            total_photons,
            shape: SpectralShape::Gaussian,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn tabulated(
        omega0: T,
        delta_omega: T,
        total_photons: T,
        omega: Vec<T>,
        power: Vec<T>,
        phase: Vec<T>,
    ) -> Result<Self, OpticsError> {
        let s = Self {
            omega0,
            delta_omega,
            total_photons,
            shape: SpectralShape::Tabulated { omega, power, phase },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.omega0 > T::zero()) || !self.omega0.is_finite() {
            return Err(OpticsError::InvalidSpectrum("omega0 must be positive"));
        }
        if !(self.delta_omega > T::zero()) || !self.delta_omega.is_finite() {
            return Err(OpticsError::InvalidSpectrum("delta_omega must be positive"));
        }
        if !(self.total_photons >= T::zero()) || !self.total_photons.is_finite() {
            return Err(OpticsError::InvalidSpectrum("total_photons must be non-negative"));
        }
        if let SpectralShape::Tabulated { omega, power, phase } = &self.shape {
            if omega.len() < 2 || omega.len() != power.len() || omega.len() != phase.len() {
                return Err(OpticsError::InvalidSpectrum(
                    "tabulated spectrum needs matching omega/power/phase columns of length >= 2",
                ));
            }
            if omega.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(OpticsError::InvalidSpectrum(
                    "tabulated omega must be strictly increasing",
                ));
            }
            if power.iter().any(|p| !(*p >= T::zero())) {
                return Err(OpticsError::InvalidSpectrum("tabulated power must be non-negative"));
            }
        }
        if self.omega0 < lit::<T>(5.0) * self.delta_omega {
            warn!(
                "omega0 = {:e} is not much larger than delta_omega = {:e}",
                to_f64(self.omega0),
                to_f64(self.delta_omega)
            );
        }
        Ok(())
    }

    /// Unnormalized `|alpha(omega)|^2` and `arg alpha(omega)`.
    fn shape_at(&self, omega: T) -> (T, T) {
        match &self.shape {
            SpectralShape::Gaussian => {
                let x = (omega - self.omega0) / self.delta_omega;
                ((-x * x / lit(2.0)).exp(), T::zero())
            }
            SpectralShape::Tabulated { omega: w, power, phase } => {
                if omega < w[0] || omega > w[w.len() - 1] {
                    return (T::zero(), T::zero());
                }
                let i = w.partition_point(|&x| x <= omega).clamp(1, w.len() - 1);
                let f = (omega - w[i - 1]) / (w[i] - w[i - 1]);
                (
                    power[i - 1] + f * (power[i] - power[i - 1]),
                    phase[i - 1] + f * (phase[i] - phase[i - 1]),
                )
            }
        }
    }

    /// `|alpha(omega)|^2` normalized so that `2 pi * integral = J`
    /// (for tabulated spectra, using the table's own trapezoid integral).
    pub fn power_density(&self, omega: T) -> T {
        self.shape_at(omega).0 * self.total_photons / (T::TAU() * self.shape_integral())
    }

    /// Integral of the unnormalized shape over all frequencies.
    fn shape_integral(&self) -> T {
        match &self.shape {
            SpectralShape::Gaussian => self.delta_omega * T::TAU().sqrt(),
            SpectralShape::Tabulated { omega, power, .. } => omega
                .windows(2)
                .zip(power.windows(2))
                .map(|(w, p)| (w[1] - w[0]) * (p[0] + p[1]) / lit(2.0))
                .sum(),
        }
    }
}

/// Grid resolution and extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    /// Half width of the band in units of `delta_omega`.
    pub half_span: f64,
    /// Largest accepted relative mismatch between the grid sum and `J`.
    pub max_normalization_drift: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 1 << 14,
            half_span: 8.0,
            max_normalization_drift: 1e-9,
        }
    }
}

/// Uniform frequency grid with quadrature weights for one spectrum.
///
/// `weights[i] = 2 pi |alpha(omega_i)|^2 h`, rescaled so they sum to `J`
/// exactly; `amplitudes[i]` carries the matching `alpha` with its phase.
#[derive(Debug, Clone)]
pub struct FrequencyGrid<T> {
    pub start: T,
    pub step: T,
    pub omegas: Vec<T>,
    pub weights: Vec<T>,
    pub amplitudes: Vec<Complex<T>>,
    pub total_photons: T,
    /// Relative mismatch between the raw grid sum and `J` before rescaling.
    pub normalization_drift: T,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(spectrum: &PulseSpectrum<T>, spec: GridSpec) -> Result<Self, OpticsError> {
        spectrum.validate()?;
        if spec.points < 16 {
            return Err(OpticsError::InvalidGrid("need at least 16 grid points"));
        }
        if !(spec.half_span > 0.0) {
            return Err(OpticsError::InvalidGrid("half_span must be positive"));
        }
        let n = spec.points;
        let half = lit::<T>(spec.half_span) * spectrum.delta_omega;
        let start = spectrum.omega0 - half;
        let step = (half + half) / T::from_usize(n - 1).expect("grid size");
        let omegas: Vec<T> = (0..n)
            .map(|i| start + step * T::from_usize(i).expect("index"))
            .collect();

        let mut weights = Vec::with_capacity(n);
        let mut phases = Vec::with_capacity(n);
        for &w in &omegas {
            let (_, phase) = spectrum.shape_at(w);
            weights.push(T::TAU() * spectrum.power_density(w) * step);
            phases.push(phase);
        }
        let raw: T = weights.iter().copied().sum();
        let total = spectrum.total_photons;
        let drift = if total > T::zero() {
            ((raw - total) / total).abs()
        } else {
            T::zero()
        };
        let limit = match spectrum.shape {
            SpectralShape::Gaussian => spec.max_normalization_drift,
            // Linear interpolation between table nodes is only second order.
            SpectralShape::Tabulated { .. } => spec.max_normalization_drift.max(1e-6),
        };
        if to_f64(drift) > limit || !raw.is_finite() {
            return Err(OpticsError::NormalizationDrift {
                drift: to_f64(drift),
                suggested_points: n * 2,
                suggested_half_span: spec.half_span.max(8.0) + 2.0,
            });
        }
        if raw > T::zero() {
            let scale = total / raw;
            for w in &mut weights {
                *w = *w * scale;
            }
        }
        let norm = T::TAU() * step;
        let amplitudes = weights
            .iter()
            .zip(&phases)
            .map(|(&w, &ph)| Complex::from_polar((w / norm).sqrt(), ph))
            .collect();
        Ok(Self {
            start,
            step,
            omegas,
            weights,
            amplitudes,
            total_photons: total,
            normalization_drift: drift,
        })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}
