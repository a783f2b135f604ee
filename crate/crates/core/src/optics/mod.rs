//! Coherent-state polarization interferometer.
//!
//! A vertically polarized pulse is split into its +45 and -45 degree
//! components. The moving delays shift them by `-tau_D` and `+tau_D`, the
//! medium adds `kappa_diag` and `kappa_anti`, and the horizontal output port
//! sees `alpha (e^{i Phi_diag} - e^{i Phi_anti}) / 2`. An integrating detector
//! there counts
//!
//! ```text
//! J_cross = 2 pi * integral |alpha|^2 / 4 * |e^{i Phi_diag} - e^{i Phi_anti}|^2 d omega
//! ```
//!
//! which only depends on the phase difference
//! `D = Phi_anti - Phi_diag = 2 omega tau_D + kappa_anti - kappa_diag`. The
//! common delay `tau` and any common dispersion drop out, which is the
//! dispersion immunity of the scheme. Everything is evaluated on a uniform
//! frequency grid; the time-resolved flux uses the same grid through an FFT,
//! so its time integral matches the frequency-domain count.

mod drive;
mod spectrum;

pub use drive::{tau_d, DelayDrive, Propagation, MAX_NONRELATIVISTIC_RATIO};
pub use spectrum::{FrequencyGrid, GridSpec, PulseSpectrum, SpectralShape};

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::dispersion::{ConditionCheck, DispersionProfile};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(&'static str),
    #[error("invalid drive: {0}")]
    InvalidDrive(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("v/c = {ratio:e} is outside the first-order regime; use relativity::RelativisticDrive")]
    TooFast { ratio: f64 },
    #[error("v/c = {ratio} must be below 1")]
    Superluminal { ratio: f64 },
    #[error(
        "grid normalization drifted by {drift:e}; try {suggested_points} points over +/-{suggested_half_span} delta_omega"
    )]
    NormalizationDrift {
        drift: f64,
        suggested_points: usize,
        suggested_half_span: f64,
    },
    #[error("phase changes by {max_step:.3} rad between grid points at offset {offset:e}; use at least {suggested_points} points")]
    UnderResolved {
        offset: f64,
        max_step: f64,
        suggested_points: usize,
    },
    #[error("dispersion has gain (negative imaginary part) at omega = {omega:e}")]
    Gain { omega: f64 },
    #[error("offset {0} is not finite")]
    NonFiniteOffset(f64),
}

/// Integrated counts at both output ports for one clock offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeSample<T = f64> {
    pub delta_t: T,
    pub j_cross: T,
    pub j_par: T,
}

/// Largest phase step between neighbouring grid points before the
/// quadrature is considered under-resolved.
const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_2;

/// Block length of the angle-addition evaluation on the common-mode path.
const ROTATION_BLOCK: usize = 64;

/// `(Phi_diag, Phi_anti)` at frequency `omega`.
pub fn branch_phases<T: Real, P: Propagation<T>>(
    drive: &P,
    dispersion: &DispersionProfile<T>,
    offset: T,
    omega: T,
) -> (Complex<T>, Complex<T>) {
    let tau_d = drive.tau_d(offset);
    let tau = drive.roundtrip_delay();
    let (k_diag, k_anti) = drive.branch_dispersion(dispersion, omega);
    let diag = Complex::new(-omega * tau_d + omega * tau, T::zero()) + k_diag;
    let anti = Complex::new(omega * tau_d + omega * tau, T::zero()) + k_anti;
    (diag, anti)
}

/// `|1 - e^{iD}|^2 / 4` and `|1 + e^{iD}|^2 / 4` for `D = 2 half_re + i im`,
/// written without cancellation near `D = 0`.
#[inline]
pub(crate) fn port_factors<T: Real>(half_re: T, im: T) -> (T, T) {
    let s = half_re.sin();
    let s2 = s * s;
    if im.is_zero() {
        return (s2, T::one() - s2);
    }
    let decay = (-im).exp();
    let loss = -(-im).exp_m1();
    let four = lit::<T>(4.0);
    let cross = (loss * loss + four * decay * s2) / four;
    let sum = T::one() + decay;
    let par = (sum * sum - four * decay * s2) / four;
    (cross, par)
}

/// Precomputed interferometer for one spectrum, drive and medium.
#[derive(Debug, Clone)]
pub struct FringeModel<T: Real, P> {
    omega0: T,
    grid: FrequencyGrid<T>,
    drive: P,
    /// `kappa_anti - kappa_diag` on the grid.
    difference: Vec<Complex<T>>,
    kappa_diag: Vec<Complex<T>>,
    /// Grid weights times `exp(-2 Im kappa_diag)`.
    weighted: Vec<T>,
    common_mode: bool,
    lossless: bool,
}

impl<T: Real, P: Propagation<T> + Clone> FringeModel<T, P> {
    pub fn new(
        spectrum: &PulseSpectrum<T>,
        drive: &P,
        dispersion: &DispersionProfile<T>,
        grid: GridSpec,
    ) -> Result<Self, OpticsError> {
        let grid = FrequencyGrid::new(spectrum, grid)?;
        let n = grid.len();
        let mut difference = Vec::with_capacity(n);
        let mut kappa_diag = Vec::with_capacity(n);
        let mut weighted = Vec::with_capacity(n);
        let mut lossless = true;
        for (&omega, &w) in grid.omegas.iter().zip(&grid.weights) {
            let (k_diag, k_anti) = drive.branch_dispersion(dispersion, omega);
            if k_diag.im < T::zero() || k_anti.im < T::zero() {
                return Err(OpticsError::Gain { omega: to_f64(omega) });
            }
            lossless &= k_diag.im.is_zero() && k_anti.im.is_zero();
            difference.push(drive.dispersion_difference(dispersion, omega));
            kappa_diag.push(k_diag);
            weighted.push(w * (-lit::<T>(2.0) * k_diag.im).exp());
        }
        let common_mode = difference.iter().all(|d| d.re.is_zero() && d.im.is_zero());
        Ok(Self {
            omega0: spectrum.omega0,
            grid,
            drive: drive.clone(),
            difference,
            kappa_diag,
            weighted,
            common_mode,
            lossless,
        })
    }

    /// Model on the default grid (2^14 points over `omega0 +/- 8 delta_omega`).
    pub fn with_default_grid(
        spectrum: &PulseSpectrum<T>,
        drive: &P,
        dispersion: &DispersionProfile<T>,
    ) -> Result<Self, OpticsError> {
        Self::new(spectrum, drive, dispersion, GridSpec::default())
    }

    /// Center frequency of the input spectrum.
    pub fn omega0(&self) -> T {
        self.omega0
    }

    /// Fringe angular frequency in offset space.
    pub fn fringe_rate(&self) -> T {
        self.drive.fringe_rate(self.omega0)
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn drive(&self) -> &P {
        &self.drive
    }

    /// Whether both branches see identical dispersion on the whole band.
    pub fn is_common_mode(&self) -> bool {
        self.common_mode
    }

    pub fn is_lossless(&self) -> bool {
        self.lossless
    }

    pub fn total_photons(&self) -> T {
        self.grid.total_photons
    }

    fn check_resolution(&self, offset: T, tau_d: T) -> Result<(), OpticsError> {
        let limit = lit::<T>(MAX_PHASE_STEP);
        let two = lit::<T>(2.0);
        let linear_step = two * self.grid.step * tau_d.abs();
        let max_step = if self.common_mode {
            linear_step
        } else {
            let mut worst = T::zero();
            let mut prev: Option<T> = None;
            for (&omega, d) in self.grid.omegas.iter().zip(&self.difference) {
                let phase = two * omega * tau_d + d.re;
                if let Some(p) = prev {
                    worst = worst.max((phase - p).abs());
                }
                prev = Some(phase);
            }
            worst
        };
        if max_step > limit || !max_step.is_finite() {
            let factor = to_f64(max_step / limit).max(1.0);
            let wanted = (self.grid.len() as f64 * factor).ceil() as usize;
            return Err(OpticsError::UnderResolved {
                offset: to_f64(offset),
                max_step: to_f64(max_step),
                suggested_points: wanted.next_power_of_two(),
            });
        }
        Ok(())
    }

    /// Integrated counts `J_cross`, `J_par` at clock offset `offset`.
    pub fn sample(&self, offset: T) -> Result<FringeSample<T>, OpticsError> {
        if !offset.is_finite() {
            return Err(OpticsError::NonFiniteOffset(to_f64(offset)));
        }
        let tau_d = self.drive.tau_d(offset);
        self.check_resolution(offset, tau_d)?;
        let (j_cross, j_par) = if self.common_mode {
            self.common_mode_sums(tau_d)
        } else {
            self.general_sums(tau_d)
        };
        Ok(FringeSample {
            delta_t: offset,
            j_cross,
            j_par,
        })
    }

    /// Offsets are independent; results come back in input order.
    pub fn scan(&self, offsets: &[T]) -> Result<Vec<FringeSample<T>>, OpticsError> {
        offsets.par_iter().map(|&dt| self.sample(dt)).collect()
    }

    // With no differential dispersion the phase is exactly `omega * tau_D`,
    // linear on the uniform grid. sin/cos are evaluated once per block and
    // propagated inside it by angle addition; both angles share a sign, so
    // the result keeps full relative accuracy near the null.
    fn common_mode_sums(&self, tau_d: T) -> (T, T) {
        let n = self.grid.len();
        let block_step = self.grid.step * tau_d;
        let table: Vec<(T, T)> = (0..ROTATION_BLOCK)
            .map(|j| (block_step * T::from_usize(j).expect("block index")).sin_cos())
            .collect();
        let mut cross = T::zero();
        let mut par = T::zero();
        for m in (0..n).step_by(ROTATION_BLOCK) {
            let (sa, ca) = (self.grid.omegas[m] * tau_d).sin_cos();
            let end = (m + ROTATION_BLOCK).min(n);
            for (&(sb, cb), &w) in table.iter().zip(&self.weighted[m..end]) {
                let s = sa * cb + ca * sb;
                let c = ca * cb - sa * sb;
                cross = cross + w * s * s;
                par = par + w * c * c;
            }
        }
        (cross, par)
    }

    fn general_sums(&self, tau_d: T) -> (T, T) {
        let half = lit::<T>(0.5);
        let mut cross = T::zero();
        let mut par = T::zero();
        for ((&omega, d), &w) in self.grid.omegas.iter().zip(&self.difference).zip(&self.weighted) {
            let (c, p) = port_factors(omega * tau_d + half * d.re, d.im);
            cross = cross + w * c;
            par = par + w * p;
        }
        (cross, par)
    }

    /// Spectral field at the horizontal port, `h alpha (e^{iPhi_d} - e^{iPhi_a}) / 2`
    /// with the common delay factored out.
    fn port_spectrum(&self, tau_d: T) -> Vec<Complex<T>> {
        let half = lit::<T>(0.5);
        let h = self.grid.step;
        self.grid
            .omegas
            .iter()
            .zip(&self.grid.amplitudes)
            .zip(self.kappa_diag.iter().zip(&self.difference))
            .map(|((&omega, &alpha), (&k_diag, d))| {
                let a = lit::<T>(2.0) * omega * tau_d + d.re;
                let s = (half * a).sin();
                // 1 - e^{iD} for D = a + i d.im, without cancellation.
                let e_m1 = (-d.im).exp_m1();
                let re = -(e_m1 * a.cos() - lit::<T>(2.0) * s * s);
                let im = -((-d.im).exp() * a.sin());
                let diff = Complex::new(re, im);
                let branch =
                    Complex::new(T::zero(), -omega * tau_d).exp() * (Complex::new(T::zero(), T::one()) * k_diag).exp();
                alpha * branch * diff * (h * half)
            })
            .collect()
    }

    /// Photon flux at the horizontal port at time `t`.
    pub fn flux(&self, offset: T, t: T) -> Result<T, OpticsError> {
        let tau_d = self.drive.tau_d(offset);
        self.check_resolution(offset, tau_d)?;
        let u = t - self.drive.roundtrip_delay();
        let start = self.grid.start;
        let field: Complex<T> = self
            .port_spectrum(tau_d)
            .iter()
            .zip(&self.grid.omegas)
            .map(|(&f, &omega)| f * Complex::new(T::zero(), -(omega - start) * u).exp())
            .fold(Complex::new(T::zero(), T::zero()), |acc, x| acc + x);
        Ok(field.norm_sqr())
    }

    /// Flux on the FFT time grid, one full alias period centred on `tau`.
    pub fn flux_trace(&self, offset: T) -> Result<FluxTrace<T>, OpticsError> {
        let tau_d = self.drive.tau_d(offset);
        self.check_resolution(offset, tau_d)?;
        let mut buf = self.port_spectrum(tau_d);
        let n = buf.len();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let dt = T::TAU() / (T::from_usize(n).expect("grid size") * self.grid.step);
        let tau = self.drive.roundtrip_delay();
        let half = n / 2;
        let mut times = Vec::with_capacity(n);
        let mut flux = Vec::with_capacity(n);
        // Reorder so time increases: indices above n/2 are negative delays.
        for k in (half..n).chain(0..half) {
            let signed = k as i64 - if k >= half { n as i64 } else { 0 };
            times.push(tau + dt * T::from_i64(signed).expect("time index"));
            flux.push(buf[k].norm_sqr());
        }
        Ok(FluxTrace { times, flux, dt })
    }
}

/// Sampled `I_cross(t)`.
#[derive(Debug, Clone)]
pub struct FluxTrace<T> {
    pub times: Vec<T>,
    pub flux: Vec<T>,
    pub dt: T,
}

impl<T: Real> FluxTrace<T> {
    /// Rectangle-rule time integral (exact discrete Parseval partner of the
    /// frequency-domain count).
    pub fn integral(&self) -> T {
        self.flux.iter().copied().sum::<T>() * self.dt
    }

    pub fn centroid(&self) -> T {
        let total: T = self.flux.iter().copied().sum();
        self.times.iter().zip(&self.flux).map(|(&t, &f)| t * f).sum::<T>() / total
    }

    /// RMS duration of the flux.
    pub fn rms_width(&self) -> T {
        let total: T = self.flux.iter().copied().sum();
        let mean = self.centroid();
        let var = self
            .times
            .iter()
            .zip(&self.flux)
            .map(|(&t, &f)| (t - mean) * (t - mean) * f)
            .sum::<T>()
            / total;
        var.sqrt()
    }
}

/// Photon flux at time `t`, default grid.
pub fn photon_flux<T: Real, P: Propagation<T> + Clone>(
    spectrum: &PulseSpectrum<T>,
    drive: &P,
    dispersion: &DispersionProfile<T>,
    offset: T,
    t: T,
) -> Result<T, OpticsError> {
    FringeModel::with_default_grid(spectrum, drive, dispersion)?.flux(offset, t)
}

/// `J_cross` and `J_par` at one offset, default grid.
pub fn integrated_photon_number<T: Real, P: Propagation<T> + Clone>(
    spectrum: &PulseSpectrum<T>,
    drive: &P,
    dispersion: &DispersionProfile<T>,
    offset: T,
) -> Result<FringeSample<T>, OpticsError> {
    FringeModel::with_default_grid(spectrum, drive, dispersion)?.sample(offset)
}

/// Fringe pattern over a list of offsets, default grid.
pub fn fringe_scan<T: Real, P: Propagation<T> + Clone>(
    spectrum: &PulseSpectrum<T>,
    drive: &P,
    dispersion: &DispersionProfile<T>,
    offsets: &[T],
) -> Result<Vec<FringeSample<T>>, OpticsError> {
    FringeModel::with_default_grid(spectrum, drive, dispersion)?.scan(offsets)
}

/// Classical immunity condition: equal composite dispersion on both branches.
pub fn dispersion_immunity_check<T: Real>(dispersion: &DispersionProfile<T>, tolerance: T) -> ConditionCheck<T> {
    dispersion.immunity_check(tolerance)
}
