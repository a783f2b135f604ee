//! Multi-pulse null search under shot noise.
//!
//! Alice sends pulses while adding a trial shift `T_k` to her clock, so pulse
//! `k` probes the curve at `offset - T_k` and the null sits at `T_k = offset`.
//! Counts are Poisson (coherent pulses) or binomial (one pair per slot), drawn
//! from a counter-based stream keyed by `(seed, repetition, k)` so repetitions
//! can run in any order.
//!
//! The search is two-stage. Classical: the fringe-contrast envelope (local
//! variance averaged over one fringe period) anchors the fringe phase, the
//! deepest valley on the grid is chosen by its mean count over half a period,
//! and a least-squares sinusoid at the known fringe frequency over one period
//! refines it. Quantum: a moving
//! average over one dip width picks the minimum and a least-squares parabola
//! over the dip core refines it. Fit windows use fractional edge weights so
//! they stay symmetric about the current estimate.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::biphoton::{BiphotonError, BiphotonState, DipModel};
use crate::optics::{DelayDrive, FringeModel, OpticsError, Propagation, PulseSpectrum};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Biphoton(#[from] BiphotonError),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("negative mean {mean} for a count distribution")]
    NegativeMean { mean: f64 },
    #[error("probability {p} outside [0, 1]")]
    InvalidProbability { p: f64 },
    #[error("trial-shift step {step:e} s is too coarse; use at most {required:e} s")]
    GridTooCoarse { step: f64, required: f64 },
    #[error("trial shifts must be uniformly spaced")]
    NonUniformGrid,
    #[error("null near {estimate:e} s is not covered by the trial shifts [{min:e}, {max:e}]; refusing to extrapolate")]
    OutsideGrid { estimate: f64, min: f64, max: f64 },
    #[error("need at least {needed} trial shifts, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("counts show no null (flat or inverted curvature)")]
    NoSignal,
    #[error("snr must be positive, got {0}")]
    InvalidSnr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Classical,
    Quantum,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Classical => "classical",
            Mode::Quantum => "quantum",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classical" => Ok(Mode::Classical),
            "quantum" => Ok(Mode::Quantum),
            other => Err(format!(
                "unknown estimator mode `{other}` (expected classical or quantum)"
            )),
        }
    }
}

/// Trial shifts and pulse budget of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSchedule<T = f64> {
    pub trial_shifts: Vec<T>,
    pub pulses_per_shift: u64,
    pub seed: u64,
}

impl<T: Real> ScanSchedule<T> {
    pub fn new(trial_shifts: Vec<T>, pulses_per_shift: u64, seed: u64) -> Result<Self, EstimatorError> {
        if trial_shifts.len() < 3 {
            return Err(EstimatorError::TooFewPoints {
                needed: 3,
                got: trial_shifts.len(),
            });
        }
        if trial_shifts.iter().any(|t| !t.is_finite()) {
            return Err(EstimatorError::InvalidSchedule("trial shifts must be finite"));
        }
        if trial_shifts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(EstimatorError::InvalidSchedule(
                "trial shifts must be strictly increasing",
            ));
        }
        if pulses_per_shift == 0 {
            return Err(EstimatorError::InvalidSchedule("pulses_per_shift must be at least 1"));
        }
        Ok(Self {
            trial_shifts,
            pulses_per_shift,
            seed,
        })
    }

    /// `points` equally spaced shifts from `min` to `max` inclusive.
    pub fn uniform(min: T, max: T, points: usize, pulses_per_shift: u64, seed: u64) -> Result<Self, EstimatorError> {
        if points < 3 {
            return Err(EstimatorError::TooFewPoints { needed: 3, got: points });
        }
        let step = (max - min) / T::from_usize(points - 1).expect("point count");
        let shifts = (0..points)
            .map(|k| min + step * T::from_usize(k).expect("index"))
            .collect();
        Self::new(shifts, pulses_per_shift, seed)
    }

    pub fn len(&self) -> usize {
        self.trial_shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trial_shifts.is_empty()
    }

    pub fn total_pulses(&self) -> u64 {
        self.pulses_per_shift * self.trial_shifts.len() as u64
    }

    /// Common spacing, or an error if the shifts are not uniform.
    pub fn step(&self) -> Result<T, EstimatorError> {
        let n = self.trial_shifts.len();
        let step = (self.trial_shifts[n - 1] - self.trial_shifts[0]) / T::from_usize(n - 1).expect("count");
        let tol = lit::<T>(1e-6) * step;
        if self.trial_shifts.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > tol) {
            return Err(EstimatorError::NonUniformGrid);
        }
        Ok(step)
    }
}

/// What the estimator needs to know about the curve it is searching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveShape<T> {
    /// Classical fringe with angular frequency `rate` in offset space.
    Fringe { rate: T, photons_per_pulse: T },
    /// Quantum dip reaching `(1 - e^-2) / 2` at `+/- width`.
    Dip { width: T },
}

impl<T: Real> CurveShape<T> {
    pub fn mode(&self) -> Mode {
        match self {
            CurveShape::Fringe { .. } => Mode::Classical,
            CurveShape::Dip { .. } => Mode::Quantum,
        }
    }

    /// Finest spacing the search can resolve without aliasing.
    pub fn max_step(&self) -> T {
        match *self {
            // A quarter of the fringe period, pi c / (16 v omega0).
            CurveShape::Fringe { rate, .. } => T::FRAC_PI_2() / rate,
            CurveShape::Dip { width } => width / lit(8.0),
        }
    }
}

/// Expected detector response per pulse at one effective offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response<T> {
    /// Mean photons at the crossed port, or coincidence probability.
    pub primary: T,
    /// Mean photons at the parallel port (classical only).
    pub complementary: Option<T>,
}

/// Detector curves the estimator can scan.
pub trait NullCurve<T: Real>: Sync {
    fn shape(&self) -> CurveShape<T>;
    fn responses(&self, offsets: &[T]) -> Result<Vec<Response<T>>, EstimatorError>;
    fn accuracy(&self) -> AccuracyModel<T>;
}

impl<T: Real, P: Propagation<T> + Clone> NullCurve<T> for FringeModel<T, P> {
    fn shape(&self) -> CurveShape<T> {
        CurveShape::Fringe {
            rate: self.fringe_rate(),
            photons_per_pulse: self.total_photons(),
        }
    }

    fn responses(&self, offsets: &[T]) -> Result<Vec<Response<T>>, EstimatorError> {
        Ok(self
            .scan(offsets)?
            .into_iter()
            .map(|s| Response {
                primary: s.j_cross,
                complementary: Some(s.j_par),
            })
            .collect())
    }

    fn accuracy(&self) -> AccuracyModel<T> {
        AccuracyModel::Classical {
            v_over_c: self.drive().tau_d(T::one()).abs() / lit(4.0),
            omega0: self.omega0(),
        }
    }
}

impl<T: Real, P: Propagation<T> + Clone> NullCurve<T> for DipModel<T, P> {
    fn shape(&self) -> CurveShape<T> {
        CurveShape::Dip {
            width: self.dip_width(),
        }
    }

    fn responses(&self, offsets: &[T]) -> Result<Vec<Response<T>>, EstimatorError> {
        Ok(self
            .scan(offsets)?
            .into_iter()
            .map(|s| Response {
                primary: s.p_coinc,
                complementary: None,
            })
            .collect())
    }

    fn accuracy(&self) -> AccuracyModel<T> {
        AccuracyModel::Quantum {
            delta_omega: self.bandwidth(),
        }
    }
}

/// Order-of-magnitude accuracy scaling; constants are not meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccuracyModel<T> {
    /// `c / (v omega0 sqrt(snr))`.
    Classical { v_over_c: T, omega0: T },
    /// `1 / (delta_omega sqrt(snr))`.
    Quantum { delta_omega: T },
}

impl<T: Real> AccuracyModel<T> {
    pub fn classical(drive: &DelayDrive<T>, spectrum: &PulseSpectrum<T>) -> Self {
        AccuracyModel::Classical {
            v_over_c: drive.v / drive.c,
            omega0: spectrum.omega0,
        }
    }

    pub fn quantum(state: &BiphotonState<T>) -> Self {
        AccuracyModel::Quantum {
            delta_omega: state.bandwidth(),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            AccuracyModel::Classical { .. } => Mode::Classical,
            AccuracyModel::Quantum { .. } => Mode::Quantum,
        }
    }

    /// Scale without the `1 / sqrt(snr)` factor.
    pub fn scale(&self) -> T {
        match *self {
            AccuracyModel::Classical { v_over_c, omega0 } => T::one() / (v_over_c * omega0),
            AccuracyModel::Quantum { delta_omega } => T::one() / delta_omega,
        }
    }

    pub fn predict(&self, snr: T) -> Result<T, EstimatorError> {
        if !(snr > T::zero()) {
            return Err(EstimatorError::InvalidSnr(to_f64(snr)));
        }
        Ok(self.scale() / snr.sqrt())
    }
}

/// Predicted accuracy (s) at a given SNR.
pub fn accuracy_model<T: Real>(model: &AccuracyModel<T>, snr: T) -> Result<T, EstimatorError> {
    model.predict(snr)
}

/// How SNR is computed, reported alongside the numbers.
pub const SNR_DEFINITION: &str = "snr = N * s^2 / var: N pulses (pairs) in the scan, s the far-offset mean \
per pulse (J/2 photons, or 1/2 coincidence probability), var its shot-noise variance (J/2 Poisson, or 1/4 \
Bernoulli); doubled when the complementary port is used";

/// Power signal-to-noise ratio of a whole scan.
pub fn scan_snr<T: Real>(shape: &CurveShape<T>, total_pulses: u64, use_complementary: bool) -> T {
    let n = T::from_u64(total_pulses).expect("pulse count");
    match *shape {
        CurveShape::Fringe { photons_per_pulse, .. } => {
            let per_port = n * photons_per_pulse / lit(2.0);
            if use_complementary {
                per_port + per_port
            } else {
                per_port
            }
        }
        CurveShape::Dip { .. } => n,
    }
}

fn stream(rep: u32, k: usize, port: u64) -> u64 {
    ((rep as u64) << 33) | ((k as u64 & 0xFFFF_FFFF) << 1) | port
}

fn draw<T: Real>(mean_per_pulse: T, mode: Mode, pulses: u64, seed: u64, stream_id: u64) -> Result<u64, EstimatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    let m = to_f64(mean_per_pulse);
    match mode {
        Mode::Classical => {
            if !(m >= 0.0) {
                return Err(EstimatorError::NegativeMean { mean: m });
            }
            let lambda = m * pulses as f64;
            if lambda == 0.0 {
                return Ok(0);
            }
            let dist = Poisson::new(lambda).map_err(|_| EstimatorError::NegativeMean { mean: m })?;
            Ok(dist.sample(&mut rng) as u64)
        }
        Mode::Quantum => {
            if !(0.0..=1.0 + 1e-9).contains(&m) {
                return Err(EstimatorError::InvalidProbability { p: m });
            }
            let dist = Binomial::new(pulses, m.min(1.0)).map_err(|_| EstimatorError::InvalidProbability { p: m })?;
            Ok(dist.sample(&mut rng))
        }
    }
}

/// Counts at trial shift `k` of repetition `rep`: Poisson with mean
/// `pulses_per_shift * mean_per_pulse` (classical) or
/// Binomial(`pulses_per_shift`, `mean_per_pulse`) (quantum).
pub fn observe_counts<T: Real>(
    mean_per_pulse: T,
    mode: Mode,
    schedule: &ScanSchedule<T>,
    rep: u32,
    k: usize,
) -> Result<u64, EstimatorError> {
    draw(
        mean_per_pulse,
        mode,
        schedule.pulses_per_shift,
        schedule.seed,
        stream(rep, k, 0),
    )
}

/// Counts at the parallel port, from an independent stream.
pub fn observe_complementary<T: Real>(
    mean_per_pulse: T,
    schedule: &ScanSchedule<T>,
    rep: u32,
    k: usize,
) -> Result<u64, EstimatorError> {
    draw(
        mean_per_pulse,
        Mode::Classical,
        schedule.pulses_per_shift,
        schedule.seed,
        stream(rep, k, 1),
    )
}

/// One noisy scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations<T = f64> {
    pub shifts: Vec<T>,
    pub counts: Vec<u64>,
    pub complementary: Option<Vec<u64>>,
}

impl<T: Real> Observations<T> {
    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.complementary.as_ref().map_or(0, |c| c.iter().sum())
    }
}

/// Draws one repetition from precomputed mean responses.
pub fn observe_scan<T: Real>(
    responses: &[Response<T>],
    mode: Mode,
    schedule: &ScanSchedule<T>,
    rep: u32,
    use_complementary: bool,
) -> Result<Observations<T>, EstimatorError> {
    let counts = responses
        .iter()
        .enumerate()
        .map(|(k, r)| observe_counts(r.primary, mode, schedule, rep, k))
        .collect::<Result<Vec<_>, _>>()?;
    let complementary = if use_complementary && mode == Mode::Classical {
        Some(
            responses
                .iter()
                .enumerate()
                .map(|(k, r)| observe_complementary(r.complementary.unwrap_or(T::zero()), schedule, rep, k))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    Ok(Observations {
        shifts: schedule.trial_shifts.clone(),
        counts,
        complementary,
    })
}

/// Noiseless counterpart of [`observe_scan`]: mean counts as observations.
pub fn mean_signal<T: Real>(responses: &[Response<T>], pulses_per_shift: u64, use_complementary: bool) -> Vec<T> {
    let n = T::from_u64(pulses_per_shift).expect("pulses");
    responses
        .iter()
        .map(|r| match (use_complementary, r.complementary) {
            (true, Some(c)) => n * (r.primary - c),
            _ => n * r.primary,
        })
        .collect()
}

/// Locates the null from counts on a uniform shift grid.
pub fn locate_null<T: Real>(obs: &Observations<T>, shape: &CurveShape<T>) -> Result<T, EstimatorError> {
    let signal: Vec<T> = match (&obs.complementary, shape) {
        (Some(par), CurveShape::Fringe { .. }) => obs
            .counts
            .iter()
            .zip(par)
            .map(|(&a, &b)| T::from_u64(a).expect("count") - T::from_u64(b).expect("count"))
            .collect(),
        (Some(_), CurveShape::Dip { .. }) => {
            warn!("complementary counts are ignored for the coincidence dip");
            counts_to_signal(&obs.counts)
        }
        (None, _) => counts_to_signal(&obs.counts),
    };
    locate_null_in(&obs.shifts, &signal, shape)
}

fn counts_to_signal<T: Real>(counts: &[u64]) -> Vec<T> {
    counts.iter().map(|&c| T::from_u64(c).expect("count")).collect()
}

/// Same search on an arbitrary real-valued signal whose null is a minimum.
pub fn locate_null_in<T: Real>(shifts: &[T], signal: &[T], shape: &CurveShape<T>) -> Result<T, EstimatorError> {
    if shifts.len() != signal.len() {
        return Err(EstimatorError::InvalidSchedule("signal and shift lengths differ"));
    }
    let grid = UniformGrid::new(shifts)?;
    let required = shape.max_step();
    if grid.step > required * lit(1.0 + 1e-9) {
        return Err(EstimatorError::GridTooCoarse {
            step: to_f64(grid.step),
            required: to_f64(required),
        });
    }
    match *shape {
        CurveShape::Fringe { rate, .. } => locate_fringe_null(&grid, signal, rate),
        CurveShape::Dip { width } => locate_dip_null(&grid, signal, width),
    }
}

struct UniformGrid<T> {
    start: T,
    step: T,
    len: usize,
}

impl<T: Real> UniformGrid<T> {
    fn new(shifts: &[T]) -> Result<Self, EstimatorError> {
        let n = shifts.len();
        if n < 3 {
            return Err(EstimatorError::TooFewPoints { needed: 3, got: n });
        }
        let step = (shifts[n - 1] - shifts[0]) / T::from_usize(n - 1).expect("count");
        let tol = lit::<T>(1e-6) * step.abs();
        if !(step > T::zero()) || shifts.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > tol) {
            return Err(EstimatorError::NonUniformGrid);
        }
        Ok(Self {
            start: shifts[0],
            step,
            len: n,
        })
    }

    fn at(&self, i: usize) -> T {
        self.start + self.step * T::from_usize(i).expect("index")
    }

    fn end(&self) -> T {
        self.at(self.len - 1)
    }

    fn nearest(&self, t: T) -> usize {
        let x = to_f64((t - self.start) / self.step).round();
        x.clamp(0.0, (self.len - 1) as f64) as usize
    }

    fn outside(&self, estimate: T) -> EstimatorError {
        EstimatorError::OutsideGrid {
            estimate: to_f64(estimate),
            min: to_f64(self.start),
            max: to_f64(self.end()),
        }
    }

    /// Samples whose cells overlap `[center - half, center + half]`, with the
    /// overlap fraction as weight; `None` if the window leaves the grid.
    fn window(&self, center: T, half: T) -> Option<Vec<(usize, T)>> {
        let half_cell = self.step / lit(2.0);
        let lo = center - half;
        let hi = center + half;
        if lo < self.start - half_cell || hi > self.end() + half_cell {
            return None;
        }
        let first = self.nearest(lo);
        let last = self.nearest(hi);
        let mut out = Vec::with_capacity(last - first + 1);
        for i in first..=last {
            let t = self.at(i);
            let a = (t - half_cell).max(lo);
            let b = (t + half_cell).min(hi);
            if b > a {
                out.push((i, (b - a) / self.step));
            }
        }
        Some(out)
    }
}

/// Centered moving average over `m` samples (shrinking at the edges).
fn moving_average<T: Real>(x: &[T], m: usize) -> Vec<T> {
    let n = x.len();
    let half = m / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(T::zero());
    for &v in x {
        let last = *prefix.last().expect("nonempty");
        prefix.push(last + v);
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(n);
            (prefix[b] - prefix[a]) / T::from_usize(b - a).expect("count")
        })
        .collect()
}

/// Weighted least squares for a 3-term basis; returns coefficients.
fn fit3<T: Real>(rows: impl Iterator<Item = ([T; 3], T, T)>) -> Option<[T; 3]> {
    let mut a = [[T::zero(); 3]; 3];
    let mut b = [T::zero(); 3];
    for (basis, y, w) in rows {
        for r in 0..3 {
            b[r] = b[r] + w * basis[r] * y;
            for c in 0..3 {
                a[r][c] = a[r][c] + w * basis[r] * basis[c];
            }
        }
    }
    solve3(a, b)
}

fn solve3<T: Real>(mut a: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].is_zero() || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, &p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                *x = *x - f * p;
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for c in row + 1..3 {
            s = s - a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Valley of `A + B cos(k u) + C sin(k u)` nearest `center`.
fn sinusoid_valley<T: Real>(grid: &UniformGrid<T>, signal: &[T], center: T, half: T, rate: T) -> Option<T> {
    let window = grid.window(center, half)?;
    let coeffs = fit3(window.iter().map(|&(i, w)| {
        let u = rate * (grid.at(i) - center);
        let (s, c) = u.sin_cos();
        ([T::one(), c, s], signal[i], w)
    }))?;
    let (b, c) = (coeffs[1], coeffs[2]);
    if b.is_zero() && c.is_zero() {
        return None;
    }
    Some(center + (-c).atan2(-b) / rate)
}

const REFINEMENT_PASSES: usize = 4;

fn locate_fringe_null<T: Real>(grid: &UniformGrid<T>, signal: &[T], rate: T) -> Result<T, EstimatorError> {
    let period = T::TAU() / rate;
    let m = to_f64(period / grid.step).round().max(1.0) as usize;
    if grid.len < 2 * m {
        return Err(EstimatorError::TooFewPoints {
            needed: 2 * m,
            got: grid.len,
        });
    }
    // Coarse: fringe contrast envelope.
    let n = T::from_usize(signal.len()).expect("count");
    let mean = signal.iter().copied().sum::<T>() / n;
    let power: Vec<T> = signal.iter().map(|&y| (y - mean) * (y - mean)).collect();
    let contrast = moving_average(&power, m);
    let peak = argmax(&contrast);
    let coarse = grid.at(peak);

    // Valley grid from a local phase fit, then the deepest valley nearby.
    let half_period = period / lit(2.0);
    let quarter = period / lit(4.0);
    let phase_center = coarse.max(grid.start + half_period).min(grid.end() - half_period);
    let anchor = sinusoid_valley(grid, signal, phase_center, half_period, rate).ok_or(EstimatorError::NoSignal)?;
    let score = |t: T| -> Option<T> {
        let window = grid.window(t, quarter)?;
        let (sum, weight) = window
            .iter()
            .fold((T::zero(), T::zero()), |(s, wt), &(i, w)| (s + w * signal[i], wt + w));
        Some(sum / weight)
    };
    let first = to_f64(((grid.start - anchor) / period).ceil()) as i64 - 1;
    let last = to_f64(((grid.end() - anchor) / period).floor()) as i64 + 1;
    let mut best: Option<(T, T)> = None;
    for j in first..=last {
        let t = anchor + period * T::from_i64(j).expect("valley index");
        if let Some(v) = score(t) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((t, v));
            }
        }
    }
    let (mut estimate, _) = best.ok_or_else(|| grid.outside(anchor))?;
    // The deepest valley must be bracketed by valleys on both sides.
    if score(estimate - period).is_none() || score(estimate + period).is_none() {
        return Err(grid.outside(estimate));
    }

    // Fine: one-period sinusoid fit, recentred until it settles.
    for _ in 0..REFINEMENT_PASSES {
        estimate = sinusoid_valley(grid, signal, estimate, half_period, rate).ok_or_else(|| grid.outside(estimate))?;
    }
    if grid.window(estimate, half_period).is_none() {
        return Err(grid.outside(estimate));
    }
    Ok(estimate)
}

fn locate_dip_null<T: Real>(grid: &UniformGrid<T>, signal: &[T], width: T) -> Result<T, EstimatorError> {
    let m = to_f64(width / grid.step).round().max(1.0) as usize;
    if grid.len < 2 * m {
        return Err(EstimatorError::TooFewPoints {
            needed: 2 * m,
            got: grid.len,
        });
    }
    let smooth = moving_average(signal, m);
    let coarse = grid.at(argmin(&smooth));
    let half = width / lit(2.0);
    let mut estimate = coarse;
    for _ in 0..REFINEMENT_PASSES {
        let window = grid.window(estimate, half).ok_or_else(|| grid.outside(estimate))?;
        let center = estimate;
        let coeffs = fit3(window.iter().map(|&(i, w)| {
            let u = (grid.at(i) - center) / width;
            ([T::one(), u, u * u], signal[i], w)
        }))
        .ok_or(EstimatorError::NoSignal)?;
        if !(coeffs[2] > T::zero()) {
            return Err(EstimatorError::NoSignal);
        }
        let vertex = -coeffs[1] / (lit::<T>(2.0) * coeffs[2]);
        // A vertex outside the fit window is an extrapolation; step to the
        // window edge and refit instead.
        estimate = center + width * vertex.max(-lit::<T>(0.5)).min(lit(0.5));
    }
    if grid.window(estimate, half).is_none() {
        return Err(grid.outside(estimate));
    }
    Ok(estimate)
}

fn argmax<T: Real>(x: &[T]) -> usize {
    x.iter()
        .enumerate()
        .fold(
            (0, T::neg_infinity()),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        )
        .0
}

fn argmin<T: Real>(x: &[T]) -> usize {
    x.iter()
        .enumerate()
        .fold(
            (0, T::infinity()),
            |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
        )
        .0
}

/// One Monte-Carlo repetition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Repetition<T = f64> {
    pub rep: u32,
    pub estimate: T,
    pub error: T,
    pub counts_total: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport<T = f64> {
    pub mode: Mode,
    /// Mean estimate over repetitions.
    pub estimated_offset: T,
    pub true_offset: T,
    pub rms_error: T,
    /// Mean estimate minus truth.
    pub bias: T,
    pub snr: T,
    pub snr_definition: &'static str,
    pub predicted_accuracy: T,
    /// `rms_error / predicted_accuracy`.
    pub accuracy_ratio: T,
    pub use_complementary: bool,
    pub repetitions: Vec<Repetition<T>>,
}

/// Options of [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExperimentOptions {
    pub repetitions: u32,
    /// Fit `J_cross - J_par` instead of `J_cross` alone (classical only).
    pub use_complementary: bool,
}

/// Monte-Carlo over independent repetitions of the same scan.
pub fn run_experiment<T: Real, C: NullCurve<T>>(
    curve: &C,
    true_offset: T,
    schedule: &ScanSchedule<T>,
    options: ExperimentOptions,
) -> Result<EstimateReport<T>, EstimatorError> {
    if options.repetitions == 0 {
        return Err(EstimatorError::InvalidSchedule("need at least one repetition"));
    }
    let shape = curve.shape();
    let mode = shape.mode();
    let use_complementary = options.use_complementary && mode == Mode::Classical;
    if options.use_complementary && !use_complementary {
        warn!("complementary port requested for the quantum dip; ignored");
    }
    let effective: Vec<T> = schedule.trial_shifts.iter().map(|&s| true_offset - s).collect();
    let responses = curve.responses(&effective)?;

    let repetitions = (0..options.repetitions)
        .into_par_iter()
        .map(|rep| {
            let obs = observe_scan(&responses, mode, schedule, rep, use_complementary)?;
            let estimate = locate_null(&obs, &shape)?;
            Ok(Repetition {
                rep,
                estimate,
                error: estimate - true_offset,
                counts_total: obs.total_counts(),
            })
        })
        .collect::<Result<Vec<_>, EstimatorError>>()?;

    let r = T::from_u32(options.repetitions).expect("repetitions");
    let mean_estimate = repetitions.iter().map(|x| x.estimate).sum::<T>() / r;
    let bias = repetitions.iter().map(|x| x.error).sum::<T>() / r;
    let rms_error = (repetitions.iter().map(|x| x.error * x.error).sum::<T>() / r).sqrt();
    let snr = scan_snr(&shape, schedule.total_pulses(), use_complementary);
    let predicted_accuracy = curve.accuracy().predict(snr)?;
    Ok(EstimateReport {
        mode,
        estimated_offset: mean_estimate,
        true_offset,
        rms_error,
        bias,
        snr,
        snr_definition: SNR_DEFINITION,
        predicted_accuracy,
        accuracy_ratio: rms_error / predicted_accuracy,
        use_complementary,
        repetitions,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::DispersionProfile;

    const C: f64 = 299_792_458.0;

    fn desk_model() -> FringeModel<f64, DelayDrive<f64>> {
        let spectrum = PulseSpectrum::gaussian(1e14, 1e13, 1e4).unwrap();
        let drive = DelayDrive::from_fringe_rate(1e9, 1e14, C, 0.0).unwrap();
        FringeModel::with_default_grid(&spectrum, &drive, &DispersionProfile::none(1e14)).unwrap()
    }

    #[test]
    fn mode_round_trips_through_strings() {
        assert_eq!("classical".parse::<Mode>().unwrap(), Mode::Classical);
        assert_eq!(Mode::Quantum.to_string(), "quantum");
        assert!("both".parse::<Mode>().is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(ScanSchedule::new(vec![0.0, 1.0, 1.0], 1, 0).is_err());
        assert!(ScanSchedule::new(vec![0.0, 1.0, 2.0], 0, 0).is_err());
        assert!(ScanSchedule::new(vec![0.0, 1.0], 1, 0).is_err());
        let s = ScanSchedule::uniform(-1.0, 1.0, 5, 3, 9).unwrap();
        assert_eq!(s.step().unwrap(), 0.5);
        assert_eq!(s.total_pulses(), 15);
        let uneven = ScanSchedule::new(vec![0.0, 1.0, 3.0], 1, 0).unwrap();
        assert!(matches!(uneven.step(), Err(EstimatorError::NonUniformGrid)));
    }

    #[test]
    fn zero_mean_gives_zero_counts() {
        let s = ScanSchedule::uniform(0.0, 1.0, 3, 1000, 4).unwrap();
        for k in 0..50 {
            assert_eq!(observe_counts(0.0, Mode::Classical, &s, 0, k).unwrap(), 0);
            assert_eq!(observe_counts(0.0, Mode::Quantum, &s, 0, k).unwrap(), 0);
        }
        assert!(observe_counts(-1.0, Mode::Classical, &s, 0, 0).is_err());
        assert!(observe_counts(1.5, Mode::Quantum, &s, 0, 0).is_err());
    }

    #[test]
    fn poisson_draws_have_the_right_mean() {
        let s = ScanSchedule::uniform(0.0, 1.0, 3, 1, 11).unwrap();
        let draws: Vec<f64> = (0..1000)
            .map(|k| observe_counts(1e6, Mode::Classical, &s, 0, k).unwrap() as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / 1000.0;
        assert!((mean - 1e6).abs() < 4.0 * (1e6f64 / 1000.0).sqrt());
        let again = observe_counts(1e6, Mode::Classical, &s, 0, 17).unwrap();
        assert_eq!(again as f64, draws[17]);
    }

    #[test]
    fn streams_are_independent_of_order() {
        let s = ScanSchedule::uniform(0.0, 1.0, 3, 100, 5).unwrap();
        let a = observe_counts(3.0, Mode::Classical, &s, 2, 7).unwrap();
        let _ = observe_counts(3.0, Mode::Classical, &s, 9, 1).unwrap();
        assert_eq!(observe_counts(3.0, Mode::Classical, &s, 2, 7).unwrap(), a);
        let c = observe_complementary(3.0, &s, 2, 7).unwrap();
        let others: Vec<u64> = (0..20).map(|k| observe_complementary(3.0, &s, 2, k).unwrap()).collect();
        assert_eq!(others[7], c);
    }

    #[test]
    fn accuracy_model_examples() {
        let classical = AccuracyModel::Classical {
            v_over_c: 1e-6f64,
            omega0: 1e15,
        };
        assert!((accuracy_model(&classical, 100.0).unwrap() - 1e-10).abs() < 1e-24);
        let quantum = AccuracyModel::Quantum { delta_omega: 1e13f64 };
        assert!((accuracy_model(&quantum, 100.0).unwrap() - 1e-14).abs() < 1e-28);
        assert!(accuracy_model(&quantum, 0.0).is_err());
    }

    #[test]
    fn classical_beats_quantum_above_the_crossover() {
        let omega0 = 1e15;
        let dw = 1e13;
        for v_over_c in [1e-3, 5e-3, 2e-2, 0.1] {
            let classical = AccuracyModel::Classical { v_over_c, omega0 }.predict(50.0).unwrap();
            let quantum = AccuracyModel::Quantum { delta_omega: dw }.predict(50.0).unwrap();
            assert_eq!(classical < quantum, v_over_c > dw / omega0);
        }
    }

    #[test]
    fn noiseless_fringe_null_is_recovered() {
        let model = desk_model();
        let shape = model.shape();
        for truth in [0.0, 2.37e-9, -1.234e-8] {
            let schedule = ScanSchedule::uniform(-3e-8, 3e-8, 601, 1, 0).unwrap();
            let offsets: Vec<f64> = schedule.trial_shifts.iter().map(|s| truth - s).collect();
            let responses = model.responses(&offsets).unwrap();
            for comp in [false, true] {
                let signal = mean_signal(&responses, 1, comp);
                let est = locate_null_in(&schedule.trial_shifts, &signal, &shape).unwrap();
                assert!((est - truth).abs() < 1e-12, "truth={truth} comp={comp}: {est}");
            }
        }
    }

    #[test]
    fn noiseless_dip_null_is_recovered() {
        let state = BiphotonState::gaussian(1e14, 1e13, 1e-9).unwrap();
        let drive = DelayDrive::from_fringe_rate(1e9, 1e14, C, 0.0).unwrap();
        let model = DipModel::with_default_grid(&state, &drive, &DispersionProfile::none(1e14)).unwrap();
        let width = model.dip_width();
        let shape = model.shape();
        for truth in [0.0, 0.37 * width, -1.9 * width] {
            let schedule = ScanSchedule::uniform(-4.0 * width, 4.0 * width, 161, 1, 0).unwrap();
            let offsets: Vec<f64> = schedule.trial_shifts.iter().map(|s| truth - s).collect();
            let signal = mean_signal(&model.responses(&offsets).unwrap(), 1, false);
            let est = locate_null_in(&schedule.trial_shifts, &signal, &shape).unwrap();
            assert!((est - truth).abs() < 1e-3 * width);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let model = desk_model();
        let shape = model.shape();
        let shifts: Vec<f64> = (0..100).map(|k| k as f64 * 2e-9).collect();
        let signal = vec![1.0; 100];
        match locate_null_in(&shifts, &signal, &shape) {
            Err(EstimatorError::GridTooCoarse { required, .. }) => {
                let expected = std::f64::consts::PI * C / (16.0 * model.drive().v * 1e14);
                assert!((required - expected).abs() / expected < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn null_outside_the_grid_is_refused() {
        let model = desk_model();
        let schedule = ScanSchedule::uniform(-3e-8, 3e-8, 601, 1, 0).unwrap();
        let truth = 5e-8;
        let offsets: Vec<f64> = schedule.trial_shifts.iter().map(|s| truth - s).collect();
        let signal = mean_signal(&model.responses(&offsets).unwrap(), 1, false);
        assert!(matches!(
            locate_null_in(&schedule.trial_shifts, &signal, &model.shape()),
            Err(EstimatorError::OutsideGrid { .. })
        ));
    }

    #[test]
    fn experiments_are_deterministic_and_unbiased() {
        let model = desk_model();
        let schedule = ScanSchedule::uniform(-1.2e-8, 1.2e-8, 241, 4, 77).unwrap();
        let opts = ExperimentOptions {
            repetitions: 24,
            use_complementary: false,
        };
        let a = run_experiment(&model, 1.1e-9, &schedule, opts).unwrap();
        let b = run_experiment(&model, 1.1e-9, &schedule, opts).unwrap();
        assert_eq!(a, b);
        assert!(a.rms_error > 0.0);
        assert!(a.bias.abs() < 3.0 * a.rms_error / (24f64).sqrt() + 1e-13);
        assert_eq!(a.snr, 241.0 * 4.0 * 1e4 / 2.0);
    }

    #[test]
    fn complementary_port_improves_accuracy() {
        let model = desk_model();
        let schedule = ScanSchedule::uniform(-1.2e-8, 1.2e-8, 241, 1, 3).unwrap();
        let single = run_experiment(
            &model,
            0.0,
            &schedule,
            ExperimentOptions {
                repetitions: 40,
                use_complementary: false,
            },
        )
        .unwrap();
        let both = run_experiment(
            &model,
            0.0,
            &schedule,
            ExperimentOptions {
                repetitions: 40,
                use_complementary: true,
            },
        )
        .unwrap();
        assert_eq!(both.snr, 2.0 * single.snr);
        assert!(both.rms_error < single.rms_error);
    }

    #[test]
    fn shifting_the_grid_and_truth_together_changes_nothing() {
        let model = desk_model();
        let opts = ExperimentOptions {
            repetitions: 10,
            use_complementary: false,
        };
        let base = ScanSchedule::uniform(-1.2e-8, 1.2e-8, 241, 2, 8).unwrap();
        let delta = 2.0f64.powi(-28);
        let moved = ScanSchedule::new(base.trial_shifts.iter().map(|s| s + delta).collect(), 2, 8).unwrap();
        let a = run_experiment(&model, 1e-9, &base, opts).unwrap();
        let b = run_experiment(&model, 1e-9 + delta, &moved, opts).unwrap();
        for (x, y) in a.repetitions.iter().zip(&b.repetitions) {
            assert!((x.error - y.error).abs() < 1e-15);
        }
    }

    #[test]
    fn log_log_slope_of_a_power_law() {
        let x = [1.0, 10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
