//! Rate feedback for clocks that run at different rates.
//!
//! With Bob's constant `s'` differing from Alice's `s_a`, the post-transient
//! level at `D` is affine in time with slope `s_a - s'`. Alice fits that slope
//! by least squares over a window of samples and retunes `s_a` until it
//! vanishes. The level's slope depends on `s_a` with unit coefficient, so for
//! noiseless data one correction lands on the answer.

use crate::scalar::{lit, to_f64, two, Scalar};

use super::{BeltError, BeltScenario, ClockPair, Stations};

/// Feedback loop settings.
#[derive(Debug, Clone)]
pub struct RateFeedback<T = f64> {
    /// Convergence threshold on the fitted slope, as a multiple of `s`.
    pub relative_tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for RateFeedback<T> {
    fn default() -> Self {
        Self {
            relative_tolerance: lit(1e-12),
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackOutcome<T> {
    /// Alice's proportionality constant after convergence (equals `s'`).
    pub alice_rate: T,
    /// Recovered `rate_b = s' / s`.
    pub rate_ratio: T,
    /// Constant term of the first fit, referenced to `t = T`:
    /// `s' t0_b - s t0_a`.
    pub residual_constant: T,
    /// Constant term once the slope is nulled: `s' (t0_b - t0_a)`.
    pub converged_constant: T,
    pub iterations: usize,
    pub final_slope: T,
}

/// Per-window result of drift tracking.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome<T> {
    /// Slope seen at the start of the window, before any correction.
    pub initial_slope: T,
    /// Slope left after the loop settled inside this window.
    pub final_slope: T,
    pub alice_rate: T,
    pub iterations: usize,
}

/// Least-squares line through `(x, y)`; returns `(slope, mean_x, mean_y)`.
pub(crate) fn fit_line<T: Scalar>(xs: &[T], ys: &[T]) -> Option<(T, T, T)> {
    let n = T::from_usize(xs.len())?;
    let mean_x = xs.iter().cloned().fold(T::zero(), |a, b| a + b) / n.clone();
    let mean_y = ys.iter().cloned().fold(T::zero(), |a, b| a + b) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (x, y) in xs.iter().zip(ys) {
        let dx = x.clone() - mean_x.clone();
        sxy = sxy + dx.clone() * (y.clone() - mean_y.clone());
        sxx = sxx + dx.clone() * dx;
    }
    if sxx.is_zero() {
        return None;
    }
    Some((sxy / sxx, mean_x, mean_y))
}

impl<T: Scalar> RateFeedback<T> {
    /// Runs the loop on one window of sample times with Bob's constant fixed
    /// at `s * rate_b`.
    pub fn run(
        &self,
        scenario: &BeltScenario<T>,
        clocks: &ClockPair<T>,
        sample_times: &[T],
    ) -> Result<FeedbackOutcome<T>, BeltError> {
        scenario.validate()?;
        clocks.validate()?;
        check_samples(scenario, clocks, sample_times)?;
        let fixed = ClockPair {
            drift_b: T::zero(),
            ..clocks.clone()
        };
        let tolerance = self.relative_tolerance.clone() * scenario.s.clone();

        let mut alice = scenario.s.clone();
        let mut residual_constant = None;
        for iteration in 0..=self.max_iterations {
            let levels = sample_levels(scenario, &fixed, &alice, sample_times);
            let (slope, mean_t, mean_q) = fit_line(sample_times, &levels).ok_or(BeltError::TooFewSamples(1))?;
            // Constant term referenced to t = T.
            let constant = mean_q + slope.clone() * (scenario.transit.clone() - mean_t);
            if residual_constant.is_none() {
                residual_constant = Some(constant.clone());
            }
            if slope.abs() <= tolerance {
                return Ok(FeedbackOutcome {
                    rate_ratio: alice.clone() / scenario.s.clone(),
                    alice_rate: alice,
                    residual_constant: residual_constant.expect("set on first pass"),
                    converged_constant: constant,
                    iterations: iteration,
                    final_slope: slope,
                });
            }
            if iteration == self.max_iterations {
                return Err(BeltError::NotConverged {
                    iterations: iteration,
                    last_slope: to_f64(slope),
                });
            }
            alice = alice - slope;
        }
        unreachable!("loop returns on its last iteration")
    }

    /// Tracks a slowly drifting Bob over consecutive windows.
    ///
    /// Bob's constant at external time `t` is `s (rate_b + drift_b t)`; Alice
    /// carries her tuned rate from one window into the next.
    pub fn track(
        &self,
        scenario: &BeltScenario<T>,
        clocks: &ClockPair<T>,
        windows: &[Vec<T>],
    ) -> Result<Vec<WindowOutcome<T>>, BeltError> {
        scenario.validate()?;
        clocks.validate()?;
        let tolerance = self.relative_tolerance.clone() * scenario.s.clone();
        let mut alice = scenario.s.clone();
        let mut outcomes = Vec::with_capacity(windows.len());
        for window in windows {
            check_samples(scenario, clocks, window)?;
            let mut initial_slope = None;
            let mut iteration = 0;
            loop {
                let levels = drifting_levels(scenario, clocks, &alice, window);
                let (slope, _, _) = fit_line(window, &levels).ok_or(BeltError::TooFewSamples(1))?;
                if initial_slope.is_none() {
                    initial_slope = Some(slope.clone());
                }
                if slope.abs() <= tolerance {
                    outcomes.push(WindowOutcome {
                        initial_slope: initial_slope.expect("set on first pass"),
                        final_slope: slope,
                        alice_rate: alice.clone(),
                        iterations: iteration,
                    });
                    break;
                }
                if iteration == self.max_iterations {
                    return Err(BeltError::NotConverged {
                        iterations: iteration,
                        last_slope: to_f64(slope),
                    });
                }
                alice = alice - slope;
                iteration += 1;
            }
        }
        Ok(outcomes)
    }
}

fn check_samples<T: Scalar>(scenario: &BeltScenario<T>, clocks: &ClockPair<T>, times: &[T]) -> Result<(), BeltError> {
    let distinct = {
        let mut seen: Vec<&T> = Vec::new();
        for t in times {
            if !seen.contains(&t) {
                seen.push(t);
            }
        }
        seen.len()
    };
    if distinct < 2 {
        return Err(BeltError::TooFewSamples(distinct));
    }
    let end = scenario.transient_end(clocks);
    if let Some(early) = times.iter().find(|t| **t < end) {
        return Err(BeltError::InsideTransient {
            t: to_f64(early.clone()),
            transient_end: to_f64(end),
        });
    }
    Ok(())
}

fn sample_levels<T: Scalar>(scenario: &BeltScenario<T>, clocks: &ClockPair<T>, alice: &T, times: &[T]) -> Vec<T> {
    let mut stations = Stations::standard(scenario, clocks);
    stations.at_a = alice.clone() / two::<T>();
    stations.at_a_prime = stations.at_a.clone();
    let out = stations.output();
    times.iter().map(|t| stations.level(&out, t)).collect()
}

fn drifting_levels<T: Scalar>(scenario: &BeltScenario<T>, clocks: &ClockPair<T>, alice: &T, times: &[T]) -> Vec<T> {
    times
        .iter()
        .map(|t| {
            let mut stations = Stations::standard(scenario, clocks);
            stations.at_a = alice.clone() / two::<T>();
            stations.at_a_prime = stations.at_a.clone();
            stations.at_b = scenario.s.clone() * (clocks.rate_b.clone() + clocks.drift_b.clone() * t.clone());
            stations.level(&stations.output(), t)
        })
        .collect()
}
