//! Abstract conveyor-belt protocol.
//!
//! Alice adds a signal quantity at two stations `A` and `A'`, Bob removes
//! twice as much at `B` in between. Each party's contribution is proportional
//! to the reading of its own clock, so the level that arrives at the output
//! point `D` (just after `A'`) settles to `s * (t0_b - t0_a)` once every
//! contribution is in flight.
//!
//! Positions along the belt are measured in transit time: `A` sits at 0, `B`
//! at `T` and `A'` at `T + T'`. Everything here is plain field arithmetic, so
//! the same code runs over `f64` and over exact rationals.

mod feedback;
mod ramp;

pub use feedback::{FeedbackOutcome, RateFeedback, WindowOutcome};
pub use ramp::{plateau_windows, simulate_ramp_q_d, PeriodicRamp, PlateauWindow, RampMode};

use thiserror::Error;

use crate::scalar::{to_f64, two, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeltError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("invalid clock pair: {0}")]
    InvalidClocks(&'static str),
    #[error("steady-state readout needs equal clock rates (rate_b = {rate_b}); use rate_mismatch_q_d")]
    RateMismatch { rate_b: f64 },
    #[error("steady-state readout needs T' = T (T = {transit}, T' = {return_transit}); use differential_q_d")]
    AsymmetricTransit { transit: f64, return_transit: f64 },
    #[error("time {t} is negative")]
    NegativeTime { t: f64 },
    #[error("sample at t = {t} lies inside the transient (ends at {transient_end})")]
    InsideTransient { t: f64, transient_end: f64 },
    #[error("need at least two distinct sample times, got {0}")]
    TooFewSamples(usize),
    #[error("rate feedback did not converge after {iterations} iterations (last slope {last_slope:e})")]
    NotConverged { iterations: usize, last_slope: f64 },
    #[error("ramp period must be positive")]
    InvalidPeriod,
}

/// Clock offsets of Alice and Bob against a common external time.
///
/// `rate_b` is Bob's proportionality constant relative to Alice's (`s'/s`);
/// `drift_b` is a slow linear drift of that ratio per second of external time.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockPair<T = f64> {
    pub t0_a: T,
    pub t0_b: T,
    pub rate_b: T,
    pub drift_b: T,
}

impl<T: Scalar> ClockPair<T> {
    /// Perfect clocks with the given start offsets.
    pub fn new(t0_a: T, t0_b: T) -> Self {
        Self {
            t0_a,
            t0_b,
            rate_b: T::one(),
            drift_b: T::zero(),
        }
    }

    pub fn with_rate(mut self, rate_b: T) -> Result<Self, BeltError> {
        if rate_b <= T::zero() {
            return Err(BeltError::InvalidClocks("rate_b must be positive"));
        }
        self.rate_b = rate_b;
        Ok(self)
    }

    pub fn with_drift(mut self, drift_b: T) -> Self {
        self.drift_b = drift_b;
        self
    }

    /// The quantity every protocol variant estimates.
    pub fn offset(&self) -> T {
        self.t0_b.clone() - self.t0_a.clone()
    }

    pub fn is_perfect(&self) -> bool {
        self.rate_b == T::one() && self.drift_b.is_zero()
    }

    /// Same clocks with the roles of Alice and Bob exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            t0_a: self.t0_b.clone(),
            t0_b: self.t0_a.clone(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), BeltError> {
        if self.rate_b <= T::zero() {
            return Err(BeltError::InvalidClocks("rate_b must be positive"));
        }
        Ok(())
    }
}

/// Belt parameters: sand-rate constant `s`, transit times `T` (A to B) and
/// `T'` (B to A'), and optionally the belt speed for distance reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltScenario<T = f64> {
    pub s: T,
    pub transit: T,
    pub return_transit: T,
    pub belt_speed: Option<T>,
}

impl<T: Scalar> BeltScenario<T> {
    pub fn new(s: T, transit: T) -> Result<Self, BeltError> {
        let scenario = Self {
            s,
            return_transit: transit.clone(),
            transit,
            belt_speed: None,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn with_return_transit(mut self, return_transit: T) -> Result<Self, BeltError> {
        self.return_transit = return_transit;
        self.validate()?;
        Ok(self)
    }

    pub fn with_belt_speed(mut self, speed: T) -> Self {
        self.belt_speed = Some(speed);
        self
    }

    pub fn validate(&self) -> Result<(), BeltError> {
        if self.s <= T::zero() {
            return Err(BeltError::InvalidScenario("s must be positive"));
        }
        if self.transit <= T::zero() || self.return_transit <= T::zero() {
            return Err(BeltError::InvalidScenario("transit times must be positive"));
        }
        Ok(())
    }

    /// Belt coordinate of the output point `D`.
    pub fn output_position(&self) -> T {
        self.transit.clone() + self.return_transit.clone()
    }

    /// External time after which every contribution has reached `D`:
    /// `T + T' + max(t0_a, t0_b)`.
    pub fn transient_end(&self, clocks: &ClockPair<T>) -> T {
        let latest = if clocks.t0_a >= clocks.t0_b {
            clocks.t0_a.clone()
        } else {
            clocks.t0_b.clone()
        };
        self.output_position() + latest
    }
}

/// Ramp `tau -> max(tau, 0)`: nothing happens before a party's start time.
pub(crate) fn gate<T: Scalar>(local: T) -> T {
    if local >= T::zero() {
        local
    } else {
        T::zero()
    }
}

/// Weights each party applies to its ramp, plus the geometry and offsets.
///
/// The level carried past belt coordinate `xi` at external time `t` is
///
/// ```text
///   a  * ramp(t - xi - t0_a)            (xi >= 0,      station A)
/// - b  * ramp(t - (xi - T) - t0_b)      (xi >= T,      station B)
/// + a' * ramp(t - (xi - T - T') - t0_a) (xi >= T + T', station A')
/// ```
#[derive(Debug, Clone)]
pub(crate) struct Stations<T> {
    pub at_a: T,
    pub at_b: T,
    pub at_a_prime: T,
    pub transit: T,
    pub return_transit: T,
    pub t0_a: T,
    pub t0_b: T,
}

impl<T: Scalar> Stations<T> {
    pub fn standard(scenario: &BeltScenario<T>, clocks: &ClockPair<T>) -> Self {
        let half = scenario.s.clone() / two::<T>();
        Self {
            at_a: half.clone(),
            at_b: scenario.s.clone() * clocks.rate_b.clone(),
            at_a_prime: half,
            transit: scenario.transit.clone(),
            return_transit: scenario.return_transit.clone(),
            t0_a: clocks.t0_a.clone(),
            t0_b: clocks.t0_b.clone(),
        }
    }

    pub fn level_with<F: Fn(T) -> T>(&self, xi: &T, t: &T, ramp: F) -> T {
        let zero = T::zero();
        let b_pos = self.transit.clone();
        let a_prime_pos = self.transit.clone() + self.return_transit.clone();
        let mut level = zero.clone();
        if *xi >= zero {
            level = level + self.at_a.clone() * ramp(t.clone() - xi.clone() - self.t0_a.clone());
        }
        if *xi >= b_pos {
            let local = t.clone() - (xi.clone() - b_pos) - self.t0_b.clone();
            level = level - self.at_b.clone() * ramp(local);
        }
        if *xi >= a_prime_pos {
            let local = t.clone() - (xi.clone() - a_prime_pos) - self.t0_a.clone();
            level = level + self.at_a_prime.clone() * ramp(local);
        }
        level
    }

    pub fn level(&self, xi: &T, t: &T) -> T {
        self.level_with(xi, t, gate)
    }

    pub fn output(&self) -> T {
        self.transit.clone() + self.return_transit.clone()
    }
}

/// Snapshot of the belt at external time `t`.
#[derive(Debug, Clone)]
pub struct BeltState<T = f64> {
    pub t: T,
    stations: Stations<T>,
}

/// One linear piece of the belt profile; `start_level`/`end_level` are the
/// one-sided limits inside `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltSegment<T> {
    pub start: T,
    pub end: T,
    pub start_level: T,
    pub end_level: T,
}

impl<T: Scalar> BeltState<T> {
    pub fn new(scenario: &BeltScenario<T>, clocks: &ClockPair<T>, t: T) -> Self {
        Self {
            t,
            stations: Stations::standard(scenario, clocks),
        }
    }

    /// Level carried at belt coordinate `xi` (in transit-time units).
    pub fn level_at(&self, xi: &T) -> T {
        self.stations.level(xi, &self.t)
    }

    /// Level at the output point `D`.
    pub fn output_level(&self) -> T {
        self.level_at(&self.stations.output())
    }

    /// Piecewise-linear description over `[0, T + T']`.
    ///
    /// Breaks occur at the stations and wherever a contribution's local time
    /// crosses zero (its start has just reached that point of the belt).
    pub fn segments(&self) -> Vec<BeltSegment<T>> {
        let st = &self.stations;
        let zero = T::zero();
        let end = st.output();
        let b_pos = st.transit.clone();
        let mut cuts = vec![zero.clone(), b_pos.clone(), end.clone()];
        // Local time of each contribution is zero at these coordinates.
        for c in [
            self.t.clone() - st.t0_a.clone(),
            b_pos.clone() + self.t.clone() - st.t0_b.clone(),
        ] {
            if c > zero && c < end {
                cuts.push(c);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("ordered belt coordinates"));
        cuts.dedup();

        let mut segments = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (a, b) = (w[0].clone(), w[1].clone());
            // Evaluate just inside the open interval to take one-sided limits.
            let mid = (a.clone() + b.clone()) / two::<T>();
            let slope_probe = self.level_at(&mid);
            let left = self.limit_from_right(&a, &mid, &slope_probe);
            let right = self.limit_from_left(&b, &mid, &slope_probe);
            segments.push(BeltSegment {
                start: a,
                end: b,
                start_level: left,
                end_level: right,
            });
        }
        segments
    }

    // The profile is affine inside each segment, so one interior sample and the
    // slope between two interior samples determine both one-sided limits.
    fn interior_slope(&self, mid: &T, mid_level: &T, towards: &T) -> T {
        let quarter = (towards.clone() + mid.clone()) / two::<T>();
        let q_level = self.level_at(&quarter);
        (q_level - mid_level.clone()) / (quarter - mid.clone())
    }

    fn limit_from_right(&self, a: &T, mid: &T, mid_level: &T) -> T {
        let slope = self.interior_slope(mid, mid_level, a);
        mid_level.clone() + slope * (a.clone() - mid.clone())
    }

    fn limit_from_left(&self, b: &T, mid: &T, mid_level: &T) -> T {
        let slope = self.interior_slope(mid, mid_level, b);
        mid_level.clone() + slope * (b.clone() - mid.clone())
    }
}

/// Post-transient level at `D` for perfect clocks and a symmetric belt:
/// `s * (t0_b - t0_a)`.
pub fn steady_state_q_d<T: Scalar>(scenario: &BeltScenario<T>, clocks: &ClockPair<T>) -> Result<T, BeltError> {
    scenario.validate()?;
    clocks.validate()?;
    if !clocks.is_perfect() {
        return Err(BeltError::RateMismatch {
            rate_b: to_f64(clocks.rate_b.clone()),
        });
    }
    if scenario.transit != scenario.return_transit {
        return Err(BeltError::AsymmetricTransit {
            transit: to_f64(scenario.transit.clone()),
            return_transit: to_f64(scenario.return_transit.clone()),
        });
    }
    Ok(scenario.s.clone() * clocks.offset())
}

/// Time-resolved level at `D`, transient included.
///
/// Sums Alice's deposit at `A` made at `t - T - T'`, Bob's removal at `B` made
/// at `t - T'` and Alice's deposit at `A'` made at `t`; each term is zero before
/// its party started. Bob's weight is `s * rate_b`.
pub fn simulate_q_d<T: Scalar>(scenario: &BeltScenario<T>, clocks: &ClockPair<T>, t: &T) -> Result<T, BeltError> {
    scenario.validate()?;
    clocks.validate()?;
    if *t < T::zero() {
        return Err(BeltError::NegativeTime { t: to_f64(t.clone()) });
    }
    Ok(BeltState::new(scenario, clocks, t.clone()).output_level())
}

/// Result of the ranging variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RangingReading<T> {
    pub q_d: T,
    /// `-Q_D / s`, the one-way transit time.
    pub transit: T,
    /// `belt_speed * transit` when the belt speed is known.
    pub distance: Option<T>,
}

/// Ranging variant: Alice adds at `A` and removes at `A'`, Bob is idle.
///
/// The steady level is `-s (T + T') / 2`, i.e. `-s T` on a symmetric belt,
/// whatever the clock offsets.
pub fn ranging_q_d<T: Scalar>(
    scenario: &BeltScenario<T>,
    clocks: &ClockPair<T>,
) -> Result<RangingReading<T>, BeltError> {
    scenario.validate()?;
    clocks.validate()?;
    let q_d = -(scenario.s.clone() * scenario.output_position()) / two::<T>();
    Ok(ranging_from_level(scenario, q_d))
}

/// Time-resolved level at `D` for the ranging variant.
pub fn simulate_ranging_q_d<T: Scalar>(
    scenario: &BeltScenario<T>,
    clocks: &ClockPair<T>,
    t: &T,
) -> Result<T, BeltError> {
    scenario.validate()?;
    clocks.validate()?;
    let half = scenario.s.clone() / two::<T>();
    let stations = Stations {
        at_a: half.clone(),
        at_b: T::zero(),
        at_a_prime: -half,
        ..Stations::standard(scenario, clocks)
    };
    Ok(stations.level(&stations.output(), t))
}

/// Converts a measured ranging level into transit time and distance.
pub fn ranging_from_level<T: Scalar>(scenario: &BeltScenario<T>, q_d: T) -> RangingReading<T> {
    let transit = -q_d.clone() / scenario.s.clone();
    let distance = scenario
        .belt_speed
        .as_ref()
        .map(|speed| speed.clone() * transit.clone());
    RangingReading { q_d, transit, distance }
}

/// Readout of the two-belt differential scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialReading<T> {
    pub q_d1: T,
    pub q_d2: T,
    pub sum: T,
}

impl<T: Scalar> DifferentialReading<T> {
    /// Offset recovered from the sum, `(Q_D1 + Q_D2) / (2 s)`.
    pub fn offset(&self, s: &T) -> T {
        self.sum.clone() / (two::<T>() * s.clone())
    }
}

/// Differential scheme with a second belt running from `A'` back to `A`.
///
/// Composing the three arrivals at each output gives
/// `Q_D1 = s (dt + (T' - T) / 2)` and `Q_D2 = s (dt - (T' - T) / 2)`; their
/// sum `2 s dt` does not depend on where Bob sits.
pub fn differential_q_d<T: Scalar>(
    scenario: &BeltScenario<T>,
    clocks: &ClockPair<T>,
) -> Result<DifferentialReading<T>, BeltError> {
    scenario.validate()?;
    clocks.validate()?;
    let s = scenario.s.clone();
    let offset = clocks.offset();
    let skew = (scenario.return_transit.clone() - scenario.transit.clone()) / two::<T>();
    let q_d1 = s.clone() * (offset.clone() + skew.clone());
    let q_d2 = s * (offset - skew);
    let sum = q_d1.clone() + q_d2.clone();
    Ok(DifferentialReading { q_d1, q_d2, sum })
}

/// Time-resolved outputs of both belts of the differential scheme.
pub fn simulate_differential_q_d<T: Scalar>(
    scenario: &BeltScenario<T>,
    clocks: &ClockPair<T>,
    t: &T,
) -> Result<DifferentialReading<T>, BeltError> {
    let q_d1 = simulate_q_d(scenario, clocks, t)?;
    let reversed = BeltScenario {
        transit: scenario.return_transit.clone(),
        return_transit: scenario.transit.clone(),
        ..scenario.clone()
    };
    let q_d2 = simulate_q_d(&reversed, clocks, t)?;
    let sum = q_d1.clone() + q_d2.clone();
    Ok(DifferentialReading { q_d1, q_d2, sum })
}

/// Post-transient level when Bob's constant is `s' = s * rate_b`:
/// `(s - s') (t - T) + s' t0_b - s t0_a`.
pub fn rate_mismatch_q_d<T: Scalar>(scenario: &BeltScenario<T>, clocks: &ClockPair<T>, t: &T) -> Result<T, BeltError> {
    scenario.validate()?;
    clocks.validate()?;
    let s = scenario.s.clone();
    let s_bob = s.clone() * clocks.rate_b.clone();
    Ok(
        (s.clone() - s_bob.clone()) * (t.clone() - scenario.transit.clone()) + s_bob * clocks.t0_b.clone()
            - s * clocks.t0_a.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn steady_state_examples() {
        let sc = BeltScenario::new(2.0, 1.0).unwrap();
        assert_eq!(steady_state_q_d(&sc, &ClockPair::new(3.0, 5.0)).unwrap(), 4.0);
        let sc = BeltScenario::new(1.0, 1.0).unwrap();
        assert_eq!(steady_state_q_d(&sc, &ClockPair::new(7.0, 7.0)).unwrap(), 0.0);
        let sc = BeltScenario::new(q(1, 2), q(1, 1)).unwrap();
        let got = steady_state_q_d(&sc, &ClockPair::new(q(1, 1), q(1, 5))).unwrap();
        assert_eq!(got, q(-2, 5));
    }

    #[test]
    fn steady_state_rejects_unequal_rates_and_asymmetric_belt() {
        let sc = BeltScenario::new(1.0, 1.0).unwrap();
        let clocks = ClockPair::new(0.0, 1.0).with_rate(1.5).unwrap();
        assert!(matches!(
            steady_state_q_d(&sc, &clocks),
            Err(BeltError::RateMismatch { .. })
        ));
        let sc = sc.with_return_transit(2.0).unwrap();
        assert!(matches!(
            steady_state_q_d(&sc, &ClockPair::new(0.0, 1.0)),
            Err(BeltError::AsymmetricTransit { .. })
        ));
    }

    #[test]
    fn invalid_inputs() {
        assert!(BeltScenario::new(0.0, 1.0).is_err());
        assert!(BeltScenario::new(1.0, -1.0).is_err());
        assert!(ClockPair::new(0.0, 0.0).with_rate(0.0).is_err());
        let sc = BeltScenario::new(1.0, 1.0).unwrap();
        assert!(matches!(
            simulate_q_d(&sc, &ClockPair::new(0.0, 0.0), &-1.0),
            Err(BeltError::NegativeTime { .. })
        ));
    }

    #[test]
    fn simulation_reaches_steady_state() {
        let sc = BeltScenario::new(2.0, 1.0).unwrap();
        let clocks = ClockPair::new(3.0, 5.0);
        let t = 2.0 * 1.0 + 5.0 + 1.0;
        assert_eq!(simulate_q_d(&sc, &clocks, &t).unwrap(), 4.0);
        assert_eq!(simulate_q_d(&sc, &clocks, &0.0).unwrap(), 0.0);
    }

    #[test]
    fn transient_with_only_a_prime_active() {
        // Bob starts late and the A deposit has not crossed the belt yet.
        let sc = BeltScenario::new(q(3, 1), q(10, 1)).unwrap();
        let clocks = ClockPair::new(q(1, 1), q(4, 1));
        for t in [q(2, 1), q(7, 2), q(6, 1)] {
            let expected = q(3, 2) * (t.clone() - q(1, 1));
            assert_eq!(simulate_q_d(&sc, &clocks, &t).unwrap(), expected);
        }
    }

    #[test]
    fn belt_profile_is_piecewise_linear_and_ends_at_output() {
        let sc = BeltScenario::new(q(2, 1), q(3, 1)).unwrap();
        let clocks = ClockPair::new(q(1, 1), q(2, 1));
        let state = BeltState::new(&sc, &clocks, q(5, 1));
        let segs = state.segments();
        assert!(segs.len() >= 3);
        for w in segs.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        for seg in &segs {
            // Midpoint of an affine piece is the mean of its end limits.
            let mid = (seg.start.clone() + seg.end.clone()) / q(2, 1);
            let avg = (seg.start_level.clone() + seg.end_level.clone()) / q(2, 1);
            assert_eq!(state.level_at(&mid), avg);
        }
        assert_eq!(segs.last().unwrap().end, q(6, 1));
    }

    #[test]
    fn ranging_examples() {
        let sc = BeltScenario::new(2.0, 1.5).unwrap();
        assert_eq!(ranging_q_d(&sc, &ClockPair::new(0.3, 9.0)).unwrap().q_d, -3.0);
        let sc = BeltScenario::new(4.0, 0.25).unwrap().with_belt_speed(100.0);
        let r = ranging_q_d(&sc, &ClockPair::new(0.0, 0.0)).unwrap();
        assert_eq!(r.q_d, -1.0);
        assert_eq!(r.transit, 0.25);
        assert_eq!(r.distance, Some(25.0));
        // Zero baseline only makes sense as a measured level.
        let zero = ranging_from_level(&BeltScenario::new(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(zero.transit, 0.0);
    }

    #[test]
    fn simulated_ranging_settles_to_minus_s_t() {
        let sc = BeltScenario::new(q(2, 1), q(3, 2)).unwrap();
        let clocks = ClockPair::new(q(1, 3), q(7, 1));
        let t = q(20, 1);
        assert_eq!(simulate_ranging_q_d(&sc, &clocks, &t).unwrap(), q(-3, 1));
    }

    #[test]
    fn differential_examples() {
        let sc = BeltScenario::new(1.0, 1.0).unwrap().with_return_transit(3.0).unwrap();
        let r = differential_q_d(&sc, &ClockPair::new(0.0, 2.0)).unwrap();
        assert_eq!((r.q_d1, r.q_d2, r.sum), (3.0, 1.0, 4.0));
        assert_eq!(r.offset(&1.0), 2.0);
        let sc = BeltScenario::new(q(3, 1), q(2, 1)).unwrap();
        let r = differential_q_d(&sc, &ClockPair::new(q(1, 1), q(2, 1))).unwrap();
        assert_eq!(r.q_d1, q(3, 1));
        assert_eq!(r.q_d2, q(3, 1));
    }

    #[test]
    fn simulated_differential_matches_closed_form() {
        let sc = BeltScenario::new(q(5, 2), q(1, 1))
            .unwrap()
            .with_return_transit(q(4, 1))
            .unwrap();
        let clocks = ClockPair::new(q(2, 1), q(-1, 3));
        let t = q(30, 1);
        assert_eq!(
            simulate_differential_q_d(&sc, &clocks, &t).unwrap(),
            differential_q_d(&sc, &clocks).unwrap()
        );
    }

    #[test]
    fn rate_mismatch_examples() {
        let sc = BeltScenario::new(2.0, 1.0).unwrap();
        let clocks = ClockPair::new(0.0, 1.0).with_rate(1.5).unwrap();
        assert_eq!(rate_mismatch_q_d(&sc, &clocks, &11.0).unwrap(), -7.0);
        // Finite-difference slope equals s - s'.
        let a = rate_mismatch_q_d(&sc, &clocks, &20.0).unwrap();
        let b = rate_mismatch_q_d(&sc, &clocks, &24.0).unwrap();
        assert_eq!((b - a) / 4.0, -1.0);
        // And matches the gated simulation past the transient.
        assert_eq!(simulate_q_d(&sc, &clocks, &11.0).unwrap(), -7.0);
    }

    fn rational() -> impl Strategy<Value = BigRational> {
        (-10_000i64..10_000, 1i64..500).prop_map(|(n, d)| q(n, d))
    }

    fn positive() -> impl Strategy<Value = BigRational> {
        (1i64..10_000, 1i64..500).prop_map(|(n, d)| q(n, d))
    }

    proptest! {
        #[test]
        fn post_transient_simulation_is_exact(s in positive(), t_tr in positive(), a in rational(), b in rational(), extra in positive()) {
            let sc = BeltScenario::new(s, t_tr).unwrap();
            let clocks = ClockPair::new(a, b);
            let t = sc.transient_end(&clocks) + extra;
            prop_assume!(t >= q(0, 1));
            prop_assert_eq!(simulate_q_d(&sc, &clocks, &t).unwrap(), steady_state_q_d(&sc, &clocks).unwrap());
        }

        #[test]
        fn steady_state_is_antisymmetric(s in positive(), t_tr in positive(), a in rational(), b in rational()) {
            let sc = BeltScenario::new(s, t_tr).unwrap();
            let clocks = ClockPair::new(a, b);
            prop_assert_eq!(
                steady_state_q_d(&sc, &clocks).unwrap(),
                -steady_state_q_d(&sc, &clocks.swapped()).unwrap()
            );
        }

        #[test]
        fn ranging_ignores_offsets(s in positive(), t_tr in positive(), a in rational(), b in rational()) {
            let sc = BeltScenario::new(s.clone(), t_tr.clone()).unwrap();
            let r = ranging_q_d(&sc, &ClockPair::new(a, b)).unwrap();
            prop_assert_eq!(r.q_d, -(s * t_tr));
        }

        #[test]
        fn differential_sum_ignores_placement(s in positive(), t1 in positive(), t2 in positive(), a in rational(), b in rational()) {
            let sc = BeltScenario::new(s.clone(), t1.clone()).unwrap().with_return_transit(t2.clone()).unwrap();
            let swapped = BeltScenario::new(s.clone(), t2).unwrap().with_return_transit(t1).unwrap();
            let clocks = ClockPair::new(a, b);
            let r = differential_q_d(&sc, &clocks).unwrap();
            prop_assert_eq!(r.sum.clone(), q(2, 1) * s * clocks.offset());
            prop_assert_eq!(r.sum, differential_q_d(&swapped, &clocks).unwrap().sum);
        }

        #[test]
        fn equal_rates_give_flat_level(s in positive(), t_tr in positive(), a in rational(), b in rational(), t1 in positive(), t2 in positive()) {
            let sc = BeltScenario::new(s, t_tr).unwrap();
            let clocks = ClockPair::new(a, b);
            prop_assert_eq!(
                rate_mismatch_q_d(&sc, &clocks, &t1).unwrap(),
                rate_mismatch_q_d(&sc, &clocks, &t2).unwrap()
            );
        }
    }
}
