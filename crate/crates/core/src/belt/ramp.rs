//! Periodic ramps that keep the deposited amounts bounded.
//!
//! Instead of ramping forever, both parties either restart their ramp every
//! `period` of local time (sawtooth) or reverse its direction (triangle). On
//! any stretch where all three contributions sit on the same linear piece of
//! the ramp, the level at `D` equals `slope * (t0_b - t0_a)`.

use log::warn;

use crate::scalar::{to_f64, two, Scalar};

use super::{gate, BeltError, BeltScenario, ClockPair, Stations};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampMode {
    /// Sawtooth: the ramp drops back to zero at every period boundary.
    Restart,
    /// Triangle: the ramp slope alternates between `+s` and `-s`.
    Reverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicRamp<T = f64> {
    pub period: T,
    pub s: T,
    pub mode: RampMode,
}

/// Interval of external time on which the level at `D` is flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauWindow<T> {
    pub start: T,
    pub end: T,
    /// Ramp slope on this piece (`+s` or `-s`).
    pub slope: T,
}

impl<T: Scalar> PlateauWindow<T> {
    /// Offset implied by a level read on this plateau.
    pub fn offset_from_level(&self, level: &T) -> T {
        level.clone() / self.slope.clone()
    }
}

impl<T: Scalar> PeriodicRamp<T> {
    pub fn new(period: T, s: T, mode: RampMode) -> Result<Self, BeltError> {
        if period <= T::zero() {
            return Err(BeltError::InvalidPeriod);
        }
        if s <= T::zero() {
            return Err(BeltError::InvalidScenario("s must be positive"));
        }
        Ok(Self { period, s, mode })
    }

    /// Warns when the period is not long compared with the roundtrip and the
    /// clock offset; returns whether the schedule is comfortably sized.
    pub fn check_against(&self, scenario: &BeltScenario<T>, clocks: &ClockPair<T>) -> bool {
        let ten = T::from_u8(10).expect("small integer");
        let roundtrip = scenario.output_position();
        let offset = clocks.offset().abs();
        let ok = self.period >= ten.clone() * roundtrip.clone() && self.period >= ten * offset.clone();
        if !ok {
            warn!(
                "ramp period {} is not much longer than the roundtrip {} and offset {}",
                to_f64(self.period.clone()),
                to_f64(roundtrip),
                to_f64(offset)
            );
        }
        ok
    }

    /// Index of the ramp piece containing local time `tau` (`tau >= 0`).
    pub fn piece_index(&self, tau: &T) -> i64 {
        let guess = (to_f64(tau.clone()) / to_f64(self.period.clone())).floor();
        let mut k = if guess.is_finite() { guess as i64 } else { 0 };
        // The float guess can be off by one; settle it with exact comparisons.
        loop {
            let start = self.period.clone() * T::from_i64(k).expect("piece index");
            if *tau < start {
                k -= 1;
            } else if *tau >= start + self.period.clone() {
                k += 1;
            } else {
                return k;
            }
        }
    }

    /// Amount moved at local time `tau`; zero before the protocol starts.
    pub fn level(&self, tau: &T) -> T {
        if *tau < T::zero() {
            return T::zero();
        }
        let k = self.piece_index(tau);
        let start = self.period.clone() * T::from_i64(k).expect("piece index");
        let phase = tau.clone() - start;
        match self.mode {
            RampMode::Restart => self.s.clone() * phase,
            RampMode::Reverse if k % 2 == 0 => self.s.clone() * phase,
            RampMode::Reverse => self.s.clone() * (self.period.clone() - phase),
        }
    }

    /// Ramp slope at local time `tau` (zero before the start).
    pub fn slope(&self, tau: &T) -> T {
        if *tau < T::zero() {
            return T::zero();
        }
        match self.mode {
            RampMode::Restart => self.s.clone(),
            RampMode::Reverse if self.piece_index(tau) % 2 == 0 => self.s.clone(),
            RampMode::Reverse => -self.s.clone(),
        }
    }

    fn slope_of_piece(&self, k: i64) -> T {
        match self.mode {
            RampMode::Reverse if k % 2 != 0 => -self.s.clone(),
            _ => self.s.clone(),
        }
    }
}

/// Level at `D` when both parties follow `ramp` on their own clocks.
///
/// Alice applies half the ramp at `A` and at `A'`; Bob applies `rate_b` times
/// the full ramp at `B`.
pub fn simulate_ramp_q_d<T: Scalar>(
    scenario: &BeltScenario<T>,
    clocks: &ClockPair<T>,
    ramp: &PeriodicRamp<T>,
    t: &T,
) -> Result<T, BeltError> {
    scenario.validate()?;
    clocks.validate()?;
    let half = T::one() / two::<T>();
    let stations = Stations {
        at_a: half.clone(),
        at_b: clocks.rate_b.clone(),
        at_a_prime: half,
        ..Stations::standard(scenario, clocks)
    };
    Ok(stations.level_with(&stations.output(), t, |tau| ramp.level(&gate(tau))))
}

/// Flat stretches of the level at `D` over pieces `0..pieces`.
///
/// A stretch is flat while the three contributions arriving at `D` were
/// emitted on the same ramp piece. Piece `k` spans local times
/// `[k P, (k+1) P)`, which gives the external-time window
/// `[k P + max(T + T' + t0_a, T' + t0_b), (k+1) P + min(t0_a, T' + t0_b))`.
/// This excludes at least one roundtrip after each turnaround, more when the
/// clock offset is large. Empty windows are dropped.
pub fn plateau_windows<T: Scalar>(
    scenario: &BeltScenario<T>,
    clocks: &ClockPair<T>,
    ramp: &PeriodicRamp<T>,
    pieces: usize,
) -> Vec<PlateauWindow<T>> {
    let lead_a = scenario.output_position() + clocks.t0_a.clone();
    let lead_b = scenario.return_transit.clone() + clocks.t0_b.clone();
    let lead = if lead_a >= lead_b { lead_a } else { lead_b };
    let trail_b = scenario.return_transit.clone() + clocks.t0_b.clone();
    let trail = if clocks.t0_a <= trail_b {
        clocks.t0_a.clone()
    } else {
        trail_b
    };
    (0..pieces)
        .filter_map(|k| {
            let k = k as i64;
            let base = ramp.period.clone() * T::from_i64(k).expect("piece index");
            let start = base.clone() + lead.clone();
            let end = base + ramp.period.clone() + trail.clone();
            (start < end).then(|| PlateauWindow {
                start,
                end,
                slope: ramp.slope_of_piece(k),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belt::steady_state_q_d;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn restart_resets_at_period_boundary() {
        let ramp = PeriodicRamp::new(10.0, 2.0, RampMode::Restart).unwrap();
        assert_eq!(ramp.level(&0.0), 0.0);
        assert_eq!(ramp.level(&9.5), 19.0);
        assert_eq!(ramp.level(&10.0), 0.0);
        assert_eq!(ramp.level(&12.0), 4.0);
        assert_eq!(ramp.slope(&15.0), 2.0);
    }

    #[test]
    fn reverse_alternates_slope() {
        let ramp = PeriodicRamp::new(10.0, 2.0, RampMode::Reverse).unwrap();
        assert_eq!(ramp.slope(&5.0), 2.0);
        assert_eq!(ramp.slope(&15.0), -2.0);
        assert_eq!(ramp.slope(&25.0), 2.0);
        assert_eq!(ramp.level(&10.0), 20.0);
        assert_eq!(ramp.level(&15.0), 10.0);
        assert_eq!(ramp.level(&20.0), 0.0);
        // Continuous at the turnaround.
        assert!((ramp.level(&(10.0f64 - 1e-9)) - 20.0f64).abs() < 1e-7);
    }

    #[test]
    fn period_must_be_positive() {
        assert_eq!(
            PeriodicRamp::new(0.0, 1.0, RampMode::Restart),
            Err(BeltError::InvalidPeriod)
        );
        assert_eq!(
            PeriodicRamp::new(-1.0, 1.0, RampMode::Reverse),
            Err(BeltError::InvalidPeriod)
        );
    }

    #[test]
    fn size_check_flags_short_periods() {
        let sc = BeltScenario::new(1.0, 1.0).unwrap();
        let clocks = ClockPair::new(0.0, 0.5);
        assert!(PeriodicRamp::new(100.0, 1.0, RampMode::Restart)
            .unwrap()
            .check_against(&sc, &clocks));
        assert!(!PeriodicRamp::new(3.0, 1.0, RampMode::Restart)
            .unwrap()
            .check_against(&sc, &clocks));
    }

    #[test]
    fn plateaus_read_the_offset() {
        let sc = BeltScenario::new(q(2, 1), q(1, 1)).unwrap();
        let clocks = ClockPair::new(q(1, 2), q(3, 2));
        let steady = steady_state_q_d(&sc, &clocks).unwrap();
        for mode in [RampMode::Restart, RampMode::Reverse] {
            let ramp = PeriodicRamp::new(q(40, 1), q(2, 1), mode).unwrap();
            let windows = plateau_windows(&sc, &clocks, &ramp, 6);
            assert_eq!(windows.len(), 6);
            for w in &windows {
                for frac in [q(1, 10), q(1, 2), q(9, 10)] {
                    let t = w.start.clone() + (w.end.clone() - w.start.clone()) * frac;
                    let level = simulate_ramp_q_d(&sc, &clocks, &ramp, &t).unwrap();
                    assert_eq!(w.offset_from_level(&level), clocks.offset());
                    if w.slope > q(0, 1) {
                        assert_eq!(level, steady);
                    } else {
                        assert_eq!(level, -steady.clone());
                    }
                }
            }
        }
    }

    #[test]
    fn level_departs_from_plateau_inside_turnaround() {
        let sc = BeltScenario::new(1.0, 1.0).unwrap();
        let clocks = ClockPair::new(0.0, 0.5);
        let ramp = PeriodicRamp::new(20.0, 1.0, RampMode::Reverse).unwrap();
        let windows = plateau_windows(&sc, &clocks, &ramp, 2);
        // Just after Alice's first turnaround the belt carries mixed slopes.
        let t = windows[0].end + 0.25;
        assert!(t < windows[1].start);
        let level: f64 = simulate_ramp_q_d(&sc, &clocks, &ramp, &t).unwrap();
        assert!((level - 0.5).abs() > 1e-6 && (level + 0.5).abs() > 1e-6);
    }

    #[test]
    fn piece_index_is_exact_for_rationals() {
        let ramp = PeriodicRamp::new(q(1, 3), q(1, 1), RampMode::Restart).unwrap();
        assert_eq!(ramp.piece_index(&q(1, 3)), 1);
        assert_eq!(ramp.piece_index(&q(2, 3)), 2);
        assert_eq!(ramp.piece_index(&(q(2, 3) - q(1, 1_000_000_000))), 1);
    }
}
