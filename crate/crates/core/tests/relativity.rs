use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use conveyor_core::dispersion::{DispersionProfile, Polynomial};
use conveyor_core::optics::{DelayDrive, FringeModel, PulseSpectrum};
use conveyor_core::relativity::{kappa_rel, tau_d_correction, tau_d_rel, tau_rel, RelativisticDrive};

const C: f64 = 299_792_458.0;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[test]
fn delay_drive_converts_into_the_exact_one() {
    let slow = DelayDrive::new(30.0, C, 10.0).unwrap();
    let fast: RelativisticDrive<f64> = slow.into();
    let spectrum = PulseSpectrum::gaussian(1e14, 1e13, 100.0).unwrap();
    let none = DispersionProfile::none(1e14);
    let a = FringeModel::with_default_grid(&spectrum, &slow, &none).unwrap();
    let b = FringeModel::with_default_grid(&spectrum, &fast, &none).unwrap();
    let rel = (b.fringe_rate() - a.fringe_rate()) / a.fringe_rate();
    let beta = 30.0 / C;
    assert!((rel - beta * beta / (1.0 - beta * beta)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn exact_delay_identity(n in 1i64..999, d in 1000i64..100_000, offset in -1000i64..1000) {
        prop_assume!(offset != 0);
        let beta = q(n, d);
        let c = q(299_792_458, 1);
        let drive = RelativisticDrive::new(&beta * &c, c.clone(), q(5, 1)).unwrap();
        let rel = tau_d_rel(&drive, q(offset, 7)).unwrap();
        let plain = -q(4, 1) * &beta * q(offset, 7);
        prop_assert_eq!((&rel - &plain) / &plain, tau_d_correction(&drive));
        let round = tau_rel(&drive).unwrap();
        let b2 = &beta * &beta;
        prop_assert_eq!(round, q(10, 1) / &c * (q(1, 1) + &b2) / (q(1, 1) - &b2));
    }

    #[test]
    fn reversing_the_drive_exchanges_the_branches(
        beta in 1e-4f64..0.3,
        omega in 0.9e14f64..1.1e14,
        k in proptest::array::uniform4(proptest::array::uniform3(-1.0f64..1.0)),
    ) {
        let poly = |c: [f64; 3]| Polynomial::real(&[c[0], c[1] * 1e-13, c[2] * 1e-26]);
        let profile = DispersionProfile {
            center: 1e14,
            diag_to: poly(k[0]),
            diag_from: poly(k[1]),
            anti_to: poly(k[2]),
            anti_from: poly(k[3]),
        };
        let swapped = DispersionProfile {
            center: 1e14,
            diag_to: poly(k[2]),
            diag_from: poly(k[3]),
            anti_to: poly(k[0]),
            anti_from: poly(k[1]),
        };
        let fwd = RelativisticDrive::new(beta * C, C, 1.0).unwrap();
        let back = RelativisticDrive::new(-beta * C, C, 1.0).unwrap();
        prop_assert!((fwd.chi() * back.chi() - 1.0).abs() < 1e-12);
        let (d_back, a_back) = kappa_rel(&profile, &back, omega).unwrap();
        let (d_swap, a_swap) = kappa_rel(&swapped, &fwd, omega).unwrap();
        prop_assert!((d_back - a_swap).norm() <= 1e-12 * (1.0 + d_back.norm()));
        prop_assert!((a_back - d_swap).norm() <= 1e-12 * (1.0 + a_back.norm()));
    }
}
