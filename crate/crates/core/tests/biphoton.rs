use proptest::prelude::*;

use conveyor_core::biphoton::{dip_scan, BiphotonState, DipModel};
use conveyor_core::dispersion::{DispersionProfile, Polynomial};
use conveyor_core::optics::DelayDrive;

const C: f64 = 299_792_458.0;
const SIGMA: f64 = 1e13;

fn drive() -> DelayDrive<f64> {
    DelayDrive::from_fringe_rate(1e9, 1e14, C, 0.0).unwrap()
}

fn state() -> BiphotonState<f64> {
    BiphotonState::gaussian(1e14, SIGMA, 1e-9).unwrap()
}

#[test]
fn dip_width_is_c_over_4_v_sigma() {
    let d = drive();
    let m = DipModel::with_default_grid(&state(), &d, &DispersionProfile::none(1e14)).unwrap();
    let expected = C / (4.0 * d.v * SIGMA);
    assert!((m.dip_width() - expected).abs() <= 1e-12 * expected);
}

#[test]
fn free_function_agrees_with_model() {
    let none = DispersionProfile::none(1e14);
    let offsets = [-6e-8, 0.0, 2e-8];
    let a = dip_scan(&state(), &drive(), &none, &offsets).unwrap();
    let b = DipModel::with_default_grid(&state(), &drive(), &none)
        .unwrap()
        .scan(&offsets)
        .unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn even_differences_cancel(
        offset in -1.2e-7f64..1.2e-7,
        k0 in -2.0f64..2.0,
        k2 in -3.0f64..3.0,
        k4 in -1.0f64..1.0,
        common in proptest::array::uniform4(-3.0f64..3.0),
    ) {
        let s = SIGMA;
        let shared = Polynomial::real(&[common[0], common[1] / s, common[2] / (s * s), common[3] / s.powi(3)]);
        let profile = DispersionProfile {
            diag_to: Polynomial::real(&[k0, 0.0, k2 / (s * s), 0.0, k4 / s.powi(4)]),
            ..DispersionProfile::none(1e14)
        }
        .with_common(&shared);
        let clean = DipModel::with_default_grid(&state(), &drive(), &DispersionProfile::none(1e14)).unwrap();
        let dispersed = DipModel::with_default_grid(&state(), &drive(), &profile).unwrap();
        prop_assert!(dispersed.is_cancelled());
        let a = clean.sample(offset).unwrap().p_coinc;
        let b = dispersed.sample(offset).unwrap().p_coinc;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn probability_stays_in_the_unit_interval(offset in -2e-7f64..2e-7, k3 in -2.0f64..2.0) {
        let profile = DispersionProfile {
            anti_to: Polynomial::real(&[0.0, 0.0, 0.0, k3 / SIGMA.powi(3)]),
            ..DispersionProfile::none(1e14)
        };
        let p = DipModel::with_default_grid(&state(), &drive(), &profile).unwrap().sample(offset).unwrap().p_coinc;
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
    }
}
