use proptest::prelude::*;

use conveyor_core::dispersion::{DispersionProfile, Polynomial};
use conveyor_core::optics::{fringe_scan, DelayDrive, FringeModel, GridSpec, OpticsError, PulseSpectrum};

const C: f64 = 299_792_458.0;

fn drive() -> DelayDrive<f64> {
    DelayDrive::from_fringe_rate(1e9, 1e14, C, 0.0).unwrap()
}

fn model(dispersion: &DispersionProfile<f64>) -> FringeModel<f64, DelayDrive<f64>> {
    let spectrum = PulseSpectrum::gaussian(1e14, 1e13, 1e4).unwrap();
    FringeModel::with_default_grid(&spectrum, &drive(), dispersion).unwrap()
}

fn real_poly(c: [f64; 5]) -> Polynomial<f64> {
    let d: f64 = 1e13;
    Polynomial::real(&[c[0], c[1] / d, c[2] / d.powi(2), c[3] / d.powi(3), c[4] / d.powi(4)])
}

#[test]
fn free_function_scan_matches_model() {
    let spectrum = PulseSpectrum::gaussian(1e14, 1e13, 1e4).unwrap();
    let none = DispersionProfile::none(1e14);
    let offsets = [-1e-8, 0.0, 2.5e-9];
    let a = fringe_scan(&spectrum, &drive(), &none, &offsets).unwrap();
    let b = model(&none).scan(&offsets).unwrap();
    assert_eq!(a, b);
}

#[test]
fn time_trace_carries_the_port_count() {
    let m = model(&DispersionProfile::none(1e14).with_common(&real_poly([0.0, 0.0, 25.0, 2.0, 0.0])));
    let offset = 3.1e-9;
    let trace = m.flux_trace(offset).unwrap();
    let count = m.sample(offset).unwrap().j_cross;
    assert!((trace.integral() - count).abs() <= 1e-9 * m.total_photons());
}

#[test]
fn coarse_grid_is_reported_with_a_suggestion() {
    let spectrum = PulseSpectrum::gaussian(1e14, 1e13, 1e4).unwrap();
    let grid = GridSpec {
        points: 64,
        ..GridSpec::default()
    };
    let m = FringeModel::new(&spectrum, &drive(), &DispersionProfile::none(1e14), grid).unwrap();
    match m.sample(1e-6) {
        Err(OpticsError::UnderResolved { suggested_points, .. }) => assert!(suggested_points > 64),
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lossless_ports_conserve_photons(
        offset in -6e-8f64..6e-8,
        c in proptest::array::uniform5(-1.0f64..1.0),
        d in proptest::array::uniform5(-1.0f64..1.0),
    ) {
        let damp = |k: [f64; 5]| [k[0], k[1], k[2], 0.3 * k[3], 0.05 * k[4]];
        let profile = DispersionProfile {
            diag_to: real_poly(damp(c)),
            anti_from: real_poly(damp(d)),
            ..DispersionProfile::none(1e14)
        };
        let m = model(&profile);
        let s = m.sample(offset).unwrap();
        prop_assert!(((s.j_cross + s.j_par) - 1e4).abs() <= 1e-9 * 1e4);
        prop_assert!(s.j_cross >= -1e-9 && s.j_par >= -1e-9);
    }

    #[test]
    fn common_real_dispersion_leaves_the_fringe_alone(
        offset in -6e-8f64..6e-8,
        c in proptest::array::uniform5(-30.0f64..30.0),
        back in proptest::array::uniform5(-30.0f64..30.0),
    ) {
        let none = DispersionProfile::none(1e14);
        let common = DispersionProfile::common(1e14, real_poly(c), real_poly(back));
        let a = model(&none).sample(offset).unwrap();
        let b = model(&common).sample(offset).unwrap();
        prop_assert!((a.j_cross - b.j_cross).abs() <= 1e-9 * 1e4);
    }
}
