use cglp::describing::{
    cglp_response, fore_base_linear, fore_hosidf, fore_sidf, fourier_oracle, loop_harmonics, pseudo_sensitivity,
    sensitivity_harmonics, sensitivity_harmonics_with, CgLpController, PhaseReference, ResetElement,
};
use cglp::freq::{FrequencyResponse, LinearControllerParams, PlantModel};
use proptest::prelude::*;

fn controller(gamma: f64, f_r: f64) -> CgLpController {
    CgLpController {
        gamma,
        f_r_hz: f_r,
        ..CgLpController::reference_design()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_gamma_collapses_to_base_linear(f in 0.1f64..1e4, f_r in 10.0f64..2000.0) {
        let bl = fore_base_linear(f, f_r).unwrap();
        prop_assert!((fore_sidf(f, f_r, 1.0).unwrap() - bl).norm() <= 1e-12 * bl.norm());
        for n in 2..=9 {
            prop_assert_eq!(fore_hosidf(n, f, f_r, 1.0).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn even_harmonics_vanish(f in 0.1f64..1e4, gamma in -1.0f64..1.0, k in 1usize..5) {
        prop_assert_eq!(fore_hosidf(2 * k, f, 300.0, gamma).unwrap().norm(), 0.0);
    }

    #[test]
    fn sensitivities_sum_to_one(f in 1.0f64..5000.0, kappa in 1.0f64..1.6165, gamma in 0.0f64..1.0) {
        let c = controller(gamma, 324.0);
        let (s, t) = sensitivity_harmonics(7, f, kappa, &c, &LinearControllerParams::robust_design(),
                                           &PlantModel::piezo_stage()).unwrap();
        prop_assert!((s.harmonics[0] + t.harmonics[0] - 1.0).norm() < 1e-12);
        for n in 1..7 {
            prop_assert!((s.harmonics[n] + t.harmonics[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_magnitudes_ignore_phase_reference(f in 1.0f64..5000.0, kappa in 1.0f64..1.6165) {
        let (c, lin, m) = (CgLpController::reference_design(), LinearControllerParams::robust_design(),
                           PlantModel::piezo_stage());
        let (a, _) = sensitivity_harmonics_with(5, f, kappa, &c, &lin, &m, PhaseReference::Sidf).unwrap();
        let (b, _) = sensitivity_harmonics_with(5, f, kappa, &c, &lin, &m, PhaseReference::BaseLinear).unwrap();
        for n in 0..5 {
            prop_assert!((a.harmonics[n].norm() - b.harmonics[n].norm()).abs() <= 1e-12 * (1.0 + a.harmonics[n].norm()));
        }
    }

    #[test]
    fn pseudo_sensitivity_bounds(f in 5.0f64..3000.0, kappa in 1.0f64..1.6165) {
        let (c, lin, m) = (CgLpController::reference_design(), LinearControllerParams::robust_design(),
                           PlantModel::piezo_stage());
        let one = pseudo_sensitivity(f, kappa, &c, &lin, &m, 1, 256).unwrap();
        prop_assert!((one.s_inf - one.s1).abs() <= 1e-12 * one.s1);
        prop_assert!((one.t_inf - one.t1).abs() <= 1e-12 * one.t1);
        let p = pseudo_sensitivity(f, kappa, &c, &lin, &m, 9, 512).unwrap();
        let (s, _) = sensitivity_harmonics(9, f, kappa, &c, &lin, &m).unwrap();
        let sum: f64 = s.harmonics.iter().map(|h| h.norm()).sum();
        prop_assert!(p.s_inf <= sum * (1.0 + 1e-12));
    }

    #[test]
    fn loop_scales_with_kappa(f in 1.0f64..5000.0, kappa in 1.0f64..1.6165) {
        let (c, lin, m) = (CgLpController::reference_design(), LinearControllerParams::robust_design(),
                           PlantModel::piezo_stage());
        let a = loop_harmonics(5, f, kappa, &c, &lin, &m).unwrap();
        let b = loop_harmonics(5, f, 1.0, &c, &lin, &m).unwrap();
        for n in 0..5 {
            prop_assert!((a.harmonics[n] - b.harmonics[n] * kappa).norm() <= 1e-12 * (1e-300 + a.harmonics[n].norm()));
        }
    }
}

#[test]
fn sidf_gain_matches_independent_values() {
    // Frozen from an independent evaluation of the closed-form FORE SIDF
    // (Python, complex arithmetic) at f = f_r.
    let v = fore_sidf(324.0, 324.0, 0.3).unwrap();
    assert!((v.norm() - 0.725_48).abs() < 1e-5);
    assert!((v.arg().to_degrees() + 32.08).abs() < 1e-2);
    let v = fore_sidf(3240.0, 324.0, 0.8).unwrap();
    assert!((v.norm() - 0.100_44).abs() < 1e-5);
}

#[test]
fn cglp_harmonics_include_the_lead() {
    let c = CgLpController::reference_design();
    for (n, f) in [(1, 100.0), (3, 250.0), (5, 40.0)] {
        let r = if n == 1 {
            fore_sidf(f, c.f_r_hz, c.gamma).unwrap()
        } else {
            fore_hosidf(n, f, c.f_r_hz, c.gamma).unwrap()
        };
        let expect = r * c.lead().eval(n as f64 * f).unwrap();
        assert!((cglp_response(n, f, &c).unwrap() - expect).norm() < 1e-15);
    }
}

#[test]
fn oracle_matches_on_a_whole_cglp() {
    let c = CgLpController::reference_design();
    let e = ResetElement::Cglp(c);
    for f in [50.0, 324.0, 1500.0] {
        let o = fourier_oracle(&e, f, 5).unwrap();
        for n in [1, 3, 5] {
            let a = e.analytic(n, f).unwrap();
            assert!((o.get(n).unwrap() - a).norm() / a.norm() < 1e-2, "n = {n}, f = {f}");
        }
        assert_eq!(o.reset_events, 2 * o.periods);
    }
}

#[test]
fn rejects_invalid_requests() {
    let (c, lin, m) = (
        CgLpController::reference_design(),
        LinearControllerParams::robust_design(),
        PlantModel::piezo_stage(),
    );
    assert!(fore_sidf(-1.0, 324.0, 0.3).is_err());
    assert!(fore_sidf(10.0, 324.0, 1.5).is_err());
    assert!(loop_harmonics(0, 10.0, 1.0, &c, &lin, &m).is_err());
    assert!(loop_harmonics(3, 10.0, 2.0, &c, &lin, &m).is_err());
    assert!(pseudo_sensitivity(10.0, 1.0, &c, &lin, &m, 0, 64).is_err());
}
