use cglp::freq::{LinearControllerParams, PlantModel};
use cglp::tuning::{
    average_crossover, tune_cglp, tune_linear, compare_crossovers, CgLpTuneProblem, MarginBounds, Normalization,
    RobustTuneResult, TuneSettings,
};
use proptest::prelude::*;

fn linear() -> (RobustTuneResult, LinearControllerParams) {
    let r = tune_linear(
        &LinearControllerParams::robust_design(),
        &PlantModel::piezo_stage(),
        &MarginBounds::default(),
        &TuneSettings::default(),
    )
    .unwrap();
    let lin = LinearControllerParams::robust_design().with_gain(r.k_p_star);
    (r, lin)
}

fn coarse(n_gamma: usize, n_r: usize, n_f: usize) -> CgLpTuneProblem {
    CgLpTuneProblem {
        refine_points: 0,
        retune: false,
        ..CgLpTuneProblem::with_grid(376.0 / 220.0, n_gamma, n_r, n_f)
    }
}

fn best_fc(problem: &CgLpTuneProblem) -> Option<f64> {
    let (r, lin) = linear();
    let rep = tune_cglp(
        problem,
        &lin,
        &PlantModel::piezo_stage(),
        &MarginBounds::default(),
        &TuneSettings::default(),
        &r,
    )
    .unwrap();
    rep.design.map(|d| d.robust.f_c_nominal_hz)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn finer_grids_never_lose(n_gamma in 2usize..5, n_r in 4usize..9, n_f in 4usize..9) {
        let small = coarse(n_gamma, n_r, n_f);
        let mut big = small.clone();
        let mid = |v: &[f64]| -> Vec<f64> {
            let mut out: Vec<f64> = v.windows(2).map(|w| (w[0] * w[1]).sqrt()).chain(v.iter().copied()).collect();
            out.sort_by(f64::total_cmp);
            out
        };
        big.f_r_grid_hz = mid(&small.f_r_grid_hz);
        big.f_f_grid_hz = mid(&small.f_f_grid_hz);
        if let Some(a) = best_fc(&small) {
            let b = best_fc(&big).expect("a superset keeps the feasible point");
            prop_assert!(b >= a * (1.0 - 1e-12));
        }
    }

    #[test]
    fn average_of_a_constant_is_the_constant(fc in 10.0f64..1000.0, kmax in 1.1f64..4.0) {
        let a = average_crossover(|_| Ok(fc), kmax, Normalization::KappaWidth).unwrap();
        prop_assert!((a / fc - 1.0).abs() < 1e-6);
    }

    #[test]
    fn average_crossover_of_linear_growth(f1 in 10.0f64..500.0, kmax in 1.1f64..4.0) {
        let a = average_crossover(|k| Ok(f1 * k), kmax, Normalization::KappaWidth).unwrap();
        prop_assert!((a / (f1 * (1.0 + kmax) / 2.0) - 1.0).abs() < 1e-6);
        let p = average_crossover(|k| Ok(f1 * k), kmax, Normalization::CrossoverSpan).unwrap();
        prop_assert!((p - (1.0 + kmax) / 2.0).abs() < 1e-6 * kmax);
    }
}

#[test]
fn tuning_is_deterministic() {
    let p = coarse(4, 10, 10);
    let a = best_fc(&p);
    assert!(a.is_some());
    assert_eq!(a, best_fc(&p));
}

#[test]
fn small_grids_are_feasible() {
    for (g, r, f) in [(2, 4, 4), (3, 6, 6), (4, 8, 8)] {
        assert!(best_fc(&coarse(g, r, f)).is_some(), "{g} x {r} x {f}");
    }
}

#[test]
fn default_design_respects_every_constraint() {
    let (r, lin) = linear();
    let m = PlantModel::piezo_stage();
    let rep = tune_cglp(
        &CgLpTuneProblem::from_linear(&r),
        &lin,
        &m,
        &MarginBounds::default(),
        &TuneSettings::default(),
        &r,
    )
    .unwrap();
    let d = rep.design.unwrap();
    let g = d.margins;
    assert!(g.gamma_minus_gamma_m >= 0.0);
    assert!(g.corner_ratio_minus_nu >= 0.0);
    assert!(g.f_max_minus_f_f_hz >= 0.0);
    assert!(g.f_f_minus_lead_zero_hz > 0.0);
    assert!(g.ceiling_minus_band_peak_deg >= 0.0);
    assert!((d.robust.phi_worst_deg - 60.0).abs() < 0.5);
    let th = compare_crossovers(&r, &d.robust).unwrap();
    assert!(th.holds && th.failing_kappas.is_empty());
    assert!(rep.stats.feasible > 0 && rep.stats.feasible <= rep.stats.evaluated);
}

#[test]
fn infeasible_linear_reports_its_bound() {
    let m = PlantModel {
        kappa_max: 5.5,
        ..PlantModel::piezo_stage()
    };
    let r = tune_linear(
        &LinearControllerParams::robust_design(),
        &m,
        &MarginBounds::default(),
        &TuneSettings::default(),
    )
    .unwrap();
    assert!(!r.feasible);
    assert!((r.kappa_bound - 4.8179).abs() < 1e-3);
}
