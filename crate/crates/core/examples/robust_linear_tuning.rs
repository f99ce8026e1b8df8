//! Robust proportional gain of the PI² + notch loop, and the largest gain
//! uncertainty any gain can cover.

use cglp::freq::{LinearControllerParams, PlantModel};
use cglp::tuning::{tune_linear, MarginBounds, TuneSettings};

fn main() -> cglp::Result<()> {
    let lin = LinearControllerParams::robust_design();
    let bounds = MarginBounds::default();
    let settings = TuneSettings::default();

    for kappa_max in [1.2, 1.6165, 3.0, 5.5] {
        let model = PlantModel {
            kappa_max,
            ..PlantModel::piezo_stage()
        };
        let r = tune_linear(&lin, &model, &bounds, &settings)?;
        println!(
            "kappa_max {kappa_max:<6}: K_P* {:.5}, f_c {:6.1}/{:6.1} Hz, phi {:.2}/{:.2} deg, \
             mean f_c {:.1} Hz, feasible {} (bound {:.3})",
            r.k_p_star,
            r.f_c_nominal_hz,
            r.f_c_worst_hz,
            r.phi_nominal_deg,
            r.phi_worst_deg,
            r.f_c_average_hz,
            r.feasible && r.margins_ok,
            r.kappa_bound
        );
    }

    let r = tune_linear(&lin, &PlantModel::piezo_stage(), &bounds, &settings)?;
    let b = &r.band;
    println!(
        "\nphase band [{:.0}, {:.0}] deg: entered at {:.2} Hz, left at {:.2} Hz",
        b.phi_m_deg, b.phi_max_deg, b.entry_hz, b.exit_hz
    );
    Ok(())
}
