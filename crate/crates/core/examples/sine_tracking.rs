//! Sinusoid tracking in the hybrid simulation compared with the
//! first-harmonic prediction.

use cglp::describing::{sensitivity_harmonics, CgLpController};
use cglp::freq::{LinearControllerParams, PlantModel};
use cglp::sim::{build_loop, sine_experiment, Controller};

fn main() -> cglp::Result<()> {
    let c = CgLpController::reference_design();
    let lin = LinearControllerParams::robust_design();
    let model = PlantModel::piezo_stage();
    let controller = Controller::Cglp { cglp: c, shape: lin };
    let linear = Controller::Linear(lin);

    println!("kappa  f [Hz]  |T1| sim dB  |T1| DF dB  phase sim  phase DF  IAE/period CgLp  linear");
    for kappa in [1.0, model.kappa_max] {
        let lp = build_loop(&controller, &model, kappa)?;
        let ll = build_loop(&linear, &model, kappa)?;
        for f in [30.0, 60.0, 120.0, 200.0] {
            let s = sine_experiment(&lp, f, 1.0, 20)?.summary;
            let l = sine_experiment(&ll, f, 1.0, 20)?.summary;
            let (_, t) = sensitivity_harmonics(1, f, kappa, &c, &lin, &model)?;
            let t1 = t.harmonics[0];
            println!(
                "{kappa:.3} {f:7.0} {:12.3} {:11.3} {:10.2} {:9.2} {:16.3e} {:.3e}",
                s.t1_gain_db,
                20.0 * t1.norm().log10(),
                s.t1_phase_deg,
                t1.arg().to_degrees(),
                s.iae_per_period_um_s,
                l.iae_per_period_um_s
            );
        }
    }
    Ok(())
}
