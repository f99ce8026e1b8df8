//! First-harmonic and pseudo-sensitivities of the CgLp loop.

use cglp::describing::{pseudo_sensitivity, sensitivity_harmonics, CgLpController};
use cglp::freq::{log_space, LinearControllerParams, PlantModel};

fn db(v: f64) -> f64 {
    20.0 * v.log10()
}

fn main() -> cglp::Result<()> {
    let c = CgLpController::reference_design();
    let lin = LinearControllerParams::robust_design();
    let model = PlantModel::piezo_stage();

    for kappa in [1.0, model.kappa_max] {
        println!("kappa {kappa:.4}");
        println!("   f [Hz]   |S1| dB  S_inf dB   |T1| dB  T_inf dB   |S3|/|S1| dB");
        for f in log_space(10.0, 1000.0, 4)? {
            let p = pseudo_sensitivity(f, kappa, &c, &lin, &model, 9, 512)?;
            let (s, _) = sensitivity_harmonics(3, f, kappa, &c, &lin, &model)?;
            println!(
                "{f:9.1} {:9.2} {:9.2} {:9.2} {:9.2} {:12.1}",
                db(p.s1),
                db(p.s_inf),
                db(p.t1),
                db(p.t_inf),
                db(s.harmonics[2].norm() / s.harmonics[0].norm())
            );
        }
    }
    Ok(())
}
