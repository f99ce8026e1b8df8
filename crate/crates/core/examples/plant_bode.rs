//! Bode data of the piezo stage at the nominal and worst-case gain.

use cglp::freq::{bode, crossover, LinearControllerParams, PlantModel};

fn main() -> cglp::Result<()> {
    let model = PlantModel::piezo_stage();
    for kappa in [1.0, model.kappa_max] {
        let g = bode(&model.at(kappa)?, 10.0, 5000.0, 50)?;
        let k = g
            .magnitude_peaks()
            .into_iter()
            .max_by(|&a, &b| g.magnitude_db[a].total_cmp(&g.magnitude_db[b]))
            .expect("lightly damped mode");
        println!(
            "kappa {kappa:.4}: DC {:.2} dB, resonance {:.0} Hz at {:.1} dB, phase {:.1} deg",
            g.magnitude_db[0], g.frequencies[k], g.magnitude_db[k], g.phase_deg[k]
        );
    }

    let lin = LinearControllerParams::robust_design();
    println!("\nopen loop with the robust linear controller:");
    for kappa in model.kappa_grid(5) {
        let m = crossover(&lin.open_loop(&model, kappa)?, 1.0, 1e4)?;
        println!("kappa {kappa:.4}: f_c {:7.2} Hz, phase margin {:.2} deg", m.f_c_hz, m.phi_deg);
    }

    let g = bode(&lin.open_loop(&model, 1.0)?, 1.0, 1e4, 20)?;
    g.write_csv(std::io::stdout().lock())?;
    Ok(())
}
