//! An ideal complex-order element adds flat phase above its corner. Placed
//! in the loop it shifts the phase band and raises the admissible gain
//! uncertainty.

use cglp::freq::{ComplexOrder, ComplexOrderParams, FrequencyResponse, LinearControllerParams, PlantModel};
use cglp::tuning::{find_phase_band, kappa_bound, MarginBounds};

fn main() -> cglp::Result<()> {
    let model = PlantModel::piezo_stage();
    let lin = LinearControllerParams::robust_design();
    let bounds = MarginBounds::default();
    let controller = lin.shape(&model);

    let band = find_phase_band(&controller.clone().then(model.nominal()), bounds.phi_m_deg, bounds.phi_max_deg, 1.0, 1e4)?;
    println!(
        "linear:              band {:7.2} .. {:7.2} Hz, kappa bound {:.3}",
        band.entry_hz,
        band.exit_hz,
        kappa_bound(&controller, &model.nominal(), &band)?
    );

    for gamma_tilde in [0.9, 0.6, 0.3] {
        let co = ComplexOrder(ComplexOrderParams::new(gamma_tilde, 200.0)?);
        let shaped = controller.clone().then(co);
        let loop_shape = shaped.clone().then(model.nominal());
        match find_phase_band(&loop_shape, bounds.phi_m_deg, bounds.phi_max_deg, 1.0, 1e4) {
            Ok(b) => println!(
                "gamma~ {gamma_tilde:.1} (+{:4.1} deg): band {:7.2} .. {:7.2} Hz, kappa bound {:.3}, phase at 300 Hz {:.1} deg",
                co.0.max_phase_deg(),
                b.entry_hz,
                b.exit_hz,
                kappa_bound(&shaped, &model.nominal(), &b)?,
                loop_shape.eval(300.0)?.arg().to_degrees()
            ),
            Err(e) => println!("gamma~ {gamma_tilde:.1}: {e}"),
        }
    }
    Ok(())
}
