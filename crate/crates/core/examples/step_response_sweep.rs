//! Step responses of CgLp, robust linear and non-robust linear control over
//! the gain uncertainty range.

use cglp::describing::CgLpController;
use cglp::freq::{LinearControllerParams, PlantModel};
use cglp::sim::{comparison_set, kappa_sweep, Experiment, ResetMode, SweepSpec};

fn main() -> cglp::Result<()> {
    let model = PlantModel::piezo_stage();
    let spec = SweepSpec {
        model,
        controllers: comparison_set(
            &CgLpController::reference_design(),
            &LinearControllerParams::robust_design(),
            &model,
        )?,
        experiment: Experiment::Step {
            amplitude_um: 1.0,
            duration_s: 0.05,
        },
        reset: ResetMode::Partial,
        dt_s: None,
        keep_traces: false,
    };
    let rows = kappa_sweep(&spec, 11)?;
    println!("controller  kappa  overshoot %  rise ms  IAE um*ms  resets");
    for r in &rows {
        let Some(m) = r.metrics else {
            println!("{:<10} {:.3}  {}", r.controller, r.kappa, r.error.as_deref().unwrap_or("?"));
            continue;
        };
        println!(
            "{:<10} {:.3} {:11.2} {:8.3} {:10.4} {:7}",
            r.controller,
            r.kappa,
            m.overshoot_pct.unwrap_or(f64::NAN),
            m.rise_time_s.unwrap_or(f64::NAN) * 1e3,
            m.iae_um_s * 1e3,
            r.reset_events
        );
    }
    Ok(())
}
