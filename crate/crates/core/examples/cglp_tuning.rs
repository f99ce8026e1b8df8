//! Grid search for the CgLp element that maximises the robust bandwidth,
//! then the crossover comparison against the linear design.

use std::time::Instant;

use cglp::freq::{LinearControllerParams, PlantModel};
use cglp::tuning::{tune_cglp, tune_linear, compare_crossovers, CgLpTuneProblem, MarginBounds, TuneSettings};

fn main() -> cglp::Result<()> {
    let model = PlantModel::piezo_stage();
    let bounds = MarginBounds::default();
    let settings = TuneSettings::default();
    let linear = tune_linear(&LinearControllerParams::robust_design(), &model, &bounds, &settings)?;
    let lin = LinearControllerParams::robust_design().with_gain(linear.k_p_star);

    let t = Instant::now();
    let problem = CgLpTuneProblem::from_linear(&linear);
    let report = tune_cglp(&problem, &lin, &model, &bounds, &settings, &linear)?;
    let s = &report.stats;
    println!(
        "{} candidates in {:.1} s, {} feasible; phase ceiling {:.2} deg",
        s.evaluated,
        t.elapsed().as_secs_f64(),
        s.feasible,
        report.phase_ceiling_deg
    );
    let Some(d) = report.design else {
        println!("no feasible design");
        return Ok(());
    };
    let c = d.controller;
    println!(
        "gamma {:.3}, alpha {:.3}, f_r {:.1} Hz, f_f {:.1} Hz, K_P {:.5}",
        c.gamma, c.alpha, c.f_r_hz, c.f_f_hz, c.k_p
    );
    println!("constraint slack: {:?}", d.margins);

    let th = compare_crossovers(&linear, &d.robust)?;
    println!("\n kappa   f_c linear   f_c CgLp   gain");
    for row in th.per_kappa.iter().step_by(5) {
        println!(
            "{:6.3} {:10.2} {:10.2} {:+6.2} %",
            row.kappa, row.f_c_linear_hz, row.f_c_cglp_hz, row.gain_pct
        );
    }
    println!("mean crossover gain {:+.2} %, higher at every kappa: {}", th.average_gain_pct, th.holds);
    Ok(())
}
