use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use super::{Command, Common, ControllerKind, InputKind, TuneMode, EXIT_FAILURE, EXIT_INFEASIBLE, EXIT_OK, EXIT_VALIDATION};
use crate::config::ProjectConfig;
use crate::describing::{loop_harmonics, pseudo_sensitivity, sensitivity_harmonics, CgLpController, HarmonicAnalysis};
use crate::error::{Error, Result};
use crate::freq::{bode, kappa_grid, log_space, BodeGrid, FrequencyResponse, Scaled};
use crate::output::{write_harmonics_csv, write_json, write_pseudo_csv, write_with, Curve, LineChart};
use crate::sim::{
    comparison_set, kappa_sweep_at, Controller, Experiment, NamedController, SweepRow, SweepSpec,
};
use crate::tuning::{cglp_loop_shape, crossover_at, tune_cglp, tune_linear, compare_crossovers};

pub(super) fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Analyze { common, kappa } => analyze(&common, &kappa),
        Command::Tune { common, mode, trace } => tune(&common, mode, trace),
        Command::Hosidf { common, nmax, kappa } => hosidf(&common, nmax, &kappa),
        Command::Simulate {
            common,
            controllers,
            input,
            freq,
            kappa,
            stride,
        } => simulate(&common, &controllers, input, freq, &kappa, stride),
        Command::Validate { common } => validate(&common),
    }
}

fn load(common: &Common) -> Result<(ProjectConfig, PathBuf)> {
    let cfg = ProjectConfig::load(&common.config)?;
    let out = cfg.resolve_out_dir(common.out.as_deref());
    std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("cannot create {}: {e}", out.display())))?;
    Ok((cfg, out))
}

/// Flag κ values, else `fallback`; each must lie in `[1, κ̄]`.
fn kappas(cfg: &ProjectConfig, flag: &[f64], fallback: Vec<f64>) -> Result<Vec<f64>> {
    let list = if flag.is_empty() { fallback } else { flag.to_vec() };
    for &k in &list {
        cfg.plant
            .check_kappa(k)
            .map_err(|e| Error::Config(format!("--kappa: {e}")))?;
    }
    Ok(list)
}

fn tag(kappa: f64) -> String {
    format!("k{kappa:.4}")
}

/// The configured CgLp design, or a freshly tuned one.
fn cglp_design(cfg: &ProjectConfig) -> Result<CgLpController> {
    if let Some(c) = cfg.cglp {
        return Ok(c);
    }
    eprintln!("no CgLp design in the config; tuning one");
    let linear = tune_linear(&cfg.linear, &cfg.plant, &cfg.margins, &cfg.tuning)?;
    let lin = cfg.linear.with_gain(linear.k_p_star);
    let report = tune_cglp(&cfg.cglp_problem, &lin, &cfg.plant, &cfg.margins, &cfg.tuning, &linear)?;
    report
        .design
        .map(|d| d.controller)
        .ok_or_else(|| Error::Infeasible("no CgLp candidate satisfies the constraints".into()))
}

fn write_bode(dir: &Path, name: &str, g: &BodeGrid) -> Result<()> {
    write_with(&dir.join(name), |buf| g.write_csv(buf))
}

fn analyze(common: &Common, flag: &[f64]) -> Result<i32> {
    let (cfg, out) = load(common)?;
    let ks = kappas(&cfg, flag, cfg.kappas())?;
    let (m, lin, a) = (&cfg.plant, &cfg.linear, &cfg.analysis);
    let grid = |s: &dyn FrequencyResponse| bode(s, a.f_lo_hz, a.f_hi_hz, a.points_per_decade);

    write_bode(&out, "pi2.csv", &grid(&lin.pi2())?)?;
    write_bode(&out, "notch.csv", &grid(&lin.notch(m))?)?;
    write_bode(&out, "controller.csv", &grid(&Scaled::new(lin.k_p, lin.shape(m)))?)?;
    if let Some(c) = &cfg.cglp {
        write_bode(&out, "cglp_sidf.csv", &grid(&c.sidf())?)?;
        write_bode(&out, "cglp_base_linear.csv", &grid(&c.base_linear())?)?;
    }

    let shape = lin.shape(m).then(m.nominal());
    let mut summary = Vec::new();
    let (mut mag, mut phase) = (Vec::new(), Vec::new());
    for &k in &ks {
        write_bode(&out, &format!("plant_{}.csv", tag(k)), &grid(&m.at(k)?)?)?;
        let ol = grid(&lin.open_loop(m, k)?)?;
        write_bode(&out, &format!("open_loop_{}.csv", tag(k)), &ol)?;
        mag.push(Curve::new(format!("linear, kappa {k:.3}"), &ol.frequencies, &ol.magnitude_db));
        phase.push(Curve::new(format!("linear, kappa {k:.3}"), &ol.frequencies, &ol.phase_deg));
        let lm = crossover_at(&shape, lin.k_p, k, &cfg.tuning)?;
        let mut row = json!({"kappa": k, "linear": {"f_c_hz": lm.f_c_hz, "phi_deg": lm.phi_deg}});
        if let Some(c) = &cfg.cglp {
            let cs = cglp_loop_shape(&c.with_gain(1.0), lin, m);
            let cl = grid(&Scaled::new(c.k_p * k, &cs))?;
            write_bode(&out, &format!("cglp_open_loop_{}.csv", tag(k)), &cl)?;
            mag.push(Curve::new(format!("CgLp SIDF, kappa {k:.3}"), &cl.frequencies, &cl.magnitude_db));
            phase.push(Curve::new(format!("CgLp SIDF, kappa {k:.3}"), &cl.frequencies, &cl.phase_deg));
            let cm = crossover_at(&cs, c.k_p, k, &cfg.tuning)?;
            row["cglp"] = json!({"f_c_hz": cm.f_c_hz, "phi_deg": cm.phi_deg});
        }
        summary.push(row);
    }
    write_json(&out.join("analyze.json"), &summary)?;
    LineChart::new("Open loop", "frequency [Hz]", true)
        .panel("magnitude [dB]", mag)
        .panel("phase [deg]", phase)
        .write(&out.join("analyze.svg"))?;
    for row in &summary {
        let v = |x: &serde_json::Value| x.as_f64().unwrap_or(f64::NAN);
        println!(
            "kappa {:.4}: linear f_c {:.1} Hz, phi {:.2} deg",
            v(&row["kappa"]),
            v(&row["linear"]["f_c_hz"]),
            v(&row["linear"]["phi_deg"])
        );
    }
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}

fn tune(common: &Common, mode: TuneMode, trace: bool) -> Result<i32> {
    let (cfg, out) = load(common)?;
    let linear = tune_linear(&cfg.linear, &cfg.plant, &cfg.margins, &cfg.tuning)?;
    let lin = cfg.linear.with_gain(linear.k_p_star);
    println!(
        "linear: K_P* {:.6}, f_c {:.2}/{:.2} Hz, phi {:.2}/{:.2} deg, kappa bound {:.4}",
        linear.k_p_star,
        linear.f_c_nominal_hz,
        linear.f_c_worst_hz,
        linear.phi_nominal_deg,
        linear.phi_worst_deg,
        linear.kappa_bound
    );
    let linear_ok = linear.feasible && linear.margins_ok;
    if mode == TuneMode::Linear || !linear_ok {
        write_json(
            &out.join("tune_linear.json"),
            &json!({"controller": lin, "result": linear}),
        )?;
        if !linear_ok {
            eprintln!(
                "infeasible: kappa_max {:.4} exceeds the admissible bound {:.4}",
                linear.kappa_max, linear.kappa_bound
            );
            return Ok(EXIT_INFEASIBLE);
        }
        return Ok(EXIT_OK);
    }

    let problem = crate::tuning::CgLpTuneProblem {
        keep_trace: trace,
        ..cfg.cglp_problem.clone()
    };
    let report = tune_cglp(&problem, &lin, &cfg.plant, &cfg.margins, &cfg.tuning, &linear)?;
    if trace {
        write_with(&out.join("cglp_trace.csv"), |buf| report.write_trace_csv(buf))?;
    }
    let gains = match &report.design {
        Some(d) => Some(compare_crossovers(&linear, &d.robust)?),
        None => None,
    };
    write_json(
        &out.join("tune_cglp.json"),
        &json!({"linear": {"controller": lin, "result": linear}, "cglp": report, "crossover_gains": gains}),
    )?;
    let Some(d) = &report.design else {
        eprintln!("infeasible: no CgLp candidate satisfies the constraints ({:?})", report.stats);
        return Ok(EXIT_INFEASIBLE);
    };
    let (c, r) = (&d.controller, &d.robust);
    println!(
        "cglp: gamma {:.3}, alpha {:.3}, f_r {:.1} Hz, f_f {:.1} Hz, K_P {:.5}",
        c.gamma, c.alpha, c.f_r_hz, c.f_f_hz, c.k_p
    );
    println!(
        "cglp: f_c {:.2}/{:.2} Hz, phi {:.2}/{:.2} deg",
        r.f_c_nominal_hz, r.f_c_worst_hz, r.phi_nominal_deg, r.phi_worst_deg
    );
    if let Some(t) = &gains {
        println!(
            "crossover gain: nominal {:+.2} %, worst {:+.2} %, average {:+.2} %",
            t.nominal_gain_pct, t.worst_gain_pct, t.average_gain_pct
        );
    }
    Ok(EXIT_OK)
}

fn hosidf(common: &Common, nmax: Option<usize>, flag: &[f64]) -> Result<i32> {
    let (cfg, out) = load(common)?;
    let ks = kappas(&cfg, flag, cfg.kappas())?;
    let a = &cfg.analysis;
    let (n_max, n_trunc) = match nmax {
        Some(0) => return Err(Error::Config("--nmax must be >= 1".into())),
        Some(n) => (n, n),
        None => (a.n_max, a.n_truncation),
    };
    let c = cglp_design(&cfg)?;
    let (m, lin) = (&cfg.plant, &cfg.linear);
    let freqs = log_space(a.f_lo_hz, a.f_hi_hz, a.points_per_decade)?;

    let mut harmonics: Vec<HarmonicAnalysis> = Vec::new();
    let mut pseudo = Vec::new();
    for &k in &ks {
        let rows = freqs
            .par_iter()
            .map(|&f| {
                let l = loop_harmonics(n_max, f, k, &c, lin, m)?;
                let (s, t) = sensitivity_harmonics(n_max, f, k, &c, lin, m)?;
                let p = pseudo_sensitivity(f, k, &c, lin, m, n_trunc, a.time_samples)?;
                Ok((l, s, t, p))
            })
            .collect::<Result<Vec<_>>>()?;
        for (l, s, t, p) in rows {
            harmonics.extend([l, s, t]);
            pseudo.push(p);
        }
    }
    write_with(&out.join("hosidf.csv"), |buf| write_harmonics_csv(buf, &harmonics))?;
    write_with(&out.join("pseudo.csv"), |buf| write_pseudo_csv(buf, &pseudo))?;

    let db = |v: f64| 20.0 * v.log10();
    let (mut sens, mut comp) = (Vec::new(), Vec::new());
    for &k in &ks {
        let rows: Vec<_> = pseudo.iter().filter(|p| p.kappa == k).collect();
        let fs: Vec<f64> = rows.iter().map(|p| p.frequency_hz).collect();
        let col = |g: fn(&crate::describing::PseudoSensitivity) -> f64| rows.iter().map(|p| db(g(p))).collect::<Vec<_>>();
        sens.push(Curve::new(format!("|S_1|, kappa {k:.3}"), &fs, &col(|p| p.s1)));
        sens.push(Curve::new(format!("S_inf, kappa {k:.3}"), &fs, &col(|p| p.s_inf)));
        comp.push(Curve::new(format!("|T_1|, kappa {k:.3}"), &fs, &col(|p| p.t1)));
        comp.push(Curve::new(format!("T_inf, kappa {k:.3}"), &fs, &col(|p| p.t_inf)));
    }
    LineChart::new("Pseudo-sensitivities", "frequency [Hz]", true)
        .panel("sensitivity [dB]", sens)
        .panel("complementary [dB]", comp)
        .write(&out.join("pseudo.svg"))?;

    let k0 = ks[0];
    let loops: Vec<&HarmonicAnalysis> = harmonics
        .iter()
        .filter(|h| h.kappa == k0 && h.quantity == crate::describing::Quantity::OpenLoop)
        .collect();
    let fs: Vec<f64> = loops.iter().map(|h| h.frequency_hz).collect();
    let curves = (1..=n_max)
        .step_by(2)
        .map(|n| {
            let ys: Vec<f64> = loops.iter().map(|h| db(h.harmonics[n - 1].norm())).collect();
            Curve::new(format!("|L_{n}|"), &fs, &ys)
        })
        .collect();
    LineChart::new(format!("Open-loop harmonics, kappa {k0:.3}"), "frequency [Hz]", true)
        .panel("magnitude [dB]", curves)
        .write(&out.join("hosidf.svg"))?;

    println!(
        "{} frequencies x {} kappa values, n_max {n_max}, truncation {n_trunc}; wrote {}",
        freqs.len(),
        ks.len(),
        out.display()
    );
    Ok(EXIT_OK)
}

fn simulate(
    common: &Common,
    kinds: &[ControllerKind],
    input: InputKind,
    freq: Option<f64>,
    flag: &[f64],
    stride: Option<usize>,
) -> Result<i32> {
    let (cfg, out) = load(common)?;
    let sim = &cfg.simulation;
    let ks = kappas(&cfg, flag, kappa_grid(cfg.plant.kappa_max, sim.kappa_points))?;
    let stride = stride.unwrap_or(sim.trace_stride);
    if stride == 0 {
        return Err(Error::Config("--stride must be >= 1".into()));
    }
    let kinds = if kinds.is_empty() {
        vec![ControllerKind::Cglp, ControllerKind::Linear, ControllerKind::Nonrobust]
    } else {
        kinds.to_vec()
    };
    let mut controllers = if kinds.iter().all(|&k| k == ControllerKind::Linear) {
        vec![NamedController {
            name: "linear".into(),
            controller: Controller::Linear(cfg.linear),
        }]
    } else {
        comparison_set(&cglp_design(&cfg)?, &cfg.linear, &cfg.plant)?
    };
    controllers.retain(|c| kinds.iter().any(|k| k.name() == c.name));

    let (experiment, label) = match input {
        InputKind::Step => (
            Experiment::Step {
                amplitude_um: sim.step_amplitude_um,
                duration_s: sim.step_duration_s,
            },
            "step",
        ),
        InputKind::Sine => {
            let f_hz = freq.unwrap_or(sim.sine_f_hz);
            if !(f_hz > 0.0 && f_hz.is_finite()) {
                return Err(Error::Config(format!("--freq must be positive, got {f_hz}")));
            }
            (
                Experiment::Sine {
                    amplitude_um: sim.sine_amplitude_um,
                    f_hz,
                    periods: sim.sine_periods,
                },
                "sine",
            )
        }
    };
    let spec = SweepSpec {
        model: cfg.plant,
        controllers,
        experiment,
        reset: sim.reset,
        dt_s: sim.dt_s,
        keep_traces: true,
    };
    let rows = kappa_sweep_at(&spec, &ks)?;

    for r in &rows {
        if let Some(t) = &r.trace {
            let name = format!("trace_{}_{label}_{}.csv", r.controller, tag(r.kappa));
            write_with(&out.join(name), |buf| t.write_csv_every(buf, stride))?;
        }
    }
    write_json(
        &out.join(format!("simulate_{label}.json")),
        &json!({"experiment": spec.experiment, "controllers": spec.controllers, "reset": spec.reset, "runs": rows}),
    )?;
    write_chart(&rows, &ks, label, stride, &out)?;

    let mut failed = 0;
    for r in &rows {
        match (&r.error, &r.metrics, &r.sine) {
            (Some(e), _, _) => {
                failed += 1;
                eprintln!("{} kappa {:.4}: {e}", r.controller, r.kappa);
            }
            (None, _, Some(s)) => println!(
                "{:<9} kappa {:.4}: |T1| {:+.3} dB, phase {:.2} deg, IAE/period {:.4e} um s",
                r.controller, r.kappa, s.t1_gain_db, s.t1_phase_deg, s.iae_per_period_um_s
            ),
            (None, Some(mt), None) => println!(
                "{:<9} kappa {:.4}: overshoot {:.2} %, rise {:.3} ms, settling {}, IAE {:.4e} um s, {} resets",
                r.controller,
                r.kappa,
                mt.overshoot_pct.unwrap_or(f64::NAN),
                mt.rise_time_s.map_or(f64::NAN, |t| t * 1e3),
                mt.settling_time_s.map_or("-".to_string(), |t| format!("{:.3} ms", t * 1e3)),
                mt.iae_um_s,
                r.reset_events
            ),
            _ => {}
        }
    }
    Ok(if failed > 0 { EXIT_FAILURE } else { EXIT_OK })
}

fn write_chart(rows: &[SweepRow], ks: &[f64], label: &str, stride: usize, out: &Path) -> Result<()> {
    let mut picks = vec![ks[0]];
    if ks.len() > 1 {
        picks.push(ks[ks.len() - 1]);
    }
    let mut chart = LineChart::new(format!("{label} response"), "time [s]", false);
    for &k in &picks {
        let mut curves = Vec::new();
        for r in rows.iter().filter(|r| r.kappa == k) {
            let Some(t) = &r.trace else { continue };
            if curves.is_empty() {
                let (ts, ys) = thin(&t.time_s, &t.reference_um, stride);
                curves.push(Curve::new("reference", &ts, &ys));
            }
            let (ts, ys) = thin(&t.time_s, &t.output_um, stride);
            curves.push(Curve::new(r.controller.clone(), &ts, &ys));
        }
        chart = chart.panel(format!("y [um], kappa {k:.3}"), curves);
    }
    chart.write(&out.join(format!("simulate_{label}.svg")))
}

fn thin(t: &[f64], y: &[f64], stride: usize) -> (Vec<f64>, Vec<f64>) {
    let step = stride.max(t.len() / 2000).max(1);
    t.iter().zip(y).step_by(step).map(|(a, b)| (*a, *b)).unzip()
}

fn validate(common: &Common) -> Result<i32> {
    let (cfg, out) = load(common)?;
    let report = super::run_validation(&cfg)?;
    write_json(&out.join("validation.json"), &report)?;
    for c in &report.checks {
        println!(
            "[{}] criterion {} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.criterion,
            c.id,
            c.detail
        );
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
}
