use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{simulate, trapezoid_abs, Reference, SimTrace, TraceMetrics};
use super::state_space::{build_loop, Controller, LoopStateSpace, ResetMode};
use crate::describing::CgLpController;
use crate::error::{Error, Result};
use crate::freq::{kappa_grid, LinearControllerParams, PlantModel, Scaled};
use crate::tuning::{cglp_loop_shape, crossover_at, gain_for_crossover, TuneSettings};

/// Steady-state figures of a sinusoid run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SineSummary {
    pub frequency_hz: f64,
    pub amplitude_um: f64,
    pub periods: usize,
    pub analyzed_periods: usize,
    pub iae_per_period_um_s: f64,
    pub max_abs_error_um: f64,
    /// First-harmonic tracking gain `Y₁ / R₁`.
    pub t1: Complex64,
    pub t1_gain_db: f64,
    pub t1_phase_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SineExperiment {
    pub summary: SineSummary,
    pub trace: SimTrace,
}

/// Sinusoid tracking run; the first half of the periods is discarded.
///
/// The step is the largest `dt ≤ default_dt` that puts an integer number of
/// samples in a period, so the Fourier projection is over whole periods.
pub fn sine_experiment(lp: &LoopStateSpace, f_hz: f64, amplitude_um: f64, periods: usize) -> Result<SineExperiment> {
    sine_experiment_with(lp, f_hz, amplitude_um, periods, lp.default_dt())
}

pub fn sine_experiment_with(
    lp: &LoopStateSpace,
    f_hz: f64,
    amplitude_um: f64,
    periods: usize,
    dt_max_s: f64,
) -> Result<SineExperiment> {
    if periods < 20 {
        return Err(Error::Argument(format!("periods = {periods} < 20")));
    }
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::Argument(format!("sine frequency {f_hz}")));
    }
    let per_period = (1.0 / (f_hz * dt_max_s)).ceil() as usize;
    let dt = 1.0 / (f_hz * per_period as f64);
    let reference = Reference::Sine { amplitude_um, f_hz };
    let trace = simulate(lp, reference, periods as f64 / f_hz, dt)?;

    let skip = periods / 2;
    let analyzed = periods - skip;
    let (a, b) = (skip * per_period, periods * per_period);
    let w = TAU * f_hz;
    let project = |v: &[f64]| -> Complex64 {
        (a..b)
            .map(|k| v[k] * Complex64::from_polar(1.0, -w * trace.time_s[k]))
            .sum()
    };
    let t1 = project(&trace.output_um) / project(&trace.reference_um);
    let iae = trapezoid_abs(&trace.time_s[a..=b], &trace.error_um[a..=b]);
    let max_err = trace.error_um[a..=b].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SineExperiment {
        summary: SineSummary {
            frequency_hz: f_hz,
            amplitude_um,
            periods,
            analyzed_periods: analyzed,
            iae_per_period_um_s: iae / analyzed as f64,
            max_abs_error_um: max_err,
            t1,
            t1_gain_db: 20.0 * t1.norm().log10(),
            t1_phase_deg: t1.arg().to_degrees(),
        },
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "input")]
pub enum Experiment {
    Step {
        amplitude_um: f64,
        duration_s: f64,
    },
    Sine {
        amplitude_um: f64,
        f_hz: f64,
        periods: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedController {
    pub name: String,
    pub controller: Controller,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub model: PlantModel,
    pub controllers: Vec<NamedController>,
    pub experiment: Experiment,
    pub reset: ResetMode,
    /// Integration step; the loop's default when absent.
    pub dt_s: Option<f64>,
    pub keep_traces: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub controller: String,
    pub kappa: f64,
    pub metrics: Option<TraceMetrics>,
    pub sine: Option<SineSummary>,
    pub reset_events: usize,
    /// Why the run failed; the other rows are unaffected.
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Option<SimTrace>,
}

/// Outcome of one experiment on one loop.
pub fn run_experiment(lp: &LoopStateSpace, experiment: &Experiment, dt_s: Option<f64>) -> Result<(SimTrace, Option<SineSummary>)> {
    let dt = dt_s.unwrap_or_else(|| lp.default_dt());
    match *experiment {
        Experiment::Step {
            amplitude_um,
            duration_s,
        } => Ok((simulate(lp, Reference::Step { amplitude_um }, duration_s, dt)?, None)),
        Experiment::Sine {
            amplitude_um,
            f_hz,
            periods,
        } => {
            let s = sine_experiment_with(lp, f_hz, amplitude_um, periods, dt)?;
            Ok((s.trace, Some(s.summary)))
        }
    }
}

/// Every controller at `kappa_points` values of κ spread over `[1, κ̄]`,
/// run in parallel. Rows are ordered by controller, then κ.
pub fn kappa_sweep(spec: &SweepSpec, kappa_points: usize) -> Result<Vec<SweepRow>> {
    if kappa_points < 3 {
        return Err(Error::Argument(format!("kappa_points = {kappa_points} < 3")));
    }
    let kappas = kappa_grid(spec.model.kappa_max, kappa_points);
    kappa_sweep_at(spec, &kappas)
}

/// As [`kappa_sweep`] on an explicit κ list.
pub fn kappa_sweep_at(spec: &SweepSpec, kappas: &[f64]) -> Result<Vec<SweepRow>> {
    spec.model.validate()?;
    for &k in kappas {
        spec.model.check_kappa(k)?;
    }
    let jobs: Vec<(&NamedController, f64)> = spec
        .controllers
        .iter()
        .flat_map(|c| kappas.iter().map(move |&k| (c, k)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(c, kappa)| {
            let run = build_loop(&c.controller, &spec.model, kappa)
                .and_then(|lp| run_experiment(&lp.with_reset(spec.reset), &spec.experiment, spec.dt_s));
            match run {
                Ok((trace, sine)) => SweepRow {
                    controller: c.name.clone(),
                    kappa,
                    metrics: Some(trace.metrics),
                    sine,
                    reset_events: trace.reset_events.len(),
                    error: None,
                    trace: spec.keep_traces.then_some(trace),
                },
                Err(e) => SweepRow {
                    controller: c.name.clone(),
                    kappa,
                    metrics: None,
                    sine: None,
                    reset_events: 0,
                    error: Some(e.to_string()),
                    trace: None,
                },
            }
        })
        .collect())
}

/// Nominal crossover `𝒻_c(1)` of the CgLp loop from its SIDF.
pub fn cglp_nominal_crossover(c: &CgLpController, lin: &LinearControllerParams, model: &PlantModel) -> Result<f64> {
    let shape = Scaled::new(c.k_p, cglp_loop_shape(c, lin, model));
    Ok(crossover_at(&shape, 1.0, 1.0, &TuneSettings::default())?.f_c_hz)
}

/// Linear controller with the robust design's elements and `K_P` raised so
/// its nominal crossover equals `f_c_hz`.
pub fn nonrobust_linear(lin: &LinearControllerParams, model: &PlantModel, f_c_hz: f64) -> Result<LinearControllerParams> {
    let shape = lin.shape(model).then(model.nominal());
    Ok(lin.with_gain(gain_for_crossover(&shape, f_c_hz)?))
}

/// The three controllers compared in the step and sine studies:
/// `cglp`, `linear` (robust) and `nonrobust`.
pub fn comparison_set(
    cglp: &CgLpController,
    lin: &LinearControllerParams,
    model: &PlantModel,
) -> Result<Vec<NamedController>> {
    let f_c = cglp_nominal_crossover(cglp, lin, model)?;
    Ok(vec![
        NamedController {
            name: "cglp".into(),
            controller: Controller::Cglp {
                cglp: *cglp,
                shape: *lin,
            },
        },
        NamedController {
            name: "linear".into(),
            controller: Controller::Linear(*lin),
        },
        NamedController {
            name: "nonrobust".into(),
            controller: Controller::Linear(nonrobust_linear(lin, model, f_c)?),
        },
    ])
}
