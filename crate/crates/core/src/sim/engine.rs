use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::state_space::{LoopStateSpace, State, MAX_STATES};
use crate::error::{Error, Result};

/// Reference signal in μm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Reference {
    Step { amplitude_um: f64 },
    Sine { amplitude_um: f64, f_hz: f64 },
}

impl Reference {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Reference::Step { amplitude_um } => amplitude_um,
            Reference::Sine { amplitude_um, f_hz } => amplitude_um * (TAU * f_hz * t).sin(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Reference::Step { amplitude_um } => amplitude_um.is_finite() && amplitude_um != 0.0,
            Reference::Sine { amplitude_um, f_hz } => {
                amplitude_um.is_finite() && amplitude_um != 0.0 && f_hz > 0.0 && f_hz.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid reference {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResetEvent {
    pub t_s: f64,
    /// FORE input at the located event time.
    pub input: f64,
    pub state_before: f64,
    pub state_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TraceMetrics {
    /// Peak above the final reference value, in percent; step only.
    pub overshoot_pct: Option<f64>,
    /// 10 % → 90 % of the final value; step only.
    pub rise_time_s: Option<f64>,
    /// Last exit from ±2 % of the final value; step only.
    pub settling_time_s: Option<f64>,
    /// `∫|e| dt` over the whole trace, in μm·s.
    pub iae_um_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub dt_s: f64,
    pub reference: Reference,
    pub time_s: Vec<f64>,
    pub reference_um: Vec<f64>,
    pub output_um: Vec<f64>,
    pub error_um: Vec<f64>,
    pub control_v: Vec<f64>,
    pub reset_events: Vec<ResetEvent>,
    pub metrics: TraceMetrics,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    /// Per-sample flag: true on the first sample after an event.
    pub fn reset_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.len()];
        for ev in &self.reset_events {
            let k = (ev.t_s / self.dt_s).ceil() as usize;
            if let Some(f) = flags.get_mut(k.min(self.len().saturating_sub(1))) {
                *f = true;
            }
        }
        flags
    }

    /// CSV with header `t_s,ref_um,y_um,e_um,u_V,reset_event`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_csv_every(w, 1)
    }

    /// As [`write_csv`](Self::write_csv) keeping every `stride`-th sample and
    /// the last one. A written row is flagged when any event happened since
    /// the previous written row.
    pub fn write_csv_every<W: Write>(&self, w: W, stride: usize) -> Result<()> {
        if stride == 0 {
            return Err(Error::Argument("stride must be >= 1".into()));
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_s", "ref_um", "y_um", "e_um", "u_V", "reset_event"])?;
        let flags = self.reset_flags();
        let last = self.len().saturating_sub(1);
        let mut pending = false;
        for (k, &f) in flags.iter().enumerate() {
            pending |= f;
            if k % stride != 0 && k != last {
                continue;
            }
            let flag = std::mem::take(&mut pending);
            out.write_record([
                crate::freq::fmt(self.time_s[k]),
                crate::freq::fmt(self.reference_um[k]),
                crate::freq::fmt(self.output_um[k]),
                crate::freq::fmt(self.error_um[k]),
                crate::freq::fmt(self.control_v[k]),
                u8::from(flag).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn recompute_metrics(&self) -> TraceMetrics {
        compute_metrics(&self.reference, &self.time_s, &self.output_um, &self.error_um)
    }
}

/// Step metrics and IAE from stored series.
pub fn compute_metrics(reference: &Reference, time: &[f64], y: &[f64], e: &[f64]) -> TraceMetrics {
    let iae = trapezoid_abs(time, e);
    let Reference::Step { amplitude_um: a } = *reference else {
        return TraceMetrics {
            iae_um_s: iae,
            ..TraceMetrics::default()
        };
    };
    // Work on y/a so negative steps behave like positive ones.
    let norm: Vec<f64> = y.iter().map(|v| v / a).collect();
    let peak = norm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rise = match (first_crossing(time, &norm, 0.1), first_crossing(time, &norm, 0.9)) {
        (Some(t10), Some(t90)) => Some(t90 - t10),
        _ => None,
    };
    let settling = match norm.iter().rposition(|v| (v - 1.0).abs() > 0.02) {
        None => Some(time[0]),
        Some(k) if k + 1 < time.len() => Some(time[k + 1]),
        Some(_) => None,
    };
    TraceMetrics {
        overshoot_pct: Some(((peak - 1.0) * 100.0).max(0.0)),
        rise_time_s: rise,
        settling_time_s: settling,
        iae_um_s: iae,
    }
}

fn first_crossing(time: &[f64], v: &[f64], level: f64) -> Option<f64> {
    if v.first().is_some_and(|&x| x >= level) {
        return Some(time[0]);
    }
    let k = v.windows(2).position(|w| w[0] < level && w[1] >= level)?;
    let frac = (level - v[k]) / (v[k + 1] - v[k]);
    Some(time[k] + frac * (time[k + 1] - time[k]))
}

pub(crate) fn trapezoid_abs(time: &[f64], v: &[f64]) -> f64 {
    time.windows(2)
        .zip(v.windows(2))
        .map(|(t, x)| 0.5 * (t[1] - t[0]) * (x[0].abs() + x[1].abs()))
        .sum()
}

fn rk4(lp: &LoopStateSpace, x: &State, t: f64, h: f64, r: &impl Fn(f64) -> f64) -> State {
    let add = |a: &State, b: &State, s: f64| {
        let mut o = *a;
        for i in 0..MAX_STATES {
            o[i] += s * b[i];
        }
        o
    };
    let k1 = lp.deriv(x, r(t));
    let k2 = lp.deriv(&add(x, &k1, 0.5 * h), r(t + 0.5 * h));
    let k3 = lp.deriv(&add(x, &k2, 0.5 * h), r(t + 0.5 * h));
    let k4 = lp.deriv(&add(x, &k3, h), r(t + h));
    let mut o = *x;
    for i in 0..MAX_STATES {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

/// Sub-step `τ ∈ (0, h)` where the FORE input vanishes: linear
/// interpolation seed, then Illinois regula falsi on re-integrated states.
fn locate_event(
    lp: &LoopStateSpace,
    x0: &State,
    t0: f64,
    h: f64,
    e0: f64,
    e1: f64,
    r: &impl Fn(f64) -> f64,
) -> (f64, State) {
    let g = |tau: f64| {
        let x = rk4(lp, x0, t0, tau, r);
        (r(t0 + tau) - lp.output(&x), x)
    };
    let tol = 1e-13 * e0.abs().max(e1.abs());
    let (mut a, mut ga, mut b, mut gb) = (0.0, e0, h, e1);
    let mut tau = h * e0 / (e0 - e1);
    let (mut gc, mut xc) = g(tau);
    for _ in 0..40 {
        if gc.abs() <= tol {
            break;
        }
        if gc * gb < 0.0 {
            a = b;
            ga = gb;
        } else {
            ga *= 0.5;
        }
        b = tau;
        gb = gc;
        let next = b - gb * (b - a) / (gb - ga);
        if !(next > 0.0 && next < h) || next == tau {
            break;
        }
        tau = next;
        (gc, xc) = g(tau);
    }
    (tau, xc)
}

/// Fixed-step RK4 closed-loop run from rest, with reset events on sign
/// changes of the FORE input.
pub fn simulate(lp: &LoopStateSpace, reference: Reference, duration_s: f64, dt_s: f64) -> Result<SimTrace> {
    reference.validate()?;
    if !(dt_s > 0.0 && dt_s.is_finite()) {
        return Err(Error::Argument(format!("dt = {dt_s}")));
    }
    if dt_s > lp.max_dt() * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "dt = {dt_s:e} s exceeds 1/(50 f_fast) = {:e} s",
            lp.max_dt()
        )));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::Argument(format!("duration = {duration_s}")));
    }
    let steps = (duration_s / dt_s).round() as usize;
    if steps < 2 {
        return Err(Error::Argument(format!("duration {duration_s} s spans fewer than 2 steps")));
    }
    let r = |t: f64| reference.at(t);
    let detect = lp.resets_enabled();
    let identity = lp.reset_is_identity();
    let fore = LoopStateSpace::fore_index();

    let mut trace = SimTrace {
        dt_s,
        reference,
        time_s: Vec::with_capacity(steps + 1),
        reference_um: Vec::with_capacity(steps + 1),
        output_um: Vec::with_capacity(steps + 1),
        error_um: Vec::with_capacity(steps + 1),
        control_v: Vec::with_capacity(steps + 1),
        reset_events: Vec::new(),
        metrics: TraceMetrics::default(),
    };
    let push = |trace: &mut SimTrace, t: f64, x: &State| {
        let ref_t = r(t);
        let s = lp.signals(x, ref_t);
        trace.time_s.push(t);
        trace.reference_um.push(ref_t);
        trace.output_um.push(s.y);
        trace.error_um.push(s.e);
        trace.control_v.push(s.u);
    };

    let mut x: State = [0.0; MAX_STATES];
    push(&mut trace, 0.0, &x);
    let mut e_prev = r(0.0) - lp.output(&x);
    let mut last_event = f64::NEG_INFINITY;
    for k in 0..steps {
        let t0 = k as f64 * dt_s;
        let t1 = (k + 1) as f64 * dt_s;
        let mut x1 = rk4(lp, &x, t0, dt_s, &r);
        let e1 = r(t1) - lp.output(&x1);
        if detect && e_prev * e1 < 0.0 {
            let (tau, pre) = locate_event(lp, &x, t0, dt_s, e_prev, e1, &r);
            let te = t0 + tau;
            if te - last_event >= 2.0 * dt_s {
                let after = lp.reset_value(pre[fore]);
                trace.reset_events.push(ResetEvent {
                    t_s: te,
                    input: r(te) - lp.output(&pre),
                    state_before: pre[fore],
                    state_after: after,
                });
                last_event = te;
                if !identity {
                    let mut post = pre;
                    post[fore] = after;
                    x1 = rk4(lp, &post, te, t1 - te, &r);
                }
            }
        }
        if x1.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(t0));
        }
        x = x1;
        e_prev = r(t1) - lp.output(&x);
        push(&mut trace, t1, &x);
    }
    trace.metrics = trace.recompute_metrics();
    Ok(trace)
}
