//! Brute-force harmonic gains of a reset element from its simulated periodic
//! steady state. Used to validate the closed-form describing functions.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use super::{cglp_response, fore_hosidf, fore_sidf, CgLpController};
use crate::error::{Error, Result};

/// The element driven by `sin(2πft)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResetElement {
    Fore { f_r_hz: f64, gamma: f64 },
    /// FORE followed by the lead filter; `𝒦_P` is ignored.
    Cglp(CgLpController),
}

impl ResetElement {
    fn gamma(&self) -> f64 {
        match self {
            ResetElement::Fore { gamma, .. } => *gamma,
            ResetElement::Cglp(c) => c.gamma,
        }
    }

    fn f_r_hz(&self) -> f64 {
        match self {
            ResetElement::Fore { f_r_hz, .. } => *f_r_hz,
            ResetElement::Cglp(c) => c.f_r_hz,
        }
    }

    /// Closed-form harmonic `n` at `f_hz`, for comparison with the oracle.
    pub fn analytic(&self, n: usize, f_hz: f64) -> Result<Complex64> {
        match (self, n) {
            (ResetElement::Fore { f_r_hz, gamma }, 1) => fore_sidf(f_hz, *f_r_hz, *gamma),
            (ResetElement::Fore { f_r_hz, gamma }, _) => fore_hosidf(n, f_hz, *f_r_hz, *gamma),
            (ResetElement::Cglp(c), _) => cglp_response(n, f_hz, c),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ResetElement::Fore { f_r_hz, gamma } => {
                if !(*f_r_hz > 0.0 && f_r_hz.is_finite()) {
                    return Err(Error::domain("f_r_hz", *f_r_hz, "(0, inf)"));
                }
                if !(-1.0..=1.0).contains(gamma) {
                    return Err(Error::domain("gamma", *gamma, "[-1, 1]"));
                }
                Ok(())
            }
            ResetElement::Cglp(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    /// RK4 steps per input period. Odd, so no grid point lands on a zero
    /// crossing half a period in.
    pub steps_per_period: usize,
    /// Periods discarded before analysis; `None` picks `max(10, ⌈6f/f_r⌉)`.
    pub settle_periods: Option<usize>,
    pub analyze_periods: usize,
    pub drift_tolerance: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            steps_per_period: 4001,
            settle_periods: None,
            analyze_periods: 10,
            drift_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub frequency_hz: f64,
    /// `harmonics[n − 1]`, normalised to the unit input amplitude.
    pub harmonics: Vec<Complex64>,
    /// Relative change of the first harmonic between the last two periods.
    pub drift: f64,
    pub periods: usize,
    pub reset_events: usize,
}

impl OracleResult {
    pub fn get(&self, n: usize) -> Option<Complex64> {
        n.checked_sub(1).and_then(|k| self.harmonics.get(k).copied())
    }
}

/// Element dynamics `s' = A s + B u`, output `y = C s`, with the FORE state
/// first.
struct Dynamics {
    w_r: f64,
    lead: Option<(f64, f64, f64)>,
    gamma: f64,
}

impl Dynamics {
    fn new(e: &ResetElement) -> Self {
        let w_r = TAU * e.f_r_hz();
        let lead = match e {
            ResetElement::Fore { .. } => None,
            ResetElement::Cglp(c) => {
                let w_z = TAU * c.alpha * c.f_r_hz;
                let w_f = TAU * c.f_f_hz;
                Some((w_f, w_f / w_z, w_z - w_f))
            }
        };
        Self {
            w_r,
            lead,
            gamma: e.gamma(),
        }
    }

    fn deriv(&self, s: [f64; 2], u: f64) -> [f64; 2] {
        let dx = self.w_r * (u - s[0]);
        let dz = match self.lead {
            Some((w_f, _, _)) => s[0] - w_f * s[1],
            None => 0.0,
        };
        [dx, dz]
    }

    fn output(&self, s: [f64; 2]) -> f64 {
        match self.lead {
            Some((_, g, c)) => g * (s[0] + c * s[1]),
            None => s[0],
        }
    }

    fn rk4(&self, s: [f64; 2], t: f64, h: f64, u: &impl Fn(f64) -> f64) -> [f64; 2] {
        let add = |a: [f64; 2], b: [f64; 2], k: f64| [a[0] + k * b[0], a[1] + k * b[1]];
        let k1 = self.deriv(s, u(t));
        let k2 = self.deriv(add(s, k1, h / 2.0), u(t + h / 2.0));
        let k3 = self.deriv(add(s, k2, h / 2.0), u(t + h / 2.0));
        let k4 = self.deriv(add(s, k3, h), u(t + h));
        [
            s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }
}

/// Accumulates `∫ y(t)·(sin nωt + j cos nωt) dt` with the two-point Hermite
/// rule, exact for cubics, using `y'` supplied by the dynamics.
struct Projector {
    w: f64,
    acc: Vec<Complex64>,
}

impl Projector {
    fn add(&mut self, (ta, ya, dya): (f64, f64, f64), (tb, yb, dyb): (f64, f64, f64)) {
        let h = tb - ta;
        for (k, acc) in self.acc.iter_mut().enumerate() {
            let nw = (k + 1) as f64 * self.w;
            let g = |t: f64, y: f64, dy: f64| {
                let (s, c) = (nw * t).sin_cos();
                let e = Complex64::new(s, c);
                let de = Complex64::new(c, -s) * nw;
                (e * y, e * dy + de * y)
            };
            let (ga, dga) = g(ta, ya, dya);
            let (gb, dgb) = g(tb, yb, dyb);
            *acc += (ga + gb) * (h / 2.0) + (dga - dgb) * (h * h / 12.0);
        }
    }
}

pub fn fourier_oracle(element: &ResetElement, f_hz: f64, n_max: usize) -> Result<OracleResult> {
    fourier_oracle_with(element, f_hz, n_max, &OracleSettings::default())
}

pub fn fourier_oracle_with(
    element: &ResetElement,
    f_hz: f64,
    n_max: usize,
    settings: &OracleSettings,
) -> Result<OracleResult> {
    element.validate()?;
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::Argument(format!("oracle needs f > 0, got {f_hz}")));
    }
    if n_max == 0 {
        return Err(Error::Argument("n_max must be >= 1".into()));
    }
    if settings.steps_per_period < 16 || settings.analyze_periods < 2 {
        return Err(Error::Argument(
            "oracle needs >= 16 steps per period and >= 2 analysed periods".into(),
        ));
    }
    let settle = settings
        .settle_periods
        .unwrap_or_else(|| ((6.0 * f_hz / element.f_r_hz()).ceil() as usize).max(10));
    let periods = settle + settings.analyze_periods;
    if periods < 20 {
        return Err(Error::Argument(format!("{periods} periods simulated, need >= 20")));
    }

    let dy = Dynamics::new(element);
    let w = TAU * f_hz;
    let period = 1.0 / f_hz;
    let h = period / settings.steps_per_period as f64;
    let u = |t: f64| (w * t).sin();
    let sample = |t: f64, s: [f64; 2]| {
        let d = dy.deriv(s, u(t));
        let dout = match dy.lead {
            Some((_, g, c)) => g * (d[0] + c * d[1]),
            None => d[0],
        };
        (t, dy.output(s), dout)
    };

    // One projector per analysed period; the last two give the drift.
    let mut per_period: Vec<Projector> = (0..settings.analyze_periods)
        .map(|_| Projector {
            w,
            acc: vec![Complex64::new(0.0, 0.0); n_max],
        })
        .collect();
    let mut state = [0.0; 2];
    let mut events = 0usize;

    for p in 0..periods {
        let slot = p.checked_sub(settle);
        for k in 0..settings.steps_per_period {
            let t0 = p as f64 * period + k as f64 * h;
            let t1 = t0 + h;
            let mut s1 = dy.rk4(state, t0, h, &u);
            // Zeros of the input sit on half periods; locate them from the
            // step index so rounding in sin() cannot drop or repeat one.
            let half = 2 * k < settings.steps_per_period && 2 * (k + 1) >= settings.steps_per_period;
            let full = k + 1 == settings.steps_per_period;
            if half || full {
                let te = if full { t1 } else { p as f64 * period + 0.5 * period };
                let pre = dy.rk4(state, t0, te - t0, &u);
                let post = [dy.gamma * pre[0], pre[1]];
                if let Some(q) = slot {
                    per_period[q].add(sample(t0, state), sample(te, pre));
                }
                s1 = if te < t1 { dy.rk4(post, te, t1 - te, &u) } else { post };
                if let Some(q) = slot {
                    if te < t1 {
                        per_period[q].add(sample(te, post), sample(t1, s1));
                    }
                }
                events += 1;
            } else if let Some(q) = slot {
                per_period[q].add(sample(t0, state), sample(t1, s1));
            }
            state = s1;
        }
        if !(state[0].is_finite() && state[1].is_finite()) {
            return Err(Error::Divergence((p + 1) as f64 * period));
        }
    }

    let scale = |acc: &Complex64, np: usize| acc * (2.0 / (np as f64 * period));
    let last = &per_period[per_period.len() - 1].acc[0];
    let prev = &per_period[per_period.len() - 2].acc[0];
    let g_last = scale(last, 1);
    let g_prev = scale(prev, 1);
    let drift = (g_last - g_prev).norm() / g_last.norm().max(f64::MIN_POSITIVE);
    if drift > settings.drift_tolerance {
        return Err(Error::Convergence(drift));
    }
    let harmonics = (0..n_max)
        .map(|k| {
            let sum: Complex64 = per_period.iter().map(|pp| pp.acc[k]).sum();
            scale(&sum, settings.analyze_periods)
        })
        .collect();
    Ok(OracleResult {
        frequency_hz: f_hz,
        harmonics,
        drift,
        periods,
        reset_events: events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn fore_matches_closed_form_at_corner() {
        let e = ResetElement::Fore {
            f_r_hz: 324.0,
            gamma: 0.3,
        };
        let r = fourier_oracle(&e, 324.0, 6).unwrap();
        for n in [1, 3, 5] {
            let a = e.analytic(n, 324.0).unwrap();
            assert!(rel(r.get(n).unwrap(), a) < 1e-6, "n = {n}");
        }
        for n in [2, 4, 6] {
            assert!(r.get(n).unwrap().norm() < 1e-6 * r.get(1).unwrap().norm());
        }
        assert_eq!(r.reset_events, 2 * r.periods);
    }

    #[test]
    fn linear_element_matches_transfer_function() {
        let e = ResetElement::Fore {
            f_r_hz: 100.0,
            gamma: 1.0,
        };
        for f in [10.0, 100.0, 1000.0] {
            let r = fourier_oracle(&e, f, 3).unwrap();
            let tf = super::super::fore_base_linear(f, 100.0).unwrap();
            assert!(rel(r.get(1).unwrap(), tf) < 1e-6);
            assert!(r.get(3).unwrap().norm() < 1e-6 * tf.norm());
        }
    }

    #[test]
    fn cglp_element_includes_lead_at_harmonic_frequency() {
        let c = CgLpController::reference_design();
        let e = ResetElement::Cglp(c);
        let r = fourier_oracle(&e, 200.0, 3).unwrap();
        for n in [1, 3] {
            assert!(rel(r.get(n).unwrap(), e.analytic(n, 200.0).unwrap()) < 1e-4);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let e = ResetElement::Fore {
            f_r_hz: 100.0,
            gamma: 0.3,
        };
        assert!(fourier_oracle(&e, 0.0, 3).is_err());
        assert!(fourier_oracle(&e, 10.0, 0).is_err());
        let short = OracleSettings {
            settle_periods: Some(2),
            ..OracleSettings::default()
        };
        assert!(fourier_oracle_with(&e, 10.0, 3, &short).is_err());
    }

    #[test]
    fn unsettled_run_reports_drift() {
        // Slow FORE, very few settling periods: transient still visible.
        let e = ResetElement::Fore {
            f_r_hz: 1.0,
            gamma: 1.0,
        };
        let s = OracleSettings {
            settle_periods: Some(10),
            drift_tolerance: 1e-5,
            ..OracleSettings::default()
        };
        assert!(matches!(
            fourier_oracle_with(&e, 100.0, 1, &s),
            Err(Error::Convergence(_))
        ));
    }
}
