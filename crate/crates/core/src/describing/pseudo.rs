use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use super::fore::golden_min;
use super::{sensitivity_harmonics, CgLpController};
use crate::error::{Error, Result};
use crate::freq::{LinearControllerParams, PlantModel};

/// Samples per fundamental period before local refinement.
pub const DEFAULT_TIME_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudoSensitivity {
    pub frequency_hz: f64,
    pub kappa: f64,
    pub s1: f64,
    pub t1: f64,
    pub s_inf: f64,
    pub t_inf: f64,
    pub n_truncation: usize,
    pub time_samples: usize,
}

/// Peak over one period of `Σ |X_n| sin(nθ + ∠X_n)`.
fn peak(harmonics: &[Complex64], samples: usize) -> f64 {
    let live: Vec<(f64, f64, f64)> = harmonics
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(k, v)| ((k + 1) as f64, v.norm(), v.arg()))
        .collect();
    if live.len() == 1 {
        return live[0].1;
    }
    let sum = |th: f64| live.iter().map(|&(n, a, p)| a * (n * th + p).sin()).sum::<f64>();
    let h = TAU / samples as f64;
    let (best_k, best) = (0..samples)
        .map(|k| (k, sum(k as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let th0 = best_k as f64 * h;
    let th = golden_min(|th| -sum(th), th0 - h, th0 + h, 1e-12);
    best.max(sum(th))
}

/// Pseudo-sensitivity `𝓢_∞` and pseudo-complementary sensitivity `𝓣_∞`:
/// the maximum of the truncated harmonic sum over one period.
pub fn pseudo_sensitivity(
    f_hz: f64,
    kappa: f64,
    c: &CgLpController,
    lin: &LinearControllerParams,
    model: &PlantModel,
    n_truncation: usize,
    time_samples: usize,
) -> Result<PseudoSensitivity> {
    if n_truncation == 0 {
        return Err(Error::Argument("n_truncation must be >= 1".into()));
    }
    if time_samples < 64 {
        return Err(Error::Argument(format!("time_samples = {time_samples} < 64")));
    }
    let (s, t) = sensitivity_harmonics(n_truncation, f_hz, kappa, c, lin, model)?;
    Ok(PseudoSensitivity {
        frequency_hz: f_hz,
        kappa,
        s1: s.harmonics[0].norm(),
        t1: t.harmonics[0].norm(),
        s_inf: peak(&s.harmonics, time_samples),
        t_inf: peak(&t.harmonics, time_samples),
        n_truncation,
        time_samples,
    })
}
