use serde::Serialize;

use super::average::Normalization;
use super::linear::RobustTuneResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaComparison {
    pub kappa: f64,
    pub f_c_linear_hz: f64,
    pub f_c_cglp_hz: f64,
    pub gain_pct: f64,
}

/// Comparison of a CgLp design against a linear one over a shared κ grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverGainReport {
    /// Strictly higher crossover at every κ and on average.
    pub holds: bool,
    pub nominal_gain_pct: f64,
    pub worst_gain_pct: f64,
    pub average_gain_pct: f64,
    pub average_gain_pct_span: Option<f64>,
    pub failing_kappas: Vec<f64>,
    pub per_kappa: Vec<KappaComparison>,
}

fn pct(new: f64, old: f64) -> f64 {
    100.0 * (new / old - 1.0)
}

/// Checks `𝒻_c(κ) > f_c(κ)` on the sweep grid and `𝒻̄_c > f̄_c`.
pub fn compare_crossovers(linear: &RobustTuneResult, cglp: &RobustTuneResult) -> Result<CrossoverGainReport> {
    if linear.sweep.len() != cglp.sweep.len()
        || linear
            .sweep
            .iter()
            .zip(&cglp.sweep)
            .any(|(a, b)| (a.kappa - b.kappa).abs() > 1e-12)
    {
        return Err(Error::Argument("designs were swept on different kappa grids".into()));
    }
    let per_kappa: Vec<KappaComparison> = linear
        .sweep
        .iter()
        .zip(&cglp.sweep)
        .map(|(a, b)| KappaComparison {
            kappa: a.kappa,
            f_c_linear_hz: a.f_c_hz,
            f_c_cglp_hz: b.f_c_hz,
            gain_pct: pct(b.f_c_hz, a.f_c_hz),
        })
        .collect();
    let failing_kappas: Vec<f64> = per_kappa
        .iter()
        .filter(|c| c.f_c_cglp_hz <= c.f_c_linear_hz)
        .map(|c| c.kappa)
        .collect();
    let average_gain_pct = pct(cglp.f_c_average_hz, linear.f_c_average_hz);
    let average_gain_pct_span = match (
        cglp.average(Normalization::CrossoverSpan),
        linear.average(Normalization::CrossoverSpan),
    ) {
        (Some(c), Some(l)) => Some(pct(c, l)),
        _ => None,
    };
    Ok(CrossoverGainReport {
        holds: failing_kappas.is_empty() && cglp.f_c_average_hz > linear.f_c_average_hz,
        nominal_gain_pct: pct(cglp.f_c_nominal_hz, linear.f_c_nominal_hz),
        worst_gain_pct: pct(cglp.f_c_worst_hz, linear.f_c_worst_hz),
        average_gain_pct,
        average_gain_pct_span,
        failing_kappas,
        per_kappa,
    })
}
