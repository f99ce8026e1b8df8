use serde::{Deserialize, Serialize};

use super::average::{average_crossover, Normalization};
use super::band::{find_phase_band_with, PhaseBand, BAND_PPD};
use crate::error::{Error, Result};
use crate::freq::{crossover, FrequencyResponse, LinearControllerParams, LoopMetrics, PlantModel, Scaled};

/// Admissible phase-margin interval `[φ_m, φ_M]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginBounds {
    pub phi_m_deg: f64,
    #[serde(rename = "phi_M_deg")]
    pub phi_max_deg: f64,
}

impl Default for MarginBounds {
    fn default() -> Self {
        Self {
            phi_m_deg: 60.0,
            phi_max_deg: 71.0,
        }
    }
}

impl MarginBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi_m_deg > 0.0 && self.phi_m_deg < self.phi_max_deg && self.phi_max_deg < 180.0) {
            return Err(Error::Argument(format!(
                "margin bounds need 0 < phi_m < phi_M < 180, got [{}, {}]",
                self.phi_m_deg, self.phi_max_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSettings {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub band_ppd: usize,
    pub kappa_points: usize,
    /// Tolerance on margin checks, absorbing grid and bisection noise.
    pub margin_slack_deg: f64,
}

impl Default for TuneSettings {
    fn default() -> Self {
        Self {
            f_lo_hz: 1.0,
            f_hi_hz: 1e4,
            band_ppd: BAND_PPD,
            kappa_points: 33,
            margin_slack_deg: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustTuneResult {
    #[serde(rename = "K_P_star")]
    pub k_p_star: f64,
    pub f_c_nominal_hz: f64,
    pub f_c_worst_hz: f64,
    pub phi_nominal_deg: f64,
    pub phi_worst_deg: f64,
    /// `∫ f_c dκ / (κ̄ − 1)`.
    pub f_c_average_hz: f64,
    /// `∫ f_c dκ / (f_c(κ̄) − f_c(1))`; absent when κ̄ = 1.
    pub f_c_average_span_normalized: Option<f64>,
    pub kappa_max: f64,
    pub kappa_bound: f64,
    pub feasible: bool,
    /// Every swept κ has its margin inside `[φ_m, φ_M]` up to the slack.
    pub margins_ok: bool,
    pub band: PhaseBand,
    pub sweep: Vec<LoopMetrics>,
}

impl RobustTuneResult {
    pub fn average(&self, mode: Normalization) -> Option<f64> {
        match mode {
            Normalization::KappaWidth => Some(self.f_c_average_hz),
            Normalization::CrossoverSpan => self.f_c_average_span_normalized,
        }
    }
}

/// Crossover of `k_p·κ·shape` on the settings' search range.
pub fn crossover_at<S: FrequencyResponse + ?Sized>(
    shape: &S,
    k_p: f64,
    kappa: f64,
    settings: &TuneSettings,
) -> Result<LoopMetrics> {
    let l = Scaled::new(k_p * kappa, shape);
    Ok(crossover(&l, settings.f_lo_hz, settings.f_hi_hz)?.with_kappa(kappa))
}

/// Places the worst-case crossover on the upper band edge:
/// `K_P* = 1 / (κ̄·|C·P(f_B)|)`, where `shape` is `C·P` at κ = 1 without gain.
pub fn tune_proportional<S: FrequencyResponse + ?Sized>(
    shape: &S,
    kappa_max: f64,
    bounds: &MarginBounds,
    settings: &TuneSettings,
) -> Result<RobustTuneResult> {
    bounds.validate()?;
    if !(kappa_max >= 1.0 && kappa_max.is_finite()) {
        return Err(Error::domain("kappa_max", kappa_max, "[1, inf)"));
    }
    let band = find_phase_band_with(
        shape,
        bounds.phi_m_deg,
        bounds.phi_max_deg,
        settings.f_lo_hz,
        settings.f_hi_hz,
        settings.band_ppd,
    )?;
    let g_exit = shape.eval(band.exit_hz)?.norm();
    let kappa_bound = shape.eval(band.entry_hz)?.norm() / g_exit;
    let k_p = 1.0 / (kappa_max * g_exit);
    evaluate_gain(shape, k_p, kappa_max, kappa_bound, band, bounds, settings)
}

/// Robustness figures of a fixed gain `k_p` over `[1, κ̄]`.
pub(crate) fn evaluate_gain<S: FrequencyResponse + ?Sized>(
    shape: &S,
    k_p: f64,
    kappa_max: f64,
    kappa_bound: f64,
    band: PhaseBand,
    bounds: &MarginBounds,
    settings: &TuneSettings,
) -> Result<RobustTuneResult> {
    let grid = crate::freq::kappa_grid(kappa_max, settings.kappa_points);
    let sweep = grid
        .iter()
        .map(|&k| crossover_at(shape, k_p, k, settings))
        .collect::<Result<Vec<_>>>()?;
    let nominal = sweep[0];
    let worst = sweep[sweep.len() - 1];
    let fc = |k: f64| crossover_at(shape, k_p, k, settings).map(|m| m.f_c_hz);
    let (avg, avg_span) = if kappa_max > 1.0 {
        (
            average_crossover(fc, kappa_max, Normalization::KappaWidth)?,
            average_crossover(fc, kappa_max, Normalization::CrossoverSpan).ok(),
        )
    } else {
        (nominal.f_c_hz, None)
    };
    let slack = settings.margin_slack_deg;
    let margins_ok = sweep
        .iter()
        .all(|m| m.phi_deg >= bounds.phi_m_deg - slack && m.phi_deg <= bounds.phi_max_deg + slack);
    Ok(RobustTuneResult {
        k_p_star: k_p,
        f_c_nominal_hz: nominal.f_c_hz,
        f_c_worst_hz: worst.f_c_hz,
        phi_nominal_deg: nominal.phi_deg,
        phi_worst_deg: worst.phi_deg,
        f_c_average_hz: avg,
        f_c_average_span_normalized: avg_span,
        kappa_max,
        kappa_bound,
        feasible: kappa_max <= kappa_bound * (1.0 + 1e-12),
        margins_ok,
        band,
        sweep,
    })
}

/// Robust tuning of the linear loop `K_P·C_PI2·C_N·P`.
pub fn tune_linear(
    lin: &LinearControllerParams,
    model: &PlantModel,
    bounds: &MarginBounds,
    settings: &TuneSettings,
) -> Result<RobustTuneResult> {
    lin.validate()?;
    model.validate()?;
    let shape = lin.shape(model).then(model.nominal());
    tune_proportional(&shape, model.kappa_max, bounds, settings)
}

/// Gain that puts the κ = 1 crossover of `shape` at `f_c_hz`.
pub fn gain_for_crossover<S: FrequencyResponse + ?Sized>(shape: &S, f_c_hz: f64) -> Result<f64> {
    Ok(1.0 / shape.eval(f_c_hz)?.norm())
}

/// Largest gain in `[k_p, 2·k_p]` keeping every swept margin inside
/// `[φ_m, φ_M]`, found by bisection to 1e−9 relative. Returns `k_p` itself
/// when no larger gain qualifies.
pub fn retune_gain<S: FrequencyResponse + ?Sized>(
    shape: &S,
    k_p: f64,
    kappa_max: f64,
    bounds: &MarginBounds,
    settings: &TuneSettings,
) -> Result<f64> {
    let grid = crate::freq::kappa_grid(kappa_max, settings.kappa_points);
    let ok = |g: f64| -> bool {
        grid.iter().all(|&k| match crossover_at(shape, g, k, settings) {
            Ok(m) => m.phi_deg >= bounds.phi_m_deg - 1e-6 && m.phi_deg <= bounds.phi_max_deg + 1e-6,
            Err(_) => false,
        })
    };
    if !ok(k_p) {
        return Ok(k_p);
    }
    let (mut lo, mut hi) = (k_p, 2.0 * k_p);
    if ok(hi) {
        return Ok(hi);
    }
    while hi / lo - 1.0 > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::system;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn robust_linear_design() {
        let r = tune_linear(
            &LinearControllerParams::robust_design(),
            &PlantModel::piezo_stage(),
            &MarginBounds::default(),
            &TuneSettings::default(),
        )
        .unwrap();
        assert_relative_eq!(r.k_p_star, 0.1303, max_relative = 0.005);
        assert_relative_eq!(r.f_c_nominal_hz, 220.0, max_relative = 0.01);
        assert_relative_eq!(r.f_c_worst_hz, 376.0, max_relative = 0.01);
        assert!((r.phi_nominal_deg - 70.0).abs() < 0.5);
        assert!((r.phi_worst_deg - 60.0).abs() < 1e-3);
        assert!(r.feasible && r.margins_ok);
        assert!(r.kappa_bound > 4.0);
        assert_relative_eq!(r.f_c_worst_hz, r.band.exit_hz, max_relative = 1e-6);
        assert!(r.f_c_average_hz > 220.0 && r.f_c_average_hz < 376.0);
        assert!(r.sweep.windows(2).all(|w| w[1].f_c_hz >= w[0].f_c_hz));
    }

    #[test]
    fn no_uncertainty_puts_nominal_on_band_edge() {
        let m = PlantModel {
            kappa_max: 1.0,
            ..PlantModel::piezo_stage()
        };
        let r = tune_linear(
            &LinearControllerParams::robust_design(),
            &m,
            &MarginBounds::default(),
            &TuneSettings::default(),
        )
        .unwrap();
        assert_relative_eq!(r.f_c_nominal_hz, r.band.exit_hz, max_relative = 1e-6);
        assert_eq!(r.f_c_nominal_hz, r.f_c_worst_hz);
        assert!(r.f_c_average_span_normalized.is_none());
    }

    #[test]
    fn retune_keeps_band_edge_gain() {
        let m = PlantModel::piezo_stage();
        let shape = LinearControllerParams::robust_design().shape(&m).then(m.nominal());
        let s = TuneSettings::default();
        let b = MarginBounds::default();
        let r = tune_proportional(&shape, m.kappa_max, &b, &s).unwrap();
        let k = retune_gain(&shape, r.k_p_star, m.kappa_max, &b, &s).unwrap();
        assert_relative_eq!(k, r.k_p_star, max_relative = 1e-5);
    }

    #[test]
    fn gain_for_crossover_hits_target() {
        let s = system(|f| Ok(1.0 / Complex64::new(0.0, f)));
        let k = gain_for_crossover(&s, 50.0).unwrap();
        let m = crossover_at(&s, k, 1.0, &TuneSettings::default()).unwrap();
        assert_relative_eq!(m.f_c_hz, 50.0, max_relative = 1e-8);
    }
}
