//! Sinusoidal-input describing functions of the FORE / CgLp reset element.
//!
//! `n = 1` is the SIDF, `n ≥ 2` the higher-order SIDFs. Only odd harmonics
//! are produced by a zero-crossing reset, even ones are exactly zero.

mod fore;
mod harmonics;
mod oracle;
mod pseudo;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{check_freq, FrequencyResponse};

pub use fore::{
    alpha_high_frequency, fit_alpha_minimax, fore_base_linear, fore_hosidf, fore_sidf,
    fore_sidf_flagged, reset_term, DENOMINATOR_FLOOR,
};
pub use harmonics::{
    loop_harmonics, sensitivity_harmonics, sensitivity_harmonics_with, HarmonicAnalysis,
    PhaseReference, Quantity, CONDITIONING_FLOOR, DEFAULT_HARMONICS,
};
pub use oracle::{fourier_oracle, fourier_oracle_with, OracleResult, OracleSettings, ResetElement};
pub use pseudo::{pseudo_sensitivity, PseudoSensitivity, DEFAULT_TIME_SAMPLES};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// FORE followed by a first-order lead filter, plus the loop gain `𝒦_P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgLpController {
    pub gamma: f64,
    pub alpha: f64,
    pub f_r_hz: f64,
    pub f_f_hz: f64,
    #[serde(rename = "K_P")]
    pub k_p: f64,
}

impl CgLpController {
    pub fn new(gamma: f64, alpha: f64, f_r_hz: f64, f_f_hz: f64, k_p: f64) -> Result<Self> {
        let c = Self {
            gamma,
            alpha,
            f_r_hz,
            f_f_hz,
            k_p,
        };
        c.validate()?;
        Ok(c)
    }

    /// The published CgLp design for the piezo stage.
    pub fn reference_design() -> Self {
        Self {
            gamma: 0.3,
            alpha: 1.21,
            f_r_hz: 324.0,
            f_f_hz: 4206.0,
            k_p: 0.1645,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.gamma) {
            return Err(Error::domain("gamma", self.gamma, "[-1, 1]"));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::domain("alpha", self.alpha, "[1, inf)"));
        }
        if !(self.f_r_hz > 0.0 && self.f_r_hz.is_finite()) {
            return Err(Error::domain("f_r_hz", self.f_r_hz, "(0, inf)"));
        }
        if !(self.alpha * self.f_r_hz < self.f_f_hz && self.f_f_hz.is_finite()) {
            return Err(Error::domain(
                "f_f_hz",
                self.f_f_hz,
                format!("(alpha * f_r = {}, inf)", self.alpha * self.f_r_hz),
            ));
        }
        if !(self.k_p > 0.0 && self.k_p.is_finite()) {
            return Err(Error::domain("K_P", self.k_p, "(0, inf)"));
        }
        Ok(())
    }

    pub fn with_gain(mut self, k_p: f64) -> Self {
        self.k_p = k_p;
        self
    }

    pub fn lead(&self) -> LeadFilter {
        LeadFilter {
            zero_hz: self.alpha * self.f_r_hz,
            pole_hz: self.f_f_hz,
        }
    }

    /// `𝓒_1 = 𝓡_1 · C_L`, without `𝒦_P`.
    pub fn sidf(&self) -> CgLpSidf {
        CgLpSidf(*self)
    }

    /// `𝓒_bl = 𝓡_bl · C_L`, the response with resets disabled.
    pub fn base_linear(&self) -> CgLpBaseLinear {
        CgLpBaseLinear(*self)
    }
}

/// `(jω/ω_z + 1) / (jω/ω_f + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadFilter {
    pub zero_hz: f64,
    pub pole_hz: f64,
}

impl FrequencyResponse for LeadFilter {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        check_freq(f_hz)?;
        Ok((J * (f_hz / self.zero_hz) + 1.0) / (J * (f_hz / self.pole_hz) + 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgLpSidf(pub CgLpController);

impl FrequencyResponse for CgLpSidf {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        cglp_response(1, f_hz, &self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgLpBaseLinear(pub CgLpController);

impl FrequencyResponse for CgLpBaseLinear {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        Ok(fore_base_linear(f_hz, self.0.f_r_hz)? * self.0.lead().eval(f_hz)?)
    }
}

/// `n`-th harmonic gain of the CgLp element (no `𝒦_P`): `𝓡_n(jω)·C_L(jnω)`.
pub fn cglp_response(n: usize, f_hz: f64, c: &CgLpController) -> Result<Complex64> {
    match n {
        0 => Err(Error::Argument("harmonic index must be >= 1".into())),
        1 => Ok(fore_sidf(f_hz, c.f_r_hz, c.gamma)? * c.lead().eval(f_hz)?),
        _ => {
            let r = fore_hosidf(n, f_hz, c.f_r_hz, c.gamma)?;
            if r == Complex64::new(0.0, 0.0) {
                return Ok(r);
            }
            Ok(r * c.lead().eval(n as f64 * f_hz)?)
        }
    }
}

/// Largest deviation, in dB, of `|𝓒_1|` from unity on `[f_lo, f_hi]`.
/// A CgLp element that is constant in gain scores close to zero.
pub fn gain_flatness_db(c: &CgLpController, f_lo: f64, f_hi: f64) -> Result<f64> {
    let grid = crate::freq::log_space(f_lo, f_hi, 100)?;
    let mut worst: f64 = 0.0;
    for f in grid {
        let g = cglp_response(1, f, c)?.norm();
        worst = worst.max((20.0 * g.log10()).abs());
    }
    Ok(worst)
}
