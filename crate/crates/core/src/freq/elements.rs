use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_freq, FrequencyResponse, Series};
use crate::error::{Error, Result};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Piezo stage model: first-order electrical stage times a lightly damped
/// mechanical mode whose DC gain carries the multiplicative uncertainty κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantModel {
    #[serde(rename = "K_e")]
    pub k_e: f64,
    pub f_e_hz: f64,
    #[serde(rename = "K_m")]
    pub k_m: f64,
    pub f_m_hz: f64,
    pub xi_m: f64,
    pub kappa_max: f64,
}

impl PlantModel {
    pub fn new(k_e: f64, f_e_hz: f64, k_m: f64, f_m_hz: f64, xi_m: f64, kappa_max: f64) -> Result<Self> {
        let m = Self {
            k_e,
            f_e_hz,
            k_m,
            f_m_hz,
            xi_m,
            kappa_max,
        };
        m.validate()?;
        Ok(m)
    }

    /// The identified P-621.1CD stage with its E712 amplifier.
    pub fn piezo_stage() -> Self {
        Self {
            k_e: 10.0,
            f_e_hz: 935.0,
            k_m: 0.4986,
            f_m_hz: 747.0,
            xi_m: 0.0089,
            kappa_max: 1.6165,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("K_e", self.k_e)?;
        positive("f_e_hz", self.f_e_hz)?;
        positive("K_m", self.k_m)?;
        positive("f_m_hz", self.f_m_hz)?;
        if !(self.xi_m > 0.0 && self.xi_m < 1.0) {
            return Err(Error::domain("xi_m", self.xi_m, "(0, 1)"));
        }
        if !(self.kappa_max >= 1.0 && self.kappa_max.is_finite()) {
            return Err(Error::domain("kappa_max", self.kappa_max, "[1, inf)"));
        }
        Ok(())
    }

    pub fn check_kappa(&self, kappa: f64) -> Result<()> {
        if !(1.0..=self.kappa_max).contains(&kappa) {
            return Err(Error::domain("kappa", kappa, format!("[1, {}]", self.kappa_max)));
        }
        Ok(())
    }

    pub fn eval(&self, f_hz: f64, kappa: f64) -> Result<Complex64> {
        eval_plant(f_hz, kappa, self)
    }

    /// The plant frozen at one value of κ.
    pub fn at(&self, kappa: f64) -> Result<Plant> {
        self.check_kappa(kappa)?;
        Ok(Plant { model: *self, kappa })
    }

    pub fn nominal(&self) -> Plant {
        Plant {
            model: *self,
            kappa: 1.0,
        }
    }

    pub fn worst(&self) -> Plant {
        Plant {
            model: *self,
            kappa: self.kappa_max,
        }
    }

    /// `n` log-spaced values of κ on `[1, κ̄]` with exact end points.
    pub fn kappa_grid(&self, n: usize) -> Vec<f64> {
        kappa_grid(self.kappa_max, n)
    }
}

/// `n` log-spaced values on `[1, kappa_max]` with exact end points.
pub fn kappa_grid(kappa_max: f64, n: usize) -> Vec<f64> {
    if n <= 1 || kappa_max == 1.0 {
        return vec![1.0];
    }
    let mut g: Vec<f64> = (0..n)
        .map(|i| kappa_max.powf(i as f64 / (n - 1) as f64))
        .collect();
    g[0] = 1.0;
    g[n - 1] = kappa_max;
    g
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(what, v, "(0, inf)"))
    }
}

pub fn eval_plant(f_hz: f64, kappa: f64, model: &PlantModel) -> Result<Complex64> {
    check_freq(f_hz)?;
    model.check_kappa(kappa)?;
    let electrical = model.k_e / (J * (f_hz / model.f_e_hz) + 1.0);
    let s = J * (f_hz / model.f_m_hz);
    let mechanical = kappa * model.k_m / (s * s + 2.0 * model.xi_m * s + 1.0);
    Ok(electrical * mechanical)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub model: PlantModel,
    pub kappa: f64,
}

impl FrequencyResponse for Plant {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        eval_plant(f_hz, self.kappa, &self.model)
    }
}

/// Notch that cancels the plant resonance and re-places it with damping `xi_N`.
pub fn eval_notch(f_hz: f64, model: &PlantModel, xi_n: f64) -> Result<Complex64> {
    check_freq(f_hz)?;
    let s = J * (f_hz / model.f_m_hz);
    Ok((s * s + 2.0 * model.xi_m * s + 1.0) / (s * s + 2.0 * xi_n * s + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Notch {
    pub model: PlantModel,
    pub xi_n: f64,
}

impl FrequencyResponse for Notch {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        eval_notch(f_hz, &self.model, self.xi_n)
    }
}

/// Second-order PI, `(1 + ω_i/jω)(1 + ω_i'/jω)`.
pub fn eval_pi2(f_hz: f64, f_i_hz: f64, f_i_prime_hz: f64) -> Result<Complex64> {
    check_freq(f_hz)?;
    if f_hz == 0.0 {
        return Err(Error::Singularity("PI2"));
    }
    let jf = J * f_hz;
    Ok((1.0 + f_i_hz / jf) * (1.0 + f_i_prime_hz / jf))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi2 {
    pub f_i_hz: f64,
    pub f_i_prime_hz: f64,
}

impl FrequencyResponse for Pi2 {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        eval_pi2(f_hz, self.f_i_hz, self.f_i_prime_hz)
    }
}

/// Linear controller `K_P · C_PI2 · C_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearControllerParams {
    pub f_i_hz: f64,
    pub f_i_prime_hz: f64,
    #[serde(rename = "xi_N")]
    pub xi_n: f64,
    #[serde(rename = "K_P")]
    pub k_p: f64,
}

impl LinearControllerParams {
    pub fn new(f_i_hz: f64, f_i_prime_hz: f64, xi_n: f64, k_p: f64) -> Result<Self> {
        let p = Self {
            f_i_hz,
            f_i_prime_hz,
            xi_n,
            k_p,
        };
        p.validate()?;
        Ok(p)
    }

    /// Hand-picked elements of the robust linear design with its tuned gain.
    pub fn robust_design() -> Self {
        Self {
            f_i_hz: 300.0,
            f_i_prime_hz: 40.0,
            xi_n: 1.0,
            k_p: 0.1303,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("f_i_hz", self.f_i_hz)?;
        positive("f_i_prime_hz", self.f_i_prime_hz)?;
        positive("xi_N", self.xi_n)?;
        positive("K_P", self.k_p)
    }

    pub fn with_gain(mut self, k_p: f64) -> Self {
        self.k_p = k_p;
        self
    }

    pub fn pi2(&self) -> Pi2 {
        Pi2 {
            f_i_hz: self.f_i_hz,
            f_i_prime_hz: self.f_i_prime_hz,
        }
    }

    pub fn notch(&self, model: &PlantModel) -> Notch {
        Notch {
            model: *model,
            xi_n: self.xi_n,
        }
    }

    /// `C = C_PI2 · C_N`, without the proportional gain.
    pub fn shape(&self, model: &PlantModel) -> Series {
        Series::new().then(self.pi2()).then(self.notch(model))
    }

    /// `K_P · C · P(κ)`.
    pub fn open_loop(&self, model: &PlantModel, kappa: f64) -> Result<Series> {
        Ok(Series::new()
            .then(super::Scaled::new(self.k_p, self.shape(model)))
            .then(model.at(kappa)?))
    }
}

/// Ideal pure-phase element `exp(j·(1−γ̃)/2·atan(ω/ω̃_r))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexOrderParams {
    pub gamma_tilde: f64,
    pub f_r_tilde_hz: f64,
}

impl ComplexOrderParams {
    pub fn new(gamma_tilde: f64, f_r_tilde_hz: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&gamma_tilde) {
            return Err(Error::domain("gamma_tilde", gamma_tilde, "[-1, 1]"));
        }
        positive("f_r_tilde_hz", f_r_tilde_hz)?;
        Ok(Self {
            gamma_tilde,
            f_r_tilde_hz,
        })
    }

    /// Upper bound on the phase this element can add, in degrees.
    pub fn max_phase_deg(&self) -> f64 {
        ((1.0 - self.gamma_tilde) / 2.0).abs() * 90.0
    }
}

pub fn eval_complex_order(f_hz: f64, params: &ComplexOrderParams) -> Result<Complex64> {
    check_freq(f_hz)?;
    // ω/ω̃_r = f/f̃_r
    let phase = (1.0 - params.gamma_tilde) / 2.0 * (f_hz / params.f_r_tilde_hz).atan();
    Ok(Complex64::from_polar(1.0, phase))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexOrder(pub ComplexOrderParams);

impl FrequencyResponse for ComplexOrder {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        eval_complex_order(f_hz, &self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stage() -> PlantModel {
        PlantModel::piezo_stage()
    }

    #[test]
    fn plant_dc_gain() {
        let p = eval_plant(0.0, 1.0, &stage()).unwrap();
        assert_relative_eq!(p.re, 4.986, epsilon = 1e-12);
        assert_eq!(p.im, 0.0);
        let p = eval_plant(0.0, 1.6165, &stage()).unwrap();
        assert_relative_eq!(p.re, 1.6165 * 4.986, epsilon = 1e-12);
        assert_relative_eq!(p.re, 8.060, epsilon = 1e-3);
    }

    #[test]
    fn plant_at_resonance_matches_direct_arithmetic() {
        // Reference values from an independent complex-arithmetic script.
        let p = eval_plant(747.0, 1.0, &stage()).unwrap();
        assert_relative_eq!(p.norm(), 218.845_133_256_886_4, max_relative = 1e-9);
        assert_relative_eq!(p.arg().to_degrees(), -128.622_423_567_034_05, epsilon = 1e-6);
        // Resonance peak bound: |P_e| · K_m / (2 ξ_m).
        let pe = 10.0 / (1.0f64 + (747.0f64 / 935.0).powi(2)).sqrt();
        assert_relative_eq!(p.norm(), pe * 0.4986 / (2.0 * 0.0089), max_relative = 1e-12);
    }

    #[test]
    fn plant_rejects_bad_kappa_and_frequency() {
        let m = stage();
        assert!(matches!(eval_plant(10.0, 0.99, &m), Err(Error::Domain { .. })));
        assert!(matches!(eval_plant(10.0, 1.7, &m), Err(Error::Domain { .. })));
        assert!(matches!(eval_plant(f64::NAN, 1.0, &m), Err(Error::Argument(_))));
        assert!(matches!(eval_plant(f64::INFINITY, 1.0, &m), Err(Error::Argument(_))));
    }

    #[test]
    fn plant_model_invariants() {
        assert!(PlantModel::new(10.0, 935.0, 0.4986, 747.0, 0.0089, 1.6165).is_ok());
        assert!(PlantModel::new(-1.0, 935.0, 0.4986, 747.0, 0.0089, 1.6165).is_err());
        assert!(PlantModel::new(10.0, 935.0, 0.4986, 747.0, 1.0, 1.6165).is_err());
        assert!(PlantModel::new(10.0, 935.0, 0.4986, 747.0, 0.0089, 0.9).is_err());
    }

    #[test]
    fn notch_limits_and_centre() {
        let m = stage();
        assert_eq!(eval_notch(0.0, &m, 1.0).unwrap(), Complex64::new(1.0, 0.0));
        let hi = eval_notch(1e9, &m, 1.0).unwrap();
        assert_relative_eq!(hi.re, 1.0, epsilon = 1e-6);
        assert!(hi.im.abs() < 1e-5);
        let c = eval_notch(747.0, &m, 1.0).unwrap();
        assert_relative_eq!(c.norm(), 0.0089, max_relative = 1e-12);
        assert!(c.arg().abs() < 1e-12);
    }

    #[test]
    fn pi2_values() {
        assert!(matches!(eval_pi2(0.0, 300.0, 40.0), Err(Error::Singularity(_))));
        let v = eval_pi2(300.0, 300.0, 40.0).unwrap();
        let expect = Complex64::new(1.0, -1.0) * Complex64::new(1.0, -40.0 / 300.0);
        assert_relative_eq!((v - expect).norm(), 0.0, epsilon = 1e-14);
        let v = eval_pi2(55.0, 55.0, 55.0).unwrap();
        assert_relative_eq!(v.arg().to_degrees(), -90.0, epsilon = 1e-12);
        let v = eval_pi2(1e12, 300.0, 40.0).unwrap();
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn complex_order_values() {
        let p = ComplexOrderParams::new(0.2, 100.0).unwrap();
        assert_eq!(eval_complex_order(0.0, &p).unwrap(), Complex64::new(1.0, 0.0));
        let one = ComplexOrderParams::new(1.0, 100.0).unwrap();
        assert_eq!(eval_complex_order(1234.0, &one).unwrap(), Complex64::new(1.0, 0.0));
        let full = ComplexOrderParams::new(-1.0, 100.0).unwrap();
        let v = eval_complex_order(1e12, &full).unwrap();
        assert_relative_eq!(v.arg().to_degrees(), 90.0, epsilon = 1e-6);
        assert!(ComplexOrderParams::new(1.5, 1.0).is_err());
        assert!(ComplexOrderParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn kappa_grid_has_exact_ends() {
        let g = kappa_grid(1.6165, 33);
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[32], 1.6165);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
