use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{cglp_response, fore_base_linear, fore_sidf, CgLpController};
use crate::error::{Error, Result};
use crate::freq::{FrequencyResponse, LinearControllerParams, PlantModel};

/// Odd harmonics 1 to 9.
pub const DEFAULT_HARMONICS: usize = 9;
/// Smallest admissible `|1 + L|` before a loop is declared ill-conditioned.
pub const CONDITIONING_FLOOR: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Fore,
    Cglp,
    OpenLoop,
    Sensitivity,
    ComplementarySensitivity,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Fore => "fore",
            Quantity::Cglp => "cglp",
            Quantity::OpenLoop => "open-loop",
            Quantity::Sensitivity => "sensitivity",
            Quantity::ComplementarySensitivity => "complementary-sensitivity",
        }
    }
}

/// Which first-harmonic FORE response supplies the unit phase factor
/// `(R/|R|)^(n−1)` of the higher-order sensitivities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseReference {
    #[default]
    Sidf,
    BaseLinear,
}

/// Complex harmonic gains at one excitation frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicAnalysis {
    pub frequency_hz: f64,
    /// `harmonics[n − 1]` is the gain of harmonic `n`.
    pub harmonics: Vec<Complex64>,
    pub quantity: Quantity,
    pub kappa: f64,
}

impl HarmonicAnalysis {
    pub fn n_max(&self) -> usize {
        self.harmonics.len()
    }

    pub fn get(&self, n: usize) -> Option<Complex64> {
        n.checked_sub(1).and_then(|k| self.harmonics.get(k).copied())
    }

    /// `(n, gain)` pairs, skipping the identically zero even harmonics.
    pub fn odd(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.harmonics
            .iter()
            .enumerate()
            .map(|(k, &v)| (k + 1, v))
            .filter(|(n, _)| n % 2 == 1)
    }
}

fn check_request(n_max: usize, f_hz: f64) -> Result<()> {
    if n_max == 0 {
        return Err(Error::Argument("n_max must be >= 1".into()));
    }
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::Argument(format!("harmonic analysis needs f > 0, got {f_hz}")));
    }
    Ok(())
}

/// Linear part `𝒦_P · C(jf) · 𝒫(jf, κ)` of the CgLp loop. The gain comes
/// from the CgLp controller, `lin.k_p` is not used.
fn linear_part(
    f_hz: f64,
    kappa: f64,
    c: &CgLpController,
    lin: &LinearControllerParams,
    model: &PlantModel,
) -> Result<Complex64> {
    Ok(c.k_p * lin.shape(model).eval(f_hz)? * model.eval(f_hz, kappa)?)
}

/// Open-loop harmonics `𝓛_n(jω) = 𝓒_n(jω)·𝒦_P·C(jnω)·𝒫(jnω, κ)`.
pub fn loop_harmonics(
    n_max: usize,
    f_hz: f64,
    kappa: f64,
    c: &CgLpController,
    lin: &LinearControllerParams,
    model: &PlantModel,
) -> Result<HarmonicAnalysis> {
    check_request(n_max, f_hz)?;
    c.validate()?;
    model.check_kappa(kappa)?;
    let mut harmonics = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let cn = cglp_response(n, f_hz, c)?;
        if cn == ZERO {
            harmonics.push(ZERO);
            continue;
        }
        harmonics.push(cn * linear_part(n as f64 * f_hz, kappa, c, lin, model)?);
    }
    Ok(HarmonicAnalysis {
        frequency_hz: f_hz,
        harmonics,
        quantity: Quantity::OpenLoop,
        kappa,
    })
}

/// Sensitivity and complementary-sensitivity harmonics with `R = 𝓡_1`.
pub fn sensitivity_harmonics(
    n_max: usize,
    f_hz: f64,
    kappa: f64,
    c: &CgLpController,
    lin: &LinearControllerParams,
    model: &PlantModel,
) -> Result<(HarmonicAnalysis, HarmonicAnalysis)> {
    sensitivity_harmonics_with(n_max, f_hz, kappa, c, lin, model, PhaseReference::Sidf)
}

/// `𝓢_1 = 1/(1+𝓛_1)`, `𝓣_1 = 𝓛_1/(1+𝓛_1)` and, for `n ≥ 2`,
/// `𝓢_n = −𝓣_n = −S_bl(jnω)·𝓛_n·𝓢_1ⁿ/|𝓢_1|ⁿ⁻¹·(R/|R|)ⁿ⁻¹`.
pub fn sensitivity_harmonics_with(
    n_max: usize,
    f_hz: f64,
    kappa: f64,
    c: &CgLpController,
    lin: &LinearControllerParams,
    model: &PlantModel,
    reference: PhaseReference,
) -> Result<(HarmonicAnalysis, HarmonicAnalysis)> {
    let l = loop_harmonics(n_max, f_hz, kappa, c, lin, model)?;
    let l1 = l.harmonics[0];
    let d1 = 1.0 + l1;
    if d1.norm() < CONDITIONING_FLOOR {
        return Err(Error::Conditioning(d1.norm(), f_hz));
    }
    let s1 = 1.0 / d1;
    let t1 = l1 / d1;
    let r = match reference {
        PhaseReference::Sidf => fore_sidf(f_hz, c.f_r_hz, c.gamma)?,
        PhaseReference::BaseLinear => fore_base_linear(f_hz, c.f_r_hz)?,
    };
    let s1_unit = s1 / s1.norm();
    let r_unit = r / r.norm();

    let mut s = vec![s1];
    let mut t = vec![t1];
    for n in 2..=n_max {
        let ln = l.harmonics[n - 1];
        if ln == ZERO {
            s.push(ZERO);
            t.push(ZERO);
            continue;
        }
        let fn_hz = n as f64 * f_hz;
        let l_bl = c.base_linear().eval(fn_hz)? * linear_part(fn_hz, kappa, c, lin, model)?;
        let d = 1.0 + l_bl;
        if d.norm() < CONDITIONING_FLOOR {
            return Err(Error::Conditioning(d.norm(), fn_hz));
        }
        // 𝓢_1ⁿ/|𝓢_1|ⁿ⁻¹ = 𝓢_1·(𝓢_1/|𝓢_1|)ⁿ⁻¹
        let k = (n - 1) as i32;
        let sn = -(ln / d) * s1 * s1_unit.powi(k) * r_unit.powi(k);
        s.push(sn);
        t.push(-sn);
    }
    let wrap = |harmonics, quantity| HarmonicAnalysis {
        frequency_hz: f_hz,
        harmonics,
        quantity,
        kappa,
    };
    Ok((
        wrap(s, Quantity::Sensitivity),
        wrap(t, Quantity::ComplementarySensitivity),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (CgLpController, LinearControllerParams, PlantModel) {
        (
            CgLpController::reference_design(),
            LinearControllerParams::robust_design(),
            PlantModel::piezo_stage(),
        )
    }

    #[test]
    fn first_harmonic_is_sidf_loop() {
        let (c, lin, m) = setup();
        let l = loop_harmonics(9, 150.0, 1.0, &c, &lin, &m).unwrap();
        let direct = cglp_response(1, 150.0, &c).unwrap()
            * c.k_p
            * lin.shape(&m).eval(150.0).unwrap()
            * m.eval(150.0, 1.0).unwrap();
        assert_relative_eq!((l.get(1).unwrap() - direct).norm(), 0.0, epsilon = 1e-15);
        for n in [2, 4, 6, 8] {
            assert_eq!(l.get(n).unwrap(), ZERO);
        }
        assert_eq!(l.odd().count(), 5);
        assert!(l.get(0).is_none() && l.get(10).is_none());
    }

    #[test]
    fn kappa_scales_every_harmonic() {
        let (c, lin, m) = setup();
        let a = loop_harmonics(9, 80.0, 1.0, &c, &lin, &m).unwrap();
        let b = loop_harmonics(9, 80.0, m.kappa_max, &c, &lin, &m).unwrap();
        for (x, y) in a.harmonics.iter().zip(&b.harmonics) {
            assert_relative_eq!((x * m.kappa_max - y).norm(), 0.0, epsilon = 1e-12 * y.norm().max(1.0));
        }
    }

    #[test]
    fn sensitivity_identities() {
        let (c, lin, m) = setup();
        for f in [10.0, 100.0, 269.0, 700.0] {
            let (s, t) = sensitivity_harmonics(9, f, 1.3, &c, &lin, &m).unwrap();
            assert_relative_eq!((s.harmonics[0] + t.harmonics[0] - 1.0).norm(), 0.0, epsilon = 1e-14);
            for n in 2..=9 {
                assert_eq!(s.get(n).unwrap(), -t.get(n).unwrap());
            }
            assert_eq!(s.get(2).unwrap(), ZERO);
        }
    }

    #[test]
    fn linear_limit_has_no_higher_harmonics() {
        let (c, lin, m) = setup();
        let c = CgLpController { gamma: 1.0, ..c };
        let (s, _) = sensitivity_harmonics(9, 120.0, 1.0, &c, &lin, &m).unwrap();
        for n in 2..=9 {
            assert_eq!(s.get(n).unwrap(), ZERO);
        }
        let l_bl = c.base_linear().eval(120.0).unwrap() * linear_part(120.0, 1.0, &c, &lin, &m).unwrap();
        assert_relative_eq!((s.harmonics[0] - 1.0 / (1.0 + l_bl)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn phase_reference_changes_only_phase() {
        let (c, lin, m) = setup();
        let (a, _) = sensitivity_harmonics_with(9, 200.0, 1.0, &c, &lin, &m, PhaseReference::Sidf).unwrap();
        let (b, _) =
            sensitivity_harmonics_with(9, 200.0, 1.0, &c, &lin, &m, PhaseReference::BaseLinear).unwrap();
        for n in [3, 5, 7, 9] {
            assert_relative_eq!(a.get(n).unwrap().norm(), b.get(n).unwrap().norm(), max_relative = 1e-12);
        }
        assert_ne!(a.get(3), b.get(3));
    }

    #[test]
    fn bad_requests() {
        let (c, lin, m) = setup();
        assert!(loop_harmonics(0, 100.0, 1.0, &c, &lin, &m).is_err());
        assert!(loop_harmonics(3, 0.0, 1.0, &c, &lin, &m).is_err());
        assert!(loop_harmonics(3, 10.0, 2.0, &c, &lin, &m).is_err());
    }
}
