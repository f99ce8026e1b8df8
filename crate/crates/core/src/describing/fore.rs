use std::f64::consts::PI;

use num_complex::Complex64;

use super::J;
use crate::error::{Error, Result};

/// Floor applied to `1 + γ·e^(−π ω_r/ω)` when γ approaches −1.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

fn check_inputs(f_hz: f64, f_r_hz: f64, gamma: f64) -> Result<()> {
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::Argument(format!("describing functions need f > 0, got {f_hz}")));
    }
    if !(f_r_hz > 0.0 && f_r_hz.is_finite()) {
        return Err(Error::domain("f_r_hz", f_r_hz, "(0, inf)"));
    }
    if !(-1.0..=1.0).contains(&gamma) {
        return Err(Error::domain("gamma", gamma, "[-1, 1]"));
    }
    Ok(())
}

/// Real factor `Θ(ω)` of the reset contribution, with a flag set when the
/// `1 + γ·e^(−π ω_r/ω)` denominator hit [`DENOMINATOR_FLOOR`].
///
/// `Θ = 2ω²(1−γ)(1+e^(−πω_r/ω)) / (π(1+γe^(−πω_r/ω))(ω²+ω_r²))`
pub fn reset_term(f_hz: f64, f_r_hz: f64, gamma: f64) -> Result<(f64, bool)> {
    check_inputs(f_hz, f_r_hz, gamma)?;
    let e = (-PI * f_r_hz / f_hz).exp();
    let mut den = 1.0 + gamma * e;
    let flagged = den.abs() < DENOMINATOR_FLOOR;
    if flagged {
        den = DENOMINATOR_FLOOR;
    }
    let f2 = f_hz * f_hz;
    let theta = 2.0 * (1.0 - gamma) * (1.0 + e) / (PI * den) * (f2 / (f2 + f_r_hz * f_r_hz));
    Ok((theta, flagged))
}

/// Base-linear FORE, `1 / (jω/ω_r + 1)`.
pub fn fore_base_linear(f_hz: f64, f_r_hz: f64) -> Result<Complex64> {
    crate::freq::check_freq(f_hz)?;
    Ok(1.0 / (J * (f_hz / f_r_hz) + 1.0))
}

pub fn fore_sidf_flagged(f_hz: f64, f_r_hz: f64, gamma: f64) -> Result<(Complex64, bool)> {
    let (theta, flagged) = reset_term(f_hz, f_r_hz, gamma)?;
    let v = (1.0 + J * theta) / (J * (f_hz / f_r_hz) + 1.0);
    Ok((v, flagged))
}

/// First-harmonic describing function `𝓡_1` of the FORE.
pub fn fore_sidf(f_hz: f64, f_r_hz: f64, gamma: f64) -> Result<Complex64> {
    fore_sidf_flagged(f_hz, f_r_hz, gamma).map(|(v, _)| v)
}

/// Higher-order describing function `𝓡_n`, `n ≥ 2`. Zero for even `n`.
pub fn fore_hosidf(n: usize, f_hz: f64, f_r_hz: f64, gamma: f64) -> Result<Complex64> {
    if n < 2 {
        return Err(Error::Argument(format!(
            "fore_hosidf needs n >= 2 (got {n}); use fore_sidf for n = 1"
        )));
    }
    let (theta, _) = reset_term(f_hz, f_r_hz, gamma)?;
    if n.is_multiple_of(2) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(J * theta / (J * (n as f64 * f_hz / f_r_hz) + 1.0))
}

/// Correction factor that puts the lead zero on the high-frequency corner of
/// the FORE first harmonic: `√(1 + (4(1−γ)/(π(1+γ)))²)`.
pub fn alpha_high_frequency(gamma: f64) -> Result<f64> {
    if !(gamma > -1.0 && gamma <= 1.0) {
        return Err(Error::domain("gamma", gamma, "(-1, 1]"));
    }
    let d = 4.0 * (1.0 - gamma) / (PI * (1.0 + gamma));
    Ok((1.0 + d * d).sqrt())
}

/// Golden-section fit of α on `[1, 2]` minimising the largest deviation of
/// `|𝓡_1(jω)|·|jω/(αω_r) + 1|` from 0 dB over `[ω_r/10, 10·ω_r]`.
pub fn fit_alpha_minimax(gamma: f64, f_r_hz: f64) -> Result<f64> {
    let grid = crate::freq::log_space(f_r_hz / 10.0, f_r_hz * 10.0, 100)?;
    let r1: Vec<(f64, f64)> = grid
        .iter()
        .map(|&f| Ok((f, fore_sidf(f, f_r_hz, gamma)?.norm())))
        .collect::<Result<_>>()?;
    let cost = |alpha: f64| {
        r1.iter()
            .map(|&(f, g)| {
                let z = (J * (f / (alpha * f_r_hz)) + 1.0).norm();
                (20.0 * (g * z).log10()).abs()
            })
            .fold(0.0, f64::max)
    };
    Ok(golden_min(cost, 1.0, 2.0, 1e-8))
}

pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Closed-form periodic steady state of the FORE under sin(ωt), projected
    // by adaptive quadrature in an independent script; f = f_r = 324 Hz, γ = 0.3.
    const X1: Complex64 = Complex64::new(0.614_735_406_314_628_4, -0.385_264_593_685_371_6);
    const X3: Complex64 = Complex64::new(0.068_841_243_788_777_05, 0.022_947_081_262_925_675);
    const X5: Complex64 = Complex64::new(0.044_129_002_428_703_296, 0.008_825_800_485_740_96);

    #[test]
    fn sidf_matches_periodic_solution() {
        let v = fore_sidf(324.0, 324.0, 0.3).unwrap();
        assert_relative_eq!((v - X1).norm() / X1.norm(), 0.0, epsilon = 1e-12);
        let v = fore_hosidf(3, 324.0, 324.0, 0.3).unwrap();
        assert_relative_eq!((v - X3).norm() / X3.norm(), 0.0, epsilon = 1e-12);
        let v = fore_hosidf(5, 324.0, 324.0, 0.3).unwrap();
        assert_relative_eq!((v - X5).norm() / X5.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sidf_limits() {
        let v = fore_sidf(1e-3, 324.0, 0.3).unwrap();
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-5);
        for f in [3.0, 324.0, 5000.0] {
            let v = fore_sidf(f, 324.0, 1.0).unwrap();
            let bl = fore_base_linear(f, 324.0).unwrap();
            assert_eq!(v, bl);
        }
    }

    #[test]
    fn argument_checks() {
        assert!(matches!(fore_sidf(0.0, 324.0, 0.3), Err(Error::Argument(_))));
        assert!(matches!(fore_sidf(10.0, 324.0, 1.01), Err(Error::Domain { .. })));
        assert!(matches!(fore_hosidf(1, 10.0, 324.0, 0.3), Err(Error::Argument(_))));
    }

    #[test]
    fn hosidf_even_zero_and_linear_limit_zero() {
        assert_eq!(fore_hosidf(2, 77.0, 324.0, 0.3).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(fore_hosidf(3, 77.0, 324.0, 1.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn near_minus_one_is_flagged() {
        // At high frequency e^(−πω_r/ω) → 1, so 1 + γe → 0 as γ → −1.
        let (_, flagged) = fore_sidf_flagged(1e15, 1.0, -1.0).unwrap();
        assert!(flagged);
        let (v, flagged) = fore_sidf_flagged(324.0, 324.0, 0.3).unwrap();
        assert!(!flagged);
        assert!(v.norm().is_finite());
    }

    #[test]
    fn alpha_rules() {
        assert_relative_eq!(alpha_high_frequency(0.3).unwrap(), 1.21, epsilon = 5e-3);
        assert_relative_eq!(alpha_high_frequency(1.0).unwrap(), 1.0);
        assert!(alpha_high_frequency(-1.0).is_err());
        let a = fit_alpha_minimax(0.3, 324.0).unwrap();
        assert!(a > 1.0 && a < 2.0);
        // The minimax fit flattens the FORE+zero pair to within a fraction of a dB.
        let g1 = fit_alpha_minimax(1.0, 324.0).unwrap();
        assert_relative_eq!(g1, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_min(|x| (x - 1.37).powi(2), 1.0, 2.0, 1e-10);
        assert_relative_eq!(x, 1.37, epsilon = 1e-8);
    }
}
