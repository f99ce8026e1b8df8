use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance of the κ quadrature.
pub const AVERAGE_REL_TOL: f64 = 1e-6;

/// How `∫₁^κ̄ f_c(κ) dκ` is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide by `f_c(κ̄) − f_c(1)`; the result is dimensionless.
    CrossoverSpan,
    /// Divide by `κ̄ − 1`; the mean crossover in Hz.
    #[default]
    KappaWidth,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::CrossoverSpan => "crossover-span",
            Normalization::KappaWidth => "kappa-width",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crossover-span" => Ok(Normalization::CrossoverSpan),
            "kappa-width" => Ok(Normalization::KappaWidth),
            _ => Err(Error::Argument(format!("unknown normalization {s:?}"))),
        }
    }
}

/// Average crossover over the uncertainty interval `[1, κ̄]`.
pub fn average_crossover<F>(f_c_of_kappa: F, kappa_max: f64, mode: Normalization) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(kappa_max > 1.0 && kappa_max.is_finite()) {
        return Err(Error::Argument(format!(
            "average crossover needs kappa_max > 1, got {kappa_max}"
        )));
    }
    let integral = adaptive_simpson(&f_c_of_kappa, 1.0, kappa_max, AVERAGE_REL_TOL)?;
    let width = match mode {
        Normalization::KappaWidth => kappa_max - 1.0,
        Normalization::CrossoverSpan => f_c_of_kappa(kappa_max)? - f_c_of_kappa(1.0)?,
    };
    if width == 0.0 {
        return Err(Error::Argument(
            "crossover does not move over [1, kappa_max]; span normalisation divides by zero".into(),
        ));
    }
    Ok(integral / width)
}

pub(crate) fn adaptive_simpson<F>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (fa, fm, fb) = (f(a)?, f(0.5 * (a + b))?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_and_linear() {
        let c = average_crossover(|_| Ok(300.0), 1.6, Normalization::KappaWidth).unwrap();
        assert_relative_eq!(c, 300.0, max_relative = 1e-12);
        let l = average_crossover(|k| Ok(100.0 * k), 3.0, Normalization::KappaWidth).unwrap();
        assert_relative_eq!(l, 200.0, max_relative = 1e-12);
        // ∫₁³ 100κ dκ = 400, f_c(3) − f_c(1) = 200.
        let p = average_crossover(|k| Ok(100.0 * k), 3.0, Normalization::CrossoverSpan).unwrap();
        assert_relative_eq!(p, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn smooth_integrand_to_tolerance() {
        let v = average_crossover(|k| Ok(k.sqrt() * 220.0), 1.6165, Normalization::KappaWidth).unwrap();
        let exact = 220.0 * (2.0 / 3.0) * (1.6165f64.powf(1.5) - 1.0) / 0.6165;
        assert_relative_eq!(v, exact, max_relative = 1e-7);
    }

    #[test]
    fn degenerate_interval() {
        assert!(average_crossover(|_| Ok(1.0), 1.0, Normalization::KappaWidth).is_err());
        assert!(average_crossover(|_| Ok(1.0), 1.0, Normalization::CrossoverSpan).is_err());
        assert!(average_crossover(|_| Ok(1.0), 2.0, Normalization::CrossoverSpan).is_err());
    }

    #[test]
    fn parse_modes() {
        assert_eq!("crossover-span".parse::<Normalization>().unwrap(), Normalization::CrossoverSpan);
        assert_eq!("kappa-width".parse::<Normalization>().unwrap(), Normalization::KappaWidth);
        assert!("other".parse::<Normalization>().is_err());
    }
}
