use serde::Serialize;

use crate::error::{Error, Result};
use crate::freq::{bode, nearest_branch_deg, BodeGrid, FrequencyResponse};

/// Grid density used to detect band intervals before bisection.
pub const BAND_PPD: usize = 200;

/// Frequencies where the open-loop phase enters and leaves the admissible
/// margin band, plus the surrounding extent where it stays below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseBand {
    #[serde(rename = "f_a_hz")]
    pub lower_extent_hz: f64,
    #[serde(rename = "f_b_hz")]
    pub entry_hz: f64,
    #[serde(rename = "f_B_hz")]
    pub exit_hz: f64,
    #[serde(rename = "f_A_hz")]
    pub upper_extent_hz: f64,
    pub phi_m_deg: f64,
    #[serde(rename = "phi_M_deg")]
    pub phi_max_deg: f64,
    /// Largest `∠L + 180°` inside `[entry, exit]`.
    pub peak_margin_deg: f64,
    pub peak_hz: f64,
}

impl PhaseBand {
    /// Whether the whole band also respects the upper margin bound.
    pub fn within_upper(&self) -> bool {
        self.peak_margin_deg < self.phi_max_deg
    }

    pub fn is_ordered(&self) -> bool {
        self.lower_extent_hz < self.entry_hz
            && self.entry_hz < self.exit_hz
            && self.exit_hz < self.upper_extent_hz
    }
}

pub(crate) struct PhaseProbe<'a, S: ?Sized> {
    pub system: &'a S,
    pub grid: BodeGrid,
}

impl<'a, S: FrequencyResponse + ?Sized> PhaseProbe<'a, S> {
    pub fn new(system: &'a S, f_lo: f64, f_hi: f64, ppd: usize) -> Result<Self> {
        Ok(Self {
            system,
            grid: bode(system, f_lo, f_hi, ppd)?,
        })
    }

    /// Continuous-branch phase at `f_hz`, in degrees.
    pub fn phase(&self, f_hz: f64) -> Result<f64> {
        let raw = self.system.eval(f_hz)?.arg().to_degrees();
        Ok(nearest_branch_deg(raw, self.grid.phase_at(f_hz)))
    }

    /// Bisects `phase − level` on a bracket with a sign change.
    fn crossing(&self, mut lo: f64, mut hi: f64, level: f64) -> Result<f64> {
        let above_lo = self.phase(lo)? >= level;
        while hi / lo - 1.0 > 1e-10 {
            let mid = (lo * hi).sqrt();
            if (self.phase(mid)? >= level) == above_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo * hi).sqrt())
    }
}

/// Locates the single interval of `[f_lo, f_hi]` on which
/// `∠L ≥ −180° + φ_m`.
pub fn find_phase_band<S: FrequencyResponse + ?Sized>(
    open_loop: &S,
    phi_m_deg: f64,
    phi_max_deg: f64,
    f_lo: f64,
    f_hi: f64,
) -> Result<PhaseBand> {
    find_phase_band_with(open_loop, phi_m_deg, phi_max_deg, f_lo, f_hi, BAND_PPD)
}

pub fn find_phase_band_with<S: FrequencyResponse + ?Sized>(
    open_loop: &S,
    phi_m_deg: f64,
    phi_max_deg: f64,
    f_lo: f64,
    f_hi: f64,
    ppd: usize,
) -> Result<PhaseBand> {
    if phi_m_deg.is_nan() || phi_max_deg.is_nan() || phi_m_deg >= phi_max_deg {
        return Err(Error::Argument(format!(
            "margin bounds need phi_m < phi_M, got [{phi_m_deg}, {phi_max_deg}]"
        )));
    }
    let probe = PhaseProbe::new(open_loop, f_lo, f_hi, ppd)?;
    band_on_probe(&probe, phi_m_deg, phi_max_deg)
}

pub(crate) fn band_on_probe<S: FrequencyResponse + ?Sized>(
    probe: &PhaseProbe<'_, S>,
    phi_m_deg: f64,
    phi_max_deg: f64,
) -> Result<PhaseBand> {
    let (f_lo, f_hi) = (probe.grid.frequencies[0], probe.grid.frequencies[probe.grid.len() - 1]);
    let level = -180.0 + phi_m_deg;
    let g = &probe.grid;
    let inside: Vec<bool> = g.phase_deg.iter().map(|&p| p >= level).collect();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < inside.len() {
        if inside[k] {
            let start = k;
            while k + 1 < inside.len() && inside[k + 1] {
                k += 1;
            }
            runs.push((start, k));
        }
        k += 1;
    }
    let last = g.len() - 1;
    let to_interval = |&(a, b): &(usize, usize)| (g.frequencies[a], g.frequencies[b]);
    match runs.as_slice() {
        [] => Err(Error::Infeasible(format!(
            "phase never reaches {level} deg on [{f_lo}, {f_hi}] Hz"
        ))),
        [(a, b)] if *a == 0 || *b == last => Err(Error::Infeasible(format!(
            "phase band runs into the search range edge on [{f_lo}, {f_hi}] Hz"
        ))),
        [(a, b)] => {
            let entry = probe.crossing(g.frequencies[a - 1], g.frequencies[*a], level)?;
            let exit = probe.crossing(g.frequencies[*b], g.frequencies[b + 1], level)?;
            let (peak_k, peak) = (*a..=*b)
                .map(|k| (k, g.phase_deg[k]))
                .fold((*a, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            let (peak_hz, peak) = refine_peak(probe, g, peak_k, peak)?;
            Ok(PhaseBand {
                lower_extent_hz: f_lo,
                entry_hz: entry,
                exit_hz: exit,
                upper_extent_hz: f_hi,
                phi_m_deg,
                phi_max_deg,
                peak_margin_deg: peak + 180.0,
                peak_hz,
            })
        }
        many => Err(Error::AmbiguousBand {
            intervals: many.iter().map(to_interval).collect(),
        }),
    }
}

fn refine_peak<S: FrequencyResponse + ?Sized>(
    probe: &PhaseProbe<'_, S>,
    g: &BodeGrid,
    k: usize,
    grid_peak: f64,
) -> Result<(f64, f64)> {
    let lo = g.frequencies[k.saturating_sub(1)].ln();
    let hi = g.frequencies[(k + 1).min(g.len() - 1)].ln();
    let mut best = (g.frequencies[k], grid_peak);
    // Golden section in log-frequency; failures of eval propagate.
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if probe.phase(c.exp())? > probe.phase(d.exp())? {
            b = d;
        } else {
            a = c;
        }
    }
    let f = (0.5 * (a + b)).exp();
    let p = probe.phase(f)?;
    if p > best.1 {
        best = (f, p);
    }
    Ok(best)
}

/// Largest tolerable `κ̄` for a loop shape with the given band:
/// `|C·P(f_b)| / |C·P(f_B)|`.
pub fn kappa_bound<C, P>(controller: &C, plant_nominal: &P, band: &PhaseBand) -> Result<f64>
where
    C: FrequencyResponse + ?Sized,
    P: FrequencyResponse + ?Sized,
{
    let at = |f: f64| -> Result<f64> { Ok((controller.eval(f)? * plant_nominal.eval(f)?).norm()) };
    Ok(at(band.entry_hz)? / at(band.exit_hz)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::{system, ComplexOrder, ComplexOrderParams, LinearControllerParams, PlantModel, Series};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn linear_shape() -> Series {
        let m = PlantModel::piezo_stage();
        LinearControllerParams::robust_design().shape(&m).then(m.nominal())
    }

    #[test]
    fn robust_linear_band() {
        let b = find_phase_band(&linear_shape(), 60.0, 71.0, 1.0, 1e4).unwrap();
        assert!(b.is_ordered());
        assert_relative_eq!(b.exit_hz, 376.0, max_relative = 0.01);
        assert!(b.entry_hz < 100.0);
        assert!(b.within_upper());
        assert_relative_eq!(b.peak_margin_deg, 70.45, epsilon = 0.05);
    }

    #[test]
    fn double_integrator_never_enters() {
        let s = system(|f| Ok(Complex64::from_polar(1.0 / (f * f), -std::f64::consts::PI)));
        assert!(matches!(
            find_phase_band(&s, 30.0, 60.0, 1.0, 1e3),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn two_bumps_are_ambiguous() {
        // Pure-phase system with two separated lead bumps on a -180 deg floor.
        let s = system(|f| {
            let bump = |fc: f64| (-(f / fc).log10().powi(2) / 0.1).exp();
            let phase = -180.0 + 70.0 * (bump(10.0) + bump(1000.0));
            Ok(Complex64::from_polar(1.0, phase.to_radians()))
        });
        let r = find_phase_band(&s, 40.0, 80.0, 1.0, 1e5);
        assert!(matches!(r, Err(Error::AmbiguousBand { ref intervals }) if intervals.len() == 2), "{r:?}");
    }

    #[test]
    fn complex_order_widens_band_and_bound() {
        let m = PlantModel::piezo_stage();
        let lin = LinearControllerParams::robust_design();
        let base = find_phase_band(&linear_shape(), 60.0, 71.0, 1.0, 1e4).unwrap();
        let co = ComplexOrder(ComplexOrderParams::new(0.5, 300.0).unwrap());
        let widened = linear_shape().then(co);
        let wide = find_phase_band(&widened, 60.0, 71.0, 1.0, 1e4).unwrap();
        assert!(wide.exit_hz > base.exit_hz);
        assert!(wide.entry_hz < base.entry_hz);

        let c = lin.shape(&m);
        let k_lin = kappa_bound(&c, &m.nominal(), &base).unwrap();
        let k_co = kappa_bound(&c, &m.nominal(), &wide).unwrap();
        assert!(k_lin >= m.kappa_max);
        assert!(k_co > k_lin);
    }

    #[test]
    fn degenerate_band_bound_is_one() {
        let m = PlantModel::piezo_stage();
        let c = LinearControllerParams::robust_design().shape(&m);
        let mut b = find_phase_band(&linear_shape(), 60.0, 71.0, 1.0, 1e4).unwrap();
        b.entry_hz = b.exit_hz;
        assert_eq!(kappa_bound(&c, &m.nominal(), &b).unwrap(), 1.0);
    }
}
