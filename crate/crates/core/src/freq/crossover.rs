use serde::Serialize;

use super::{bode, nearest_branch_deg, FrequencyResponse};
use crate::error::{Error, Result};

/// Grid density used to bracket the crossover before bisection.
pub const CROSSOVER_PPD: usize = 50;
/// Relative width of the final bisection bracket.
pub const CROSSOVER_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopMetrics {
    pub f_c_hz: f64,
    /// Phase margin `∠L(f_c) + 180°`, from the continuous phase branch.
    pub phi_deg: f64,
    /// Evaluation point; `1` unless the caller sets it.
    pub kappa: f64,
    /// False when |L| was seen to increase somewhere on the bracketing grid.
    pub monotone: bool,
}

impl LoopMetrics {
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }
}

/// Gain crossover `|L(f_c)| = 1` on `[f_lo, f_hi]`.
///
/// The first downward crossing on a 50 points/decade grid is refined by
/// bisection in log-frequency.
pub fn crossover<S: FrequencyResponse + ?Sized>(
    open_loop: &S,
    f_lo: f64,
    f_hi: f64,
) -> Result<LoopMetrics> {
    let grid = bode(open_loop, f_lo, f_hi, CROSSOVER_PPD)?;
    let m = &grid.magnitude_db;
    let k = (0..grid.len() - 1)
        .find(|&k| m[k] > 0.0 && m[k + 1] <= 0.0)
        .ok_or(Error::Bracket { f_lo, f_hi })?;
    let monotone = m.windows(2).all(|w| w[1] < w[0]);

    let (mut lo, mut hi) = (grid.frequencies[k], grid.frequencies[k + 1]);
    while hi / lo - 1.0 > CROSSOVER_REL_TOL {
        let mid = (lo * hi).sqrt();
        if open_loop.eval(mid)?.norm() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f_c = (lo * hi).sqrt();
    let v = open_loop.eval(f_c)?;
    let phase = nearest_branch_deg(v.arg().to_degrees(), grid.phase_at(f_c));
    Ok(LoopMetrics {
        f_c_hz: f_c,
        phi_deg: phase + 180.0,
        kappa: 1.0,
        monotone,
    })
}
