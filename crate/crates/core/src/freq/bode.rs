use std::io::Write;

use super::FrequencyResponse;
use crate::error::{Error, Result};

/// `points_per_decade` log-spaced frequencies covering `[f_lo, f_hi]`, both
/// end points included.
pub fn log_space(f_lo: f64, f_hi: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(f_lo > 0.0 && f_hi > f_lo && f_hi.is_finite()) {
        return Err(Error::Argument(format!(
            "frequency range [{f_lo}, {f_hi}] must satisfy 0 < f_lo < f_hi"
        )));
    }
    if points_per_decade == 0 {
        return Err(Error::Argument("points_per_decade must be positive".into()));
    }
    let decades = (f_hi / f_lo).log10();
    let n = ((decades * points_per_decade as f64).ceil() as usize).max(1) + 1;
    let (a, b) = (f_lo.log10(), f_hi.log10());
    let mut out: Vec<f64> = (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect();
    out[0] = f_lo;
    out[n - 1] = f_hi;
    Ok(out)
}

/// Nearest-branch unwrapping anchored at the first sample.
pub fn unwrap_phase_deg(raw_deg: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw_deg.len());
    for (k, &p) in raw_deg.iter().enumerate() {
        if k == 0 {
            out.push(p);
        } else {
            out.push(nearest_branch_deg(p, out[k - 1]));
        }
    }
    out
}

/// The representative of `raw_deg + 360·k` closest to `reference_deg`.
pub fn nearest_branch_deg(raw_deg: f64, reference_deg: f64) -> f64 {
    raw_deg + 360.0 * ((reference_deg - raw_deg) / 360.0).round()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodeGrid {
    pub frequencies: Vec<f64>,
    pub magnitude_db: Vec<f64>,
    pub phase_deg: Vec<f64>,
}

impl BodeGrid {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Linear interpolation of the unwrapped phase on a log-frequency axis.
    /// Outside the grid the nearest end value is returned.
    pub fn phase_at(&self, f_hz: f64) -> f64 {
        interp_log(&self.frequencies, &self.phase_deg, f_hz)
    }

    pub fn magnitude_db_at(&self, f_hz: f64) -> f64 {
        interp_log(&self.frequencies, &self.magnitude_db, f_hz)
    }

    /// Indices of strict local maxima of the magnitude.
    pub fn magnitude_peaks(&self) -> Vec<usize> {
        (1..self.len().saturating_sub(1))
            .filter(|&k| {
                self.magnitude_db[k] > self.magnitude_db[k - 1]
                    && self.magnitude_db[k] > self.magnitude_db[k + 1]
            })
            .collect()
    }

    /// CSV with header `freq_hz,mag_db,phase_deg`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["freq_hz", "mag_db", "phase_deg"])?;
        for k in 0..self.len() {
            wr.write_record([
                fmt(self.frequencies[k]),
                fmt(self.magnitude_db[k]),
                fmt(self.phase_deg[k]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

fn interp_log(fs: &[f64], ys: &[f64], f: f64) -> f64 {
    if fs.is_empty() {
        return f64::NAN;
    }
    if f <= fs[0] {
        return ys[0];
    }
    if f >= fs[fs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = fs.partition_point(|&x| x <= f) - 1;
    let t = (f.ln() - fs[k].ln()) / (fs[k + 1].ln() - fs[k].ln());
    ys[k] + t * (ys[k + 1] - ys[k])
}

pub fn bode<S: FrequencyResponse + ?Sized>(
    system: &S,
    f_lo: f64,
    f_hi: f64,
    points_per_decade: usize,
) -> Result<BodeGrid> {
    if points_per_decade < 10 {
        return Err(Error::Argument(format!(
            "points_per_decade = {points_per_decade} < 10"
        )));
    }
    let frequencies = log_space(f_lo, f_hi, points_per_decade)?;
    let mut magnitude_db = Vec::with_capacity(frequencies.len());
    let mut raw = Vec::with_capacity(frequencies.len());
    for &f in &frequencies {
        let v = system.eval(f)?;
        magnitude_db.push(20.0 * v.norm().log10());
        raw.push(v.arg().to_degrees());
    }
    Ok(BodeGrid {
        frequencies,
        magnitude_db,
        phase_deg: unwrap_phase_deg(&raw),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::{system, PlantModel};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn log_space_ends_and_density() {
        let g = log_space(1.0, 1e4, 50).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 1.0);
        assert_eq!(*g.last().unwrap(), 1e4);
        assert!(log_space(0.0, 1.0, 10).is_err());
        assert!(log_space(5.0, 1.0, 10).is_err());
    }

    #[test]
    fn unwrap_removes_branch_jumps() {
        let raw = [170.0, 179.0, -179.0, -170.0, 175.0];
        let u = unwrap_phase_deg(&raw);
        assert_eq!(u, vec![170.0, 179.0, 181.0, 190.0, 175.0]);
    }

    #[test]
    fn plant_bode_dc_and_kappa_invariant_phase() {
        let m = PlantModel::piezo_stage();
        let g1 = bode(&m.nominal(), 1.0, 1e4, 50).unwrap();
        let g2 = bode(&m.worst(), 1.0, 1e4, 50).unwrap();
        assert_relative_eq!(g1.magnitude_db[0], 20.0 * 4.986f64.log10(), epsilon = 1e-3);
        assert_relative_eq!(g1.magnitude_db[0], 13.96, epsilon = 1e-2);
        for k in 0..g1.len() {
            assert_relative_eq!(g1.phase_deg[k], g2.phase_deg[k], epsilon = 1e-9);
            assert_relative_eq!(
                g2.magnitude_db[k] - g1.magnitude_db[k],
                20.0 * 1.6165f64.log10(),
                epsilon = 1e-9
            );
        }
        // Continuous phase through the -180 deg region above the resonance.
        assert!(g1.phase_deg.windows(2).all(|w| (w[1] - w[0]).abs() < 180.0));
        assert!(*g1.phase_deg.last().unwrap() < -180.0);
    }

    #[test]
    fn bode_rejects_sparse_grid() {
        let s = system(|_| Ok(Complex64::new(1.0, 0.0)));
        assert!(bode(&s, 1.0, 10.0, 9).is_err());
        assert!(bode(&s, 10.0, 1.0, 50).is_err());
    }

    #[test]
    fn csv_header() {
        let s = system(|f| Ok(Complex64::new(0.0, f)));
        let g = bode(&s, 1.0, 10.0, 10).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("freq_hz,mag_db,phase_deg\n"));
        assert_eq!(text.lines().count(), g.len() + 1);
    }
}
