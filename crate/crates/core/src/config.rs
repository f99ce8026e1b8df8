//! Project configuration: one JSON document holding the plant, the linear
//! elements, the CgLp tuning problem, analysis and simulation settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::describing::{CgLpController, DEFAULT_HARMONICS, DEFAULT_TIME_SAMPLES};
use crate::error::{Error, Result};
use crate::freq::{LinearControllerParams, PlantModel};
use crate::sim::ResetMode;
use crate::tuning::{CgLpTuneProblem, MarginBounds, TuneSettings};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CGLP_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub points_per_decade: usize,
    /// Highest harmonic reported by `hosidf`.
    pub n_max: usize,
    /// Harmonics summed in the pseudo-sensitivities.
    pub n_truncation: usize,
    pub time_samples: usize,
    /// κ values used when no `--kappa` flag is given; `[1, κ̄]` when empty.
    pub kappas: Vec<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            f_lo_hz: 1.0,
            f_hi_hz: 1e4,
            points_per_decade: 100,
            n_max: DEFAULT_HARMONICS,
            n_truncation: DEFAULT_HARMONICS,
            time_samples: DEFAULT_TIME_SAMPLES,
            kappas: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    /// Integration step; `1/(100·f_fastest)` of each loop when absent.
    pub dt_s: Option<f64>,
    pub reset: ResetMode,
    pub step_amplitude_um: f64,
    pub step_duration_s: f64,
    pub sine_amplitude_um: f64,
    pub sine_f_hz: f64,
    pub sine_periods: usize,
    pub kappa_points: usize,
    /// Every `trace_stride`-th sample is written to trace CSVs.
    pub trace_stride: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dt_s: None,
            reset: ResetMode::Partial,
            step_amplitude_um: 1.0,
            step_duration_s: 0.2,
            sine_amplitude_um: 1.0,
            sine_f_hz: 50.0,
            sine_periods: 20,
            kappa_points: 11,
            trace_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectConfig {
    pub plant: PlantModel,
    /// PI² and notch elements; `K_P` is the robust linear gain.
    pub linear: LinearControllerParams,
    pub margins: MarginBounds,
    pub tuning: TuneSettings,
    pub cglp_problem: CgLpTuneProblem,
    /// A tuned CgLp design; commands that need one tune it when absent.
    pub cglp: Option<CgLpController>,
    pub analysis: AnalysisSettings,
    pub simulation: SimulationSettings,
    /// Output directory; falls back to `$CGLP_OUT_DIR`, then `out`.
    pub out_dir: Option<PathBuf>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            plant: PlantModel::piezo_stage(),
            linear: LinearControllerParams::robust_design(),
            margins: MarginBounds::default(),
            tuning: TuneSettings::default(),
            cglp_problem: CgLpTuneProblem::default(),
            cglp: None,
            analysis: AnalysisSettings::default(),
            simulation: SimulationSettings::default(),
            out_dir: None,
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive and finite, got {v}")))
    }
}

impl ProjectConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => Error::Config(format!("{}: {other}", path.display())),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Every check runs before any computation; model errors surface as
    /// config errors.
    pub fn validate(&self) -> Result<()> {
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        wrap(self.plant.validate())?;
        wrap(self.linear.validate())?;
        wrap(self.margins.validate())?;
        wrap(self.cglp_problem.validate())?;
        if let Some(c) = &self.cglp {
            wrap(c.validate())?;
        }
        let t = &self.tuning;
        positive("tuning.f_lo_hz", t.f_lo_hz)?;
        positive("tuning.f_hi_hz", t.f_hi_hz)?;
        if t.f_lo_hz >= t.f_hi_hz || t.band_ppd == 0 || t.kappa_points < 2 || t.margin_slack_deg < 0.0 {
            return Err(Error::Config("tuning ranges are inconsistent".into()));
        }
        let a = &self.analysis;
        positive("analysis.f_lo_hz", a.f_lo_hz)?;
        positive("analysis.f_hi_hz", a.f_hi_hz)?;
        if a.f_lo_hz >= a.f_hi_hz || a.points_per_decade == 0 || a.n_max == 0 || a.n_truncation == 0 {
            return Err(Error::Config("analysis ranges are inconsistent".into()));
        }
        for &k in &a.kappas {
            wrap(self.plant.check_kappa(k))?;
        }
        let s = &self.simulation;
        if let Some(dt) = s.dt_s {
            positive("simulation.dt_s", dt)?;
        }
        positive("simulation.step_duration_s", s.step_duration_s)?;
        positive("simulation.sine_f_hz", s.sine_f_hz)?;
        if !(s.step_amplitude_um.is_finite() && s.step_amplitude_um != 0.0)
            || !(s.sine_amplitude_um.is_finite() && s.sine_amplitude_um != 0.0)
        {
            return Err(Error::Config("simulation amplitudes must be finite and non-zero".into()));
        }
        if s.sine_periods < 20 || s.kappa_points < 3 || s.trace_stride == 0 {
            return Err(Error::Config(
                "simulation needs >= 20 sine periods, >= 3 kappa points and trace_stride >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Configured κ list, or `[1, κ̄]`.
    pub fn kappas(&self) -> Vec<f64> {
        if self.analysis.kappas.is_empty() {
            vec![1.0, self.plant.kappa_max]
        } else {
            self.analysis.kappas.clone()
        }
    }

    /// Explicit directory, else the configured one, else `$CGLP_OUT_DIR`,
    /// else `out`.
    pub fn resolve_out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.out_dir {
            return p.clone();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from("out"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ProjectConfig::default();
        let back = ProjectConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(ProjectConfig::from_json("{}").unwrap(), ProjectConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ProjectConfig::from_json(r#"{"plant_x": 1}"#), Err(Error::Config(_))));
        let bad = r#"{"plant": {"K_e": 10, "f_e_hz": 935, "K_m": 0.4986, "f_m_hz": 747, "xi_m": 0.0089, "kappa_max": 1.6165, "extra": 1}}"#;
        assert!(matches!(ProjectConfig::from_json(bad), Err(Error::Config(_))));
    }

    #[test]
    fn non_positive_frequency_rejected() {
        let mut c = ProjectConfig::default();
        c.plant.f_m_hz = -1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ProjectConfig::default();
        c.simulation.sine_f_hz = 0.0;
        assert!(c.validate().is_err());
        let mut c = ProjectConfig::default();
        c.analysis.kappas = vec![1.0, 3.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn out_dir_precedence() {
        let mut c = ProjectConfig::default();
        assert_eq!(c.resolve_out_dir(Some(Path::new("x"))), PathBuf::from("x"));
        c.out_dir = Some(PathBuf::from("cfg"));
        assert_eq!(c.resolve_out_dir(None), PathBuf::from("cfg"));
    }
}
