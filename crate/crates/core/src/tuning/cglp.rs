use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::band::{band_on_probe, find_phase_band_with, PhaseProbe};
use super::linear::{crossover_at, evaluate_gain, retune_gain, MarginBounds, RobustTuneResult, TuneSettings};
use crate::describing::{alpha_high_frequency, fit_alpha_minimax, CgLpController};
use crate::error::{Error, Result};
use crate::freq::{FrequencyResponse, LinearControllerParams, PlantModel, Series};

/// Which phase conditions a candidate must meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feasibility {
    /// The SIDF loop's whole band `[f̃_b, f̃_B]` stays under the ceiling.
    #[default]
    AssumptionBand,
    /// Margin inside `[φ_m, φ_M]` at `f_c(1)` and `β·f_c(1)`.
    TwoPoint,
    /// As `TwoPoint` plus 16 points between the two.
    Dense,
}

/// Upper limit on the SIDF loop's phase margin in `AssumptionBand` mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseCeiling {
    /// `φ_M`.
    PhaseMax,
    /// `min(φ_M, φ(1))` of the robust linear design.
    #[default]
    LinearNominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRule {
    /// `√(1 + (4(1−γ)/(π(1+γ)))²)`.
    #[default]
    HighFrequency,
    /// Golden-section minimax fit, see [`fit_alpha_minimax`].
    Minimax,
    Fixed(f64),
}

impl AlphaRule {
    pub fn alpha(&self, gamma: f64, f_r_hz: f64) -> Result<f64> {
        match *self {
            AlphaRule::HighFrequency => alpha_high_frequency(gamma),
            AlphaRule::Minimax => fit_alpha_minimax(gamma, f_r_hz),
            AlphaRule::Fixed(a) => Ok(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CgLpTuneProblem {
    /// Expected ratio `f_c(κ̄)/f_c(1)`.
    pub beta: f64,
    pub gamma_m: f64,
    /// Lower bound on `f_r/f_f`.
    pub nu: f64,
    #[serde(rename = "f_M_hz")]
    pub f_max_hz: f64,
    pub gammas: Vec<f64>,
    pub f_r_grid_hz: Vec<f64>,
    pub f_f_grid_hz: Vec<f64>,
    /// Points per axis of the local refinement over ±1 coarse cell; 0 skips it.
    pub refine_points: usize,
    /// Number of best coarse candidates refined.
    pub refine_seeds: usize,
    pub feasibility: Feasibility,
    pub ceiling: PhaseCeiling,
    pub alpha_rule: AlphaRule,
    /// Grid density of the per-candidate band search.
    pub search_ppd: usize,
    /// Attempt the final gain retune.
    pub retune: bool,
    pub keep_trace: bool,
}

impl Default for CgLpTuneProblem {
    fn default() -> Self {
        Self::with_grid(376.0 / 220.0, 25, 40, 40)
    }
}

impl CgLpTuneProblem {
    /// γ linear on `[γ_m, 1]`, `f_r` log on `[30, 3000]` Hz and `f_f` log on
    /// `[300, 7000]` Hz.
    pub fn with_grid(beta: f64, n_gamma: usize, n_f_r: usize, n_f_f: usize) -> Self {
        let gamma_m = 0.3;
        Self {
            beta,
            gamma_m,
            nu: 1.0 / 13.0,
            f_max_hz: 7000.0,
            gammas: lin_space(gamma_m, 1.0, n_gamma),
            f_r_grid_hz: geom_space(30.0, 3000.0, n_f_r),
            f_f_grid_hz: geom_space(300.0, 7000.0, n_f_f),
            refine_points: 11,
            refine_seeds: 3,
            feasibility: Feasibility::default(),
            ceiling: PhaseCeiling::default(),
            alpha_rule: AlphaRule::default(),
            search_ppd: 100,
            retune: true,
            keep_trace: false,
        }
    }

    /// Default problem with `β` taken from a tuned linear design.
    pub fn from_linear(linear: &RobustTuneResult) -> Self {
        Self {
            beta: linear.f_c_worst_hz / linear.f_c_nominal_hz,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.gamma_m) {
            return Err(Error::domain("gamma_m", self.gamma_m, "[-1, 1]"));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::domain("nu", self.nu, "(0, 1)"));
        }
        if !(self.f_max_hz > 0.0 && self.f_max_hz.is_finite()) {
            return Err(Error::domain("f_M_hz", self.f_max_hz, "(0, inf)"));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::domain("beta", self.beta, "(1, inf)"));
        }
        if self.gammas.is_empty() || self.f_r_grid_hz.is_empty() || self.f_f_grid_hz.is_empty() {
            return Err(Error::Argument("search grids must be non-empty".into()));
        }
        if self.refine_points == 1 {
            return Err(Error::Argument("refine_points must be 0 or >= 2".into()));
        }
        Ok(())
    }
}

fn lin_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn geom_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Per-constraint rejection counts. A candidate may count in several box
/// entries; phase checks are only reached by box-feasible candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ViolationStats {
    pub evaluated: usize,
    pub feasible: usize,
    pub gamma_range: usize,
    pub lead_order: usize,
    pub corner_ratio: usize,
    pub pole_limit: usize,
    pub no_band: usize,
    pub phase_ceiling: usize,
    pub crossover_margin: usize,
    pub numerical: usize,
}

impl ViolationStats {
    fn merge(mut self, o: Self) -> Self {
        self.evaluated += o.evaluated;
        self.feasible += o.feasible;
        self.gamma_range += o.gamma_range;
        self.lead_order += o.lead_order;
        self.corner_ratio += o.corner_ratio;
        self.pole_limit += o.pole_limit;
        self.no_band += o.no_band;
        self.phase_ceiling += o.phase_ceiling;
        self.crossover_margin += o.crossover_margin;
        self.numerical += o.numerical;
        self
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub gamma: f64,
    pub f_r_hz: f64,
    pub f_f_hz: f64,
    pub alpha: f64,
    #[serde(rename = "K_P")]
    pub k_p: f64,
    pub feasible: bool,
    /// `f_c(1)`, NaN when it could not be computed.
    pub fc1_hz: f64,
    /// Upper band edge, where `f_c(κ̄)` is placed; NaN without a band.
    pub fcmax_hz: f64,
}

impl Candidate {
    pub fn controller(&self) -> CgLpController {
        CgLpController {
            gamma: self.gamma,
            alpha: self.alpha,
            f_r_hz: self.f_r_hz,
            f_f_hz: self.f_f_hz,
            k_p: self.k_p,
        }
    }

    /// Larger objective first, then lowest `f_f`, lowest `f_r`, highest γ.
    fn better_than(&self, o: &Candidate) -> bool {
        match self.fc1_hz.partial_cmp(&o.fc1_hz) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => (self.f_f_hz, self.f_r_hz, -self.gamma) < (o.f_f_hz, o.f_r_hz, -o.gamma),
        }
    }
}

/// Constraint slack of the returned design; positive means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintMargins {
    pub gamma_minus_gamma_m: f64,
    pub corner_ratio_minus_nu: f64,
    pub f_max_minus_f_f_hz: f64,
    pub f_f_minus_lead_zero_hz: f64,
    pub ceiling_minus_band_peak_deg: f64,
    /// `∠L_1 + 180° − φ_m` at `f_c(1)` and `β·f_c(1)`.
    pub margin_at_fc1_deg: f64,
    pub margin_at_beta_fc1_deg: f64,
    pub gamma_at_lower_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CgLpDesign {
    pub controller: CgLpController,
    pub robust: RobustTuneResult,
    /// Gain from the band-edge rule before any retune.
    #[serde(rename = "K_P_band_edge")]
    pub k_p_band_edge: f64,
    pub retuned: bool,
    pub margins: ConstraintMargins,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CgLpTuneReport {
    pub design: Option<CgLpDesign>,
    pub stats: ViolationStats,
    pub phase_ceiling_deg: f64,
    pub beta: f64,
    #[serde(skip)]
    pub trace: Vec<Candidate>,
}

impl CgLpTuneReport {
    /// CSV `gamma,f_r_hz,f_f_hz,feasible,fc1_hz,fcmax_hz`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["gamma", "f_r_hz", "f_f_hz", "feasible", "fc1_hz", "fcmax_hz"])?;
        for c in &self.trace {
            wr.write_record([
                crate::freq::fmt(c.gamma),
                crate::freq::fmt(c.f_r_hz),
                crate::freq::fmt(c.f_f_hz),
                u8::from(c.feasible).to_string(),
                crate::freq::fmt(c.fc1_hz),
                crate::freq::fmt(c.fcmax_hz),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// SIDF loop shape `𝓒_1·C·𝒫(κ = 1)` without gain.
pub fn cglp_loop_shape(c: &CgLpController, lin: &LinearControllerParams, model: &PlantModel) -> Series {
    Series::new()
        .then(c.sidf())
        .then(lin.pi2())
        .then(lin.notch(model))
        .then(model.nominal())
}

/// Base-linear loop shape `𝓒_bl·C·𝒫(κ = 1)` without gain.
pub fn cglp_base_linear_shape(
    c: &CgLpController,
    lin: &LinearControllerParams,
    model: &PlantModel,
) -> Series {
    Series::new()
        .then(c.base_linear())
        .then(lin.pi2())
        .then(lin.notch(model))
        .then(model.nominal())
}

struct Context<'a> {
    problem: &'a CgLpTuneProblem,
    lin: &'a LinearControllerParams,
    model: &'a PlantModel,
    bounds: &'a MarginBounds,
    settings: TuneSettings,
    ceiling: f64,
}

struct Evaluation {
    candidate: Candidate,
    stats: ViolationStats,
}

impl Context<'_> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn evaluate(&self, gamma: f64, f_r: f64, f_f: f64) -> Evaluation {
        let p = self.problem;
        let mut st = ViolationStats {
            evaluated: 1,
            ..Default::default()
        };
        let mut cand = Candidate {
            gamma,
            f_r_hz: f_r,
            f_f_hz: f_f,
            alpha: f64::NAN,
            k_p: f64::NAN,
            feasible: false,
            fc1_hz: f64::NAN,
            fcmax_hz: f64::NAN,
        };
        let alpha = match p.alpha_rule.alpha(gamma, f_r) {
            Ok(a) => a,
            Err(_) => {
                st.numerical += 1;
                return Evaluation { candidate: cand, stats: st };
            }
        };
        cand.alpha = alpha;
        let mut box_ok = true;
        if !(gamma >= p.gamma_m && gamma <= 1.0) {
            st.gamma_range += 1;
            box_ok = false;
        }
        if !(alpha * f_r < f_f) {
            st.lead_order += 1;
            box_ok = false;
        }
        if !(f_r > p.nu * f_f) {
            st.corner_ratio += 1;
            box_ok = false;
        }
        if !(f_f < p.f_max_hz) {
            st.pole_limit += 1;
            box_ok = false;
        }
        if !box_ok {
            return Evaluation { candidate: cand, stats: st };
        }
        match self.phase_checks(&mut cand, None) {
            Ok(None) => {
                cand.feasible = true;
                st.feasible += 1;
            }
            Ok(Some(Reject::NoBand)) => st.no_band += 1,
            Ok(Some(Reject::Ceiling)) => st.phase_ceiling += 1,
            Ok(Some(Reject::Margin)) => st.crossover_margin += 1,
            Err(_) => st.numerical += 1,
        }
        Evaluation { candidate: cand, stats: st }
    }

    /// Band, crossover and margin checks. The gain is placed on the band
    /// edge unless `gain` fixes it.
    fn phase_checks(&self, cand: &mut Candidate, gain: Option<f64>) -> Result<Option<Reject>> {
        let c = cand.controller().with_gain(1.0);
        let shape = cglp_loop_shape(&c, self.lin, self.model);
        let s = &self.settings;
        let probe = PhaseProbe::new(&shape, s.f_lo_hz, s.f_hi_hz, self.problem.search_ppd)?;
        let band = match band_on_probe(&probe, self.bounds.phi_m_deg, self.bounds.phi_max_deg) {
            Ok(b) => b,
            Err(Error::Infeasible(_)) | Err(Error::AmbiguousBand { .. }) => return Ok(Some(Reject::NoBand)),
            Err(e) => return Err(e),
        };
        cand.fcmax_hz = band.exit_hz;
        cand.k_p = match gain {
            Some(k) => k,
            None => 1.0 / (self.model.kappa_max * shape.eval(band.exit_hz)?.norm()),
        };
        let fc1 = crossover_at(&shape, cand.k_p, 1.0, s)?.f_c_hz;
        cand.fc1_hz = fc1;

        let margin_ok = |f: f64| -> Result<bool> {
            let m = probe.phase(f)? + 180.0;
            Ok(m >= self.bounds.phi_m_deg - s.margin_slack_deg
                && m <= self.bounds.phi_max_deg + s.margin_slack_deg)
        };
        match self.problem.feasibility {
            Feasibility::AssumptionBand => {
                if band.peak_margin_deg > self.ceiling {
                    return Ok(Some(Reject::Ceiling));
                }
            }
            Feasibility::TwoPoint | Feasibility::Dense => {
                let inner = if self.problem.feasibility == Feasibility::Dense { 16 } else { 0 };
                let hi = self.problem.beta * fc1;
                let pts = std::iter::once(fc1)
                    .chain((1..=inner).map(|i| fc1 * (hi / fc1).powf(i as f64 / (inner + 1) as f64)))
                    .chain(std::iter::once(hi));
                for f in pts {
                    if !margin_ok(f)? {
                        return Ok(Some(Reject::Margin));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Feasible candidates best first, with stats and the optional trace.
    fn search(&self, gammas: &[f64], f_rs: &[f64], f_fs: &[f64]) -> (Vec<Candidate>, ViolationStats, Vec<Candidate>) {
        let n = gammas.len() * f_rs.len() * f_fs.len();
        let evals: Vec<Evaluation> = (0..n)
            .into_par_iter()
            .map(|i| {
                let g = gammas[i / (f_rs.len() * f_fs.len())];
                let r = f_rs[(i / f_fs.len()) % f_rs.len()];
                let f = f_fs[i % f_fs.len()];
                self.evaluate(g, r, f)
            })
            .collect();
        let mut stats = ViolationStats::default();
        let mut ranked = Vec::new();
        for e in &evals {
            stats = stats.merge(e.stats);
            if e.candidate.feasible {
                ranked.push(e.candidate);
            }
        }
        ranked.sort_by(|a, b| {
            if a.better_than(b) {
                Ordering::Less
            } else if b.better_than(a) {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        });
        let trace = if self.problem.keep_trace {
            evals.into_iter().map(|e| e.candidate).collect()
        } else {
            Vec::new()
        };
        (ranked, stats, trace)
    }
}

enum Reject {
    NoBand,
    Ceiling,
    Margin,
}

fn neighbourhood(grid: &[f64], value: f64, points: usize, log: bool) -> Vec<f64> {
    let k = grid
        .iter()
        .position(|&g| g == value)
        .unwrap_or(0);
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(grid.len() - 1)];
    if lo == hi {
        return vec![value];
    }
    if log {
        geom_space(lo, hi, points)
    } else {
        lin_space(lo, hi, points)
    }
}

/// Exhaustive search of `(γ, f_r, f_f)` maximising `f_c(1)` with the gain
/// placed on the SIDF band edge, followed by one local refinement and an
/// optional gain retune.
pub fn tune_cglp(
    problem: &CgLpTuneProblem,
    lin: &LinearControllerParams,
    model: &PlantModel,
    bounds: &MarginBounds,
    settings: &TuneSettings,
    linear: &RobustTuneResult,
) -> Result<CgLpTuneReport> {
    problem.validate()?;
    bounds.validate()?;
    lin.validate()?;
    model.validate()?;
    let ceiling = match problem.ceiling {
        PhaseCeiling::PhaseMax => bounds.phi_max_deg,
        PhaseCeiling::LinearNominal => bounds.phi_max_deg.min(linear.phi_nominal_deg),
    };
    let ctx = Context {
        problem,
        lin,
        model,
        bounds,
        settings: *settings,
        ceiling,
    };

    let (ranked, mut stats, mut trace) =
        ctx.search(&problem.gammas, &problem.f_r_grid_hz, &problem.f_f_grid_hz);
    let mut best = ranked.first().copied();
    if problem.refine_points >= 2 {
        for seed in ranked.iter().take(problem.refine_seeds) {
            let gs = neighbourhood(&problem.gammas, seed.gamma, problem.refine_points, false);
            let rs = neighbourhood(&problem.f_r_grid_hz, seed.f_r_hz, problem.refine_points, true);
            let fs = neighbourhood(&problem.f_f_grid_hz, seed.f_f_hz, problem.refine_points, true);
            let (local, rstats, rtrace) = ctx.search(&gs, &rs, &fs);
            stats = stats.merge(rstats);
            trace.extend(rtrace);
            if let (Some(r), Some(b)) = (local.first(), best) {
                if r.better_than(&b) {
                    best = Some(*r);
                }
            }
        }
    }

    let design = match best {
        None => None,
        Some(b) => Some(finish(&ctx, &b)?),
    };
    Ok(CgLpTuneReport {
        design,
        stats,
        phase_ceiling_deg: ceiling,
        beta: problem.beta,
        trace,
    })
}

/// Robustness figures of a given CgLp design, from its SIDF loop, with
/// its own `𝒦_P`.
pub fn evaluate_cglp(
    c: &CgLpController,
    lin: &LinearControllerParams,
    model: &PlantModel,
    bounds: &MarginBounds,
    settings: &TuneSettings,
) -> Result<RobustTuneResult> {
    c.validate()?;
    bounds.validate()?;
    let shape = cglp_loop_shape(&c.with_gain(1.0), lin, model);
    let band = find_phase_band_with(
        &shape,
        bounds.phi_m_deg,
        bounds.phi_max_deg,
        settings.f_lo_hz,
        settings.f_hi_hz,
        settings.band_ppd,
    )?;
    let bound = shape.eval(band.entry_hz)?.norm() / shape.eval(band.exit_hz)?.norm();
    evaluate_gain(&shape, c.k_p, model.kappa_max, bound, band, bounds, settings)
}

fn finish(ctx: &Context<'_>, best: &Candidate) -> Result<CgLpDesign> {
    let s = &ctx.settings;
    let c0 = best.controller();
    let shape = cglp_loop_shape(&c0.with_gain(1.0), ctx.lin, ctx.model);
    let probe = PhaseProbe::new(&shape, s.f_lo_hz, s.f_hi_hz, s.band_ppd)?;
    let band = band_on_probe(&probe, ctx.bounds.phi_m_deg, ctx.bounds.phi_max_deg)?;
    let g_exit = shape.eval(band.exit_hz)?.norm();
    let bound = shape.eval(band.entry_hz)?.norm() / g_exit;
    let kmax = ctx.model.kappa_max;
    let k_edge = 1.0 / (kmax * g_exit);

    let mut k_p = k_edge;
    let mut retuned = false;
    if ctx.problem.retune {
        let k = retune_gain(&shape, k_edge, kmax, ctx.bounds, s)?;
        if k > k_edge {
            // The retuned design must still pass the same candidate checks.
            let mut cand = *best;
            if matches!(ctx.phase_checks(&mut cand, Some(k)), Ok(None)) {
                k_p = k;
                retuned = true;
            }
        }
    }
    let robust = evaluate_gain(&shape, k_p, kmax, bound, band, ctx.bounds, s)?;
    let controller = c0.with_gain(k_p);
    let fc1 = robust.f_c_nominal_hz;
    let p = ctx.problem;
    let margins = ConstraintMargins {
        gamma_minus_gamma_m: controller.gamma - p.gamma_m,
        corner_ratio_minus_nu: controller.f_r_hz / controller.f_f_hz - p.nu,
        f_max_minus_f_f_hz: p.f_max_hz - controller.f_f_hz,
        f_f_minus_lead_zero_hz: controller.f_f_hz - controller.alpha * controller.f_r_hz,
        ceiling_minus_band_peak_deg: ctx.ceiling - band.peak_margin_deg,
        margin_at_fc1_deg: probe.phase(fc1)? + 180.0 - ctx.bounds.phi_m_deg,
        margin_at_beta_fc1_deg: probe.phase(p.beta * fc1)? + 180.0 - ctx.bounds.phi_m_deg,
        gamma_at_lower_bound: (controller.gamma - p.gamma_m).abs() < 1e-12,
    };
    Ok(CgLpDesign {
        controller,
        robust,
        k_p_band_edge: k_edge,
        retuned,
        margins,
    })
}
