use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::describing::CgLpController;
use crate::error::{Error, Result};
use crate::freq::{check_freq, FrequencyResponse, LinearControllerParams, PlantModel};

pub(crate) const MAX_STATES: usize = 9;
pub(crate) type State = [f64; MAX_STATES];

const FORE: usize = 0;
const LEAD: usize = 1;
const PI1: usize = 2;
const PI2: usize = 3;
const N1: usize = 4;
const N2: usize = 5;
const ELEC: usize = 6;
const M1: usize = 7;
const M2: usize = 8;

/// Controller placed in the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Controller {
    /// `𝒦_P · CgLp · C_PI2 · C_N`; the gain is `cglp.k_p`.
    Cglp {
        cglp: CgLpController,
        shape: LinearControllerParams,
    },
    /// `K_P · C_PI2 · C_N`.
    Linear(LinearControllerParams),
}

impl Controller {
    pub fn gain(&self) -> f64 {
        match self {
            Controller::Cglp { cglp, .. } => cglp.k_p,
            Controller::Linear(lin) => lin.k_p,
        }
    }

    pub fn shape(&self) -> &LinearControllerParams {
        match self {
            Controller::Cglp { shape, .. } => shape,
            Controller::Linear(lin) => lin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Controller::Cglp { cglp, shape } => {
                cglp.validate()?;
                shape.validate()
            }
            Controller::Linear(lin) => lin.validate(),
        }
    }
}

/// What happens to the FORE state at a zero crossing of its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResetMode {
    /// `x ← γ·x`.
    #[default]
    Partial,
    /// `x ← 0`, whatever γ is.
    Zero,
    /// No events at all; the loop runs as its base-linear system.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Block {
    pub name: &'static str,
    pub states: usize,
    pub resettable: bool,
}

/// Closed-loop realization of controller and plant at one κ.
///
/// States, in signal order: FORE, lead, PI² (2), notch (2), electrical,
/// mechanical (2). The linear variant drops the first two.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopStateSpace {
    pub controller: Controller,
    pub model: PlantModel,
    pub kappa: f64,
    pub reset: ResetMode,
    c: Coefficients,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Coefficients {
    has_reset: bool,
    gamma: f64,
    w_r: f64,
    w_f: f64,
    lead_gain: f64,
    lead_mix: f64,
    k_p: f64,
    pi_a: f64,
    pi_b: f64,
    w_m: f64,
    xi_m: f64,
    xi_n: f64,
    w_e: f64,
    k_e: f64,
    mech_gain: f64,
}

/// Signals that are not states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Signals {
    pub e: f64,
    pub u: f64,
    pub y: f64,
}

pub fn build_loop(controller: &Controller, model: &PlantModel, kappa: f64) -> Result<LoopStateSpace> {
    controller.validate()?;
    model.validate()?;
    model.check_kappa(kappa)?;
    let lin = controller.shape();
    let w_m = TAU * model.f_m_hz;
    let (has_reset, gamma, w_r, w_f, w_z) = match controller {
        Controller::Cglp { cglp, .. } => (
            true,
            cglp.gamma,
            TAU * cglp.f_r_hz,
            TAU * cglp.f_f_hz,
            TAU * cglp.alpha * cglp.f_r_hz,
        ),
        Controller::Linear(_) => (false, 1.0, 0.0, 1.0, 1.0),
    };
    let (w_i, w_ip) = (TAU * lin.f_i_hz, TAU * lin.f_i_prime_hz);
    Ok(LoopStateSpace {
        controller: *controller,
        model: *model,
        kappa,
        reset: ResetMode::default(),
        c: Coefficients {
            has_reset,
            gamma,
            w_r,
            w_f,
            lead_gain: w_f / w_z,
            lead_mix: w_z - w_f,
            k_p: controller.gain(),
            pi_a: w_i + w_ip,
            pi_b: w_i * w_ip,
            w_m,
            xi_m: model.xi_m,
            xi_n: lin.xi_n,
            w_e: TAU * model.f_e_hz,
            k_e: model.k_e,
            mech_gain: kappa * model.k_m * w_m * w_m,
        },
    })
}

impl LoopStateSpace {
    pub fn with_reset(mut self, mode: ResetMode) -> Self {
        self.reset = mode;
        self
    }

    pub fn blocks(&self) -> Vec<Block> {
        let mut b = Vec::with_capacity(6);
        if self.c.has_reset {
            b.push(Block {
                name: "fore",
                states: 1,
                resettable: true,
            });
            b.push(Block {
                name: "lead",
                states: 1,
                resettable: false,
            });
        }
        for (name, states) in [("pi2", 2), ("notch", 2), ("electrical", 1), ("mechanical", 2)] {
            b.push(Block {
                name,
                states,
                resettable: false,
            });
        }
        b
    }

    pub fn n_states(&self) -> usize {
        if self.c.has_reset {
            MAX_STATES
        } else {
            MAX_STATES - 2
        }
    }

    pub fn has_reset_element(&self) -> bool {
        self.c.has_reset
    }

    /// Whether events are detected during simulation.
    pub fn resets_enabled(&self) -> bool {
        self.c.has_reset && self.reset != ResetMode::Disabled
    }

    pub fn gamma(&self) -> Option<f64> {
        self.c.has_reset.then_some(self.c.gamma)
    }

    /// Fastest corner of the realization, in Hz.
    pub fn fastest_hz(&self) -> f64 {
        let mut f = self.model.f_e_hz.max(self.model.f_m_hz);
        let lin = self.controller.shape();
        f = f.max(lin.f_i_hz).max(lin.f_i_prime_hz);
        if let Controller::Cglp { cglp, .. } = &self.controller {
            f = f.max(cglp.f_f_hz).max(cglp.f_r_hz).max(cglp.alpha * cglp.f_r_hz);
        }
        f
    }

    /// `1 / (100·f_fastest)`.
    pub fn default_dt(&self) -> f64 {
        1.0 / (100.0 * self.fastest_hz())
    }

    /// Largest admissible step, `1 / (50·f_fastest)`.
    pub fn max_dt(&self) -> f64 {
        1.0 / (50.0 * self.fastest_hz())
    }

    /// Post-reset value of the FORE state.
    pub(crate) fn reset_value(&self, x: f64) -> f64 {
        match self.reset {
            ResetMode::Partial => self.c.gamma * x,
            ResetMode::Zero => 0.0,
            ResetMode::Disabled => x,
        }
    }

    /// Whether a reset leaves the state untouched.
    pub(crate) fn reset_is_identity(&self) -> bool {
        self.reset == ResetMode::Disabled || (self.reset == ResetMode::Partial && self.c.gamma == 1.0)
    }

    pub(crate) const fn fore_index() -> usize {
        FORE
    }

    pub(crate) fn output(&self, x: &State) -> f64 {
        x[M1]
    }

    /// Open-loop pass from the FORE input `e` to the plant output, returning
    /// derivatives and the control effort.
    #[inline]
    fn open_loop(&self, x: &State, e: f64) -> (State, f64) {
        let c = &self.c;
        let mut d = [0.0; MAX_STATES];
        let v1 = if c.has_reset {
            d[FORE] = c.w_r * (e - x[FORE]);
            d[LEAD] = x[FORE] - c.w_f * x[LEAD];
            c.lead_gain * (x[FORE] + c.lead_mix * x[LEAD])
        } else {
            e
        };
        let v2 = c.k_p * v1;
        d[PI1] = v2;
        d[PI2] = x[PI1];
        let v3 = v2 + c.pi_a * x[PI1] + c.pi_b * x[PI2];
        d[N1] = x[N2];
        d[N2] = -c.w_m * c.w_m * x[N1] - 2.0 * c.xi_n * c.w_m * x[N2] + v3;
        let u = v3 + 2.0 * (c.xi_m - c.xi_n) * c.w_m * x[N2];
        d[ELEC] = c.w_e * (c.k_e * u - x[ELEC]);
        d[M1] = x[M2];
        d[M2] = -c.w_m * c.w_m * x[M1] - 2.0 * c.xi_m * c.w_m * x[M2] + c.mech_gain * x[ELEC];
        (d, u)
    }

    #[inline]
    pub(crate) fn deriv(&self, x: &State, r: f64) -> State {
        self.open_loop(x, r - x[M1]).0
    }

    pub(crate) fn signals(&self, x: &State, r: f64) -> Signals {
        let e = r - x[M1];
        let (_, u) = self.open_loop(x, e);
        Signals { e, u, y: x[M1] }
    }

    fn active(&self) -> std::ops::Range<usize> {
        if self.c.has_reset {
            0..MAX_STATES
        } else {
            PI1..MAX_STATES
        }
    }

    /// Open-loop matrices `(A, B, C)` from the loop error to the output,
    /// on the active states. Resets are ignored.
    pub fn open_loop_matrices(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let idx: Vec<usize> = self.active().collect();
        let n = idx.len();
        let mut a = DMatrix::zeros(n, n);
        for (j, &sj) in idx.iter().enumerate() {
            let mut x = [0.0; MAX_STATES];
            x[sj] = 1.0;
            let (d, _) = self.open_loop(&x, 0.0);
            for (i, &si) in idx.iter().enumerate() {
                a[(i, j)] = d[si];
            }
        }
        let (d, _) = self.open_loop(&[0.0; MAX_STATES], 1.0);
        let b = DVector::from_iterator(n, idx.iter().map(|&i| d[i]));
        let c = DVector::from_iterator(n, idx.iter().map(|&i| if i == M1 { 1.0 } else { 0.0 }));
        (a, b, c)
    }
}

/// Base-linear open loop `C (jωI − A)⁻¹ B` of the realization.
impl FrequencyResponse for LoopStateSpace {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        check_freq(f_hz)?;
        let (a, b, c) = self.open_loop_matrices();
        let n = b.len();
        let jw = Complex64::new(0.0, TAU * f_hz);
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { jw } else { Complex64::new(0.0, 0.0) };
            diag - a[(i, j)]
        });
        let rhs = b.map(|v| Complex64::new(v, 0.0));
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singularity("loop state matrix"))?;
        Ok(x.iter().zip(c.iter()).map(|(xi, ci)| xi * ci).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::log_space;

    fn cglp_controller() -> Controller {
        Controller::Cglp {
            cglp: CgLpController::reference_design(),
            shape: LinearControllerParams::robust_design(),
        }
    }

    #[test]
    fn realization_matches_base_linear_loop() {
        let m = PlantModel::piezo_stage();
        let c = CgLpController::reference_design();
        let lin = LinearControllerParams::robust_design();
        for kappa in [1.0, m.kappa_max] {
            let lp = build_loop(&cglp_controller(), &m, kappa).unwrap();
            assert_eq!(lp.n_states(), 9);
            for f in log_space(1.0, 1e4, 5).unwrap().into_iter().take(20) {
                let want = c.k_p * c.base_linear().eval(f).unwrap()
                    * lin.shape(&m).eval(f).unwrap()
                    * m.eval(f, kappa).unwrap();
                let got = lp.eval(f).unwrap();
                assert!((got - want).norm() / want.norm() < 1e-6, "f = {f}");
            }
        }
    }

    #[test]
    fn linear_variant_matches_transfer_function() {
        let m = PlantModel::piezo_stage();
        let lin = LinearControllerParams::robust_design();
        let lp = build_loop(&Controller::Linear(lin), &m, 1.3).unwrap();
        assert_eq!(lp.n_states(), 7);
        assert!(lp.gamma().is_none());
        let l = lin.open_loop(&m, 1.3).unwrap();
        for f in [3.0, 40.0, 220.0, 747.0, 5000.0] {
            let want = l.eval(f).unwrap();
            assert!((lp.eval(f).unwrap() - want).norm() / want.norm() < 1e-9);
        }
    }

    #[test]
    fn block_order_and_dimensions() {
        let lp = build_loop(&cglp_controller(), &PlantModel::piezo_stage(), 1.0).unwrap();
        let names: Vec<_> = lp.blocks().iter().map(|b| b.name).collect();
        assert_eq!(names, ["fore", "lead", "pi2", "notch", "electrical", "mechanical"]);
        assert_eq!(lp.blocks().iter().map(|b| b.states).sum::<usize>(), lp.n_states());
        assert_eq!(lp.blocks().iter().filter(|b| b.resettable).count(), 1);
    }

    #[test]
    fn kappa_outside_range_rejected() {
        let m = PlantModel::piezo_stage();
        assert!(build_loop(&cglp_controller(), &m, 0.5).is_err());
        assert!(build_loop(&cglp_controller(), &m, 2.0).is_err());
    }

    #[test]
    fn default_step_resolves_lead_pole() {
        let lp = build_loop(&cglp_controller(), &PlantModel::piezo_stage(), 1.0).unwrap();
        assert_eq!(lp.fastest_hz(), 4206.0);
        assert!(lp.default_dt() < lp.max_dt());
    }
}
