//! Robust tuning: phase bands, the κ̄ bound, band-edge gain placement, the
//! average crossover and the constrained CgLp search.

mod average;
mod band;
mod cglp;
mod linear;
mod gains;

pub use average::{average_crossover, Normalization, AVERAGE_REL_TOL};
pub use band::{find_phase_band, find_phase_band_with, kappa_bound, PhaseBand, BAND_PPD};
pub use cglp::{
    cglp_base_linear_shape, cglp_loop_shape, evaluate_cglp, tune_cglp, AlphaRule, Candidate, CgLpDesign,
    CgLpTuneProblem, CgLpTuneReport, ConstraintMargins, Feasibility, PhaseCeiling, ViolationStats,
};
pub use linear::{
    crossover_at, gain_for_crossover, retune_gain, tune_linear, tune_proportional, MarginBounds,
    RobustTuneResult, TuneSettings,
};
pub use gains::{compare_crossovers, KappaComparison, CrossoverGainReport};
