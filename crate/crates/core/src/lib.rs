//! Robust CgLp reset control for piezo-actuated nano-positioners.
//!
//! The crate covers the whole design loop for a stage whose DC gain is only
//! known to lie in `[1, κ̄]`:
//!
//! * [`freq`]: plant, notch, PI², ideal complex-order element, Bode data and
//!   crossover / phase-margin extraction.
//! * [`describing`]: sinusoidal-input describing functions of the FORE and
//!   CgLp elements, higher harmonics, closed-loop harmonic spectra,
//!   pseudo-sensitivities and a time-domain Fourier oracle.
//! * [`tuning`]: phase bands, the κ̄ bound, proportional-gain placement for
//!   maximal robust bandwidth and the constrained CgLp grid search.
//! * [`sim`]: hybrid closed-loop simulation with zero-crossing resets and
//!   step / sine experiments over the κ range.
//! * [`cli`]: the `cglp` command-line front end and its file outputs.
//!
//! The runnable programs in `examples/` walk through each capability.

pub mod cli;
pub mod config;
pub mod describing;
pub mod error;
pub mod freq;
pub mod output;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
