//! Linear frequency-domain primitives.
//!
//! Every element is a [`FrequencyResponse`]: an immutable evaluator mapping a
//! frequency in Hz to a complex gain. Elements compose by series connection
//! and static scaling, which is all the loop algebra the design pipeline needs.
//! Angular frequency never crosses this API; it is formed internally as
//! `2·π·f`.

mod bode;
mod crossover;
mod elements;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Result;

pub(crate) use bode::fmt;
pub use bode::{bode, log_space, nearest_branch_deg, unwrap_phase_deg, BodeGrid};
pub use crossover::{crossover, LoopMetrics, CROSSOVER_PPD, CROSSOVER_REL_TOL};
pub use elements::{
    eval_complex_order, eval_notch, eval_pi2, eval_plant, kappa_grid, ComplexOrder, ComplexOrderParams,
    LinearControllerParams, Notch, Pi2, Plant, PlantModel,
};

/// Complex gain as a function of frequency in Hz.
pub trait FrequencyResponse: Send + Sync {
    fn eval(&self, f_hz: f64) -> Result<Complex64>;
}

impl<T: FrequencyResponse + ?Sized> FrequencyResponse for &T {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        (**self).eval(f_hz)
    }
}

impl<T: FrequencyResponse + ?Sized> FrequencyResponse for Box<T> {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        (**self).eval(f_hz)
    }
}

impl<T: FrequencyResponse + ?Sized> FrequencyResponse for Arc<T> {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        (**self).eval(f_hz)
    }
}

/// Adapter turning a closure into a [`FrequencyResponse`].
#[derive(Clone)]
pub struct FnResponse<F>(pub F);

impl<F> FrequencyResponse for FnResponse<F>
where
    F: Fn(f64) -> Result<Complex64> + Send + Sync,
{
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        (self.0)(f_hz)
    }
}

/// Wraps a closure as a shareable system.
pub fn system<F>(f: F) -> Arc<dyn FrequencyResponse>
where
    F: Fn(f64) -> Result<Complex64> + Send + Sync + 'static,
{
    Arc::new(FnResponse(f))
}

/// Series (product) connection of elements.
#[derive(Clone, Default)]
pub struct Series {
    parts: Vec<Arc<dyn FrequencyResponse>>,
}

impl Series {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn then<S: FrequencyResponse + 'static>(mut self, part: S) -> Self {
        self.parts.push(Arc::new(part));
        self
    }

    pub fn then_shared(mut self, part: Arc<dyn FrequencyResponse>) -> Self {
        self.parts.push(part);
        self
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

impl FrequencyResponse for Series {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        self.parts
            .iter()
            .try_fold(Complex64::new(1.0, 0.0), |acc, p| Ok(acc * p.eval(f_hz)?))
    }
}

/// Static real gain in series with an inner system.
#[derive(Clone)]
pub struct Scaled<S> {
    pub gain: f64,
    pub inner: S,
}

impl<S> Scaled<S> {
    pub fn new(gain: f64, inner: S) -> Self {
        Self { gain, inner }
    }
}

impl<S: FrequencyResponse> FrequencyResponse for Scaled<S> {
    fn eval(&self, f_hz: f64) -> Result<Complex64> {
        Ok(self.inner.eval(f_hz)? * self.gain)
    }
}

pub(crate) fn check_freq(f_hz: f64) -> Result<()> {
    if !f_hz.is_finite() {
        return Err(crate::Error::Argument(format!("non-finite frequency {f_hz}")));
    }
    if f_hz < 0.0 {
        return Err(crate::Error::Argument(format!("negative frequency {f_hz} Hz")));
    }
    Ok(())
}
