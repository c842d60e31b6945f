//! Unbiased estimates of `E f(X)` for non-negative Lipschitz path functionals.
//!
//! With `T` drawn from a density `g` on `[0, inf)`, `I(f(X) > T) / g(T)` has
//! mean `E f(X)`. The indicator is decided from an `eps`-strong path as soon as
//! `|f(X_eps) - T| > K eps`, refining otherwise.

use alloc::vec::Vec;

use rand::Rng;

use super::driver::Session;
use super::model::SdeModel;
use crate::gauss::open_uniform;
use crate::{Result, TesError};

/// Outcome of comparing a functional value with the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Indicator {
    Zero,
    /// `1 / g(t)`.
    Weight(f64),
    /// `|f(X_eps) - t| <= K eps`: refine and ask again.
    Undecided,
}

/// Decide `I(f(X) > t) / g(t)` from `f(X_eps)`.
pub fn unbiased_indicator(value: f64, lipschitz: f64, eps: f64, t: f64, density: impl Fn(f64) -> f64) -> Indicator {
    let slack = lipschitz * eps;
    if value > t + slack {
        Indicator::Weight(1.0 / density(t))
    } else if value < t - slack {
        Indicator::Zero
    } else {
        Indicator::Undecided
    }
}

/// Built-in non-negative functionals, all 1-Lipschitz in the uniform norm
/// except the constant, which is 0-Lipschitz.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    Constant(f64),
    /// `sup_t |X(t) - point|_inf`.
    DistanceTo(Vec<f64>),
    /// `clamp(X_coord(1), lo, hi) - lo`.
    ClippedTerminal { coord: usize, lo: f64, hi: f64 },
}

impl Functional {
    pub fn lipschitz(&self) -> f64 {
        match self {
            Functional::Constant(_) => 0.0,
            _ => 1.0,
        }
    }

    /// Value on a piecewise-constant path given at its breakpoints.
    pub fn eval(&self, values: &[Vec<f64>]) -> f64 {
        match self {
            Functional::Constant(c) => *c,
            Functional::DistanceTo(p) => values
                .iter()
                .flat_map(|x| x.iter().zip(p).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max),
            Functional::ClippedTerminal { coord, lo, hi } => {
                values.last().map_or(0.0, |x| x[*coord]).clamp(*lo, *hi) - lo
            }
        }
    }

    fn check(&self, state_dim: usize) -> Result<()> {
        let ok = match self {
            Functional::Constant(c) => *c >= 0.0 && c.is_finite(),
            Functional::DistanceTo(p) => p.len() == state_dim,
            Functional::ClippedTerminal { coord, lo, hi } => *coord < state_dim && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(TesError::config("functional does not fit the model"))
        }
    }
}

/// Settings of the refinement loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    /// Tolerance of the first path.
    pub eps0: f64,
    /// Halvings allowed before giving up.
    pub max_refinements: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            eps0: 0.5,
            max_refinements: 40,
        }
    }
}

/// One replication of the estimator with `T ~ Exp(1)`. `certify` is only
/// called when the functional depends on the path.
pub fn estimate_once<R: Rng + ?Sized>(
    rng: &mut R,
    model: &dyn SdeModel,
    functional: &Functional,
    settings: &EstimatorSettings,
    certify: impl FnOnce() -> Result<Session>,
) -> Result<f64> {
    functional.check(model.state_dim())?;
    let t = -libm::log(open_uniform(rng));
    let density = |s: f64| libm::exp(-s);
    if let Functional::Constant(c) = functional {
        return match unbiased_indicator(*c, 0.0, 0.0, t, density) {
            Indicator::Weight(w) => Ok(w),
            // ties have probability zero
            _ => Ok(0.0),
        };
    }
    let mut session = certify()?;
    let mut path = session.emit(model, settings.eps0)?;
    for _ in 0..=settings.max_refinements {
        let value = functional.eval(&path.values);
        match unbiased_indicator(value, functional.lipschitz(), path.epsilon, t, density) {
            Indicator::Weight(w) => return Ok(w),
            Indicator::Zero => return Ok(0.0),
            Indicator::Undecided => path = session.refine(model, &path, 0.5 * path.epsilon)?,
        }
    }
    Err(TesError::guard("indicator still undecided after the refinement limit"))
}
