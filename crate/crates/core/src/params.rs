//! Tuning parameters shared by every stage of the construction.

use alloc::format;

use crate::{Result, TesError};

/// Exponents, tilting constants and resource guards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Hölder exponent of the path, in `(1/3, 1/2)`.
    pub alpha: f64,
    /// Window exponent for area records, in `(1 - alpha, 2 alpha)`.
    pub beta: f64,
    /// Exponent of the increment conditions, in `(alpha, 1/2)`.
    pub alpha_prime: f64,
    /// Tilting scale, in `(0, 1/4]`.
    pub gamma: f64,
    /// Slack in the summed-product condition, in `(0, 1/2]`.
    pub eps0: f64,
    /// Record-breaker threshold multiplier, `> 4`.
    pub rho: f64,
    /// Deepest dyadic level the drivers may allocate.
    pub level_cap: usize,
    /// Deepest level on which exhaustive window scans are run.
    pub scan_cap: usize,
    /// Maximum number of proposals in any rejection loop.
    pub max_attempts: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 0.4,
            beta: 0.65,
            alpha_prime: 0.45,
            gamma: 0.25,
            eps0: 0.25,
            rho: 4.5,
            level_cap: 20,
            scan_cap: 14,
            max_attempts: 100_000,
        }
    }
}

impl Params {
    /// Check every range constraint, reporting the first failure.
    pub fn validate(&self) -> Result<()> {
        let p = self;
        let bad = |what: &str| Err(TesError::config(what));
        if !(p.alpha > 1.0 / 3.0 && p.alpha < 0.5) {
            return bad(&format!("alpha = {} must lie in (1/3, 1/2)", p.alpha));
        }
        if !(p.beta > 1.0 - p.alpha && p.beta < 2.0 * p.alpha) {
            return bad(&format!(
                "beta = {} must lie in (1 - alpha, 2 alpha) = ({}, {})",
                p.beta,
                1.0 - p.alpha,
                2.0 * p.alpha
            ));
        }
        if !(p.alpha_prime > p.alpha && p.alpha_prime < 0.5) {
            return bad(&format!(
                "alpha_prime = {} must lie in (alpha, 1/2)",
                p.alpha_prime
            ));
        }
        if !(p.gamma > 0.0 && p.gamma <= 0.25) {
            return bad(&format!("gamma = {} must lie in (0, 1/4]", p.gamma));
        }
        if !(p.eps0 > 0.0 && p.eps0 <= 0.5) {
            return bad(&format!("eps0 = {} must lie in (0, 1/2]", p.eps0));
        }
        if !(p.rho > 4.0 && p.rho.is_finite()) {
            return bad(&format!("rho = {} must exceed 4", p.rho));
        }
        if p.level_cap > 40 {
            return bad(&format!("level_cap = {} is above 40", p.level_cap));
        }
        if p.scan_cap > p.level_cap {
            return bad("scan_cap must not exceed level_cap");
        }
        if p.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Params::default().validate().unwrap();
    }

    #[test]
    fn beta_outside_window_rejected() {
        let p = Params {
            beta: 0.9,
            ..Params::default()
        };
        let err = p.validate().unwrap_err();
        assert!(matches!(err, TesError::Config(ref m) if m.contains("beta")));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rho_at_four_rejected() {
        let p = Params {
            rho: 4.0,
            ..Params::default()
        };
        assert!(p.validate().is_err());
    }
}
