//! Explicit constants bounding the uniform distance between the Euler scheme on
//! a dyadic skeleton and the true solution, and the level needed for a given
//! tolerance.
//!
//! The coupled linear-quadratic systems are solved by monotone fixed-point
//! iteration from zero with a 1% slack factor; each search runs over the grid
//! `delta = 2^-j`, largest first, and keeps the first grid point at which the
//! iteration settles.

use alloc::format;

use crate::{Result, TesError};

/// Slack applied to every right-hand side so the inequalities hold strictly.
pub const SLACK: f64 = 1.01;

/// Deepest grid point `2^-j` tried by the searches.
pub const MAX_GRID: u32 = 1000;

const MAX_ITER: usize = 10_000;

/// Path and model constants feeding the error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantInputs {
    /// Hölder bound on the path.
    pub k_alpha: f64,
    /// `2 alpha`-Hölder bound on the area.
    pub k_2alpha: f64,
    /// Bound on the normalised area remainder.
    pub k_r: f64,
    /// Bound on the coefficients and their first three derivatives.
    pub m: f64,
    /// Dimension entering the tensor contractions.
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
}

/// Everything the error bound is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub b: f64,
    pub c4: f64,
    pub delta: f64,
    pub delta_b: f64,
    pub delta_c4: f64,
    /// Coefficient of `2^(-n (3 alpha - 1))`.
    pub g1: f64,
    /// Coefficient of `2^(-n (2 alpha - beta))`.
    pub g2: f64,
    /// `g1 + g2`.
    pub g: f64,
}

/// Smallest fixed point of `x = f(x)` reached from zero, if the iteration settles.
fn settle(mut step: impl FnMut([f64; 3]) -> [f64; 3]) -> Option<[f64; 3]> {
    let mut x = [0.0; 3];
    for _ in 0..MAX_ITER {
        let y = step(x);
        if y.iter().any(|v| !v.is_finite() || *v > 1e300) {
            return None;
        }
        let done = x
            .iter()
            .zip(&y)
            .all(|(a, b)| (b - a).abs() <= 1e-14 * b.abs());
        x = y;
        if done {
            return Some(x);
        }
    }
    None
}

/// Assemble the error constants.
pub fn procedure_a(inp: &ConstantInputs) -> Result<ErrorConstants> {
    let ConstantInputs {
        k_alpha: ka,
        k_2alpha: k2,
        k_r: kr,
        m,
        d,
        alpha: a,
        beta,
    } = *inp;
    let all = [ka, k2, kr, m];
    if all.iter().any(|v| !v.is_finite() || *v < 0.0) || d == 0 {
        return Err(TesError::config("constants must be finite and non-negative"));
    }
    if !(a > 1.0 / 3.0 && a < 0.5 && beta > 1.0 - a && beta < 2.0 * a) {
        return Err(TesError::config("exponents outside their admissible range"));
    }
    let d = d as f64;
    let (d2, d3) = (d * d, d * d * d);
    let kappa = 1.0 / (1.0 - libm::exp2(1.0 - 3.0 * a));

    // local system on [0, delta]
    let mut local = None;
    for j in 0..=MAX_GRID {
        let dl = libm::exp2(-(j as f64));
        let (p2a, pa, p1a) = (libm::pow(dl, 2.0 * a), libm::pow(dl, a), libm::pow(dl, 1.0 - a));
        let found = settle(|[_, _, c3]| {
            let c1 = SLACK * (c3 * p2a + m * p1a + d * m * ka + d3 * m * m * k2 * pa);
            let c2 = SLACK * (c3 * pa + d3 * m * m * k2);
            let c3 = SLACK
                * 2.0
                * kappa
                * (m * c1 + d * m * c1 * c1 * ka + d2 * m * c2 * ka + 2.0 * d3 * m * m * c1 * k2);
            [c1, c2, c3]
        });
        if let Some(x) = found {
            local = Some((dl, x));
            break;
        }
    }
    let (delta, [c1d, c2d, _]) = local.ok_or_else(|| {
        TesError::guard(format!("no local step size down to 2^-{MAX_GRID} (Euler constants)"))
    })?;

    // extension to [0, 1]
    let c1 = 2.0 / delta * c1d;
    let c2 = 2.0 / delta * (c2d + m * c1 + d * m * c1 * ka);
    let c3 = 2.0 * kappa * (m * c1 + d * m * c1 * c1 * ka + d2 * m * c2 * ka + 2.0 * d3 * m * m * c1 * k2);

    // perturbation system
    let mut local_b = None;
    for j in 0..=MAX_GRID {
        let dl = libm::exp2(-(j as f64));
        let (p2a, pa, p1a) = (libm::pow(dl, 2.0 * a), libm::pow(dl, a), libm::pow(dl, 1.0 - a));
        let found = settle(|[_, _, b3]| {
            let b1 = SLACK * (b3 * p2a + 2.0 * m * p1a + 2.0 * m * ka + 4.0 * m * m * k2 * pa);
            let b2 = SLACK * (b3 * pa + 4.0 * m * m * k2);
            let b3 = SLACK
                * 4.0
                * kappa
                * (m * b1 + m * b1 * b1 * ka + m * b2 * ka + 2.0 * m * m * b1 * k2);
            [b1, b2, b3]
        });
        if let Some(x) = found {
            local_b = Some((dl, x));
            break;
        }
    }
    let (delta_b, [b1d, _, _]) = local_b.ok_or_else(|| {
        TesError::guard(format!("no local step size down to 2^-{MAX_GRID} (perturbation constants)"))
    })?;
    let b = 2.0 / delta_b * b1d;
    let g1 = (1.0 + b) * c3;

    // area-remainder constant: best grid point among the admissible ones
    let ab = libm::exp2(a + beta);
    let drive = b * d3 * m * m * kr + 2.0 * d3 * m * m * c1 * kr;
    let mut best: Option<(f64, f64)> = None;
    for j in 0..=MAX_GRID {
        let dl = libm::exp2(-(j as f64));
        let bd = b * libm::pow(dl, a);
        if !(bd < ab - 2.0) {
            continue;
        }
        let c4_local = SLACK * 2.0 * drive / (1.0 - (2.0 + bd) / ab);
        let c4 = (1.0 + bd) * c4_local + 2.0 * drive / dl;
        if best.map_or(true, |(_, v)| c4 < v) {
            best = Some((dl, c4));
        }
    }
    let (delta_c4, c4) = best.ok_or_else(|| {
        TesError::guard(format!("no admissible step size down to 2^-{MAX_GRID} (area constant)"))
    })?;
    let g2 = c4 + d3 * m * m * kr;
    Ok(ErrorConstants {
        c1,
        c2,
        c3,
        b,
        c4,
        delta,
        delta_b,
        delta_c4,
        g1,
        g2,
        g: g1 + g2,
    })
}

/// Smallest `n >= 0` with `g 2^(-n (2 alpha - beta)) <= eps`.
pub fn level_for_tolerance(g: f64, eps: f64, alpha: f64, beta: f64) -> Result<usize> {
    let r = 2.0 * alpha - beta;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(TesError::config("tolerance must be positive and finite"));
    }
    if !(r > 0.0) || !(g >= 0.0 && g.is_finite()) {
        return Err(TesError::config("need 2 alpha > beta and a finite constant"));
    }
    let fits = |n: usize| g * libm::exp2(-(n as f64) * r) <= eps;
    let mut n = if g <= eps {
        0
    } else {
        libm::ceil(libm::log2(g / eps) / r) as usize
    };
    while n > 0 && fits(n - 1) {
        n -= 1;
    }
    while !fits(n) {
        n += 1;
    }
    Ok(n)
}
