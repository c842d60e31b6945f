//! Gaussian helpers: tail probabilities and samplers for `N(0, 1)` restricted
//! to `|x| <= c` or `|x| > c`.

use core::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Standard normal draw.
#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform draw on `(0, 1]`, safe to take logarithms of.
#[inline]
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `P(|Z| > c)` for `c >= 0`.
pub fn two_sided_tail(c: f64) -> f64 {
    libm::erfc(c * FRAC_1_SQRT_2)
}

/// `ln P(|Z| <= c)`; equals `-inf` at `c = 0`.
pub fn ln_prob_inside(c: f64) -> f64 {
    if c <= 0.0 {
        return f64::NEG_INFINITY;
    }
    libm::log1p(-two_sided_tail(c))
}

/// Draw from `N(0, 1)` conditioned on `|x| <= c`.
pub fn sample_inside<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    debug_assert!(c > 0.0);
    if c >= 1.0 {
        loop {
            let x = normal(rng);
            if x.abs() <= c {
                return x;
            }
        }
    }
    // uniform proposal on [-c, c]; acceptance at least e^{-1/2}
    loop {
        let x = c * (2.0 * rng.random::<f64>() - 1.0);
        if rng.random::<f64>() <= libm::exp(-0.5 * x * x) {
            return x;
        }
    }
}

/// Draw from `N(0, 1)` conditioned on `|x| > c`.
pub fn sample_outside<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    if c < 1.0 {
        loop {
            let x = normal(rng);
            if x.abs() > c {
                return x;
            }
        }
    }
    // exponential proposal with the optimal rate for the one-sided tail
    let rate = 0.5 * (c + libm::sqrt(c * c + 4.0));
    let x = loop {
        let x = c - libm::log(open_uniform(rng)) / rate;
        let d = x - rate;
        if rng.random::<f64>() <= libm::exp(-0.5 * d * d) {
            break x;
        }
    };
    if rng.random::<bool>() {
        x
    } else {
        -x
    }
}
