//! Coefficient interface and the built-in models.

use alloc::format;
use alloc::vec;

use rand::Rng;

use crate::{Result, TesError};

/// Time-homogeneous Itô SDE `dX = mu(X) dt + sigma(X) dZ` on `[0, 1]`.
///
/// `bound` must dominate the sup norms of `mu`, `mu'` and of `sigma` together
/// with its first three derivatives.
pub trait SdeModel {
    /// `d`, the state dimension.
    fn state_dim(&self) -> usize;
    /// `d'`, the number of driving Brownian motions.
    fn noise_dim(&self) -> usize;
    fn initial(&self) -> &[f64];
    /// `mu(x)` into `out[..d]`.
    fn drift(&self, x: &[f64], out: &mut [f64]);
    /// `sigma(x)` into `out[i * d' + j]`.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    /// `d sigma_ij / d x_l` into `out[(i * d' + j) * d + l]`.
    fn diffusion_derivative(&self, x: &[f64], out: &mut [f64]);
    fn bound(&self) -> f64;
}

/// A family of bounded models agreeing with an unbounded one on a box.
pub trait TruncationFamily {
    type Truncated: SdeModel;

    /// The untruncated model, used for dimensions and the initial state.
    fn base(&self) -> &dyn SdeModel;

    /// Smallest bound the family supports.
    fn smallest_bound(&self) -> f64;

    /// A model bounded by `bound` that agrees with the base model on
    /// `|x|_inf <= radius`; returns the model and that radius.
    fn truncate(&self, bound: f64) -> Result<(Self::Truncated, f64)>;
}

/// Largest value of [`saturate`].
pub const SATURATION_LEVEL: f64 = 1.5;
/// Sup of `|saturate''|`.
pub const SATURATION_D2: f64 = 1.875;
/// Sup of `|saturate'''|`, attained at `t = (3 - sqrt 3) / 6`.
pub const SATURATION_D3: f64 = 5.773_502_7;

/// Odd `C^3` function equal to the identity on `[-1, 1]` and to `±1.5` beyond
/// `±2`. Its slope falls from one to zero along a smootherstep.
pub fn saturate(y: f64) -> f64 {
    let a = y.abs();
    let v = if a <= 1.0 {
        a
    } else if a >= 2.0 {
        SATURATION_LEVEL
    } else {
        let t = a - 1.0;
        let t4 = t * t * t * t;
        1.0 + t - (t4 * t * t - 3.0 * t4 * t + 2.5 * t4)
    };
    v.copysign(y)
}

/// Derivative of [`saturate`].
pub fn saturate_slope(y: f64) -> f64 {
    let a = y.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let t = a - 1.0;
        1.0 - t * t * t * (10.0 + t * (6.0 * t - 15.0))
    }
}

/// Bound on `f(x) = c * saturate(x / c)` and its first three derivatives.
fn saturated_bound(c: f64) -> f64 {
    (SATURATION_LEVEL * c)
        .max(1.0)
        .max(SATURATION_D2 / c)
        .max(SATURATION_D3 / (c * c))
}

/// One-dimensional mean-reverting model with saturated linear coefficients:
/// `mu(x) = -a s(x)`, `sigma(x) = b s(x)`, where `s(x) = c saturate(x / c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedLinear {
    pub reversion: f64,
    pub volatility: f64,
    pub scale: f64,
    pub x0: [f64; 1],
}

impl Default for ClippedLinear {
    fn default() -> Self {
        ClippedLinear {
            reversion: 1.0,
            volatility: 0.5,
            scale: 2.0,
            x0: [0.5],
        }
    }
}

impl SdeModel for ClippedLinear {
    fn state_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn initial(&self) -> &[f64] {
        &self.x0
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.reversion * self.scale * saturate(x[0] / self.scale);
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.volatility * self.scale * saturate(x[0] / self.scale);
    }

    fn diffusion_derivative(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.volatility * saturate_slope(x[0] / self.scale);
    }

    fn bound(&self) -> f64 {
        self.reversion.abs().max(self.volatility.abs()) * saturated_bound(self.scale)
    }
}

/// Two-dimensional model with trigonometric coefficients:
/// `mu = a (sin x2, cos x1)`, `sigma = b [[cos x1, sin x2], [sin x1, cos x2]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigModel {
    pub drift_scale: f64,
    pub diffusion_scale: f64,
    pub x0: [f64; 2],
}

impl Default for TrigModel {
    fn default() -> Self {
        TrigModel {
            drift_scale: 0.5,
            diffusion_scale: 0.3,
            x0: [0.1, -0.2],
        }
    }
}

impl SdeModel for TrigModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn initial(&self) -> &[f64] {
        &self.x0
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.drift_scale * libm::sin(x[1]);
        out[1] = self.drift_scale * libm::cos(x[0]);
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let b = self.diffusion_scale;
        out[0] = b * libm::cos(x[0]);
        out[1] = b * libm::sin(x[1]);
        out[2] = b * libm::sin(x[0]);
        out[3] = b * libm::cos(x[1]);
    }

    fn diffusion_derivative(&self, x: &[f64], out: &mut [f64]) {
        let b = self.diffusion_scale;
        out.iter_mut().for_each(|v| *v = 0.0);
        // sigma_00 = b cos x0, sigma_01 = b sin x1, sigma_10 = b sin x0, sigma_11 = b cos x1
        out[0] = -b * libm::sin(x[0]);
        out[3] = b * libm::cos(x[1]);
        out[4] = b * libm::cos(x[0]);
        out[7] = -b * libm::sin(x[1]);
    }

    fn bound(&self) -> f64 {
        self.drift_scale.abs().max(self.diffusion_scale.abs())
    }
}

/// Geometric-type model `dX = -a X dt + b X dZ` with unbounded coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub reversion: f64,
    pub volatility: f64,
    pub x0: [f64; 1],
}

impl Default for LinearModel {
    fn default() -> Self {
        LinearModel {
            reversion: 1.0,
            volatility: 0.5,
            x0: [0.5],
        }
    }
}

impl SdeModel for LinearModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn initial(&self) -> &[f64] {
        &self.x0
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.reversion * x[0];
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.volatility * x[0];
    }

    fn diffusion_derivative(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.volatility;
    }

    fn bound(&self) -> f64 {
        f64::INFINITY
    }
}

/// Saturation scale below which the bound stops being `1.5 L c`.
const MIN_SCALE: f64 = 1.6;

impl TruncationFamily for LinearModel {
    type Truncated = ClippedLinear;

    fn base(&self) -> &dyn SdeModel {
        self
    }

    fn smallest_bound(&self) -> f64 {
        SATURATION_LEVEL * MIN_SCALE * self.reversion.abs().max(self.volatility.abs())
    }

    fn truncate(&self, bound: f64) -> Result<(ClippedLinear, f64)> {
        let rate = self.reversion.abs().max(self.volatility.abs());
        if !(rate > 0.0) {
            return Err(TesError::config("linear model needs a nonzero coefficient"));
        }
        if !(bound >= self.smallest_bound()) || !bound.is_finite() {
            return Err(TesError::config(format!(
                "truncation bound {bound} below the smallest admissible {}",
                self.smallest_bound()
            )));
        }
        let scale = bound / (SATURATION_LEVEL * rate);
        let model = ClippedLinear {
            reversion: self.reversion,
            volatility: self.volatility,
            scale,
            x0: self.x0,
        };
        Ok((model, scale))
    }
}

/// Evaluate the model at random states in `[-radius, radius]^d` and report the
/// first evaluation exceeding `bound`. A cheap guard against misdeclared
/// bounds, not a proof.
pub fn spot_check_bound<R: Rng + ?Sized>(
    model: &dyn SdeModel,
    rng: &mut R,
    radius: f64,
    samples: usize,
) -> Result<()> {
    let (d, dp) = (model.state_dim(), model.noise_dim());
    let bound = model.bound();
    if !(bound > 0.0) {
        return Err(TesError::config("model bound must be positive"));
    }
    let mut x = vec![0.0; d];
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d * dp];
    let mut dsigma = vec![0.0; d * dp * d];
    for _ in 0..samples {
        x.iter_mut().for_each(|v| *v = radius * (2.0 * rng.random::<f64>() - 1.0));
        model.drift(&x, &mut mu);
        model.diffusion(&x, &mut sigma);
        model.diffusion_derivative(&x, &mut dsigma);
        let worst = mu
            .iter()
            .chain(&sigma)
            .chain(&dsigma)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if !(worst <= bound) {
            return Err(TesError::invariant(format!(
                "coefficient value {worst} at {x:?} exceeds the declared bound {bound}"
            )));
        }
    }
    Ok(())
}

/// Check that the model's dimensions are usable.
pub(crate) fn check_dims(model: &dyn SdeModel) -> Result<()> {
    if model.state_dim() == 0 || model.noise_dim() == 0 || model.initial().len() != model.state_dim() {
        return Err(TesError::config("model dimensions are inconsistent"));
    }
    Ok(())
}
