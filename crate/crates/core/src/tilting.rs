//! Exponential tilting of the dyadic refinement along one `L` window.
//!
//! Fix a base level `n`, a target level `n + m` and a window `k < k'` of the
//! walk `L^{n+m}_{ij}`. The moment generating function
//! `E[exp(theta0 (L(k') - L(k))) | level n]` is computed exactly by integrating
//! out one level at a time: every step turns a quadratic form in the finer
//! increments into a quadratic form in the coarser ones, with coefficients
//! given by the Gaussian identity in [`phi_quadratic`]. The same step yields
//! the tilted law of each coefficient, so the window can be sampled top-down
//! under the tilted measure.
//!
//! For `i != j` the forms carry a cross coefficient (on `x_i x_j`) and a square
//! coefficient (on `x_i^2 + x_j^2`). For `i == j` they reduce to a single
//! coefficient on `x_i^2`.

use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use rand::Rng;

use crate::dyadic_bm::{mesh, midpoint_scale, Skeleton};
use crate::gauss;
use crate::{Result, TesError};

/// Value, tilted mean and tilted covariance of
/// `E[exp(a1 x + a2 y + b x y + c1 x^2 + c2 y^2)]` for independent standard
/// normals `x`, `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticMgf {
    pub log_value: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

/// Closed form of the bivariate Gaussian quadratic exponential moment.
///
/// Defined when `1 - 2 c1 > 0`, `1 - 2 c2 > 0` and
/// `b^2 < (1 - 2 c1)(1 - 2 c2)`; outside that set the expectation is infinite.
pub fn phi_quadratic(a1: f64, a2: f64, b: f64, c1: f64, c2: f64) -> Result<QuadraticMgf> {
    let d1 = 1.0 - 2.0 * c1;
    let d2 = 1.0 - 2.0 * c2;
    if !(d1 > 0.0 && d2 > 0.0 && b * b < d1 * d2) {
        return Err(TesError::invariant(format!(
            "quadratic exponential moment diverges (b = {b}, c1 = {c1}, c2 = {c2})"
        )));
    }
    let (p1, p2) = (1.0 / d1, 1.0 / d2);
    let chi2 = b * b * p1 * p2;
    let k = 1.0 / (1.0 - chi2);
    let cov = [[k * p1, k * b * p1 * p2], [k * b * p1 * p2, k * p2]];
    let mean = [
        cov[0][0] * a1 + cov[0][1] * a2,
        cov[1][0] * a1 + cov[1][1] * a2,
    ];
    let log_value = 0.5 * libm::log(p1 * p2) - 0.5 * libm::log1p(-chi2)
        + 0.5 * (a1 * mean[0] + a2 * mean[1]);
    Ok(QuadraticMgf {
        log_value,
        mean,
        cov,
    })
}

/// Coefficients `(cross, square)` left after integrating out the finest level
/// of a cross window, where `delta` is the variance scale `s^2` of the
/// refinement into that level.
pub fn level_one_tilt(theta0: f64, delta: f64) -> Result<(f64, f64)> {
    let x = theta0 * theta0 * delta * delta;
    if !(x < 1.0) {
        return Err(TesError::invariant("tilt too large for the finest level"));
    }
    let den = 1.0 - x;
    Ok((theta0 / (4.0 * den), theta0 * theta0 * delta / (8.0 * den)))
}

/// Tilt size for a window of `width` steps on level `n + m` seen from level `n`.
pub fn theta0_select(gamma: f64, width: u64, n: usize, m: usize, alpha_prime: f64) -> f64 {
    gamma / (libm::sqrt(width as f64) * libm::pow(mesh(n), 2.0 * alpha_prime) * mesh(m))
}

/// Upper bound on `psi` guaranteed while the increment conditions hold.
pub fn mgf_cap(gamma: f64, eps0: f64, width: u64, beta: f64) -> f64 {
    libm::log(4.0) + eps0 * gamma * libm::pow(width as f64, beta - 0.5)
}

/// Steps `k + 1 ..= kp` of the walk `L_{ij}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub i: usize,
    pub j: usize,
    pub k: u64,
    pub kp: u64,
}

impl Window {
    pub fn width(&self) -> u64 {
        self.kp - self.k
    }

    pub fn is_diagonal(&self) -> bool {
        self.i == self.j
    }
}

/// Quadratic form on the slots `offset..offset + len` of one level.
#[derive(Debug, Clone, PartialEq)]
struct Form {
    offset: usize,
    cross: Vec<f64>,
    square: Vec<f64>,
}

impl Form {
    fn at(&self, slot: usize) -> (f64, f64) {
        match slot.checked_sub(self.offset) {
            Some(r) if r < self.cross.len() => (self.cross[r], self.square[r]),
            _ => (0.0, 0.0),
        }
    }

    fn parents(&self) -> core::ops::Range<usize> {
        self.offset / 2..(self.offset + self.cross.len() - 1) / 2 + 1
    }
}

/// The exact tilt of one window, with the per-level forms needed to sample it.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSchedule {
    theta0: f64,
    base: usize,
    target: usize,
    window: Window,
    /// `forms[r]` lives on level `target - 1 - r`; the last one on `base`.
    forms: Vec<Form>,
    log_const: f64,
}

/// Exponent and tilted law of one refinement step for a cross window.
///
/// `(co, eo)` and `(ce, ee)` are the children's coefficients, `u`, `v` the
/// parent increments and `s` the refinement scale.
fn cross_step(co: f64, eo: f64, ce: f64, ee: f64, u: f64, v: f64, s: f64) -> Result<QuadraticMgf> {
    let (ap, am) = (co + ce, co - ce);
    let (ep, em) = (eo + ee, eo - ee);
    let s2 = s * s;
    phi_quadratic(
        s * (0.5 * am * v + em * u),
        s * (0.5 * am * u + em * v),
        ap * s2,
        ep * s2,
        ep * s2,
    )
}

/// Coarser cross coefficients and log constant from one refinement step.
fn cross_collapse(co: f64, eo: f64, ce: f64, ee: f64, s: f64) -> Result<(f64, f64, f64)> {
    let (ap, am) = (co + ce, co - ce);
    let (ep, em) = (eo + ee, eo - ee);
    let s2 = s * s;
    let d = 1.0 - 2.0 * ep * s2;
    let rho = ap * s2 / d;
    if !(d > 0.0 && rho * rho < 1.0) {
        return Err(TesError::invariant("tilted refinement step diverges"));
    }
    let h = s2 / (d * (1.0 - rho * rho));
    let cross = 0.25 * ap + h * (am * em + rho * (0.25 * am * am + em * em));
    let square = 0.25 * ep + 0.125 * h * (am * am + 4.0 * em * em + 4.0 * rho * am * em);
    let log_c = -libm::log(d) - 0.5 * libm::log1p(-rho * rho);
    Ok((cross, square, log_c))
}

/// Coarser diagonal coefficient and log constant from one refinement step.
fn diagonal_collapse(ko: f64, ke: f64, s: f64) -> Result<(f64, f64)> {
    let s2 = s * s;
    let q = 1.0 - 2.0 * (ko + ke) * s2;
    if !(q > 0.0) {
        return Err(TesError::invariant("tilted refinement step diverges"));
    }
    let km = ko - ke;
    Ok((0.25 * (ko + ke) + km * km * s2 / (2.0 * q), -0.5 * libm::log(q)))
}

/// Build the schedule of `theta0 (L(kp) - L(k))` on level `target` seen from `base`.
pub fn tilt_schedule(theta0: f64, window: Window, base: usize, target: usize) -> Result<TiltSchedule> {
    if target <= base {
        return Err(TesError::config("target level must exceed the base level"));
    }
    let steps = 1u64 << (target - 1);
    if !(window.k < window.kp && window.kp <= steps) {
        return Err(TesError::config(format!(
            "window ({}, {}] outside 0..={steps}",
            window.k, window.kp
        )));
    }
    let width = window.width() as usize;
    let s_top = midpoint_scale(target);
    let d_top = s_top * s_top;
    let mut log_const;
    let first = if window.is_diagonal() {
        let q = 1.0 + 2.0 * theta0 * d_top;
        if !(q > 0.0) {
            return Err(TesError::invariant("tilt too large for the finest level"));
        }
        log_const = -0.5 * libm::log(q) * width as f64;
        Form {
            offset: window.k as usize,
            cross: vec![0.0; width],
            square: vec![0.25 * theta0; width],
        }
    } else {
        let (c1, e1) = level_one_tilt(theta0, d_top)?;
        log_const = -0.5 * libm::log1p(-theta0 * theta0 * d_top * d_top) * width as f64;
        Form {
            offset: window.k as usize,
            cross: vec![c1; width],
            square: vec![e1; width],
        }
    };
    let mut forms = vec![first];
    for child_level in (base + 1..target).rev() {
        let s = midpoint_scale(child_level);
        let fine = forms.last().unwrap();
        let parents = fine.parents();
        let mut cross = Vec::with_capacity(parents.len());
        let mut square = Vec::with_capacity(parents.len());
        for p in parents.clone() {
            let (co, eo) = fine.at(2 * p);
            let (ce, ee) = fine.at(2 * p + 1);
            if window.is_diagonal() {
                let (kappa, lc) = diagonal_collapse(eo, ee, s)?;
                cross.push(0.0);
                square.push(kappa);
                log_const += lc;
            } else {
                let (c, e, lc) = cross_collapse(co, eo, ce, ee, s)?;
                cross.push(c);
                square.push(e);
                log_const += lc;
            }
        }
        forms.push(Form {
            offset: parents.start,
            cross,
            square,
        });
    }
    Ok(TiltSchedule {
        theta0,
        base,
        target,
        window,
        forms,
        log_const,
    })
}

/// Coefficients for levels `base + 1 ..= target` together with the
/// skeletons they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    /// `coeffs[r][c][k]`: level `base + 1 + r`, component `c`, position `k`.
    pub coeffs: Vec<Vec<Vec<f64>>>,
    /// `skeletons[r]` is on level `base + 1 + r`.
    pub skeletons: Vec<Skeleton>,
}

impl TiltSchedule {
    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// `ln E[exp(theta0 (L(kp) - L(k))) | base level]`.
    pub fn log_psi(&self, base: &Skeleton) -> f64 {
        let form = self.forms.last().unwrap();
        let (i, j) = (self.window.i, self.window.j);
        let (zi, zj) = (base.increments(i), base.increments(j));
        let mut total = self.log_const;
        for (r, (c, e)) in form.cross.iter().zip(&form.square).enumerate() {
            let p = form.offset + r;
            if self.window.is_diagonal() {
                total += e * zi[p] * zi[p];
            } else {
                total += c * zi[p] * zj[p] + e * (zi[p] * zi[p] + zj[p] * zj[p]);
            }
        }
        total
    }

    /// Draw levels `base + 1 ..= target` under the tilted law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, base: &Skeleton) -> Result<Extension> {
        if base.level() != self.base {
            return Err(TesError::config("skeleton is not on the schedule's base level"));
        }
        let d = base.dim();
        let (i, j) = (self.window.i, self.window.j);
        if i >= d || j >= d {
            return Err(TesError::config("window component out of range"));
        }
        let mut coeffs = Vec::with_capacity(self.target - self.base);
        let mut skeletons = Vec::with_capacity(self.target - self.base);
        let mut parent = base.clone();
        for level in self.base + 1..=self.target {
            let len = parent.increments(0).len();
            let mut w: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..len).map(|_| gauss::normal(rng)).collect())
                .collect();
            let s = midpoint_scale(level);
            if level == self.target {
                self.tilt_finest(rng, &parent, &mut w, s)?;
            } else {
                let form = &self.forms[self.target - 1 - level];
                for p in form.parents() {
                    let (co, eo) = form.at(2 * p);
                    let (ce, ee) = form.at(2 * p + 1);
                    let u = parent.increments(i)[p];
                    if self.window.is_diagonal() {
                        let km = eo - ee;
                        let q = 1.0 - 2.0 * (eo + ee) * s * s;
                        let sd = libm::sqrt(1.0 / q);
                        w[i][p] = km * s * u / q + sd * gauss::normal(rng);
                    } else {
                        let v = parent.increments(j)[p];
                        let law = cross_step(co, eo, ce, ee, u, v, s)?;
                        let (x, y) = draw_bivariate(rng, &law);
                        w[i][p] = x;
                        w[j][p] = y;
                    }
                }
            }
            let next = parent.refine(&w);
            coeffs.push(w);
            skeletons.push(next.clone());
            parent = next;
        }
        Ok(Extension { coeffs, skeletons })
    }

    fn tilt_finest<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        parent: &Skeleton,
        w: &mut [Vec<f64>],
        s: f64,
    ) -> Result<()> {
        let (i, j) = (self.window.i, self.window.j);
        let t = self.theta0;
        for p in self.window.k as usize..self.window.kp as usize {
            if self.window.is_diagonal() {
                let q = 1.0 + 2.0 * t * s * s;
                w[i][p] = gauss::normal(rng) / libm::sqrt(q);
            } else {
                let (u, v) = (parent.increments(i)[p], parent.increments(j)[p]);
                let law = phi_quadratic(0.5 * t * s * v, -0.5 * t * s * u, -t * s * s, 0.0, 0.0)?;
                let (x, y) = draw_bivariate(rng, &law);
                w[i][p] = x;
                w[j][p] = y;
            }
        }
        Ok(())
    }
}

fn draw_bivariate<R: Rng + ?Sized>(rng: &mut R, law: &QuadraticMgf) -> (f64, f64) {
    let l11 = libm::sqrt(law.cov[0][0]);
    let l21 = law.cov[1][0] / l11;
    let l22 = libm::sqrt((law.cov[1][1] - l21 * l21).max(0.0));
    let (z1, z2) = (gauss::normal(rng), gauss::normal(rng));
    (law.mean[0] + l11 * z1, law.mean[1] + l21 * z1 + l22 * z2)
}
