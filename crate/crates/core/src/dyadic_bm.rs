//! Brownian motion on `[0, 1]` from its Haar coefficients.
//!
//! Coefficients are addressed by a linear index `l >= 1`. Index `1` is the
//! constant term, i.e. the value `Z(1)`. For a lattice level `n >= 1` the
//! `2^(n-1)` coefficients `l = 2^(n-1) + k + 1`, `0 <= k < 2^(n-1)`, split the
//! level `n - 1` increment `k` into the level `n` increments `2k` and `2k + 1`
//! through [`refine_midpoint`]. A lattice populated up to level `n` therefore
//! holds exactly `2^n` coefficients per component and determines the path on
//! the grid `{k 2^-n}`.

use alloc::vec;
use alloc::vec::Vec;
use alloc::format;
use core::f64::consts::LN_2;

use rand::Rng;

use crate::gauss;
use crate::{Result, TesError};

/// Sampling restriction attached to one coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    /// Plain `N(0, 1)`.
    Free,
    /// `N(0, 1)` conditioned on `|w| <= c`.
    Below(f64),
    /// `N(0, 1)` conditioned on `|w| > c`.
    Above(f64),
}

impl Condition {
    /// Draw a coefficient satisfying the restriction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Condition::Free => gauss::normal(rng),
            Condition::Below(c) => gauss::sample_inside(rng, c),
            Condition::Above(c) => gauss::sample_outside(rng, c),
        }
    }

    /// Whether `w` is compatible with the restriction.
    pub fn admits(&self, w: f64) -> bool {
        match *self {
            Condition::Free => w.is_finite(),
            Condition::Below(c) => w.abs() <= c,
            Condition::Above(c) => w.abs() > c && w.is_finite(),
        }
    }
}

/// Record-breaker thresholds `c(l) = rho sqrt(ln l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub rho: f64,
}

impl Thresholds {
    pub fn new(rho: f64) -> Self {
        Thresholds { rho }
    }

    /// Threshold for linear index `l`.
    pub fn at(&self, l: u64) -> f64 {
        self.rho * libm::sqrt(libm::log(l as f64))
    }

    /// Largest threshold among the indices of lattice `level`.
    pub fn level_max(&self, level: usize) -> f64 {
        self.rho * libm::sqrt(level as f64 * LN_2)
    }
}

/// Lattice level holding linear index `l`.
pub fn level_of(l: u64) -> usize {
    debug_assert!(l >= 1);
    if l == 1 {
        0
    } else {
        (64 - (l - 1).leading_zeros()) as usize
    }
}

/// Linear index of position `k` on lattice `level`.
pub fn linear_index(level: usize, k: u64) -> u64 {
    if level == 0 {
        1
    } else {
        (1u64 << (level - 1)) + k + 1
    }
}

/// Number of coefficients on lattice `level`.
pub fn level_len(level: usize) -> usize {
    if level == 0 {
        1
    } else {
        1usize << (level - 1)
    }
}

/// Mesh `2^-n`.
pub fn mesh(level: usize) -> f64 {
    libm::exp2(-(level as f64))
}

/// Scale applied to a coefficient when refining into `level`: `(2^-level / 2)^(1/2)`.
pub fn midpoint_scale(level: usize) -> f64 {
    libm::exp2(-0.5 * (level as f64 + 1.0))
}

/// Split a level `level - 1` increment into its two level `level` halves.
///
/// The halves share the parent's mean and differ by `2 s w`, where `s` is
/// [`midpoint_scale`]; this keeps each half `N(0, 2^-level)` and independent
/// of the other.
pub fn refine_midpoint(parent: f64, w: f64, level: usize) -> (f64, f64) {
    debug_assert!(level >= 1);
    let left = 0.5 * parent + midpoint_scale(level) * w;
    (left, parent - left)
}

/// Haar coefficients of a `dim`-dimensional Brownian motion, populated up to
/// some lattice level, each tagged with the restriction it was drawn under.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletLattice {
    dim: usize,
    levels: usize,
    coeffs: Vec<Vec<f64>>,
    conds: Vec<Vec<Condition>>,
}

impl WaveletLattice {
    /// Empty lattice.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(TesError::config("noise dimension must be positive"));
        }
        Ok(WaveletLattice {
            dim,
            levels: 0,
            coeffs: vec![Vec::new(); dim],
            conds: vec![Vec::new(); dim],
        })
    }

    /// Unrestricted lattice up to `top`; the law of plain Brownian motion.
    pub fn free<R: Rng + ?Sized>(rng: &mut R, dim: usize, top: usize) -> Result<Self> {
        let mut lat = WaveletLattice::new(dim)?;
        for level in 0..=top {
            let len = level_len(level);
            let values = (0..dim)
                .map(|_| (0..len).map(|_| gauss::normal(rng)).collect())
                .collect();
            lat.push_level(values, vec![vec![Condition::Free; len]; dim])?;
        }
        Ok(lat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest populated level, if any.
    pub fn top_level(&self) -> Option<usize> {
        self.levels.checked_sub(1)
    }

    /// Coefficient with linear index `l` of component `comp`.
    pub fn coefficient(&self, comp: usize, l: u64) -> Option<f64> {
        self.coeffs.get(comp)?.get((l as usize).checked_sub(1)?).copied()
    }

    /// Restriction attached to coefficient `l` of component `comp`.
    pub fn condition(&self, comp: usize, l: u64) -> Option<Condition> {
        self.conds.get(comp)?.get((l as usize).checked_sub(1)?).copied()
    }

    /// Coefficients of `comp` on one lattice level.
    pub fn level(&self, comp: usize, level: usize) -> &[f64] {
        let start = linear_index(level, 0) as usize - 1;
        &self.coeffs[comp][start..start + level_len(level)]
    }

    /// Restrictions of `comp` on one lattice level.
    pub fn level_conditions(&self, comp: usize, level: usize) -> &[Condition] {
        let start = linear_index(level, 0) as usize - 1;
        &self.conds[comp][start..start + level_len(level)]
    }

    /// Append the next level. `values[c][k]` is the coefficient of component
    /// `c` at position `k`; each must satisfy its restriction.
    pub fn push_level(&mut self, values: Vec<Vec<f64>>, conds: Vec<Vec<Condition>>) -> Result<()> {
        let level = self.levels;
        let len = level_len(level);
        if values.len() != self.dim || conds.len() != self.dim {
            return Err(TesError::invariant("level has the wrong number of components"));
        }
        for (v, c) in values.iter().zip(&conds) {
            if v.len() != len || c.len() != len {
                return Err(TesError::invariant(format!(
                    "level {level} needs {len} coefficients per component"
                )));
            }
            if let Some(k) = v.iter().zip(c).position(|(w, c)| !c.admits(*w)) {
                return Err(TesError::invariant(format!(
                    "coefficient {} on level {level} violates {:?}",
                    v[k], c[k]
                )));
            }
        }
        for (comp, (v, c)) in values.into_iter().zip(conds).enumerate() {
            self.coeffs[comp].extend(v);
            self.conds[comp].extend(c);
        }
        self.levels += 1;
        Ok(())
    }

    /// Populate every level up to `top` with coefficients conditioned below
    /// their thresholds. The constant term, if new, is unrestricted.
    pub fn extend_below<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        thresholds: &Thresholds,
        top: usize,
    ) -> Result<()> {
        while self.levels <= top {
            let level = self.levels;
            let conds: Vec<Condition> = (0..level_len(level) as u64)
                .map(|k| match linear_index(level, k) {
                    1 => Condition::Free,
                    l => Condition::Below(thresholds.at(l)),
                })
                .collect();
            let values = (0..self.dim)
                .map(|_| conds.iter().map(|c| c.sample(rng)).collect())
                .collect();
            self.push_level(values, vec![conds; self.dim])?;
        }
        Ok(())
    }

    /// Drop every level above `top`.
    pub fn truncate(&mut self, top: usize) {
        if top + 1 < self.levels {
            let keep = 1usize << top;
            for comp in 0..self.dim {
                self.coeffs[comp].truncate(keep);
                self.conds[comp].truncate(keep);
            }
            self.levels = top + 1;
        }
    }
}

/// Brownian increments over the level-`n` dyadic grid, one row per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    level: usize,
    increments: Vec<Vec<f64>>,
}

impl Skeleton {
    /// Wrap raw increments; each row must have `2^level` entries.
    pub fn from_increments(level: usize, increments: Vec<Vec<f64>>) -> Result<Self> {
        if increments.is_empty() || increments.iter().any(|r| r.len() != 1 << level) {
            return Err(TesError::invariant("skeleton rows must have 2^level entries"));
        }
        Ok(Skeleton { level, increments })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.increments.len()
    }

    /// Increments of one component.
    pub fn increments(&self, comp: usize) -> &[f64] {
        &self.increments[comp]
    }

    /// Path values `Z(k 2^-n)`, `k = 0..=2^n`, of one component.
    pub fn values(&self, comp: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments[comp].len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for d in &self.increments[comp] {
            acc += d;
            out.push(acc);
        }
        out
    }

    /// Sum adjacent increments down to a coarser level.
    pub fn coarsen(&self, level: usize) -> Result<Skeleton> {
        if level > self.level {
            return Err(TesError::config("cannot coarsen to a finer level"));
        }
        let block = 1usize << (self.level - level);
        let increments = self
            .increments
            .iter()
            .map(|row| row.chunks(block).map(|c| c.iter().sum()).collect())
            .collect();
        Ok(Skeleton { level, increments })
    }

    /// Refine by one level using `coeffs[c][k]`, the next lattice level.
    pub fn refine(&self, coeffs: &[Vec<f64>]) -> Skeleton {
        let level = self.level + 1;
        let increments = self
            .increments
            .iter()
            .zip(coeffs)
            .map(|(row, w)| {
                let mut out = Vec::with_capacity(2 * row.len());
                for (p, w) in row.iter().zip(w) {
                    let (a, b) = refine_midpoint(*p, *w, level);
                    out.push(a);
                    out.push(b);
                }
                out
            })
            .collect();
        Skeleton { level, increments }
    }
}

/// Skeleton on the level-`n` grid determined by the lattice.
pub fn skeleton_from_lattice(lattice: &WaveletLattice, n: usize) -> Result<Skeleton> {
    match lattice.top_level() {
        Some(top) if top >= n => {}
        _ => {
            return Err(TesError::config(format!(
                "lattice is not populated up to level {n}"
            )))
        }
    }
    let increments = (0..lattice.dim()).map(|c| vec![lattice.level(c, 0)[0]]).collect();
    let mut skel = Skeleton {
        level: 0,
        increments,
    };
    for level in 1..=n {
        let coeffs: Vec<Vec<f64>> = (0..lattice.dim())
            .map(|c| lattice.level(c, level).to_vec())
            .collect();
        skel = skel.refine(&coeffs);
    }
    Ok(skel)
}

/// Almost-sure bound on the `alpha`-Hölder seminorm of the whole path on
/// `[0, 1]`.
///
/// Levels up to `n1` enter through their largest coefficient; beyond `n1` the
/// thresholds take their place, which is valid as long as every coefficient
/// past `n1` is conditioned below its threshold.
pub fn k_alpha_bound(
    lattice: &WaveletLattice,
    thresholds: &Thresholds,
    n1: usize,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(TesError::config("alpha must lie in (0, 1/2)"));
    }
    match lattice.top_level() {
        Some(top) if top >= n1 => {}
        _ => return Err(TesError::config("lattice does not reach level n1")),
    }
    let ratio = libm::exp2(-(0.5 - alpha));
    let mut weight = 1.0;
    let mut total = 0.0;
    for level in 0..=n1 {
        let vmax = (0..lattice.dim())
            .flat_map(|c| lattice.level(c, level).iter())
            .fold(0.0f64, |m, w| m.max(w.abs()));
        total += weight * vmax;
        weight *= ratio;
    }
    // thresholds beyond n1: explicit sum, then sqrt(n) <= n for the remainder
    let last = n1 + 400;
    for level in n1 + 1..=last {
        total += weight * thresholds.level_max(level);
        weight *= ratio;
    }
    let n = last as f64;
    let remainder = libm::pow(ratio, n + 1.0) * (n + 1.0 - n * ratio) / ((1.0 - ratio) * (1.0 - ratio));
    total += thresholds.rho * libm::sqrt(LN_2) * remainder;
    Ok(libm::exp2(2.0 * alpha) * total)
}

/// Whether `|v[t] - v[s]| <= bound ((t - s) 2^-n)^alpha` for every pair of grid
/// points, where `values` has `2^n + 1` entries.
///
/// Gaps are grouped into classes `[2^j, 2^(j+1))`; a class is cleared at once
/// when the largest oscillation over any window of that span already fits the
/// bound at the smallest gap, and is scanned pair by pair otherwise.
pub fn holder_bound_holds(values: &[f64], alpha: f64, bound: f64) -> bool {
    let points = values.len();
    if points < 2 {
        return true;
    }
    let h = 1.0 / (points - 1) as f64;
    let mut hi = values.to_vec();
    let mut lo = values.to_vec();
    let mut j = 0usize;
    while (1usize << j) < points {
        let gmin = 1usize << j;
        let gmax = ((1usize << (j + 1)) - 1).min(points - 1);
        // widen the running max/min to blocks of 2^(j+1) points
        let span = 1usize << j;
        let blocks = points.saturating_sub(2 * span - 1);
        let osc = if blocks == 0 {
            let mx = values.iter().cloned().fold(f64::MIN, f64::max);
            let mn = values.iter().cloned().fold(f64::MAX, f64::min);
            mx - mn
        } else {
            let mut osc = 0.0f64;
            for a in 0..blocks {
                let mx = hi[a].max(hi[a + span]);
                let mn = lo[a].min(lo[a + span]);
                hi[a] = mx;
                lo[a] = mn;
                osc = osc.max(mx - mn);
            }
            hi.truncate(blocks);
            lo.truncate(blocks);
            osc
        };
        if osc > bound * libm::pow(gmin as f64 * h, alpha) {
            for g in gmin..=gmax {
                let lim = bound * libm::pow(g as f64 * h, alpha);
                if (0..points - g).any(|a| (values[a + g] - values[a]).abs() > lim) {
                    return false;
                }
            }
        }
        if blocks == 0 {
            break;
        }
        j += 1;
    }
    true
}
