//! Lévy areas from the dyadic refinement, the `L` walks whose increments make
//! them up, and the rough-path constants built from both.
//!
//! On level `h >= 1` the walk `L^h_{ij}` adds, for every level `h - 1` interval,
//! the product of the `i`-increment over its left half with the `j`-increment
//! over its right half. The Itô area of `(Z_i, Z_j)` over a level-`n` interval
//! is the sum, over all finer levels, of the `L` increments that live inside
//! it.

use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use crate::dyadic_bm::{mesh, skeleton_from_lattice, Skeleton, WaveletLattice};
use crate::params::Params;
use crate::{Result, TesError};

/// `L^n_{ij}(k)` for `k = 0..=2^(n-1)` on the skeleton's level `n`.
pub fn l_walk(skeleton: &Skeleton, i: usize, j: usize) -> Vec<f64> {
    let a = skeleton.increments(i);
    let b = skeleton.increments(j);
    let mut out = Vec::with_capacity(a.len() / 2 + 1);
    let mut acc = 0.0;
    out.push(acc);
    for k in 0..a.len() / 2 {
        acc += a[2 * k] * b[2 * k + 1];
        out.push(acc);
    }
    out
}

/// Lévy areas over every level-`n` interval, truncated after `depth` finer levels.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaTable {
    level: usize,
    depth: usize,
    dim: usize,
    values: Vec<f64>,
}

impl AreaTable {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `A_{ij}` over `[k 2^-n, (k + 1) 2^-n]`.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.dim + j) * (1 << self.level) + k]
    }

    /// The full matrix of areas over interval `k`, row-major.
    pub fn matrix(&self, k: usize) -> Vec<f64> {
        let d = self.dim;
        (0..d * d).map(|ij| self.get(ij / d, ij % d, k)).collect()
    }
}

/// Areas over each level-`n` interval from levels `n + 1 ..= n + depth`.
pub fn area_truncated(lattice: &WaveletLattice, n: usize, depth: usize) -> Result<AreaTable> {
    let d = lattice.dim();
    let cells = 1usize << n;
    let mut values = vec![0.0; d * d * cells];
    let mut skel = skeleton_from_lattice(lattice, n)?;
    if lattice.top_level().unwrap_or(0) < n + depth {
        return Err(TesError::config(format!(
            "lattice must reach level {} for depth {depth}",
            n + depth
        )));
    }
    for h in n + 1..=n + depth {
        let coeffs: Vec<Vec<f64>> = (0..d).map(|c| lattice.level(c, h).to_vec()).collect();
        let parent = skel;
        skel = parent.refine(&coeffs);
        // each level-n cell owns 2^(h-1-n) consecutive steps of L^h
        let per_cell = 1usize << (h - 1 - n);
        for i in 0..d {
            let a = skel.increments(i);
            for j in 0..d {
                let b = skel.increments(j);
                let row = &mut values[(i * d + j) * cells..(i * d + j + 1) * cells];
                for (k, cell) in row.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for r in k * per_cell..(k + 1) * per_cell {
                        s += a[2 * r] * b[2 * r + 1];
                    }
                    *cell += s;
                }
            }
        }
    }
    Ok(AreaTable {
        level: n,
        depth,
        dim: d,
        values,
    })
}

/// Chen's relation: the area over `[r, t]` from the areas over `[r, s]` and
/// `[s, t]` and the increments `dz_rs`, `dz_st`.
pub fn chen_combine(a_rs: f64, a_st: f64, dzi_rs: f64, dzj_st: f64) -> f64 {
    a_rs + a_st + dzi_rs * dzj_st
}

/// Rough-path constants of a certified lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughBounds {
    /// Largest normalised `L` increment seen on the scanned levels.
    pub gamma_l: f64,
    /// Bound on the normalised area remainder on every level.
    pub gamma_r: f64,
    /// Bound on the `2 alpha`-Hölder norm of the area.
    pub k_2alpha: f64,
}

/// Largest `|L^n(m) - L^n(l)| / ((m - l)^beta 2^(-2 alpha n))` over all pairs
/// `(i, j)` and all windows on level `n`.
pub fn max_normalised_l(skeleton: &Skeleton, params: &Params) -> f64 {
    let n = skeleton.level();
    if n == 0 {
        return 0.0;
    }
    let steps = 1usize << (n - 1);
    let scale: Vec<f64> = (0..=steps)
        .map(|g| libm::pow(g as f64, params.beta) * libm::pow(mesh(n), 2.0 * params.alpha))
        .collect();
    let d = skeleton.dim();
    let mut best = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let walk = l_walk(skeleton, i, j);
            for l in 0..steps {
                for m in l + 1..=steps {
                    best = best.max((walk[m] - walk[l]).abs() / scale[m - l]);
                }
            }
        }
    }
    best
}

/// Number of windows on the skeleton's level whose `L` increment is an area record.
pub fn count_area_records(skeleton: &Skeleton, params: &Params) -> usize {
    let n = skeleton.level();
    if n == 0 {
        return 0;
    }
    let steps = 1usize << (n - 1);
    let lim: Vec<f64> = (0..=steps)
        .map(|g| libm::pow(g as f64, params.beta) * libm::pow(mesh(n), 2.0 * params.alpha))
        .collect();
    let d = skeleton.dim();
    let mut count = 0;
    for i in 0..d {
        for j in 0..d {
            let walk = l_walk(skeleton, i, j);
            for l in 0..steps {
                for m in l + 1..=steps {
                    if (walk[m] - walk[l]).abs() > lim[m - l] {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Rough-path constants of a lattice with no area records above level `n2`.
///
/// `L` increments are scanned exhaustively on levels `1..=n2`; on finer levels
/// the record-free property bounds them by one, so the remainder series uses
/// `max(gamma_l, 1)`.
pub fn gamma_bounds(
    lattice: &WaveletLattice,
    n2: usize,
    k_alpha: f64,
    params: &Params,
) -> Result<RoughBounds> {
    if n2 > params.scan_cap {
        return Err(TesError::LevelCap {
            stage: "area certificate scan",
            required: n2,
            cap: params.scan_cap,
        });
    }
    let mut gamma_l = 0.0f64;
    let mut skel = skeleton_from_lattice(lattice, 0)?;
    for h in 1..=n2 {
        let coeffs: Vec<Vec<f64>> = (0..lattice.dim()).map(|c| lattice.level(c, h).to_vec()).collect();
        skel = skel.refine(&coeffs);
        gamma_l = gamma_l.max(max_normalised_l(&skel, params));
    }
    Ok(rough_bounds_from(gamma_l, k_alpha, params))
}

/// Remainder and area constants implied by `gamma_l` and `k_alpha`.
pub fn rough_bounds_from(gamma_l: f64, k_alpha: f64, params: &Params) -> RoughBounds {
    let a = params.alpha;
    let q = libm::exp2(-(2.0 * a - params.beta));
    let gamma_r = q / (1.0 - q) * gamma_l.max(1.0);
    let k_2alpha = gamma_r * 2.0 / (1.0 - libm::exp2(-2.0 * a))
        + k_alpha * k_alpha * libm::exp2(1.0 - a) / (1.0 - libm::exp2(-a));
    RoughBounds {
        gamma_l,
        gamma_r,
        k_2alpha,
    }
}
