//! Exact sampling of the indices whose Haar coefficient exceeds its threshold.
//!
//! Coefficient `l` is a *record breaker* when `|W_l| > c(l)` with
//! `c(l) = rho sqrt(ln l)`. For `rho > 4` only finitely many indices break, and
//! the full set can be drawn without simulating a single coefficient: the
//! probability of no further breakers is squeezed between `U` (the product of
//! the per-index non-breaking probabilities seen so far) and `D`, a lower bound
//! obtained from `P(|W| > c) <= exp(-c^2 / 2)`.

use alloc::vec::Vec;

use rand::Rng;

use crate::dyadic_bm::{level_len, level_of, linear_index, Condition, Thresholds, WaveletLattice};
use crate::gauss;
use crate::{Result, TesError};

/// Steps allowed before [`sample_record_breakers`] gives up.
pub const MAX_STEPS: u64 = 1 << 40;

/// The breaker indices in increasing order; the last one is the overall last
/// breaker. Index `1` is always present since `c(1) = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Breakers {
    pub indices: Vec<u64>,
}

impl Breakers {
    /// Last breaker index.
    pub fn last(&self) -> u64 {
        *self.indices.last().unwrap_or(&1)
    }

    /// Lattice level holding the last breaker.
    pub fn last_level(&self) -> usize {
        level_of(self.last())
    }

    pub fn contains(&self, l: u64) -> bool {
        self.indices.binary_search(&l).is_ok()
    }
}

/// Draw the set of record breakers exactly.
pub fn sample_record_breakers<R: Rng + ?Sized>(rng: &mut R, rho: f64) -> Result<Breakers> {
    if !(rho > 4.0) {
        return Err(TesError::config("rho must exceed 4"));
    }
    let th = Thresholds::new(rho);
    let decay = 1.0 - 0.5 * rho * rho;
    let mut found = Vec::new();
    let mut r: u64 = 0;
    loop {
        // fresh uniform each time a breaker is located
        let ln_v = libm::log(gauss::open_uniform(rng));
        let mut ln_u = 0.0;
        loop {
            r += 1;
            if r > MAX_STEPS {
                return Err(TesError::guard("record-breaker search ran past its step limit"));
            }
            ln_u += gauss::ln_prob_inside(th.at(r));
            if ln_v >= ln_u {
                found.push(r);
                break;
            }
            let gap = 1.0 - libm::pow(r as f64, decay);
            if gap > 0.0 && ln_v <= ln_u + libm::log(gap) {
                return Ok(Breakers { indices: found });
            }
        }
    }
}

/// Independent breaker sets for `dim` components.
pub fn sample_component_breakers<R: Rng + ?Sized>(rng: &mut R, dim: usize, rho: f64) -> Result<Vec<Breakers>> {
    (0..dim).map(|_| sample_record_breakers(rng, rho)).collect()
}

/// Level of the last breaker over all components.
pub fn last_breaker_level(breakers: &[Breakers]) -> usize {
    breakers.iter().map(Breakers::last_level).max().unwrap_or(0)
}

/// Lattice with one component per breaker set, populated through the level of
/// the last breaker: breakers are drawn above their thresholds, every other
/// coefficient below.
pub fn lattice_from_breakers<R: Rng + ?Sized>(
    rng: &mut R,
    breakers: &[Breakers],
    thresholds: &Thresholds,
) -> Result<WaveletLattice> {
    let dim = breakers.len();
    let mut lat = WaveletLattice::new(dim)?;
    for level in 0..=last_breaker_level(breakers) {
        let conds: Vec<Vec<Condition>> = breakers
            .iter()
            .map(|b| {
                (0..level_len(level) as u64)
                    .map(|k| {
                        let l = linear_index(level, k);
                        let c = thresholds.at(l);
                        if b.contains(l) {
                            Condition::Above(c)
                        } else {
                            Condition::Below(c)
                        }
                    })
                    .collect()
            })
            .collect();
        let values = conds
            .iter()
            .map(|row| row.iter().map(|c| c.sample(rng)).collect())
            .collect();
        lat.push_level(values, conds)?;
    }
    Ok(lat)
}
