//! Exact Bernoulli draws of "another area record after level `n`".
//!
//! An *area record* on level `h` is a window `l < m` of some walk `L^h_{ij}`
//! with `|L^h(m) - L^h(l)| > (m - l)^beta 2^(-2 alpha h)`. Given the path up to
//! level `n`, [`procedure_b`] returns a Bernoulli variable with success
//! probability equal to the conditional probability of a record on some level
//! beyond `n`, together with the refinement up to the first such level when it
//! succeeds. It proposes a level, a pair and a window, samples the refinement
//! under an exponential tilt of that window and accepts with the importance
//! weight divided by the number of violating windows.
//!
//! The tilt sign is drawn uniformly so that both tails of the window's
//! increment are covered, and the weight uses the two-component mixture.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use rand::Rng;

use crate::dyadic_bm::{
    level_len, linear_index, mesh, skeleton_from_lattice, Condition, Skeleton, Thresholds,
    WaveletLattice,
};
use crate::gauss;
use crate::levy_area::{count_area_records, l_walk};
use crate::params::Params;
use crate::rng::SimRng;
use crate::tilting::{mgf_cap, theta0_select, tilt_schedule, Window};
use crate::{Result, TesError};

/// The two conditions under which the tilted proposals are guaranteed to
/// dominate the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionFlags {
    /// Every increment on the level is at most `2^(-n alpha')` in size.
    pub increments_small: bool,
    /// Every windowed sum of same-slot products `x_i x_j`, `i != j`, is at most
    /// `eps0 (m - l)^beta 2^(-2 n alpha')` in size.
    pub products_small: bool,
}

impl ConditionFlags {
    pub fn hold(&self) -> bool {
        self.increments_small && self.products_small
    }
}

/// Evaluate both conditions on a skeleton.
///
/// Diagonal pairs are left out of the product condition: a sum of squared
/// increments grows linearly in the window and can never meet it.
pub fn condition_flags(skel: &Skeleton, params: &Params) -> Result<ConditionFlags> {
    let n = skel.level();
    let lim = libm::pow(mesh(n), params.alpha_prime);
    let increments_small = (0..skel.dim()).all(|c| skel.increments(c).iter().all(|x| x.abs() <= lim));
    if !increments_small {
        return Ok(ConditionFlags {
            increments_small,
            products_small: false,
        });
    }
    if n > params.scan_cap {
        return Err(TesError::LevelCap {
            stage: "increment conditions scan",
            required: n,
            cap: params.scan_cap,
        });
    }
    let slots = 1usize << n;
    let scale = params.eps0 * lim * lim;
    let bound: Vec<f64> = (0..=slots).map(|g| scale * libm::pow(g as f64, params.beta)).collect();
    let mut products_small = true;
    'pairs: for i in 0..skel.dim() {
        for j in i + 1..skel.dim() {
            let (a, b) = (skel.increments(i), skel.increments(j));
            let mut prefix = Vec::with_capacity(slots + 1);
            let mut acc = 0.0;
            prefix.push(acc);
            for r in 0..slots {
                acc += a[r] * b[r];
                prefix.push(acc);
            }
            for l in 0..slots {
                for m in l + 1..=slots {
                    if (prefix[m] - prefix[l]).abs() > bound[m - l] {
                        products_small = false;
                        break 'pairs;
                    }
                }
            }
        }
    }
    Ok(ConditionFlags {
        increments_small,
        products_small,
    })
}

/// `ln P(every coefficient on levels n+1..=n+m is below its threshold)`.
pub fn ln_h_probability(n: usize, m: usize, dim: usize, thresholds: &Thresholds) -> f64 {
    let mut total = 0.0;
    for level in n + 1..=n + m {
        for k in 0..level_len(level) as u64 {
            total += gauss::ln_prob_inside(thresholds.at(linear_index(level, k)));
        }
    }
    dim as f64 * total
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| libm::log(i as f64)).sum()
}

/// Exponent `E(w)` in the window weight `6 exp(-E(w))`.
fn window_exponent(params: &Params, n: usize, m: usize, width: f64) -> f64 {
    let p = params;
    0.5 * p.gamma
        * libm::pow(width, p.beta - 0.5)
        * libm::exp2(2.0 * n as f64 * (p.alpha_prime - p.alpha))
        * libm::exp2(m as f64 * (1.0 - 2.0 * p.alpha))
}

#[derive(Debug, Clone)]
struct LevelTable {
    /// Number of `L` steps on level `n + m`.
    steps: u64,
    /// Cumulative weights of the window widths `1..=steps`.
    cumulative: Vec<f64>,
    ln_b: f64,
}

/// Proposal distributions over levels and windows seen from level `n`.
#[derive(Debug, Clone)]
pub struct ProposalTables {
    n: usize,
    dim: usize,
    params: Params,
    horizon: Option<usize>,
    tables: Vec<Option<LevelTable>>,
}

impl ProposalTables {
    /// Tables for proposals from level `n`. With a `horizon` only levels
    /// `n + 1 ..= n + horizon` are proposed.
    pub fn new(n: usize, dim: usize, params: &Params, horizon: Option<usize>) -> Result<Self> {
        params.validate()?;
        if horizon == Some(0) {
            return Err(TesError::config("horizon must be at least one level"));
        }
        Ok(ProposalTables {
            n,
            dim,
            params: *params,
            horizon,
            tables: Vec::new(),
        })
    }

    pub fn level(&self) -> usize {
        self.n
    }

    /// `ln g(m)`.
    pub fn ln_g(&self, m: usize) -> f64 {
        let raw = |m: usize| -1.0 - ln_factorial(m - 1);
        match self.horizon {
            None => raw(m),
            Some(h) if m <= h => {
                let total: f64 = (1..=h).map(|k| libm::exp(raw(k))).sum();
                raw(m) - libm::log(total)
            }
            Some(_) => f64::NEG_INFINITY,
        }
    }

    /// Draw the level offset `m >= 1`.
    pub fn sample_m<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut m = 1;
        loop {
            acc += libm::exp(self.ln_g(m));
            if u < acc || self.horizon == Some(m) || m > 170 {
                return m;
            }
            m += 1;
        }
    }

    fn table(&mut self, m: usize) -> Result<&LevelTable> {
        let level = self.n + m;
        if level > self.params.level_cap {
            return Err(TesError::LevelCap {
                stage: "area-record proposal",
                required: level,
                cap: self.params.level_cap,
            });
        }
        if self.tables.len() <= m {
            self.tables.resize(m + 1, None);
        }
        if self.tables[m].is_none() {
            let steps = 1u64 << (level - 1);
            let mut cumulative = Vec::with_capacity(steps as usize);
            let mut acc = 0.0;
            for w in 1..=steps {
                let v = 6.0 * libm::exp(-window_exponent(&self.params, self.n, m, w as f64));
                acc += (steps - w + 1) as f64 * v;
                cumulative.push(acc);
            }
            self.tables[m] = Some(LevelTable {
                steps,
                cumulative,
                ln_b: libm::log(acc),
            });
        }
        Ok(self.tables[m].as_ref().unwrap())
    }

    /// `ln b_n(m)`, the log of the total window weight on level `n + m`.
    pub fn ln_b(&mut self, m: usize) -> Result<f64> {
        Ok(self.table(m)?.ln_b)
    }

    /// `ln q(k, k' | m)` for a window of the given width.
    pub fn ln_q(&mut self, m: usize, width: u64) -> Result<f64> {
        let n = self.n;
        let params = self.params;
        let ln_b = self.table(m)?.ln_b;
        Ok(libm::log(6.0) - window_exponent(&params, n, m, width as f64) - ln_b)
    }

    /// Draw a window `(k, k')` on level `n + m`.
    pub fn sample_window<R: Rng + ?Sized>(&mut self, rng: &mut R, m: usize) -> Result<(u64, u64)> {
        let t = self.table(m)?;
        let total = *t.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let idx = t.cumulative.partition_point(|c| *c <= u).min(t.cumulative.len() - 1);
        let width = idx as u64 + 1;
        let k = rng.random_range(0..=t.steps - width);
        Ok((k, k + width))
    }

    /// Whether `g(m) >= d'^2 b_n(m)` on level `n + m`.
    pub fn feasible_at(&mut self, m: usize) -> Result<bool> {
        let lhs = self.ln_g(m);
        let rhs = 2.0 * libm::log(self.dim as f64) + self.ln_b(m)?;
        Ok(lhs >= rhs)
    }

    /// Whether the inequality holds for every `m`. Exact window sums are used
    /// up to the level cap; past it the window count bound
    /// `b_n(m) <= 3 K (K + 1) exp(-E(1))` takes over, `K = 2^(n+m-1)`.
    pub fn feasible(&mut self) -> Result<bool> {
        let cap = self.params.level_cap;
        let last = match self.horizon {
            Some(h) => h,
            None => usize::MAX,
        };
        let mut m = 1;
        while m <= last {
            if self.n + m <= cap {
                if !self.feasible_at(m)? {
                    return Ok(false);
                }
            } else {
                let steps = libm::exp2((self.n + m - 1) as f64);
                let e1 = window_exponent(&self.params, self.n, m, 1.0);
                let ln_b = libm::log(3.0 * steps * (steps + 1.0)) - e1;
                if self.ln_g(m) < 2.0 * libm::log(self.dim as f64) + ln_b {
                    return Ok(false);
                }
                // once the exponent dwarfs every polynomial factor the bound
                // keeps improving with m
                if e1 > 1e4 * (self.n + m) as f64 {
                    return Ok(true);
                }
            }
            m += 1;
        }
        Ok(true)
    }
}

/// Lowest level at which the proposal tables can possibly be feasible.
///
/// Feasibility at level `n` forces `g(1) >= d'^2 2^n v(1)`, since the `2^n`
/// unit windows on level `n + 1` each carry weight `v(1)`.
pub fn feasibility_floor(params: &Params, dim: usize) -> usize {
    let ln_d2 = 2.0 * libm::log(dim as f64);
    (0..100_000)
        .find(|&n| {
            let lhs = ln_d2 + n as f64 * LN_2 + libm::log(6.0) - window_exponent(params, n, 1, 1.0);
            lhs <= -1.0
        })
        .unwrap_or(usize::MAX)
}

/// Outcome of one Bernoulli draw.
#[derive(Debug, Clone, PartialEq)]
pub enum FutureRecord {
    /// No area record on any level beyond the base.
    None,
    /// The first record beyond the base is on `level`; `coeffs[r][c][k]` fills
    /// lattice level `base + 1 + r`.
    Found {
        level: usize,
        coeffs: Vec<Vec<Vec<f64>>>,
    },
}

/// Diagnostics of the last acceptance step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcceptanceTrace {
    pub ratio: f64,
    pub proposed_level: usize,
    pub violations: usize,
}

/// One draw of the Bernoulli "area record after level `n`" and, on success,
/// the refinement up to the first record. The lattice must be populated
/// exactly up to `n`.
pub fn procedure_b<R: Rng + ?Sized>(
    rng: &mut R,
    lattice: &WaveletLattice,
    tables: &mut ProposalTables,
    thresholds: &Thresholds,
    params: &Params,
    trace: Option<&mut AcceptanceTrace>,
) -> Result<FutureRecord> {
    let n = tables.level();
    if lattice.top_level() != Some(n) {
        return Err(TesError::config(format!("lattice must end on level {n}")));
    }
    let dim = lattice.dim();
    let base = skeleton_from_lattice(lattice, n)?;
    let flags = condition_flags(&base, params).ok();

    let m = tables.sample_m(rng);
    let (k, kp) = tables.sample_window(rng, m)?;
    let window = Window {
        i: rng.random_range(0..dim),
        j: rng.random_range(0..dim),
        k,
        kp,
    };
    let target = n + m;
    let theta0 = theta0_select(params.gamma, window.width(), n, m, params.alpha_prime);
    let plus = tilt_schedule(theta0, window, n, target)?;
    let minus = tilt_schedule(-theta0, window, n, target)?;
    let (psi_plus, psi_minus) = (plus.log_psi(&base), minus.log_psi(&base));
    if flags.is_some_and(|f| f.hold()) {
        let cap = mgf_cap(params.gamma, params.eps0, window.width(), params.beta);
        if psi_plus > cap || psi_minus > cap {
            return Err(TesError::invariant(format!(
                "tilted moment {} exceeds its cap {cap} under the increment conditions",
                psi_plus.max(psi_minus)
            )));
        }
    }
    let chosen = if rng.random::<bool>() { &plus } else { &minus };
    let ext = chosen.sample(rng, &base)?;

    // the proposal must stay below every threshold
    for (r, level_coeffs) in ext.coeffs.iter().enumerate() {
        let level = n + 1 + r;
        for comp in level_coeffs {
            for (kk, w) in comp.iter().enumerate() {
                if w.abs() > thresholds.at(linear_index(level, kk as u64)) {
                    return Ok(FutureRecord::None);
                }
            }
        }
    }
    // no record strictly between n and n + m
    for skel in &ext.skeletons[..m - 1] {
        if count_area_records(skel, params) > 0 {
            return Ok(FutureRecord::None);
        }
    }
    let top = ext.skeletons.last().unwrap();
    let walk = l_walk(top, window.i, window.j);
    let dl = walk[kp as usize] - walk[k as usize];
    let lim = libm::pow(window.width() as f64, params.beta) * libm::pow(mesh(target), 2.0 * params.alpha);
    if dl.abs() <= lim {
        return Ok(FutureRecord::None);
    }
    let violations = count_area_records(top, params);
    // mixture likelihood ratio of the two tilts
    let a = theta0 * dl - psi_plus;
    let b = -theta0 * dl - psi_minus;
    let ln_mix = a.max(b) + libm::log(0.5 * (1.0 + libm::exp(-(a - b).abs())));
    let ln_ratio = -ln_h_probability(n, m, dim, thresholds) - tables.ln_g(m)
        + 2.0 * libm::log(dim as f64)
        - tables.ln_q(m, window.width())?
        - ln_mix
        - libm::log(violations as f64);
    let ratio = libm::exp(ln_ratio);
    if let Some(t) = trace {
        *t = AcceptanceTrace {
            ratio,
            proposed_level: target,
            violations,
        };
    }
    if !(ratio <= 1.0) {
        return Err(TesError::AcceptanceRatio {
            ratio,
            context: format!(
                "base level {n}, proposed level {target}, window ({}, {}] of pair ({}, {}), {violations} violating windows",
                k, kp, window.i, window.j
            ),
        });
    }
    if rng.random::<f64>() < ratio {
        Ok(FutureRecord::Found {
            level: target,
            coeffs: ext.coeffs,
        })
    } else {
        Ok(FutureRecord::None)
    }
}

/// Append refinement levels, each conditioned below its thresholds.
pub fn push_below(
    lattice: &mut WaveletLattice,
    coeffs: Vec<Vec<Vec<f64>>>,
    thresholds: &Thresholds,
) -> Result<()> {
    for level_coeffs in coeffs {
        let level = lattice.top_level().map_or(0, |t| t + 1);
        let conds: Vec<Condition> = (0..level_len(level) as u64)
            .map(|k| Condition::Below(thresholds.at(linear_index(level, k))))
            .collect();
        lattice.push_level(level_coeffs, vec![conds; lattice.dim()])?;
    }
    Ok(())
}

/// Source of the Bernoulli "another area record after level `n`".
///
/// The driver only talks to this trait; [`ExactRecordOracle`] is the
/// implementation built on [`procedure_b`].
pub trait RecordOracle {
    /// Extend the lattice until a draw can be made from its top level and
    /// return that level.
    fn prepare(&mut self, rng: &mut SimRng, lattice: &mut WaveletLattice, thresholds: &Thresholds) -> Result<usize>;

    /// Draw from the lattice's current top level.
    fn draw(&mut self, rng: &mut SimRng, lattice: &WaveletLattice, thresholds: &Thresholds) -> Result<FutureRecord>;

    /// Add `levels` levels under the law conditioned on no area record beyond
    /// the current top.
    fn extend(
        &mut self,
        rng: &mut SimRng,
        lattice: &mut WaveletLattice,
        levels: usize,
        thresholds: &Thresholds,
    ) -> Result<()>;
}

/// [`RecordOracle`] backed by tilted importance sampling.
#[derive(Debug, Clone)]
pub struct ExactRecordOracle {
    params: Params,
    horizon: Option<usize>,
}

impl ExactRecordOracle {
    pub fn new(params: &Params) -> Self {
        ExactRecordOracle {
            params: *params,
            horizon: None,
        }
    }

    /// Restrict proposals to the next `horizon` levels. The draw then targets
    /// a record within that horizon only.
    pub fn with_horizon(params: &Params, horizon: usize) -> Self {
        ExactRecordOracle {
            params: *params,
            horizon: Some(horizon),
        }
    }
}

impl RecordOracle for ExactRecordOracle {
    fn prepare(&mut self, rng: &mut SimRng, lattice: &mut WaveletLattice, thresholds: &Thresholds) -> Result<usize> {
        let p = &self.params;
        let floor = feasibility_floor(p, lattice.dim());
        if floor > p.level_cap {
            return Err(TesError::LevelCap {
                stage: "area-record proposal tables",
                required: floor,
                cap: p.level_cap,
            });
        }
        loop {
            let n = lattice
                .top_level()
                .ok_or_else(|| TesError::config("lattice is empty"))?;
            let skel = skeleton_from_lattice(lattice, n)?;
            if condition_flags(&skel, p)?.hold() {
                let mut tables = ProposalTables::new(n, lattice.dim(), p, self.horizon)?;
                if tables.feasible()? {
                    return Ok(n);
                }
            }
            if n + 1 > p.level_cap {
                return Err(TesError::LevelCap {
                    stage: "increment conditions",
                    required: n + 1,
                    cap: p.level_cap,
                });
            }
            lattice.extend_below(rng, thresholds, n + 1)?;
        }
    }

    fn draw(&mut self, rng: &mut SimRng, lattice: &WaveletLattice, thresholds: &Thresholds) -> Result<FutureRecord> {
        let n = lattice
            .top_level()
            .ok_or_else(|| TesError::config("lattice is empty"))?;
        let mut tables = ProposalTables::new(n, lattice.dim(), &self.params, self.horizon)?;
        procedure_b(rng, lattice, &mut tables, thresholds, &self.params, None)
    }

    fn extend(
        &mut self,
        rng: &mut SimRng,
        lattice: &mut WaveletLattice,
        levels: usize,
        thresholds: &Thresholds,
    ) -> Result<()> {
        let params = self.params;
        continue_no_breaker(rng, lattice, levels, thresholds, &params, self)
    }
}

/// Extend the lattice by `m` levels under the law conditioned on no further
/// area records: propose below-threshold coefficients, reject any proposal
/// with a record on the new levels, and keep it only when a fresh draw from
/// the oracle at the new top level reports no later record.
pub fn continue_no_breaker(
    rng: &mut SimRng,
    lattice: &mut WaveletLattice,
    m: usize,
    thresholds: &Thresholds,
    params: &Params,
    oracle: &mut dyn RecordOracle,
) -> Result<()> {
    let n = lattice
        .top_level()
        .ok_or_else(|| TesError::config("lattice is empty"))?;
    if m == 0 {
        return Ok(());
    }
    if n + m > params.scan_cap {
        return Err(TesError::LevelCap {
            stage: "record-free extension scan",
            required: n + m,
            cap: params.scan_cap,
        });
    }
    for _ in 0..params.max_attempts {
        let mut trial = lattice.clone();
        trial.extend_below(rng, thresholds, n + m)?;
        let mut clean = true;
        for level in n + 1..=n + m {
            if count_area_records(&skeleton_from_lattice(&trial, level)?, params) > 0 {
                clean = false;
                break;
            }
        }
        if clean && oracle.draw(rng, &trial, thresholds)? == FutureRecord::None {
            *lattice = trial;
            return Ok(());
        }
    }
    Err(TesError::guard(format!(
        "record-free extension from level {n} by {m} rejected {} times",
        params.max_attempts
    )))
}
