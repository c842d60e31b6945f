//! Certified sessions and the paths they emit.
//!
//! [`Session::certify`] draws the last record breaker and the last area
//! record, leaving a lattice whose Hölder and area constants are known. Each
//! call to [`Session::emit`] then turns a model and a tolerance into a level,
//! extends the lattice to it under the record-free law and runs the Euler
//! scheme there.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;

use super::euler::euler_path;
use super::model::{check_dims, SdeModel, TruncationFamily};
use crate::area_record_sampler::{push_below, ExactRecordOracle, FutureRecord, RecordOracle};
use crate::dyadic_bm::{k_alpha_bound, skeleton_from_lattice, Thresholds, WaveletLattice};
use crate::error_constants::{level_for_tolerance, procedure_a, ConstantInputs, ErrorConstants};
use crate::levy_area::{gamma_bounds, RoughBounds};
use crate::params::Params;
use crate::record_breakers::{last_breaker_level, lattice_from_breakers, sample_component_breakers};
use crate::rng::SimRng;
use crate::{Result, TesError};

/// Almost-sure path constants attached to a lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Level of the last record breaker.
    pub n1: usize,
    /// Level beyond which no area record occurs.
    pub n2: usize,
    pub k_alpha: f64,
    pub rough: RoughBounds,
}

/// Piecewise-constant approximation guaranteed within `epsilon` of the
/// solution in the uniform norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsStrongPath {
    pub level: usize,
    /// `values[k]` holds on `[k 2^-level, (k + 1) 2^-level)`; the last entry is
    /// the value at time one.
    pub values: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub constants: ErrorConstants,
    pub certificate: Certificate,
    pub seed: u64,
    /// Coefficient bound the constants were computed with.
    pub model_bound: f64,
}

impl EpsStrongPath {
    /// `max_t |X_eps(t)|_inf`.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|x| x.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A certified lattice and the generator that continues it.
pub struct Session {
    seed: u64,
    rng: SimRng,
    params: Params,
    thresholds: Thresholds,
    lattice: WaveletLattice,
    certificate: Certificate,
    oracle: Box<dyn RecordOracle + Send>,
}

impl core::fmt::Debug for Session {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Session")
            .field("seed", &self.seed)
            .field("top_level", &self.lattice.top_level())
            .field("certificate", &self.certificate)
            .finish()
    }
}

impl Session {
    /// Certify a fresh `noise_dim`-dimensional Brownian path.
    pub fn certify(noise_dim: usize, params: &Params, seed: u64) -> Result<Self> {
        Self::certify_with(noise_dim, params, seed, Box::new(ExactRecordOracle::new(params)))
    }

    /// As [`Session::certify`] with a caller-supplied record oracle.
    pub fn certify_with(
        noise_dim: usize,
        params: &Params,
        seed: u64,
        mut oracle: Box<dyn RecordOracle + Send>,
    ) -> Result<Self> {
        params.validate()?;
        if noise_dim == 0 {
            return Err(TesError::config("need at least one Brownian component"));
        }
        let mut rng = crate::rng::seeded(seed);
        let thresholds = Thresholds::new(params.rho);

        let breakers = sample_component_breakers(&mut rng, noise_dim, params.rho)?;
        let n1 = last_breaker_level(&breakers);
        if n1 > params.level_cap {
            return Err(TesError::LevelCap {
                stage: "last record breaker",
                required: n1,
                cap: params.level_cap,
            });
        }
        let mut lattice = lattice_from_breakers(&mut rng, &breakers, &thresholds)?;

        let mut attempts = 0;
        let n2 = loop {
            attempts += 1;
            if attempts > params.max_attempts {
                return Err(TesError::guard("area-record search did not settle"));
            }
            let n = oracle.prepare(&mut rng, &mut lattice, &thresholds)?;
            match oracle.draw(&mut rng, &lattice, &thresholds)? {
                FutureRecord::None => break n,
                FutureRecord::Found { coeffs, .. } => push_below(&mut lattice, coeffs, &thresholds)?,
            }
        };

        let k_alpha = k_alpha_bound(&lattice, &thresholds, n1, params.alpha)?;
        let rough = gamma_bounds(&lattice, n2, k_alpha, params)?;
        Ok(Session {
            seed,
            rng,
            params: *params,
            thresholds,
            lattice,
            certificate: Certificate {
                n1,
                n2,
                k_alpha,
                rough,
            },
            oracle,
        })
    }

    /// Rebuild a session from a checkpoint: the lattice, its certificate and
    /// the generator position.
    pub fn resume(
        seed: u64,
        word_pos: u128,
        params: &Params,
        lattice: WaveletLattice,
        certificate: Certificate,
        oracle: Box<dyn RecordOracle + Send>,
    ) -> Result<Self> {
        params.validate()?;
        match lattice.top_level() {
            Some(top) if top >= certificate.n2 && top >= certificate.n1 => {}
            _ => return Err(TesError::config("checkpoint lattice stops below its certificate")),
        }
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_word_pos(word_pos);
        Ok(Session {
            seed,
            rng,
            params: *params,
            thresholds: Thresholds::new(params.rho),
            lattice,
            certificate,
            oracle,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn lattice(&self) -> &WaveletLattice {
        &self.lattice
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    /// Position of the session's generator, for checkpoints.
    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Error constants of `model` on this lattice.
    pub fn constants(&self, model: &dyn SdeModel) -> Result<ErrorConstants> {
        check_dims(model)?;
        if model.noise_dim() != self.lattice.dim() {
            return Err(TesError::config("model and session disagree on the noise dimension"));
        }
        let m = model.bound();
        if !(m > 0.0 && m.is_finite()) {
            return Err(TesError::config("model needs a finite positive coefficient bound"));
        }
        procedure_a(&ConstantInputs {
            k_alpha: self.certificate.k_alpha,
            k_2alpha: self.certificate.rough.k_2alpha,
            k_r: self.certificate.rough.gamma_r,
            m,
            d: model.state_dim().max(model.noise_dim()),
            alpha: self.params.alpha,
            beta: self.params.beta,
        })
    }

    /// Extend the lattice to `level` under the record-free law, if needed.
    pub fn extend_to(&mut self, level: usize) -> Result<()> {
        let top = self.lattice.top_level().unwrap_or(0);
        if level <= top {
            return Ok(());
        }
        if level > self.params.level_cap {
            return Err(TesError::LevelCap {
                stage: "tolerance level",
                required: level,
                cap: self.params.level_cap,
            });
        }
        self.oracle
            .extend(&mut self.rng, &mut self.lattice, level - top, &self.thresholds)
    }

    /// Euler path of `model` on the level-`level` skeleton of this lattice.
    pub fn euler_at(&mut self, model: &dyn SdeModel, level: usize) -> Result<Vec<Vec<f64>>> {
        self.extend_to(level)?;
        euler_path(model, &skeleton_from_lattice(&self.lattice, level)?)
    }

    /// Path within `eps` of the solution of `model`.
    pub fn emit(&mut self, model: &dyn SdeModel, eps: f64) -> Result<EpsStrongPath> {
        let constants = self.constants(model)?;
        let p = &self.params;
        let level = level_for_tolerance(constants.g, eps, p.alpha, p.beta)?;
        let values = self.euler_at(model, level)?;
        Ok(EpsStrongPath {
            level,
            values,
            epsilon: eps,
            constants,
            certificate: self.certificate,
            seed: self.seed,
            model_bound: model.bound(),
        })
    }

    /// Path for a smaller tolerance on the same Brownian path.
    pub fn refine(&mut self, model: &dyn SdeModel, path: &EpsStrongPath, eps: f64) -> Result<EpsStrongPath> {
        if path.seed != self.seed || path.certificate != self.certificate {
            return Err(TesError::config("path was not produced by this session"));
        }
        if !(eps > 0.0 && eps < path.epsilon) {
            return Err(TesError::config(format!(
                "refined tolerance {eps} must lie in (0, {})",
                path.epsilon
            )));
        }
        self.emit(model, eps)
    }
}

/// Certify a Brownian path and emit a path within `eps` of the solution.
pub fn simulate_eps_strong(
    model: &dyn SdeModel,
    eps: f64,
    params: &Params,
    seed: u64,
) -> Result<(EpsStrongPath, Session)> {
    check_dims(model)?;
    let mut session = Session::certify(model.noise_dim(), params, seed)?;
    let path = session.emit(model, eps)?;
    Ok((path, session))
}

/// Solve a model with unbounded coefficients through its truncations: start
/// from the smallest bound and double it until the path stays `eps` inside
/// the region where the truncation is exact.
pub fn localized_solve<F: TruncationFamily>(
    family: &F,
    session: &mut Session,
    eps: f64,
    max_doublings: usize,
) -> Result<(EpsStrongPath, F::Truncated)> {
    let mut bound = family.smallest_bound();
    for _ in 0..=max_doublings {
        let (model, radius) = family.truncate(bound)?;
        let path = session.emit(&model, eps)?;
        if path.sup_norm() <= radius - eps {
            return Ok((path, model));
        }
        bound *= 2.0;
    }
    Err(TesError::guard(format!(
        "path left the truncation region after {max_doublings} doublings"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic_bm::Skeleton;
    use crate::sde_engine::euler::sup_distance;
    use crate::sde_engine::model::{ClippedLinear, LinearModel, TrigModel};

    /// Treats the lattice as record-free from its current top onwards. Only
    /// for exercising the plumbing; the certificates it yields are not valid.
    struct AssumeRecordFree;

    impl RecordOracle for AssumeRecordFree {
        fn prepare(&mut self, _rng: &mut SimRng, lattice: &mut WaveletLattice, _th: &Thresholds) -> Result<usize> {
            Ok(lattice.top_level().unwrap())
        }

        fn draw(&mut self, _rng: &mut SimRng, _lattice: &WaveletLattice, _th: &Thresholds) -> Result<FutureRecord> {
            Ok(FutureRecord::None)
        }

        fn extend(&mut self, rng: &mut SimRng, lattice: &mut WaveletLattice, levels: usize, th: &Thresholds) -> Result<()> {
            let top = lattice.top_level().unwrap();
            lattice.extend_below(rng, th, top + levels)
        }
    }

    fn session(dim: usize, seed: u64) -> Session {
        Session::certify_with(dim, &Params::default(), seed, Box::new(AssumeRecordFree)).unwrap()
    }

    /// Tolerance that maps to `level` for this session and model.
    fn eps_for(s: &Session, model: &dyn SdeModel, level: usize) -> f64 {
        let g = s.constants(model).unwrap().g;
        g * libm::exp2(-(level as f64) * 0.15) * (1.0 + 1e-9)
    }

    #[test]
    fn exact_certification_hits_level_cap() {
        let err = Session::certify(2, &Params::default(), 1).unwrap_err();
        assert!(matches!(err, TesError::LevelCap { .. }), "{err}");
    }

    #[test]
    fn emit_is_deterministic() {
        let model = TrigModel::default();
        let mut a = session(2, 9);
        let mut b = session(2, 9);
        let eps = eps_for(&a, &model, 5);
        let pa = a.emit(&model, eps).unwrap();
        let pb = b.emit(&model, eps).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(pa.level, 5);
        assert_eq!(pa.values.len(), 33);
        assert!(pa.epsilon >= pa.constants.g * libm::exp2(-5.0 * 0.15));
    }

    #[test]
    fn refinement_chain_is_consistent() {
        let model = TrigModel::default();
        let mut s = session(2, 4);
        let eps = eps_for(&s, &model, 3);
        let p1 = s.emit(&model, eps).unwrap();
        let p2 = s.refine(&model, &p1, eps / 2.0).unwrap();
        let p3 = s.refine(&model, &p2, eps / 4.0).unwrap();
        assert!(p1.level <= p2.level && p2.level <= p3.level);
        assert_eq!(p1.constants, p3.constants);
        assert!(sup_distance(&p1.values, &p3.values).unwrap() <= p1.epsilon + p3.epsilon);
        let fine = skeleton_from_lattice(s.lattice(), p3.level).unwrap();
        let coarse = skeleton_from_lattice(s.lattice(), p1.level).unwrap();
        let back: Skeleton = fine.coarsen(p1.level).unwrap();
        for c in 0..2 {
            for (x, y) in back.increments(c).iter().zip(coarse.increments(c)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert!(s.refine(&model, &p3, p3.epsilon).is_err());
    }

    #[test]
    fn sandwich_on_finer_level() {
        let model = ClippedLinear::default();
        let mut s = session(1, 21);
        let eps = eps_for(&s, &model, 4);
        let p = s.emit(&model, eps).unwrap();
        let fine = s.euler_at(&model, p.level + 4).unwrap();
        assert!(sup_distance(&p.values, &fine).unwrap() <= 2.0 * eps);
    }

    #[test]
    fn resume_continues_the_stream() {
        let model = ClippedLinear::default();
        let mut a = session(1, 33);
        let b0 = session(1, 33);
        let mut b = Session::resume(
            33,
            b0.word_pos(),
            b0.params(),
            b0.lattice().clone(),
            *b0.certificate(),
            Box::new(AssumeRecordFree),
        )
        .unwrap();
        let eps = eps_for(&a, &model, 6);
        assert_eq!(a.emit(&model, eps).unwrap(), b.emit(&model, eps).unwrap());
    }

    #[test]
    fn localized_stays_inside_region() {
        let family = LinearModel {
            reversion: 1e-12,
            volatility: 1e-12,
            x0: [0.5],
        };
        let mut s = session(1, 2);
        let probe = family.truncate(family.smallest_bound()).unwrap().0;
        let eps = eps_for(&s, &probe, 3);
        let (path, model) = localized_solve(&family, &mut s, eps, 60).unwrap();
        assert!(path.sup_norm() <= model.scale - eps);
        assert!(model.bound() >= family.smallest_bound());
    }
}
