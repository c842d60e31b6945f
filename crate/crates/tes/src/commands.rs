//! The four subcommands.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use tes_core::area_record_sampler::ExactRecordOracle;
use tes_core::dyadic_bm::skeleton_from_lattice;
use tes_core::rng::{seeded, stream};
use tes_core::sde_engine::{
    estimate_once, euler_path, localized_solve, spot_check_bound, EpsStrongPath, EstimatorSettings, Functional,
    LinearModel, Session,
};

use crate::config::{ModelName, RunConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{
    read_checkpoint, read_path_csv, write_checkpoint, write_path_csv, write_skeleton, CertificateFile,
};

/// Environment variable holding the number of estimator worker threads.
pub const WORKERS_ENV: &str = "TES_WORKERS";

const MAX_DOUBLINGS: usize = 60;

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Write path, certificate, checkpoint and skeleton into `dir`.
pub fn write_run(dir: &Path, model: ModelName, path: &EpsStrongPath, session: &Session) -> CliResult<()> {
    create_dir(dir)?;
    write_path_csv(&dir.join("path.csv"), &path.values)?;
    CertificateFile::from_path(model, path, session.params(), session.word_pos()).write(&dir.join("certificate.txt"))?;
    write_checkpoint(&dir.join("checkpoint.csv"), session.lattice())?;
    write_skeleton(&dir.join("skeleton.csv"), &skeleton_from_lattice(session.lattice(), path.level)?)?;
    Ok(())
}

/// Emit the configured path from a certified session and write it out.
pub fn run_simulation(cfg: &RunConfig, session: &mut Session) -> CliResult<EpsStrongPath> {
    let path = match cfg.model {
        ModelName::LocalizedLinear => {
            localized_solve(&LinearModel::default(), session, cfg.epsilon, MAX_DOUBLINGS)?.0
        }
        m => session.emit(m.bounded(None)?.as_ref(), cfg.epsilon)?,
    };
    write_run(&cfg.out, cfg.model, &path, session)?;
    Ok(path)
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<EpsStrongPath> {
    cfg.validate()?;
    let mut session = Session::certify(cfg.model.noise_dim(), &cfg.params, cfg.seed)?;
    run_simulation(cfg, &mut session)
}

/// Refine a resumed session to `eps` and write the result into `out`.
pub fn refine_session(
    cert: &CertificateFile,
    session: &mut Session,
    eps: f64,
    out: &Path,
) -> CliResult<EpsStrongPath> {
    if !(eps > 0.0 && eps < cert.epsilon) {
        return Err(CliError::Config(format!(
            "refined tolerance {eps} must lie in (0, {})",
            cert.epsilon
        )));
    }
    let model = cert.model.bounded(Some(cert.model_bound))?;
    if model.bound() != cert.model_bound {
        return Err(CliError::Consistency("stored model bound does not match the model".into()));
    }
    let before = skeleton_from_lattice(session.lattice(), cert.level)?;
    let path = session.emit(model.as_ref(), eps)?;
    if path.constants.g != cert.constants.g {
        return Err(CliError::Consistency("refinement changed the error constant".into()));
    }
    let after = skeleton_from_lattice(session.lattice(), path.level)?.coarsen(cert.level)?;
    for c in 0..before.dim() {
        for (x, y) in after.increments(c).iter().zip(before.increments(c)) {
            if (x - y).abs() > 1e-12 * (1.0 + y.abs()) {
                return Err(CliError::Consistency(format!(
                    "coarsened increments differ on component {c}: {x} vs {y}"
                )));
            }
        }
    }
    write_run(out, cert.model, &path, session)?;
    Ok(path)
}

pub fn cmd_refine(from: &Path, eps: f64, out: &Path) -> CliResult<EpsStrongPath> {
    let cert = CertificateFile::read(&from.join("certificate.txt"))?;
    cert.check()?;
    let lattice = read_checkpoint(&from.join("checkpoint.csv"))?;
    let oracle = Box::new(ExactRecordOracle::new(&cert.params));
    let mut session = Session::resume(cert.seed, cert.word_pos, &cert.params, lattice, cert.certificate, oracle)?;
    refine_session(&cert, &mut session, eps, out)
}

/// Parse `constant:<c>`, `distance` or `terminal:<lo>:<hi>`.
pub fn parse_functional(spec: &str, model: ModelName) -> CliResult<Functional> {
    let bad = || CliError::Config(format!("unknown functional '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        ["constant", c] => Ok(Functional::Constant(num(c)?)),
        ["distance"] => Ok(Functional::DistanceTo(model.bounded(None)?.initial().to_vec())),
        ["terminal", lo, hi] => Ok(Functional::ClippedTerminal {
            coord: 0,
            lo: num(lo)?,
            hi: num(hi)?,
        }),
        _ => Err(bad()),
    }
}

/// Seed of replication `rep`, spread with a SplitMix64 finaliser.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed ^ rep.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn worker_pool() -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(e.to_string()))
}

/// Estimator samples with running mean and standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub se: f64,
}

pub fn cmd_estimate(cfg: &RunConfig, functional: &str) -> CliResult<EstimateSummary> {
    cfg.validate()?;
    let f = parse_functional(functional, cfg.model)?;
    let model = cfg.model.bounded(None)?;
    let settings = EstimatorSettings {
        eps0: cfg.epsilon,
        ..EstimatorSettings::default()
    };
    let samples: Vec<f64> = worker_pool()?.install(|| {
        (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream(cfg.seed, rep);
                let certify = || Session::certify(cfg.model.noise_dim(), &cfg.params, replication_seed(cfg.seed, rep));
                estimate_once(&mut rng, model.as_ref(), &f, &settings, certify).map_err(CliError::from)
            })
            .collect::<CliResult<Vec<f64>>>()
    })?;

    create_dir(&cfg.out)?;
    let file = cfg.out.join("estimates.csv");
    let mut w = csv::Writer::from_path(&file)?;
    w.write_record(["rep", "z", "mean", "se"])?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let (mut mean, mut se) = (0.0, 0.0);
    for (i, z) in samples.iter().enumerate() {
        sum += z;
        sum_sq += z * z;
        let n = (i + 1) as f64;
        mean = sum / n;
        se = if i == 0 {
            0.0
        } else {
            ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
        };
        w.write_record([i.to_string(), format!("{z:?}"), format!("{mean:?}"), format!("{se:?}")])?;
    }
    w.flush().map_err(|e| CliError::io(&file, e))?;
    Ok(EstimateSummary { samples, mean, se })
}

/// Check the configuration and the model's declared bound; with `from`, also
/// re-check a stored run: certificate constants, lattice conditions and the
/// stored path against a fresh Euler pass.
pub fn cmd_validate(cfg: &RunConfig, from: Option<&Path>) -> CliResult<Vec<String>> {
    cfg.validate()?;
    let mut report = vec![format!("configuration ok ({})", cfg.model.as_str())];
    let model = cfg.model.bounded(None)?;
    spot_check_bound(model.as_ref(), &mut seeded(cfg.seed), 10.0, 10_000)?;
    report.push(format!("model bound {} holds at 10000 sampled states", model.bound()));
    let Some(dir) = from else {
        return Ok(report);
    };
    let cert = CertificateFile::read(&dir.join("certificate.txt"))?;
    cert.check()?;
    report.push("certificate constants re-derived".into());
    let lattice = read_checkpoint(&dir.join("checkpoint.csv"))?;
    let top = lattice.top_level().unwrap_or(0);
    for comp in 0..lattice.dim() {
        for level in 0..=top {
            let ok = lattice
                .level(comp, level)
                .iter()
                .zip(lattice.level_conditions(comp, level))
                .all(|(w, c)| c.admits(*w));
            if !ok {
                return Err(CliError::Consistency(format!(
                    "coefficient on level {level} of component {comp} violates its condition"
                )));
            }
        }
    }
    report.push(format!("lattice conditions hold through level {top}"));
    let stored = read_path_csv(&dir.join("path.csv"))?;
    let bounded = cert.model.bounded(Some(cert.model_bound))?;
    let fresh = euler_path(bounded.as_ref(), &skeleton_from_lattice(&lattice, cert.level)?)?;
    if fresh != stored {
        return Err(CliError::Consistency("stored path differs from the Euler scheme on the lattice".into()));
    }
    report.push(format!("path reproduced at level {}", cert.level));
    Ok(report)
}
