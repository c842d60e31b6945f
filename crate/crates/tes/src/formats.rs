//! On-disk formats.
//!
//! * `path.csv`: `t,x1,..,xd`, one row per breakpoint `k 2^-n`, `k = 0..=2^n`.
//! * `certificate.txt`: `key = value` lines; floats are written in their
//!   shortest round-trip form.
//! * `checkpoint.csv`: `component,level,position,coefficient,condition,threshold`,
//!   one row per Haar coefficient; `condition` is `free`, `below` or `above`.
//! * `skeleton.csv`: `component,level,position,increment`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use tes_core::dyadic_bm::{level_len, Condition, Skeleton, WaveletLattice};
use tes_core::error_constants::{level_for_tolerance, procedure_a, ConstantInputs, ErrorConstants};
use tes_core::levy_area::{rough_bounds_from, RoughBounds};
use tes_core::sde_engine::{Certificate, EpsStrongPath};
use tes_core::Params;

use crate::config::ModelName;
use crate::error::{CliError, CliResult};

pub fn write_path_csv(path: &Path, values: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = values.first().map_or(0, |x| x.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    let steps = (values.len() - 1).max(1) as f64;
    for (k, x) in values.iter().enumerate() {
        let mut row = vec![format!("{:?}", k as f64 / steps)];
        row.extend(x.iter().map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_path_csv(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: Result<Vec<f64>, _> = rec.iter().skip(1).map(str::parse).collect();
        out.push(row.map_err(|_| CliError::checkpoint(path, "malformed number"))?);
    }
    Ok(out)
}

/// Everything needed to resume a run and to re-check its constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateFile {
    pub model: ModelName,
    pub model_bound: f64,
    pub epsilon: f64,
    pub level: usize,
    pub seed: u64,
    pub word_pos: u128,
    pub params: Params,
    pub certificate: Certificate,
    pub constants: ErrorConstants,
}

impl CertificateFile {
    pub fn from_path(model: ModelName, path: &EpsStrongPath, params: &Params, word_pos: u128) -> Self {
        CertificateFile {
            model,
            model_bound: path.model_bound,
            epsilon: path.epsilon,
            level: path.level,
            seed: path.seed,
            word_pos,
            params: *params,
            certificate: path.certificate,
            constants: path.constants,
        }
    }

    pub fn render(&self) -> String {
        let c = &self.constants;
        let cert = &self.certificate;
        let p = &self.params;
        let mut lines = vec![
            format!("model = {}", self.model.as_str()),
            format!("model_bound = {:?}", self.model_bound),
            format!("epsilon = {:?}", self.epsilon),
            format!("level = {}", self.level),
            format!("seed = {}", self.seed),
            format!("word_pos = {}", self.word_pos),
            format!("g = {:?}", c.g),
            format!("g1 = {:?}", c.g1),
            format!("g2 = {:?}", c.g2),
            format!("c1 = {:?}", c.c1),
            format!("c2 = {:?}", c.c2),
            format!("c3 = {:?}", c.c3),
            format!("b = {:?}", c.b),
            format!("c4 = {:?}", c.c4),
            format!("delta = {:?}", c.delta),
            format!("delta_b = {:?}", c.delta_b),
            format!("delta_c4 = {:?}", c.delta_c4),
            format!("n1 = {}", cert.n1),
            format!("n2 = {}", cert.n2),
            format!("k_alpha = {:?}", cert.k_alpha),
            format!("gamma_l = {:?}", cert.rough.gamma_l),
            format!("gamma_r = {:?}", cert.rough.gamma_r),
            format!("k_2alpha = {:?}", cert.rough.k_2alpha),
        ];
        lines.extend([
            format!("alpha = {:?}", p.alpha),
            format!("beta = {:?}", p.beta),
            format!("alpha_prime = {:?}", p.alpha_prime),
            format!("gamma = {:?}", p.gamma),
            format!("eps0 = {:?}", p.eps0),
            format!("rho = {:?}", p.rho),
            format!("level_cap = {}", p.level_cap),
            format!("scan_cap = {}", p.scan_cap),
            format!("max_attempts = {}", p.max_attempts),
        ]);
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    pub fn parse(text: &str, origin: &Path) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::checkpoint(origin, format!("bad line '{line}'")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| {
            map.get(key)
                .ok_or_else(|| CliError::checkpoint(origin, format!("missing key '{key}'")))
        };
        macro_rules! num {
            ($key:expr) => {
                get($key)?
                    .parse()
                    .map_err(|_| CliError::checkpoint(origin, format!("bad value for '{}'", $key)))?
            };
        }
        let params = Params {
            alpha: num!("alpha"),
            beta: num!("beta"),
            alpha_prime: num!("alpha_prime"),
            gamma: num!("gamma"),
            eps0: num!("eps0"),
            rho: num!("rho"),
            level_cap: num!("level_cap"),
            scan_cap: num!("scan_cap"),
            max_attempts: num!("max_attempts"),
        };
        Ok(CertificateFile {
            model: get("model")?.parse()?,
            model_bound: num!("model_bound"),
            epsilon: num!("epsilon"),
            level: num!("level"),
            seed: num!("seed"),
            word_pos: num!("word_pos"),
            params,
            certificate: Certificate {
                n1: num!("n1"),
                n2: num!("n2"),
                k_alpha: num!("k_alpha"),
                rough: RoughBounds {
                    gamma_l: num!("gamma_l"),
                    gamma_r: num!("gamma_r"),
                    k_2alpha: num!("k_2alpha"),
                },
            },
            constants: ErrorConstants {
                c1: num!("c1"),
                c2: num!("c2"),
                c3: num!("c3"),
                b: num!("b"),
                c4: num!("c4"),
                delta: num!("delta"),
                delta_b: num!("delta_b"),
                delta_c4: num!("delta_c4"),
                g1: num!("g1"),
                g2: num!("g2"),
                g: num!("g"),
            },
        })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Recompute every derived quantity and compare with what was stored.
    pub fn check(&self) -> CliResult<()> {
        let p = &self.params;
        p.validate()?;
        let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * a.abs().max(b.abs());
        let fail = |what: &str| Err(CliError::Consistency(format!("certificate: {what}")));
        let cert = &self.certificate;
        let rough = rough_bounds_from(cert.rough.gamma_l, cert.k_alpha, p);
        if !close(rough.gamma_r, cert.rough.gamma_r, 1e-12) || !close(rough.k_2alpha, cert.rough.k_2alpha, 1e-12) {
            return fail("area constants do not follow from gamma_l and k_alpha");
        }
        let d = self.model.state_dim().max(self.model.noise_dim());
        let c = procedure_a(&ConstantInputs {
            k_alpha: cert.k_alpha,
            k_2alpha: cert.rough.k_2alpha,
            k_r: cert.rough.gamma_r,
            m: self.model_bound,
            d,
            alpha: p.alpha,
            beta: p.beta,
        })?;
        if !close(c.g, self.constants.g, 1e-9) || !close(self.constants.g1 + self.constants.g2, self.constants.g, 1e-12) {
            return fail("error constant G does not match its inputs");
        }
        let rate = 2.0 * p.alpha - p.beta;
        if self.epsilon < self.constants.g * (-(self.level as f64) * rate).exp2() {
            return fail("epsilon is below G 2^(-n (2 alpha - beta))");
        }
        if level_for_tolerance(self.constants.g, self.epsilon, p.alpha, p.beta)? != self.level {
            return fail("level is not the smallest one meeting the tolerance");
        }
        Ok(())
    }
}

fn condition_fields(c: Condition) -> (&'static str, String) {
    match c {
        Condition::Free => ("free", String::new()),
        Condition::Below(t) => ("below", format!("{t:?}")),
        Condition::Above(t) => ("above", format!("{t:?}")),
    }
}

pub fn write_checkpoint(path: &Path, lattice: &WaveletLattice) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["component", "level", "position", "coefficient", "condition", "threshold"])?;
    let top = lattice.top_level().unwrap_or(0);
    for comp in 0..lattice.dim() {
        for level in 0..=top {
            let values = lattice.level(comp, level);
            let conds = lattice.level_conditions(comp, level);
            for (k, (v, c)) in values.iter().zip(conds).enumerate() {
                let (name, th) = condition_fields(*c);
                w.write_record([
                    comp.to_string(),
                    level.to_string(),
                    k.to_string(),
                    format!("{v:?}"),
                    name.to_string(),
                    th,
                ])?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> CliResult<WaveletLattice> {
    let bad = |msg: &str| CliError::checkpoint(path, msg);
    let mut r = csv::Reader::from_path(path)?;
    // (level, component) -> positions
    let mut cells: BTreeMap<(usize, usize), Vec<Option<(f64, Condition)>>> = BTreeMap::new();
    let mut dim = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(bad("expected six columns"));
        }
        let comp: usize = rec[0].parse().map_err(|_| bad("bad component"))?;
        let level: usize = rec[1].parse().map_err(|_| bad("bad level"))?;
        let pos: usize = rec[2].parse().map_err(|_| bad("bad position"))?;
        let coef: f64 = rec[3].parse().map_err(|_| bad("bad coefficient"))?;
        let threshold = || rec[5].parse::<f64>().map_err(|_| bad("bad threshold"));
        let cond = match &rec[4] {
            "free" => Condition::Free,
            "below" => Condition::Below(threshold()?),
            "above" => Condition::Above(threshold()?),
            _ => return Err(bad("unknown condition")),
        };
        if level > 62 || pos >= level_len(level) {
            return Err(bad("position outside its level"));
        }
        dim = dim.max(comp + 1);
        let slot = cells.entry((level, comp)).or_insert_with(|| vec![None; level_len(level)]);
        if slot[pos].replace((coef, cond)).is_some() {
            return Err(bad("duplicate coefficient"));
        }
    }
    if dim == 0 {
        return Err(bad("no coefficients"));
    }
    let top = cells.keys().map(|(l, _)| *l).max().unwrap_or(0);
    let mut lattice = WaveletLattice::new(dim)?;
    for level in 0..=top {
        let mut values = Vec::with_capacity(dim);
        let mut conds = Vec::with_capacity(dim);
        for comp in 0..dim {
            let slot = cells.remove(&(level, comp)).ok_or_else(|| bad("missing level"))?;
            let (v, c): (Vec<f64>, Vec<Condition>) = slot
                .into_iter()
                .map(|x| x.ok_or_else(|| bad("missing coefficient")))
                .collect::<CliResult<Vec<_>>>()?
                .into_iter()
                .unzip();
            values.push(v);
            conds.push(c);
        }
        lattice.push_level(values, conds)?;
    }
    Ok(lattice)
}

pub fn write_skeleton(path: &Path, skel: &Skeleton) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["component", "level", "position", "increment"])?;
    for comp in 0..skel.dim() {
        for (k, x) in skel.increments(comp).iter().enumerate() {
            w.write_record([comp.to_string(), skel.level().to_string(), k.to_string(), format!("{x:?}")])?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}
