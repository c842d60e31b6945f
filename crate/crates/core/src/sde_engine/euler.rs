//! Euler recursions on a dyadic skeleton.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::model::{check_dims, SdeModel};
use crate::dyadic_bm::{mesh, Skeleton};
use crate::levy_area::AreaTable;
use crate::{Result, TesError};

fn check_skeleton(model: &dyn SdeModel, skel: &Skeleton) -> Result<()> {
    check_dims(model)?;
    if skel.dim() != model.noise_dim() {
        return Err(TesError::config(format!(
            "skeleton has {} components, model expects {}",
            skel.dim(),
            model.noise_dim()
        )));
    }
    Ok(())
}

fn finite_or_err(x: &[f64], prev: &[f64], k: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TesError::invariant(format!(
            "non-finite Euler state at step {k}, previous state {prev:?}"
        )))
    }
}

/// Euler scheme `X(t_{k+1}) = X(t_k) + mu dt + sigma dZ` at the skeleton's
/// breakpoints; `out[k]` is the state at `k 2^-n`.
pub fn euler_path(model: &dyn SdeModel, skel: &Skeleton) -> Result<Vec<Vec<f64>>> {
    euler_inner(model, skel, None)
}

/// Euler scheme with the second-order correction
/// `sum_{j,l,m} d_l sigma_ij sigma_lm A_mj` over each step.
pub fn area_euler_path(model: &dyn SdeModel, skel: &Skeleton, areas: &AreaTable) -> Result<Vec<Vec<f64>>> {
    if areas.level() != skel.level() || areas.dim() != skel.dim() {
        return Err(TesError::config(format!(
            "area table on level {} does not match the level-{} skeleton",
            areas.level(),
            skel.level()
        )));
    }
    euler_inner(model, skel, Some(areas))
}

fn euler_inner(model: &dyn SdeModel, skel: &Skeleton, areas: Option<&AreaTable>) -> Result<Vec<Vec<f64>>> {
    check_skeleton(model, skel)?;
    let (d, dp) = (model.state_dim(), model.noise_dim());
    let dt = mesh(skel.level());
    let steps = 1usize << skel.level();
    let mut mu = vec![0.0; d];
    let mut sigma = vec![0.0; d * dp];
    let mut dsigma = vec![0.0; d * dp * d];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(model.initial().to_vec());
    for k in 0..steps {
        let x = &out[k];
        model.drift(x, &mut mu);
        model.diffusion(x, &mut sigma);
        let mut next = x.clone();
        for i in 0..d {
            next[i] += mu[i] * dt;
            for j in 0..dp {
                next[i] += sigma[i * dp + j] * skel.increments(j)[k];
            }
        }
        if let Some(a) = areas {
            model.diffusion_derivative(x, &mut dsigma);
            for i in 0..d {
                let mut corr = 0.0;
                for j in 0..dp {
                    for l in 0..d {
                        let dl = dsigma[(i * dp + j) * d + l];
                        if dl == 0.0 {
                            continue;
                        }
                        for m in 0..dp {
                            corr += dl * sigma[l * dp + m] * a.get(m, j, k);
                        }
                    }
                }
                next[i] += corr;
            }
        }
        finite_or_err(&next, x, k)?;
        out.push(next);
    }
    Ok(out)
}

/// `max_t |a(t) - b(t)|_inf` between two piecewise-constant paths given at
/// their breakpoints, either of which may be on a finer grid.
pub fn sup_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let (fine, coarse) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let (nf, nc) = (fine.len() - 1, coarse.len() - 1);
    if nc == 0 || nf % nc != 0 {
        return Err(TesError::config("paths are not on nested dyadic grids"));
    }
    let ratio = nf / nc;
    let mut worst = 0.0f64;
    for (k, x) in fine.iter().enumerate() {
        // a piecewise-constant path holds its value on [t_k, t_{k+1})
        let y = &coarse[(k / ratio).min(nc)];
        for (u, v) in x.iter().zip(y) {
            worst = worst.max((u - v).abs());
        }
    }
    Ok(worst)
}
