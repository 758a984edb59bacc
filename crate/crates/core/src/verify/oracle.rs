//! Lattice-walk approximation of the membrane process, used as an
//! independent reference for the exact sampler.
//!
//! The ν-coordinate walks on `dx·Z` with time step `(dx/σ)²`; from site 0 it
//! steps up with probability `(1+q)/2`. Every step taken from 0 adds
//! `calibration·dx/σ²` to the local time. Given the ν-path, the lateral
//! coordinates are Gaussian with mean shift `(y_ν − x_ν)Uᵀb/σ²` and covariance
//! `tB_S`, then shifted by `α·η`.

use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelParams, SpaceDecomposition};
use crate::sampler::RngState;

/// Lattice points per `σ√t` of the ν-axis.
pub const POINTS_PER_SD: f64 = 100.0;
pub const MIN_STEPS: u64 = 10_000;
pub const MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub dx: f64,
    pub n_steps: u64,
    pub n_paths: usize,
    pub calibration: f64,
}

impl OracleConfig {
    /// Step `σ√t/100`, shrunk so that the start `x_ν` is a lattice point.
    pub fn for_start(t: f64, x_nu: f64, sigma: f64, n_paths: usize, calibration: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::NonPositiveTime(t));
        }
        let mut dx = sigma * t.sqrt() / POINTS_PER_SD;
        if x_nu != 0.0 {
            let k = (x_nu.abs() / dx).ceil();
            dx = x_nu.abs() / k;
        }
        let n_steps = (t * sigma * sigma / (dx * dx)).round() as u64;
        let cfg = OracleConfig {
            dx,
            n_steps,
            n_paths,
            calibration,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return Err(Error::InvalidArgument(format!("oracle dx must be positive, got {}", self.dx)));
        }
        if !(self.calibration > 0.0) || !self.calibration.is_finite() {
            return Err(Error::InvalidArgument(format!("oracle calibration must be positive, got {}", self.calibration)));
        }
        if self.n_steps < MIN_STEPS || self.n_steps > MAX_STEPS {
            return Err(Error::InvalidArgument(format!(
                "oracle needs {MIN_STEPS} <= n_steps <= {MAX_STEPS}, got {}",
                self.n_steps
            )));
        }
        Ok(())
    }
}

/// Endpoint `x(t)` (after the α-shift) and local time of one oracle path.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub y: DVector<f64>,
    pub eta: f64,
}

/// Runs the skewed walk from lattice site `k0`; returns the final site and
/// the number of steps taken from site 0.
fn walk<R: RngCore + ?Sized>(k0: i64, n_steps: u64, q: f64, rng: &mut R) -> (i64, u64) {
    let p_up = 0.5 * (1.0 + q);
    let mut k = k0;
    let mut visits = 0u64;
    let mut bits = 0u64;
    let mut left = 0u32;
    let mut remaining = n_steps;
    while remaining > 0 {
        if k == 0 {
            visits += 1;
            k = if rng.random::<f64>() < p_up { 1 } else { -1 };
            remaining -= 1;
            continue;
        }
        if k.unsigned_abs() >= remaining {
            // cannot reach 0 any more: finish with a plain symmetric walk
            while remaining > 0 {
                let take = remaining.min(64) as u32;
                let mut draw = rng.next_u64();
                if take < 64 {
                    draw &= (1u64 << take) - 1;
                }
                k += 2 * draw.count_ones() as i64 - take as i64;
                remaining -= take as u64;
            }
            break;
        }
        if left == 0 {
            bits = rng.next_u64();
            left = 64;
        }
        k += if bits & 1 == 1 { 1 } else { -1 };
        bits >>= 1;
        left -= 1;
        remaining -= 1;
    }
    (k, visits)
}

/// `oracle.n_paths` endpoints from `x0` at time `t`; path `i` runs on
/// substream `state.child(i)`.
pub fn oracle_walk(
    params: &ModelParams,
    dec: &SpaceDecomposition,
    oracle: &OracleConfig,
    t: f64,
    x0: &DVector<f64>,
    state: RngState,
) -> Result<Vec<OracleSample>> {
    oracle.validate()?;
    let x_nu = x0.dot(dec.nu());
    let k0f = x_nu / oracle.dx;
    let k0 = k0f.round();
    if (k0f - k0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("start x_nu = {x_nu} is not on the lattice of step {}", oracle.dx)));
    }
    let s2 = dec.sigma2();
    let q = params.q();
    let s_x = dec.lateral_coords(x0);
    let alpha_s = dec.lateral_coords(params.alpha());
    let k = dec.dim() - 1;
    let out = (0..oracle.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = state.child(i as u64).rng();
            let (k_end, visits) = walk(k0 as i64, oracle.n_steps, q, &mut rng);
            let y_nu = k_end as f64 * oracle.dx;
            let eta = oracle.calibration * visits as f64 * oracle.dx / s2;
            let xi = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = &s_x + dec.lateral_drift() * (y_nu - x_nu) + dec.lateral_chol() * xi * t.sqrt() + &alpha_s * eta;
            OracleSample {
                y: dec.from_coords(y_nu, &s),
                eta,
            }
        })
        .collect();
    Ok(out)
}

/// Measures the calibration constant: with `q = 0`, `σ = 1`, `t = 1` and a
/// start on `S`, the local time has mean `√(2/π)`.
pub fn calibrate(n_paths: usize, state: RngState) -> Result<f64> {
    let cfg = OracleConfig::for_start(1.0, 0.0, 1.0, n_paths, 1.0)?;
    let total: u64 = (0..n_paths)
        .into_par_iter()
        .map(|i| walk(0, cfg.n_steps, 0.0, &mut state.child(i as u64).rng()).1)
        .sum();
    let mean_eta = total as f64 / n_paths as f64 * cfg.dx;
    if !(mean_eta > 0.0) {
        return Err(Error::InvalidArgument("oracle calibration run saw no visits to the membrane".into()));
    }
    Ok((2.0 / std::f64::consts::PI).sqrt() / mean_eta)
}
