//! Goodness of fit of one-step samples against the quadrature density.

use nalgebra::DVector;

use crate::density::TransitionKernel;
use crate::error::{Error, Result};
use crate::geometry::{ModelParams, SpaceDecomposition};
use crate::quadrature::{GaussLegendre, QuadratureSpec};
use crate::sampler::{draw_batch, step, RngState};
use crate::stats::{binomial_z, chi_square_gof, ChiSquareResult};

/// Bins per axis of the χ² histogram.
pub const BINS: usize = 20;
/// Half-width of the histogram range, in standard deviations.
pub const RANGE_SIGMAS: f64 = 4.0;
/// Gauss–Legendre order per axis for the cell probabilities.
pub const CELL_ORDER: usize = 4;

/// Rectangular histogram in `(y_ν, s)` coordinates of a planar model; the
/// ν-edges always include 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramGrid {
    pub nu_edges: Vec<f64>,
    pub lateral_edges: Vec<f64>,
}

impl HistogramGrid {
    /// Covers `x_ν ± 4σ√t` in `y_ν` and the lateral spread of the endpoint,
    /// including the α-shift over local times up to `4√t/σ`.
    pub fn for_step(t: f64, x: &DVector<f64>, params: &ModelParams, dec: &SpaceDecomposition) -> Result<Self> {
        if dec.dim() != 2 {
            return Err(Error::InvalidArgument(format!("histogram checks need d = 2, got {}", dec.dim())));
        }
        let sd = dec.sigma() * t.sqrt();
        let x_nu = x.dot(dec.nu());
        let width = 2.0 * RANGE_SIGMAS * sd / BINS as f64;
        let lo = width * ((x_nu - RANGE_SIGMAS * sd) / width).floor();
        let nu_edges = (0..=BINS).map(|i| lo + width * i as f64).collect();

        let c = dec.lateral_drift()[0];
        let lat_sd = (t * (dec.lateral_cov()[(0, 0)] + dec.sigma2() * c * c)).sqrt();
        let shift = dec.lateral_coords(params.alpha())[0] * RANGE_SIGMAS * t.sqrt() / dec.sigma();
        let s_x = dec.lateral_coords(x)[0];
        let a = s_x - RANGE_SIGMAS * lat_sd + shift.min(0.0);
        let b = s_x + RANGE_SIGMAS * lat_sd + shift.max(0.0);
        let lw = (b - a) / BINS as f64;
        let lateral_edges = (0..=BINS).map(|i| a + lw * i as f64).collect();
        Ok(HistogramGrid { nu_edges, lateral_edges })
    }

    pub fn cells(&self) -> usize {
        (self.nu_edges.len() - 1) * (self.lateral_edges.len() - 1)
    }

    /// Cell index of `(y_ν, s)`, or `None` outside the grid.
    pub fn locate(&self, y_nu: f64, s: f64) -> Option<usize> {
        let find = |edges: &[f64], v: f64| -> Option<usize> {
            if v < edges[0] || v >= edges[edges.len() - 1] {
                return None;
            }
            Some((edges.partition_point(|&e| e <= v) - 1).min(edges.len() - 2))
        };
        let i = find(&self.nu_edges, y_nu)?;
        let j = find(&self.lateral_edges, s)?;
        Some(i * (self.lateral_edges.len() - 1) + j)
    }

    /// Probabilities of the cells followed by the overflow probability.
    pub fn probabilities(&self, kernel: &TransitionKernel<'_>, t: f64, x: &DVector<f64>) -> Result<Vec<f64>> {
        let dec = kernel.decomposition();
        let rule = GaussLegendre::new(CELL_ORDER);
        let mut probs = Vec::with_capacity(self.cells() + 1);
        let mut y = DVector::zeros(2);
        for w in self.nu_edges.windows(2) {
            for v in self.lateral_edges.windows(2) {
                let (hn, mn) = (0.5 * (w[1] - w[0]), 0.5 * (w[1] + w[0]));
                let (hl, ml) = (0.5 * (v[1] - v[0]), 0.5 * (v[1] + v[0]));
                let mut acc = 0.0;
                for (a, wa) in rule.nodes().iter().zip(rule.weights()) {
                    for (b, wb) in rule.nodes().iter().zip(rule.weights()) {
                        let s = DVector::from_element(1, ml + hl * b);
                        y.copy_from(&dec.from_coords(mn + hn * a, &s));
                        acc += wa * wb * kernel.density(t, x, &y)?;
                    }
                }
                probs.push(acc * hn * hl);
            }
        }
        let inside: f64 = probs.iter().sum();
        probs.push((1.0 - inside).max(0.0));
        Ok(probs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessResult {
    pub chi_square: ChiSquareResult,
    pub n: usize,
    pub no_hit: usize,
    /// `P(θ = 0) = 1 − P(hit)`.
    pub no_hit_expected: f64,
    pub no_hit_z: f64,
}

/// χ² test of `n` draws of `x(t)` from [`step`] against `G(t, x, ·)` on a
/// [`HistogramGrid`], together with the frequency of `θ = 0`.
pub fn check_step_histogram(
    t: f64,
    x: &DVector<f64>,
    params: &ModelParams,
    dec: &SpaceDecomposition,
    quad: &QuadratureSpec,
    n: usize,
    state: RngState,
) -> Result<ExactnessResult> {
    let grid = HistogramGrid::for_step(t, x, params, dec)?;
    let kernel = TransitionKernel::new(params, dec, quad)?;
    let probs = grid.probabilities(&kernel, t, x)?;
    let draws = draw_batch(n, state, |rng| step(t, x, params, dec, rng))?;
    let mut observed = vec![0.0; probs.len()];
    let mut no_hit = 0;
    for (y, theta) in &draws {
        if *theta == 0.0 {
            no_hit += 1;
        }
        let s = dec.lateral_coords(y)[0];
        let idx = grid.locate(y.dot(dec.nu()), s).unwrap_or(probs.len() - 1);
        observed[idx] += 1.0;
    }
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let chi_square = chi_square_gof(&observed, &expected, 5.0);
    let no_hit_expected = 1.0 - crate::sampler::hit_probability(t, x.dot(dec.nu()), dec)?;
    Ok(ExactnessResult {
        chi_square,
        n,
        no_hit,
        no_hit_expected,
        no_hit_z: binomial_z(no_hit, n, no_hit_expected),
    })
}
