//! Gauss–Legendre panel quadrature.
//!
//! The one-dimensional engine used everywhere in the crate: a composite
//! Gauss–Legendre rule on equal panels, and a doubling driver that refines the
//! panel count until two successive levels agree.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and truncation for the θ-integral and the spatial tensor rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the panel count of the doubling driver.
    pub max_panels: usize,
    /// First panel count tried by the doubling driver. Setting it to
    /// `max_panels / 2` pins the rule, which keeps finite differences of
    /// quadrature values smooth.
    pub min_panels: usize,
    /// θ-integral truncated at `z = |x_ν| + |y_ν| + tail_sigmas·σ√t`.
    pub tail_sigmas: f64,
    /// Half-width, in standard deviations, of spatial integration boxes.
    pub space_tail_sigmas: f64,
    /// Width, in standard deviations, of one spatial Gauss–Legendre panel.
    pub space_panel_sigmas: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_panels: 64,
            min_panels: 1,
            tail_sigmas: 10.0,
            space_tail_sigmas: 8.0,
            space_panel_sigmas: 2.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidQuadrature(
                "rel_tol and abs_tol must be positive".into(),
            ));
        }
        if self.max_panels < 1 || self.min_panels < 1 || self.min_panels > self.max_panels {
            return Err(Error::InvalidQuadrature(format!(
                "need 1 <= min_panels <= max_panels, got {} and {}",
                self.min_panels, self.max_panels
            )));
        }
        if !(self.tail_sigmas >= 6.0) || !self.tail_sigmas.is_finite() {
            return Err(Error::InvalidQuadrature(format!(
                "tail_sigmas must be at least 6, got {}",
                self.tail_sigmas
            )));
        }
        if !(self.space_tail_sigmas >= 6.0) || !self.space_tail_sigmas.is_finite() {
            return Err(Error::InvalidQuadrature(format!(
                "space_tail_sigmas must be at least 6, got {}",
                self.space_tail_sigmas
            )));
        }
        if !(self.space_panel_sigmas > 0.0) || !self.space_panel_sigmas.is_finite() {
            return Err(Error::InvalidQuadrature(
                "space_panel_sigmas must be positive".into(),
            ));
        }
        Ok(())
    }

    /// A rule with a fixed panel count `panels` (the driver still checks it
    /// against `panels / 2`).
    pub fn pinned(panels: usize) -> Self {
        let panels = panels.max(2);
        QuadratureSpec {
            max_panels: panels,
            min_panels: panels / 2,
            ..Self::default()
        }
    }
}

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Single-panel rule on `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite rule on `panels` equal panels of `[a, b]`.
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                self.integrate(&mut f, lo, lo + h)
            })
            .sum()
    }

    /// Appends the composite-rule nodes and weights of `[a, b]` to `out`.
    pub fn push_composite_nodes(&self, a: f64, b: f64, panels: usize, out: &mut Vec<(f64, f64)>) {
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            let lo = a + h * k as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The 16-point rule used by the panel integrators.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// The 8-point rule used for small cells.
pub fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// Result of the doubling driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelIntegral {
    pub value: f64,
    /// `|I(n) − I(n/2)|` at the accepted level.
    pub error_estimate: f64,
    pub panels: usize,
}

/// Integrates `f` over `[a, b]` with 16-point panels, doubling the panel count
/// from `spec.min_panels` until successive levels agree to
/// `max(rel_tol·|I|, abs_tol)`.
pub fn integrate_doubling<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<PanelIntegral> {
    if a == b {
        return Ok(PanelIntegral {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
        });
    }
    let rule = gl16();
    let mut panels = spec.min_panels.max(1);
    let mut prev = rule.composite(&mut f, a, b, panels);
    let mut residual = f64::INFINITY;
    while panels * 2 <= spec.max_panels {
        panels *= 2;
        let cur = rule.composite(&mut f, a, b, panels);
        residual = (cur - prev).abs();
        if residual <= (spec.rel_tol * cur.abs()).max(spec.abs_tol) {
            return Ok(PanelIntegral {
                value: cur,
                error_estimate: residual,
                panels,
            });
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged { panels, residual })
}

/// Nodes/weights of a composite rule covering `[a, b]` with panels no wider
/// than `width`, with `breaks` (points inside `(a, b)`) forced onto panel
/// boundaries.
pub fn breakpoint_nodes(a: f64, b: f64, width: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.extend(inner);
    cuts.push(b);
    let rule = gl16();
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
        rule.push_composite_nodes(lo, hi, panels, &mut out);
    }
    out
}
