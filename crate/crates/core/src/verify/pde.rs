//! Finite-difference checks of the boundary-value problem solved by
//! `u(t, x) = ∫ φ(y) G(t, x, y) dy`: the heat equation off `S`, continuity
//! across `S`, and the conormal flux condition on `S`.
//!
//! `u` is evaluated with y-nodes frozen once per check and a pinned θ-rule,
//! so that it is a smooth function of `(t, x)` and differences of it are not
//! polluted by changes of the quadrature rule.

use nalgebra::{DMatrix, DVector};

use crate::density::{for_each_tensor_node, mass_box, tensor_nodes, CoordBox, Support, TestFunction, TransitionKernel};
use crate::error::{Error, Result};
use crate::geometry::{ModelParams, SpaceDecomposition};
use crate::quadrature::QuadratureSpec;

/// Panel count of the pinned θ-rule used by the finite-difference checks.
pub const PDE_PANELS: usize = 16;

/// Quadrature of the finite-difference checks. The residuals vanish node by
/// node, so the y-rule only needs to resolve `u` itself and can be coarse.
pub fn pde_quadrature() -> QuadratureSpec {
    QuadratureSpec {
        space_panel_sigmas: 4.0,
        ..QuadratureSpec::pinned(PDE_PANELS)
    }
}

/// `u(·, ·, φ)` on a frozen tensor rule in `y`.
pub struct FrozenU<'a> {
    kernel: TransitionKernel<'a>,
    /// `(y, w·φ(y))` for every node where `φ` does not vanish.
    nodes: Vec<(DVector<f64>, f64)>,
}

impl<'a> FrozenU<'a> {
    /// Nodes cover the mass box of `G(t_ref, x_ref, ·)` (with a wide tail)
    /// intersected with the support of `φ`.
    pub fn new(
        t_ref: f64,
        x_ref: &DVector<f64>,
        phi: &TestFunction<'_>,
        params: &'a ModelParams,
        dec: &'a SpaceDecomposition,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        let kernel = TransitionKernel::new(params, dec, quad)?;
        let wide = QuadratureSpec {
            space_tail_sigmas: quad.space_tail_sigmas.max(10.0),
            ..*quad
        };
        let mut bx = mass_box(t_ref, x_ref, params, dec, &wide, true);
        if let Support::Ball { center, radius } = phi.support() {
            let c_nu = center.dot(dec.nu());
            let c_lat = dec.lateral_coords(center);
            bx = bx.intersect(&CoordBox {
                nu: (c_nu - radius, c_nu + radius),
                lateral: c_lat.iter().map(|&c| (c - radius, c + radius)).collect(),
            });
        }
        let mut nodes = Vec::new();
        if !bx.is_empty() {
            let (nu_nodes, lateral) = tensor_nodes(t_ref, &bx, dec, quad);
            for_each_tensor_node(dec, &nu_nodes, &lateral, |y, w| {
                let v = phi.eval(y);
                if v != 0.0 {
                    nodes.push((y.clone(), w * v));
                }
                Ok(())
            })?;
        }
        Ok(FrozenU { kernel, nodes })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (y, w) in &self.nodes {
            acc += w * self.kernel.density(t, x, y)?;
        }
        Ok(acc)
    }
}

/// The test function shared by the checks: a Gaussian bump of width 0.3
/// centred at `(0.2, …, 0.2, 0.1)` in `(s, y_ν)` coordinates, so that it
/// straddles the membrane.
pub fn default_bump(dec: &SpaceDecomposition) -> TestFunction<'static> {
    let center = dec.from_coords(0.1, &DVector::from_element(dec.dim() - 1, 0.2));
    TestFunction::gaussian_bump(center, 0.3)
}

/// Finite-difference steps of the heat-equation check.
pub const HEAT_STEPS: [f64; 3] = [4e-3, 2e-3, 1e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct HeatResult {
    /// `|∂_t u − ½Tr(B D²u)|` for each step in [`HEAT_STEPS`].
    pub residuals: Vec<f64>,
    /// Smallest of the successive orders `log₂(R(2h)/R(h))`.
    pub order: f64,
}

/// `∂_t u − ½Tr(B D²u)` at `(t, x)` by central differences of step `h` in
/// both time and space.
pub fn heat_residual(u: &FrozenU<'_>, b: &DMatrix<f64>, t: f64, x: &DVector<f64>, h: f64) -> Result<f64> {
    let d = x.len();
    let e = |i: usize| {
        let mut v = DVector::zeros(d);
        v[i] = h;
        v
    };
    let u0 = u.eval(t, x)?;
    let dt = (u.eval(t + h, x)? - u.eval(t - h, x)?) / (2.0 * h);
    let mut trace = 0.0;
    for i in 0..d {
        let ei = e(i);
        let dii = (u.eval(t, &(x + &ei))? - 2.0 * u0 + u.eval(t, &(x - &ei))?) / (h * h);
        trace += b[(i, i)] * dii;
        for j in (i + 1)..d {
            let ej = e(j);
            let dij = (u.eval(t, &(x + &ei + &ej))? - u.eval(t, &(x + &ei - &ej))? - u.eval(t, &(x - &ei + &ej))?
                + u.eval(t, &(x - &ei - &ej))?)
                / (4.0 * h * h);
            trace += 2.0 * b[(i, j)] * dij;
        }
    }
    Ok(dt - 0.5 * trace)
}

pub fn check_heat_equation(t: f64, x: &DVector<f64>, params: &ModelParams, dec: &SpaceDecomposition) -> Result<HeatResult> {
    let h_max = HEAT_STEPS[0];
    let dist = x.dot(dec.nu()).abs();
    if dist <= 3.0 * h_max {
        return Err(Error::InvalidArgument(format!(
            "heat-equation check needs dist(x, S) > {}, got {dist}",
            3.0 * h_max
        )));
    }
    if t <= h_max {
        return Err(Error::InvalidArgument(format!("heat-equation check needs t > {h_max}")));
    }
    let quad = pde_quadrature();
    let phi = default_bump(dec);
    let u = FrozenU::new(t, x, &phi, params, dec, &quad)?;
    let residuals = HEAT_STEPS
        .iter()
        .map(|&h| heat_residual(&u, params.diffusion(), t, x, h).map(f64::abs))
        .collect::<Result<Vec<_>>>()?;
    let order = residuals
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .fold(f64::INFINITY, f64::min);
    Ok(HeatResult { residuals, order })
}

/// Offsets of the continuity check.
pub const CONTINUITY_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityResult {
    /// `u(t, x + εν) − u(t, x − εν)` for each ε in [`CONTINUITY_EPS`].
    pub jumps: Vec<f64>,
    /// Linear extrapolation to `ε = 0` from the two smallest offsets.
    pub extrapolated: f64,
}

fn require_on_membrane(x: &DVector<f64>, dec: &SpaceDecomposition) -> Result<()> {
    let x_nu = x.dot(dec.nu());
    if x_nu.abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("point must lie on the membrane, (x, nu) = {x_nu}")));
    }
    Ok(())
}

pub fn check_continuity(t: f64, x: &DVector<f64>, params: &ModelParams, dec: &SpaceDecomposition, phi: &TestFunction<'_>) -> Result<ContinuityResult> {
    require_on_membrane(x, dec)?;
    let quad = pde_quadrature();
    let u = FrozenU::new(t, x, phi, params, dec, &quad)?;
    let nu = dec.nu();
    let jumps = CONTINUITY_EPS
        .iter()
        .map(|&e| Ok(u.eval(t, &(x + nu * e))? - u.eval(t, &(x - nu * e))?))
        .collect::<Result<Vec<f64>>>()?;
    let (e1, e2) = (CONTINUITY_EPS[1], CONTINUITY_EPS[2]);
    let (j1, j2) = (jumps[1], jumps[2]);
    let extrapolated = j2 - (j1 - j2) * e2 / (e1 - e2);
    Ok(ContinuityResult { jumps, extrapolated })
}

/// Offsets of the flux check; the last two feed the extrapolation.
pub const FLUX_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, PartialEq)]
pub struct FluxResult {
    /// `R(ε)` for each ε in [`FLUX_EPS`].
    pub residuals: Vec<f64>,
    /// Richardson extrapolation of `R` to `ε = 0` (second order).
    pub extrapolated: f64,
    /// One-sided `∂u/∂N(x+)` extrapolated in the same way.
    pub conormal_plus: f64,
    pub conormal_minus: f64,
}

/// `((1+q)/2)∂u/∂N(x+) − ((1−q)/2)∂u/∂N(x−) + (α, ∇u(x))` at one ε, with the
/// one-sided ν-derivatives from the order-2 stencil on `{ε, 2ε, 3ε}` and the
/// tangential ones centred. Returns `(R, ∂_N u(x+), ∂_N u(x−))`.
fn flux_at(u: &FrozenU<'_>, t: f64, x: &DVector<f64>, params: &ModelParams, dec: &SpaceDecomposition, eps: f64) -> Result<(f64, f64, f64)> {
    let nu = dec.nu();
    let at = |s: f64| u.eval(t, &(x + nu * s));
    let d_plus = (-2.5 * at(eps)? + 4.0 * at(2.0 * eps)? - 1.5 * at(3.0 * eps)?) / eps;
    let d_minus = (2.5 * at(-eps)? - 4.0 * at(-2.0 * eps)? + 1.5 * at(-3.0 * eps)?) / eps;
    let tangential = |dir: &DVector<f64>| -> Result<f64> {
        if dir.norm() == 0.0 {
            return Ok(0.0);
        }
        Ok((u.eval(t, &(x + dir * eps))? - u.eval(t, &(x - dir * eps))?) / (2.0 * eps))
    };
    let db = tangential(dec.b())?;
    let da = tangential(params.alpha())?;
    let s2 = dec.sigma2();
    let q = params.q();
    let n_plus = s2 * d_plus + db;
    let n_minus = s2 * d_minus + db;
    let r = 0.5 * (1.0 + q) * n_plus - 0.5 * (1.0 - q) * n_minus + da;
    Ok((r, n_plus, n_minus))
}

pub fn check_flux(t: f64, x: &DVector<f64>, params: &ModelParams, dec: &SpaceDecomposition, phi: &TestFunction<'_>) -> Result<FluxResult> {
    require_on_membrane(x, dec)?;
    let quad = pde_quadrature();
    let u = FrozenU::new(t, x, phi, params, dec, &quad)?;
    let values = FLUX_EPS
        .iter()
        .map(|&e| flux_at(&u, t, x, params, dec, e))
        .collect::<Result<Vec<_>>>()?;
    let ratio = FLUX_EPS[1] / FLUX_EPS[2];
    let rich = |a: f64, b: f64| (ratio * ratio * b - a) / (ratio * ratio - 1.0);
    let (a, b) = (values[1], values[2]);
    Ok(FluxResult {
        residuals: values.iter().map(|v| v.0).collect(),
        extrapolated: rich(a.0, b.0),
        conormal_plus: rich(a.1, b.1),
        conormal_minus: rich(a.2, b.2),
    })
}
