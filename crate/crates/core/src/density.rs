//! Closed-form densities of the membrane process.
//!
//! * [`free_density`]: the Gaussian kernel `g_0` of covariance `tB`.
//! * [`lateral_conditional_density`]: `g^S`, the law of the projection on `S`
//!   given the ν-component of the endpoint.
//! * [`skew_density`]: the kernel `g̃` of the skew process (`α = 0`).
//! * [`joint_density`]: the joint law of the skew endpoint and its local time,
//!   split into the atom at `θ = 0` and the continuous part.
//! * [`transition_density`]: the kernel `G` of the full process, whose
//!   θ-integral is evaluated by panel quadrature.
//! * [`density_u`]: `∫ φ(y) G(t, x, y) dy` by tensor quadrature.
//!
//! `sign(0)` is taken to be `0` throughout.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelParams, SpaceDecomposition};
use crate::quadrature::{breakpoint_nodes, integrate_doubling, QuadratureSpec};

/// `sign` with `sign(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !(q.abs() <= 1.0) {
        return Err(Error::SkewOutOfRange(q));
    }
    Ok(())
}

fn check_point(what: &'static str, v: &DVector<f64>, dec: &SpaceDecomposition) -> Result<()> {
    if v.len() != dec.dim() {
        return Err(Error::DimensionMismatch {
            what,
            expected: dec.dim(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Value of the joint law of `(x̃(t), η_t)` at `(y, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDensityValue {
    /// Density in `y` of the `θ = 0` component (coefficient of `δ(θ)`).
    pub atom: f64,
    /// Joint density in `(y, θ)` for `θ > 0`.
    pub continuous: f64,
}

/// Gaussian density with variance `var` at `r`.
fn normal_pdf(r: f64, var: f64) -> f64 {
    (-0.5 * r * r / var).exp() / (2.0 * PI * var).sqrt()
}

/// ν-marginal of the killed kernel: `φ(y_ν − x_ν) − φ(|y_ν| + |x_ν|)`, written
/// in a cancellation-free form. Zero when `x_ν` and `y_ν` lie on opposite sides.
pub(crate) fn killed_nu_density(t: f64, sigma2: f64, x_nu: f64, y_nu: f64) -> f64 {
    let var = t * sigma2;
    let same_side = x_nu * y_nu;
    if same_side <= 0.0 {
        return 0.0;
    }
    normal_pdf(y_nu - x_nu, var) * -(-2.0 * same_side / var).exp_m1()
}

pub fn free_density(t: f64, x: &DVector<f64>, y: &DVector<f64>, dec: &SpaceDecomposition) -> Result<f64> {
    check_time(t)?;
    check_point("x", x, dec)?;
    check_point("y", y, dec)?;
    let d = dec.dim() as f64;
    let r = y - x;
    let z = dec
        .diffusion_chol()
        .solve_lower_triangular(&r)
        .expect("Cholesky factor of B is nonsingular");
    let log = -0.5 * (d * (2.0 * PI * t).ln() + dec.diffusion_log_det()) - 0.5 * z.norm_squared() / t;
    Ok(log.exp())
}

/// Whitened lateral residual `L⁻¹(s_y − s_x − (y_ν − x_ν)·Uᵀb/σ²)`.
fn lateral_residual(dec: &SpaceDecomposition, x: &DVector<f64>, y: &DVector<f64>, x_nu: f64, y_nu: f64) -> DVector<f64> {
    let r = dec.lateral_coords(&(y - x)) - dec.lateral_drift() * (y_nu - x_nu);
    dec.whiten_lateral(&r)
}

/// `ln det(2πt B_S)^{-1/2}`.
fn lateral_log_norm(t: f64, dec: &SpaceDecomposition) -> f64 {
    let k = (dec.dim() - 1) as f64;
    -0.5 * (k * (2.0 * PI * t).ln() + dec.lateral_log_det())
}

pub fn lateral_conditional_density(
    t: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
    dec: &SpaceDecomposition,
) -> Result<f64> {
    check_time(t)?;
    check_point("x", x, dec)?;
    check_point("y", y, dec)?;
    let x_nu = x.dot(dec.nu());
    let y_nu = y.dot(dec.nu());
    let w = lateral_residual(dec, x, y, x_nu, y_nu);
    Ok((lateral_log_norm(t, dec) - 0.5 * w.norm_squared() / t).exp())
}

pub fn skew_density(t: f64, x: &DVector<f64>, y: &DVector<f64>, dec: &SpaceDecomposition, q: f64) -> Result<f64> {
    check_time(t)?;
    check_q(q)?;
    let gs = lateral_conditional_density(t, x, y, dec)?;
    let x_nu = x.dot(dec.nu());
    let y_nu = y.dot(dec.nu());
    let var = t * dec.sigma2();
    let free = normal_pdf(y_nu - x_nu, var);
    let reflected = normal_pdf(y_nu.abs() + x_nu.abs(), var);
    Ok(((free + q * sign0(y_nu) * reflected) * gs).max(0.0))
}

pub fn joint_density(
    t: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
    theta: f64,
    dec: &SpaceDecomposition,
    q: f64,
) -> Result<JointDensityValue> {
    check_time(t)?;
    check_q(q)?;
    if !(theta >= 0.0) {
        return Err(Error::NegativeLocalTime(theta));
    }
    let gs = lateral_conditional_density(t, x, y, dec)?;
    let x_nu = x.dot(dec.nu());
    let y_nu = y.dot(dec.nu());
    let s2 = dec.sigma2();
    let atom = killed_nu_density(t, s2, x_nu, y_nu) * gs;
    let z = s2 * theta + x_nu.abs() + y_nu.abs();
    let continuous = (1.0 + q * sign0(y_nu)) * z / (2.0 * PI * t.powi(3) * s2).sqrt()
        * (-0.5 * z * z / (t * s2)).exp()
        * gs;
    Ok(JointDensityValue { atom, continuous })
}

/// Evaluator for `G(t, x, ·)` that caches the parts of the θ-integrand that do
/// not depend on the evaluation point.
#[derive(Debug, Clone)]
pub struct TransitionKernel<'a> {
    params: &'a ModelParams,
    dec: &'a SpaceDecomposition,
    quad: QuadratureSpec,
    /// `L⁻¹Uᵀα`: lateral mean shift per unit of local time, whitened.
    alpha_white: DVector<f64>,
    alpha_white_sq: f64,
}

impl<'a> TransitionKernel<'a> {
    pub fn new(params: &'a ModelParams, dec: &'a SpaceDecomposition, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        if params.dim() != dec.dim() {
            return Err(Error::DimensionMismatch {
                what: "decomposition",
                expected: params.dim(),
                got: dec.dim(),
            });
        }
        let alpha_white = dec.whiten_lateral(&dec.lateral_coords(params.alpha()));
        let alpha_white_sq = alpha_white.norm_squared();
        Ok(TransitionKernel {
            params,
            dec,
            quad: *quad,
            alpha_white,
            alpha_white_sq,
        })
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn decomposition(&self) -> &SpaceDecomposition {
        self.dec
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// `G(t, x, y)`.
    pub fn density(&self, t: f64, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_time(t)?;
        check_point("x", x, self.dec)?;
        check_point("y", y, self.dec)?;
        let dec = self.dec;
        let x_nu = x.dot(dec.nu());
        let y_nu = y.dot(dec.nu());
        let w = lateral_residual(dec, x, y, x_nu, y_nu);
        let log_norm = lateral_log_norm(t, dec);
        let ww = w.norm_squared();

        let atom = killed_nu_density(t, dec.sigma2(), x_nu, y_nu) * (log_norm - 0.5 * ww / t).exp();
        let hit = self.hit_integral(t, x_nu, y_nu, ww, w.dot(&self.alpha_white), log_norm)?;
        Ok(atom + hit)
    }

    /// `∫₀^∞ (1 + q sign y_ν)·z/√(2πt³σ²)·e^{−z²/(2tσ²)}·g^S(t, x + αθ, y) dθ`
    /// with `z = σ²θ + |x_ν| + |y_ν|`, integrated in `z`.
    fn hit_integral(&self, t: f64, x_nu: f64, y_nu: f64, ww: f64, wa: f64, log_norm: f64) -> Result<f64> {
        let s2 = self.dec.sigma2();
        let weight = 1.0 + self.params.q() * sign0(y_nu);
        if weight == 0.0 {
            return Ok(0.0);
        }
        let z0 = x_nu.abs() + y_nu.abs();
        let z_max = z0 + self.quad.tail_sigmas * (t * s2).sqrt();
        let aa = self.alpha_white_sq;
        let prefactor = weight / ((2.0 * PI * t.powi(3) * s2).sqrt() * s2);
        let integrand = |z: f64| {
            let theta = (z - z0) / s2;
            let lateral = ww - 2.0 * theta * wa + theta * theta * aa;
            z * (log_norm - 0.5 * (z * z / s2 + lateral) / t).exp()
        };
        let r = integrate_doubling(integrand, z0, z_max, &self.quad)?;
        Ok((prefactor * r.value).max(0.0))
    }
}

pub fn transition_density(
    t: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
    params: &ModelParams,
    dec: &SpaceDecomposition,
    quad: &QuadratureSpec,
) -> Result<f64> {
    TransitionKernel::new(params, dec, quad)?.density(t, x, y)
}

/// Axis-aligned box in `(y_ν, Uᵀy)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordBox {
    pub nu: (f64, f64),
    pub lateral: Vec<(f64, f64)>,
}

impl CoordBox {
    pub fn intersect(&self, other: &CoordBox) -> CoordBox {
        let cut = |a: (f64, f64), b: (f64, f64)| (a.0.max(b.0), a.1.min(b.1));
        CoordBox {
            nu: cut(self.nu, other.nu),
            lateral: self
                .lateral
                .iter()
                .zip(&other.lateral)
                .map(|(&a, &b)| cut(a, b))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nu.0 >= self.nu.1 || self.lateral.iter().any(|&(lo, hi)| lo >= hi)
    }
}

/// Box carrying all but `e^{−L²/2}` of the mass of `G(t, x, ·)` (forward) or of
/// `G(t, ·, x)` viewed as a function of its first argument (backward), with
/// `L = quad.space_tail_sigmas`.
pub fn mass_box(t: f64, x: &DVector<f64>, params: &ModelParams, dec: &SpaceDecomposition, quad: &QuadratureSpec, forward: bool) -> CoordBox {
    let l = quad.space_tail_sigmas;
    let sigma = dec.sigma();
    let x_nu = x.dot(dec.nu());
    let s_x = dec.lateral_coords(x);
    let spread_nu = l * sigma * t.sqrt();
    let theta_max = l * t.sqrt() / sigma;
    let alpha = dec.lateral_coords(params.alpha());
    let dir = if forward { 1.0 } else { -1.0 };
    let lateral = (0..dec.dim() - 1)
        .map(|k| {
            let half = l * (t * dec.lateral_cov()[(k, k)]).sqrt() + spread_nu * dec.lateral_drift()[k].abs();
            let shift = dir * theta_max * alpha[k];
            (s_x[k] + shift.min(0.0) - half, s_x[k] + shift.max(0.0) + half)
        })
        .collect();
    CoordBox {
        nu: (x_nu - spread_nu, x_nu + spread_nu),
        lateral,
    }
}

/// `(node, weight)` pairs of a one-dimensional rule.
pub type Nodes = Vec<(f64, f64)>;

/// Tensor-product nodes over `bx`: ν-axis split at the membrane, panel widths
/// `space_panel_sigmas` times the natural scale of each axis at time `t`.
pub fn tensor_nodes(t: f64, bx: &CoordBox, dec: &SpaceDecomposition, quad: &QuadratureSpec) -> (Nodes, Vec<Nodes>) {
    let width_nu = quad.space_panel_sigmas * dec.sigma() * t.sqrt();
    let nu_nodes = breakpoint_nodes(bx.nu.0, bx.nu.1, width_nu, &[0.0]);
    let lateral = bx
        .lateral
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let width = quad.space_panel_sigmas * (t * dec.lateral_cov()[(k, k)]).sqrt();
            breakpoint_nodes(lo, hi, width, &[])
        })
        .collect();
    (nu_nodes, lateral)
}

/// Calls `f(y, weight)` for every node of the tensor rule.
pub fn for_each_tensor_node<F>(dec: &SpaceDecomposition, nu_nodes: &[(f64, f64)], lateral: &[Vec<(f64, f64)>], mut f: F) -> Result<()>
where
    F: FnMut(&DVector<f64>, f64) -> Result<()>,
{
    let k = lateral.len();
    if lateral.iter().any(|v| v.is_empty()) || nu_nodes.is_empty() {
        return Ok(());
    }
    let mut idx = vec![0usize; k];
    let mut s = DVector::zeros(k);
    loop {
        let mut wl = 1.0;
        for j in 0..k {
            let (c, w) = lateral[j][idx[j]];
            s[j] = c;
            wl *= w;
        }
        let base = dec.basis() * &s;
        for &(yn, wn) in nu_nodes {
            let y = &base + dec.nu() * yn;
            f(&y, wl * wn)?;
        }
        // odometer over lateral indices
        let mut j = 0;
        loop {
            if j == k {
                return Ok(());
            }
            idx[j] += 1;
            if idx[j] < lateral[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Where a test function lives.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// Vanishes (to double precision) outside the ball.
    Ball { center: DVector<f64>, radius: f64 },
    /// Supported everywhere with `|φ| ≤ sup`; the integration domain is then
    /// the mass box of `G`.
    Bounded { sup: f64 },
}

type PointFn<'f> = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync + 'f>;

/// A bounded continuous test function together with its support bound.
pub struct TestFunction<'f> {
    f: PointFn<'f>,
    support: Support,
}

impl std::fmt::Debug for TestFunction<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction").field("support", &self.support).finish()
    }
}

impl<'f> TestFunction<'f> {
    pub fn new<F>(f: F, support: Support) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'f,
    {
        TestFunction { f: Box::new(f), support }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, Support::Bounded { sup: c.abs() })
    }

    /// `exp(−|y − center|²/(2·width²))`, truncated at nine widths.
    pub fn gaussian_bump(center: DVector<f64>, width: f64) -> Self {
        let c = center.clone();
        let inv = 0.5 / (width * width);
        Self::new(
            move |y: &DVector<f64>| (-(y - &c).norm_squared() * inv).exp(),
            Support::Ball {
                center,
                radius: 9.0 * width,
            },
        )
    }

    /// `cos((y, μ))`, the real part of a plane wave.
    pub fn cosine(mu: DVector<f64>) -> Self {
        Self::new(move |y: &DVector<f64>| y.dot(&mu).cos(), Support::Bounded { sup: 1.0 })
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        (self.f)(y)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match &self.support {
            Support::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::InvalidSupport(format!(
                        "ball center has dimension {}, expected {dim}",
                        center.len()
                    )));
                }
                if !(radius.is_finite() && *radius > 0.0) || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSupport("ball must have finite center and positive finite radius".into()));
                }
            }
            Support::Bounded { sup } => {
                if !sup.is_finite() {
                    return Err(Error::InvalidSupport("unbounded support requires a finite bound on |phi|".into()));
                }
            }
        }
        Ok(())
    }
}

/// `u(t, x, φ) = ∫ φ(y) G(t, x, y) dy`.
pub fn density_u(
    t: f64,
    x: &DVector<f64>,
    phi: &TestFunction<'_>,
    params: &ModelParams,
    dec: &SpaceDecomposition,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_time(t)?;
    check_point("x", x, dec)?;
    phi.validate(dec.dim())?;
    let kernel = TransitionKernel::new(params, dec, quad)?;
    let mut bx = mass_box(t, x, params, dec, quad, true);
    if let Support::Ball { center, radius } = phi.support() {
        let c_nu = center.dot(dec.nu());
        let c_lat = dec.lateral_coords(center);
        let ball = CoordBox {
            nu: (c_nu - radius, c_nu + radius),
            lateral: c_lat.iter().map(|&c| (c - radius, c + radius)).collect(),
        };
        bx = bx.intersect(&ball);
    }
    if bx.is_empty() {
        return Ok(0.0);
    }
    let (nu_nodes, lateral) = tensor_nodes(t, &bx, dec, quad);
    let mut acc = 0.0;
    for_each_tensor_node(dec, &nu_nodes, &lateral, |y, w| {
        let v = phi.eval(y);
        if v != 0.0 {
            acc += w * v * kernel.density(t, x, y)?;
        }
        Ok(())
    })?;
    Ok(acc)
}
