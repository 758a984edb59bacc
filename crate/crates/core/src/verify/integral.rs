//! The renewal-type integral equation for the characteristic function
//! `u(t, x, λ, μ) = E_x exp{iλη_t + i(μ, x̃(t))}` of the skew process and its
//! local time (`α = 0`):
//!
//! `u(t, x) = ∫ e^{i(y,μ)} g̃(t, x, y) dy + iλ ∫₀ᵗ dτ ∫_S u(t − τ, z) g̃(τ, x, z) dz`.
//!
//! `u` is computed from the joint law by quadrature over `(y_ν, z)`; the
//! lateral Gaussian factor of every density is integrated analytically.
//! Translation invariance along `S` gives `u(s, z) = e^{i(μ, z)} u(s, 0)` for
//! `z ∈ S`, which reduces the surface integral to a Gaussian one.

use std::f64::consts::PI;

use nalgebra::{Complex, DVector};

use crate::density::{killed_nu_density, sign0};
use crate::error::{Error, Result};
use crate::geometry::{ModelParams, SpaceDecomposition};
use crate::quadrature::gl16;

type C64 = Complex<f64>;

/// Truncation of every Gaussian tail, in standard deviations.
const TAIL: f64 = 10.0;

/// Relative agreement required between the τ-integral at two panel levels.
const TAU_TOL: f64 = 1e-10;
const TAU_MAX_PANELS: usize = 64;

fn i_unit() -> C64 {
    C64::new(0.0, 1.0)
}

/// Fixed composite GL16 rule on `[a, b]` with about `per_sd` panels per `sd`.
fn nodes(a: f64, b: f64, sd: f64, per_sd: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if b <= a {
        return out;
    }
    let panels = (((b - a) / sd) * per_sd).ceil().max(1.0) as usize;
    gl16().push_composite_nodes(a, b, panels, &mut out);
    out
}

/// Pieces of `(μ, y)` and of the lateral Gaussian that do not depend on `y_ν`.
struct Frequencies {
    /// Coefficient of `y_ν` in the phase: `μ_ν + (Uᵀμ)·Uᵀb/σ²`.
    k_nu: f64,
    /// `(Uᵀμ)·Uᵀb/σ²`.
    k_drift: f64,
    /// `(Uᵀμ)ᵀB_S(Uᵀμ)`.
    quad_form: f64,
    mu_s: DVector<f64>,
}

impl Frequencies {
    fn new(mu: &DVector<f64>, dec: &SpaceDecomposition) -> Self {
        let mu_s = dec.lateral_coords(mu);
        let k_drift = mu_s.dot(dec.lateral_drift());
        let quad_form = (dec.lateral_cov() * &mu_s).dot(&mu_s);
        Frequencies {
            k_nu: mu.dot(dec.nu()) + k_drift,
            k_drift,
            quad_form,
            mu_s,
        }
    }

    /// `exp{iμ_S·(s_x − x_ν Uᵀb/σ²) − ½tμ_SᵀB_Sμ_S}`: the lateral factor
    /// left after pulling `e^{i k_ν y_ν}` out.
    fn lateral(&self, t: f64, x: &DVector<f64>, dec: &SpaceDecomposition) -> C64 {
        let x_nu = x.dot(dec.nu());
        let phase = self.mu_s.dot(&dec.lateral_coords(x)) - self.k_drift * x_nu;
        C64::from_polar((-0.5 * t * self.quad_form).exp(), phase)
    }
}

/// `∫₀^∞ e^{iλθ} c(θ) dθ` for the ν-part of the continuous density,
/// `c(θ) = (1 + q sign y_ν)·z/√(2πt³σ²)·e^{−z²/(2tσ²)}`, `z = σ²θ + z₀`.
fn hit_transform(t: f64, s2: f64, z0: f64, weight: f64, lambda: f64) -> C64 {
    if weight == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let sd = (t * s2).sqrt();
    let pref = weight / ((2.0 * PI * t.powi(3) * s2).sqrt() * s2);
    let mut acc = C64::new(0.0, 0.0);
    for (z, w) in nodes(z0, z0 + TAIL * sd, sd, 1.0) {
        let theta = (z - z0) / s2;
        acc += C64::from_polar(w * z * (-0.5 * z * z / (t * s2)).exp(), lambda * theta);
    }
    acc * pref
}

/// `u(t, x, λ, μ)` from the joint law of the endpoint and the local time.
pub fn char_fn_joint(t: f64, x: &DVector<f64>, lambda: f64, mu: &DVector<f64>, q: f64, dec: &SpaceDecomposition) -> C64 {
    let f = Frequencies::new(mu, dec);
    let s2 = dec.sigma2();
    let sd = (t * s2).sqrt();
    let x_nu = x.dot(dec.nu());
    let reach = x_nu.abs() + TAIL * sd;
    let mut acc = C64::new(0.0, 0.0);
    for (lo, hi) in [(-reach, 0.0), (0.0, reach)] {
        for (y, w) in nodes(lo, hi, sd, 1.5) {
            let atom = killed_nu_density(t, s2, x_nu, y);
            let hit = hit_transform(t, s2, x_nu.abs() + y.abs(), 1.0 + q * sign0(y), lambda);
            acc += (hit + atom) * C64::from_polar(w, f.k_nu * y);
        }
    }
    acc * f.lateral(t, x, dec)
}

/// `∫ e^{i(y,μ)} g̃(t, x, y) dy`.
pub fn char_fn_skew(t: f64, x: &DVector<f64>, mu: &DVector<f64>, q: f64, dec: &SpaceDecomposition) -> C64 {
    let f = Frequencies::new(mu, dec);
    let var = t * dec.sigma2();
    let sd = var.sqrt();
    let x_nu = x.dot(dec.nu());
    let reach = x_nu.abs() + TAIL * sd;
    let pdf = |r: f64| (-0.5 * r * r / var).exp() / (2.0 * PI * var).sqrt();
    let mut acc = C64::new(0.0, 0.0);
    for (lo, hi) in [(-reach, 0.0), (0.0, reach)] {
        for (y, w) in nodes(lo, hi, sd, 1.5) {
            let g = pdf(y - x_nu) + q * sign0(y) * pdf(x_nu.abs() + y.abs());
            acc += C64::from_polar(w * g, f.k_nu * y);
        }
    }
    acc * f.lateral(t, x, dec)
}

/// `∫_S e^{i(μ,z)} g̃(τ, x, z) dz`: on `S` the reflected term drops out
/// (`sign 0 = 0`) and the lateral Gaussian integrates in closed form.
fn surface_transform(tau: f64, x: &DVector<f64>, f: &Frequencies, dec: &SpaceDecomposition) -> C64 {
    let var = tau * dec.sigma2();
    let x_nu = x.dot(dec.nu());
    let nu_part = (-0.5 * x_nu * x_nu / var).exp() / (2.0 * PI * var).sqrt();
    f.lateral(tau, x, dec) * nu_part
}

/// GL16 on `panels` equal panels of `[0, b]`.
fn complex_composite<F: FnMut(f64) -> C64>(mut g: F, b: f64, panels: usize) -> C64 {
    let mut pts = Vec::new();
    gl16().push_composite_nodes(0.0, b, panels, &mut pts);
    pts.into_iter().map(|(v, w)| g(v) * w).sum()
}

/// Both sides of the integral equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEquationSides {
    pub lhs: C64,
    pub rhs: C64,
    /// `max(|ΔRe|, |ΔIm|) / |lhs|`.
    pub relative_error: f64,
    pub tau_panels: usize,
}

pub fn check_integral_equation(t: f64, x: &DVector<f64>, lambda: f64, mu: &DVector<f64>, params: &ModelParams, dec: &SpaceDecomposition) -> Result<IntegralEquationSides> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t));
    }
    if params.alpha().norm() != 0.0 {
        return Err(Error::InvalidArgument("the integral equation is stated for alpha = 0".into()));
    }
    if mu.len() != dec.dim() || x.len() != dec.dim() {
        return Err(Error::DimensionMismatch {
            what: "x or mu",
            expected: dec.dim(),
            got: mu.len().min(x.len()),
        });
    }
    let q = params.q();
    let f = Frequencies::new(mu, dec);
    let origin = DVector::zeros(dec.dim());
    let kernel_on_s = |s: f64| char_fn_joint(s, &origin, lambda, mu, q, dec);

    // split at t/2; τ = v² near 0 and t − τ = v² near t
    let half = (0.5 * t).sqrt();
    let tau_integral = |panels: usize| -> C64 {
        let near_zero = complex_composite(
            |v| {
                let tau = v * v;
                if tau == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                kernel_on_s(t - tau) * surface_transform(tau, x, &f, dec) * (2.0 * v)
            },
            half,
            panels,
        );
        let near_t = complex_composite(
            |v| {
                let s = v * v;
                let k = if s == 0.0 { C64::new(1.0, 0.0) } else { kernel_on_s(s) };
                k * surface_transform(t - s, x, &f, dec) * (2.0 * v)
            },
            half,
            panels,
        );
        near_zero + near_t
    };

    let mut panels = 2;
    let mut prev = tau_integral(panels);
    let integral = loop {
        let next_panels = panels * 2;
        let cur = tau_integral(next_panels);
        let residual = (cur - prev).norm();
        panels = next_panels;
        if residual <= TAU_TOL * cur.norm().max(1e-300) || residual < 1e-14 {
            break cur;
        }
        if panels >= TAU_MAX_PANELS {
            return Err(Error::QuadratureNotConverged { panels, residual });
        }
        prev = cur;
    };

    let lhs = char_fn_joint(t, x, lambda, mu, q, dec);
    let rhs = char_fn_skew(t, x, mu, q, dec) + i_unit() * lambda * integral;
    let diff = lhs - rhs;
    let relative_error = diff.re.abs().max(diff.im.abs()) / lhs.norm();
    Ok(IntegralEquationSides {
        lhs,
        rhs,
        relative_error,
        tau_panels: panels,
    })
}
