//! Exact simulation of the membrane process.
//!
//! One step over a time interval `t` draws the endpoint of the skew process
//! together with its local-time increment from their joint law, then shifts
//! the endpoint along `S` by `α·θ`. Chaining steps over a time grid yields
//! path skeletons with no discretisation error.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::{erf, erfc};

use crate::density::sign0;
use crate::error::{Error, Result};
use crate::geometry::{ModelParams, SpaceDecomposition};
use crate::quadrature::gl8;

/// Acceptance rate below which the rejection samplers switch to tabulation.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Number of cells of the tabulated fallback samplers.
pub const TABLE_CELLS: usize = 1024;

/// Draws per parallel chunk in the batch helpers; fixed so that results do not
/// depend on the worker count.
pub const CHUNK: usize = 4096;

/// The generator behind every sampler.
pub type StreamRng = ChaCha8Rng;

/// Seed plus substream id of a counter-based generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngState { seed, stream }
    }

    pub fn rng(&self) -> StreamRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Independent substream `k` of this stream.
    pub fn child(&self, k: u64) -> RngState {
        RngState {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(k.wrapping_add(0x6a09_e667_f3bc_c909))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One draw from the joint law of the skew endpoint and its local time.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    /// Endpoint of the skew process, before the `α·θ` shift.
    pub y: DVector<f64>,
    pub theta: f64,
    pub hit: bool,
}

/// Exact values of the process on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSkeleton {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub local_time: Vec<f64>,
    /// `hits[i]`: whether the step from `times[i]` to `times[i + 1]` touched `S`.
    pub hits: Vec<bool>,
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t));
    }
    Ok(())
}

/// `P(η_t > 0)` for a start at ν-coordinate `x_nu`: `2(1 − Φ(|x_ν|/(σ√t)))`.
pub fn hit_probability(t: f64, x_nu: f64, dec: &SpaceDecomposition) -> Result<f64> {
    check_time(t)?;
    let s = dec.sigma() * t.sqrt();
    Ok(erfc(x_nu.abs() / (s * std::f64::consts::SQRT_2)))
}

/// Piecewise-constant envelope over `[lo, hi]` with exact cell masses; each
/// draw picks a cell by mass and then rejects within the cell, so the output
/// follows the tabulated density restricted to `[lo, hi]` exactly.
#[derive(Debug, Clone)]
struct TabulatedSampler {
    lo: f64,
    width: f64,
    cumulative: Vec<f64>,
    bound: Vec<f64>,
}

impl TabulatedSampler {
    fn build<F: Fn(f64) -> f64>(density: &F, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Tabulation(format!("empty interval [{lo}, {hi}]")));
        }
        let rule = gl8();
        let width = (hi - lo) / cells as f64;
        let mut cumulative = Vec::with_capacity(cells);
        let mut bound = Vec::with_capacity(cells);
        let mut total = 0.0;
        for k in 0..cells {
            let a = lo + width * k as f64;
            let b = a + width;
            let mut peak = density(a).max(density(b));
            let mass = rule.integrate(
                |x| {
                    let v = density(x);
                    peak = peak.max(v);
                    v
                },
                a,
                b,
            );
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::Tabulation(format!("invalid cell mass {mass} on [{a}, {b}]")));
            }
            total += mass;
            cumulative.push(total);
            bound.push(peak * 1.05);
        }
        if !(total > 0.0) {
            return Err(Error::Tabulation("density has no mass on the table range".into()));
        }
        Ok(TabulatedSampler {
            lo,
            width,
            cumulative,
            bound,
        })
    }

    fn sample<F: Fn(f64) -> f64, R: Rng + ?Sized>(&self, density: &F, rng: &mut R) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let target = rng.random::<f64>() * total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1);
        let a = self.lo + self.width * k as f64;
        loop {
            let x = a + self.width * rng.random::<f64>();
            if rng.random::<f64>() * self.bound[k] < density(x) {
                return x;
            }
        }
    }
}

/// Lateral part of the endpoint: Gaussian with mean `s_x + (y_ν − x_ν)Uᵀb/σ²`
/// and covariance `tB_S` in basis coordinates.
fn lateral_draw<R: Rng + ?Sized>(t: f64, x: &DVector<f64>, x_nu: f64, y_nu: f64, dec: &SpaceDecomposition, rng: &mut R) -> DVector<f64> {
    let k = dec.dim() - 1;
    let xi = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = dec.lateral_coords(x) + dec.lateral_drift() * (y_nu - x_nu) + dec.lateral_chol() * xi * t.sqrt();
    dec.from_coords(y_nu, &s)
}

/// `|y_ν|` on the no-hit branch: density ∝ `φ(m − a) − φ(m + a)` on `m > 0`.
fn sample_killed_magnitude<R: Rng + ?Sized>(t: f64, a: f64, dec: &SpaceDecomposition, rng: &mut R) -> Result<f64> {
    let var = t * dec.sigma2();
    let s = var.sqrt();
    let acceptance = erf(a / (s * std::f64::consts::SQRT_2));
    if acceptance >= MIN_ACCEPTANCE {
        loop {
            let m = a + s * rng.sample::<f64, _>(StandardNormal);
            if m <= 0.0 {
                continue;
            }
            if rng.random::<f64>() < -(-2.0 * a * m / var).exp_m1() {
                return Ok(m);
            }
        }
    }
    // a ≪ σ√t: tabulate the killed density, scaled by 1/a to keep it O(1).
    let density = move |m: f64| {
        if m <= 0.0 {
            return 0.0;
        }
        (-0.5 * (m - a) * (m - a) / var).exp() * -(-2.0 * a * m / var).exp_m1() / a
    };
    let table = TabulatedSampler::build(&density, 0.0, a + 10.0 * s, TABLE_CELLS)?;
    Ok(table.sample(&density, rng))
}

pub fn sample_no_hit_endpoint<R: Rng + ?Sized>(t: f64, x: &DVector<f64>, dec: &SpaceDecomposition, rng: &mut R) -> Result<DVector<f64>> {
    check_time(t)?;
    let x_nu = x.dot(dec.nu());
    if x_nu == 0.0 {
        return Err(Error::StartsOnMembrane(x_nu));
    }
    let m = sample_killed_magnitude(t, x_nu.abs(), dec, rng)?;
    let y_nu = sign0(x_nu) * m;
    Ok(lateral_draw(t, x, x_nu, y_nu, dec, rng))
}

/// `(|y_ν|, θ)` on the hit branch, for a start at distance `a` from `S`.
///
/// `z = σ²θ + a + m` has density ∝ `z(z − a)e^{−z²/(2tσ²)}` on `(a, ∞)`; it is
/// proposed from the Maxwell law restricted to `z > a` and accepted with
/// probability `(z − a)/z`. Given `z`, `m` is uniform on `(0, z − a)`.
pub fn sample_hit_magnitude_and_theta<R: Rng + ?Sized>(t: f64, a: f64, dec: &SpaceDecomposition, rng: &mut R) -> Result<(f64, f64)> {
    check_time(t)?;
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("distance to the membrane must be nonnegative, got {a}")));
    }
    let s2 = dec.sigma2();
    let s = (t * s2).sqrt();
    // Overall acceptance of the Maxwell scheme equals P(η_t > 0).
    let acceptance = erfc(a / (s * std::f64::consts::SQRT_2));
    let z = if acceptance >= MIN_ACCEPTANCE {
        loop {
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            let n3: f64 = rng.sample(StandardNormal);
            let z = s * (n1 * n1 + n2 * n2 + n3 * n3).sqrt();
            if z <= a {
                continue;
            }
            if rng.random::<f64>() * z < z - a {
                break z;
            }
        }
    } else {
        // scaled by e^{a²/(2s²)} to avoid underflow far from S
        let var = s * s;
        let density = move |z: f64| {
            if z <= a {
                return 0.0;
            }
            z * (z - a) * (-0.5 * (z - a) * (z + a) / var).exp()
        };
        let table = TabulatedSampler::build(&density, a, a + 10.0 * s, TABLE_CELLS)?;
        table.sample(&density, rng)
    };
    let span = z - a;
    let m = span * rng.random::<f64>();
    let theta = (span - m) / s2;
    Ok((m, theta))
}

pub fn sample_joint<R: Rng + ?Sized>(
    t: f64,
    x: &DVector<f64>,
    params: &ModelParams,
    dec: &SpaceDecomposition,
    rng: &mut R,
) -> Result<JointSample> {
    check_time(t)?;
    let q = params.q();
    let x_nu = x.dot(dec.nu());
    let p_hit = hit_probability(t, x_nu, dec)?;
    if x_nu != 0.0 && rng.random::<f64>() >= p_hit {
        let y = sample_no_hit_endpoint(t, x, dec, rng)?;
        return Ok(JointSample {
            y,
            theta: 0.0,
            hit: false,
        });
    }
    let side = if rng.random::<f64>() < 0.5 * (1.0 + q) { 1.0 } else { -1.0 };
    let (m, theta) = sample_hit_magnitude_and_theta(t, x_nu.abs(), dec, rng)?;
    let y_nu = side * m;
    let y = lateral_draw(t, x, x_nu, y_nu, dec, rng);
    Ok(JointSample { y, theta, hit: true })
}

/// One exact step of length `t`: returns `(x(t), η_t)` for a start at `x`.
pub fn step<R: Rng + ?Sized>(
    t: f64,
    x: &DVector<f64>,
    params: &ModelParams,
    dec: &SpaceDecomposition,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)> {
    let js = sample_joint(t, x, params, dec, rng)?;
    let next = js.y + params.alpha() * js.theta;
    Ok((next, js.theta))
}

fn step_with_hit<R: Rng + ?Sized>(
    t: f64,
    x: &DVector<f64>,
    params: &ModelParams,
    dec: &SpaceDecomposition,
    rng: &mut R,
) -> Result<(DVector<f64>, f64, bool)> {
    let js = sample_joint(t, x, params, dec, rng)?;
    let next = js.y + params.alpha() * js.theta;
    Ok((next, js.theta, js.hit))
}

/// Checks that `grid` starts at 0 and increases strictly.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least two times".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidGrid(format!("first time is {}, expected 0", grid[0])));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::InvalidGrid(format!("{} is not after {}", w[1], w[0])));
        }
    }
    Ok(())
}

pub fn sample_path<R: Rng + ?Sized>(
    x0: &DVector<f64>,
    grid: &[f64],
    params: &ModelParams,
    dec: &SpaceDecomposition,
    rng: &mut R,
) -> Result<PathSkeleton> {
    validate_grid(grid)?;
    let mut states = Vec::with_capacity(grid.len());
    let mut local_time = Vec::with_capacity(grid.len());
    let mut hits = Vec::with_capacity(grid.len() - 1);
    states.push(x0.clone());
    local_time.push(0.0);
    for w in grid.windows(2) {
        let cur = states.last().unwrap();
        let (next, dtheta, hit) = step_with_hit(w[1] - w[0], cur, params, dec, rng)?;
        let eta = local_time.last().unwrap() + dtheta;
        states.push(next);
        local_time.push(eta);
        hits.push(hit);
    }
    Ok(PathSkeleton {
        times: grid.to_vec(),
        states,
        local_time,
        hits,
    })
}

/// Runs `draw` `n` times in fixed-size chunks, chunk `k` on substream
/// `state.child(k)`; the output is independent of the worker count.
pub fn draw_batch<T, F>(n: usize, state: RngState, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng) -> Result<T> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<T>>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = state.child(k as u64).rng();
            let len = CHUNK.min(n - k * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// `n` independent draws of [`sample_joint`].
pub fn sample_joint_batch(
    n: usize,
    t: f64,
    x: &DVector<f64>,
    params: &ModelParams,
    dec: &SpaceDecomposition,
    state: RngState,
) -> Result<Vec<JointSample>> {
    draw_batch(n, state, |rng| sample_joint(t, x, params, dec, rng))
}

/// `n` independent paths, path `i` on substream `state.child(i)`.
pub fn sample_paths(
    n: usize,
    x0: &DVector<f64>,
    grid: &[f64],
    params: &ModelParams,
    dec: &SpaceDecomposition,
    state: RngState,
) -> Result<Vec<PathSkeleton>> {
    validate_grid(grid)?;
    (0..n)
        .into_par_iter()
        .map(|i| sample_path(x0, grid, params, dec, &mut state.child(i as u64).rng()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{joint_density, skew_density};
    use crate::geometry::build_decomposition;
    use crate::quadrature::{integrate_doubling, QuadratureSpec};
    use crate::stats::{ks_one_sample, normal_cdf};
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn model(b: &[f64], q: f64, alpha: &[f64]) -> (ModelParams, SpaceDecomposition) {
        let d = alpha.len();
        let p = ModelParams::with_standard_normal(DMatrix::from_row_slice(d, d, b), q, v(alpha)).unwrap();
        let dec = build_decomposition(&p).unwrap();
        (p, dec)
    }

    const ID2: [f64; 4] = [1.0, 0.0, 0.0, 1.0];
    const CORR: [f64; 4] = [2.0, 1.0, 1.0, 2.0];

    #[test]
    fn hit_probability_examples() {
        let (_, dec) = model(&CORR, 0.0, &[0.0, 0.0]);
        let t = 0.7;
        let s = (t * dec.sigma2()).sqrt();
        assert_eq!(hit_probability(t, 0.0, &dec).unwrap(), 1.0);
        let p = hit_probability(t, s, &dec).unwrap();
        assert!((p - 0.317_310_507_862_914_1).abs() < 1e-12, "{p:.17}");
        // 1 − ∫ atom dy_ν by quadrature
        let quad = QuadratureSpec::default();
        let no_hit = integrate_doubling(|y| crate::density::killed_nu_density(t, dec.sigma2(), s, y), 0.0, s + 12.0 * s, &quad).unwrap();
        assert!((1.0 - no_hit.value - p).abs() < 1e-12);
        assert!(hit_probability(t, 8.0 * s, &dec).unwrap() < 1e-14);
        assert!(hit_probability(0.0, 1.0, &dec).is_err());
    }

    #[test]
    fn reproducible_streams() {
        let a: Vec<f64> = (0..5).map(|_| RngState::new(7, 3).rng().random()).collect();
        let b: Vec<f64> = (0..5).map(|_| RngState::new(7, 3).rng().random()).collect();
        assert_eq!(a, b);
        let mut r1 = RngState::new(7, 3).rng();
        let mut r2 = RngState::new(7, 4).rng();
        assert_ne!(r1.random::<u64>(), r2.random::<u64>());
        assert_ne!(RngState::new(1, 0).child(0), RngState::new(1, 0).child(1));
    }

    #[test]
    fn no_hit_endpoint_stays_on_its_side() {
        let (_, dec) = model(&CORR, 0.0, &[0.0, 0.0]);
        let mut rng = RngState::new(11, 0).rng();
        for &x_nu in &[0.4, -0.05, 2.0] {
            let x = v(&[0.3, x_nu]);
            for _ in 0..20_000 {
                let y = sample_no_hit_endpoint(1.0, &x, &dec, &mut rng).unwrap();
                assert_eq!(sign0(y[1]), sign0(x_nu));
            }
        }
        assert!(matches!(
            sample_no_hit_endpoint(1.0, &v(&[0.3, 0.0]), &dec, &mut rng),
            Err(Error::StartsOnMembrane(_))
        ));
    }

    /// CDF of the killed ν-density normalised by the no-hit mass.
    fn killed_cdf(t: f64, s2: f64, a: f64, m: f64) -> f64 {
        let s = (t * s2).sqrt();
        let mass = normal_cdf((m - a) / s) - normal_cdf(-a / s) - (normal_cdf((m + a) / s) - normal_cdf(a / s));
        mass / (1.0 - erfc(a / (s * std::f64::consts::SQRT_2)))
    }

    #[test]
    fn no_hit_endpoint_law() {
        let (_, dec) = model(&CORR, 0.0, &[0.0, 0.0]);
        let t = 0.6;
        let x = v(&[0.0, 0.5]);
        let ys = draw_batch(100_000, RngState::new(5, 1), |rng| sample_no_hit_endpoint(t, &x, &dec, rng)).unwrap();
        let nu: Vec<f64> = ys.iter().map(|y| y[1]).collect();
        let ks = ks_one_sample(&nu, |m| killed_cdf(t, dec.sigma2(), 0.5, m));
        assert!(ks.p_value > 0.01, "{ks:?}");

        // B = I: lateral marginal is Normal(x_S, t)
        let (_, dec) = model(&ID2, 0.0, &[0.0, 0.0]);
        let x = v(&[0.3, -0.8]);
        let ys = draw_batch(100_000, RngState::new(5, 2), |rng| sample_no_hit_endpoint(t, &x, &dec, rng)).unwrap();
        let lat: Vec<f64> = ys.iter().map(|y| y[0]).collect();
        let ks = ks_one_sample(&lat, |s| normal_cdf((s - 0.3) / t.sqrt()));
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn tabulated_fallbacks_match_their_laws() {
        let (_, dec) = model(&ID2, 0.0, &[0.0, 0.0]);
        // tiny distance: no-hit magnitude through the table
        let a = 1e-6;
        let ys = draw_batch(40_000, RngState::new(9, 0), |rng| sample_killed_magnitude(1.0, a, &dec, rng)).unwrap();
        // a → 0 limit is the Rayleigh law
        let ks = ks_one_sample(&ys, |m| 1.0 - (-0.5 * m * m).exp());
        assert!(ks.p_value > 0.01, "{ks:?}");

        // far start: hit magnitude through the table; z − a is then close to
        // exponential-tilted; compare with the exact CDF of z by quadrature
        let a = 5.0;
        let zs = draw_batch(40_000, RngState::new(9, 1), |rng| {
            sample_hit_magnitude_and_theta(1.0, a, &dec, rng).map(|(m, th)| th + a + m)
        })
        .unwrap();
        let quad = QuadratureSpec::default();
        let dens = |z: f64| z * (z - a) * (-0.5 * (z - a) * (z + a)).exp();
        let total = integrate_doubling(dens, a, a + 12.0, &quad).unwrap().value;
        let ks = ks_one_sample(&zs, |z| {
            if z <= a {
                0.0
            } else {
                integrate_doubling(dens, a, z, &quad).unwrap().value / total
            }
        });
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn hit_theta_marginal_is_half_normal() {
        let (_, dec) = model(&ID2, 0.0, &[0.0, 0.0]);
        let draws = draw_batch(100_000, RngState::new(21, 0), |rng| sample_hit_magnitude_and_theta(1.0, 0.0, &dec, rng)).unwrap();
        let thetas: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let n = thetas.len() as f64;
        let mean = thetas.iter().sum::<f64>() / n;
        let var = thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - target).abs() < 3.0 * (var / n).sqrt());
        let ks = ks_one_sample(&thetas, |th| 2.0 * normal_cdf(th) - 1.0);
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn hit_magnitude_is_uniform_given_z() {
        let (_, dec) = model(&CORR, 0.0, &[0.0, 0.0]);
        let a = 0.5;
        let s2 = dec.sigma2();
        let draws = draw_batch(100_000, RngState::new(22, 0), |rng| sample_hit_magnitude_and_theta(0.7, a, &dec, rng)).unwrap();
        let fractions: Vec<f64> = draws.iter().map(|&(m, th)| m / (s2 * th + m)).collect();
        let ks = ks_one_sample(&fractions, |u| u.clamp(0.0, 1.0));
        assert!(ks.p_value > 0.01, "{ks:?}");
        assert!(draws.iter().all(|&(m, th)| m >= 0.0 && th > 0.0));
    }

    #[test]
    fn joint_sample_branches() {
        let (p, dec) = model(&CORR, 1.0, &[0.0, 0.0]);
        let x = v(&[0.0, 0.1]);
        let draws = sample_joint_batch(100_000, 1.0, &x, &p, &dec, RngState::new(3, 0)).unwrap();
        for js in &draws {
            if js.hit {
                assert!(js.theta > 0.0);
                assert!(js.y[1] >= 0.0);
            } else {
                assert_eq!(js.theta, 0.0);
                assert!(js.y[1] > 0.0);
            }
        }
        let no_hit = draws.iter().filter(|d| !d.hit).count() as f64;
        let p0 = 1.0 - hit_probability(1.0, 0.1, &dec).unwrap();
        let n = draws.len() as f64;
        assert!((no_hit / n - p0).abs() < 3.0 * (p0 * (1.0 - p0) / n).sqrt());
    }

    #[test]
    fn joint_sample_nu_marginal() {
        let t = 0.8;
        for &q in &[-0.5, 0.0, 0.7] {
            for &x_nu in &[0.0, 0.5] {
                let (p, dec) = model(&CORR, q, &[0.0, 0.0]);
                let x = v(&[0.2, x_nu]);
                let draws = sample_joint_batch(100_000, t, &x, &p, &dec, RngState::new(17, (q * 10.0) as u64 + 100)).unwrap();
                let nu: Vec<f64> = draws.iter().map(|d| d.y[1]).collect();
                // ν-marginal of g̃: Φ-combination in closed form
                let s = (t * dec.sigma2()).sqrt();
                let a = x_nu.abs();
                let cdf = |y: f64| {
                    let free = normal_cdf((y - x_nu) / s);
                    let refl = if y < 0.0 { -normal_cdf((y - a) / s) } else { -normal_cdf(-a / s) + (normal_cdf((y + a) / s) - normal_cdf(a / s)) };
                    free + q * refl
                };
                let ks = ks_one_sample(&nu, cdf);
                assert!(ks.p_value > 0.01, "q={q} x_nu={x_nu}: {ks:?}");
                let _ = skew_density(t, &x, &x, &dec, q).unwrap();
            }
        }
    }

    #[test]
    fn step_alpha_shift_mean() {
        let (p, dec) = model(&ID2, 0.0, &[0.8, 0.0]);
        let x = v(&[0.0, 0.0]);
        let steps = draw_batch(100_000, RngState::new(8, 0), |rng| step(1.0, &x, &p, &dec, rng)).unwrap();
        let lat: Vec<f64> = steps.iter().map(|(y, _)| y[0]).collect();
        let n = lat.len() as f64;
        let mean = lat.iter().sum::<f64>() / n;
        let var = lat.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = 0.8 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - expected).abs() < 3.0 * (var / n).sqrt(), "{mean} vs {expected}");
        // α ⊥ ν: the shift does not move the ν-component
        let mut rng = RngState::new(8, 1).rng();
        for _ in 0..1000 {
            let js = sample_joint(1.0, &x, &p, &dec, &mut rng).unwrap();
            let next = &js.y + p.alpha() * js.theta;
            assert_eq!(next.dot(dec.nu()), js.y.dot(dec.nu()));
        }
    }

    #[test]
    fn joint_density_is_normalised_over_theta() {
        // sanity: the law that the sampler targets has total mass one
        let (_, dec) = model(&CORR, 0.4, &[0.0, 0.0]);
        let quad = QuadratureSpec::default();
        let t = 0.9;
        let x = v(&[0.0, 0.3]);
        let y = v(&[0.1, -0.2]);
        let j = joint_density(t, &x, &y, 0.0, &dec, 0.4).unwrap();
        let cont = integrate_doubling(|th| joint_density(t, &x, &y, th, &dec, 0.4).unwrap().continuous, 0.0, 15.0, &quad).unwrap();
        let skew = skew_density(t, &x, &y, &dec, 0.4).unwrap();
        assert!((j.atom + cont.value - skew).abs() < 1e-10);
    }

    #[test]
    fn paths_are_reproducible_and_monotone() {
        let (p, dec) = model(&CORR, 0.3, &[0.8, 0.0]);
        let x0 = v(&[0.0, 0.2]);
        let grid = [0.0, 0.1, 0.25, 0.5, 1.0];
        let a = sample_paths(200, &x0, &grid, &p, &dec, RngState::new(4, 0)).unwrap();
        let b = sample_paths(200, &x0, &grid, &p, &dec, RngState::new(4, 0)).unwrap();
        assert_eq!(a, b);
        for path in &a {
            assert_eq!(path.local_time[0], 0.0);
            for i in 0..grid.len() - 1 {
                let d = path.local_time[i + 1] - path.local_time[i];
                assert!(d >= 0.0);
                let (s0, s1) = (path.states[i][1], path.states[i + 1][1]);
                if !path.hits[i] {
                    assert_eq!(d, 0.0);
                    assert_eq!(sign0(s0), sign0(s1));
                }
            }
        }
        let mut rng = RngState::new(0, 0).rng();
        assert!(sample_path(&x0, &[0.0, 0.5, 0.5], &p, &dec, &mut rng).is_err());
        assert!(sample_path(&x0, &[0.1, 0.5], &p, &dec, &mut rng).is_err());
    }
}
