//! Named collections of checks over the default parameter grid.
//!
//! | suite                | contents                                                    |
//! |----------------------|-------------------------------------------------------------|
//! | `reductions`         | `G = g̃` for `α = 0`, `G = g₀` for `q = α = 0`, positivity, mass |
//! | `pde`                | heat equation, continuity, flux and reflection conditions   |
//! | `lemma1`             | θ-marginal identity, local-time law, sign law, integral equation |
//! | `semigroup`          | Chapman–Kolmogorov by quadrature and by two-step sampling   |
//! | `sampler-vs-density` | χ² of one-step samples against `G`, frequency of `θ = 0`    |
//! | `oracle`             | exact sampler against the lattice walk                      |
//! | `all`                | everything above                                            |

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::density::{density_u, joint_density, skew_density, free_density, TestFunction, TransitionKernel};
use crate::error::{Error, Result};
use crate::geometry::{build_decomposition, ModelParams};
use crate::quadrature::{integrate_doubling, QuadratureSpec};
use crate::sampler::{draw_batch, sample_joint, sample_paths, RngState};
use crate::stats::{binomial_z, ks_one_sample, ks_two_sample, mean_z, normal_cdf};
use crate::verify::grid::{cells_for, default_cells, default_models, Cell, ModelCell, DEFAULT_T, DEFAULT_X_NU};
use crate::verify::integral::{char_fn_joint, check_integral_equation};
use crate::verify::oracle::{calibrate, oracle_walk, OracleConfig};
use crate::verify::pde::{check_continuity, check_flux, check_heat_equation, default_bump};
use crate::verify::report::{CheckParams, CheckReport, Semantics};
use crate::verify::sampling::check_step_histogram;
use crate::verify::semigroup::check_chapman_kolmogorov;

pub const SUITES: [&str; 7] = ["reductions", "pde", "lemma1", "semigroup", "sampler-vs-density", "oracle", "all"];

/// Significance of single statistical tests.
pub const SINGLE_SIGNIFICANCE: f64 = 0.01;
/// Significance of a family after Bonferroni adjustment.
pub const FAMILY_SIGNIFICANCE: f64 = 0.001;
/// Default sample size of the sampler checks.
pub const DEFAULT_N: usize = 100_000;
/// Paths per oracle configuration, and for the calibration run.
pub const ORACLE_PATHS: usize = 10_000;
pub const CALIBRATION_PATHS: usize = 40_000;

/// Settings shared by all suites.
#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Sample size of the sampler-based checks.
    pub n: usize,
    pub quad: QuadratureSpec,
    /// Replaces the default models when set.
    pub models: Option<Vec<ModelCell>>,
    /// Replaces the default times when set.
    pub times: Option<Vec<f64>>,
    /// Record wall-clock times in the reports.
    pub timings: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 42,
            n: DEFAULT_N,
            quad: QuadratureSpec::default(),
            models: None,
            times: None,
            timings: false,
        }
    }
}

impl SuiteOptions {
    fn models(&self, keep: impl Fn(f64, f64) -> bool) -> Vec<ModelCell> {
        match &self.models {
            Some(m) => m.iter().filter(|c| keep(c.params.q(), c.params.alpha().norm())).cloned().collect(),
            None => default_models(keep),
        }
    }

    fn times(&self) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| DEFAULT_T.to_vec())
    }

    fn cells(&self) -> Vec<Cell> {
        match (&self.models, &self.times) {
            (None, None) => default_cells(),
            _ => cells_for(&self.models(|_, _| true), &self.times(), &DEFAULT_X_NU),
        }
    }

    /// Generator of the check `id`: same seed, stream derived from the id.
    pub fn rng_state(&self, id: &str) -> RngState {
        RngState::new(self.seed, fnv1a(id))
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

struct Outcome {
    statistic: f64,
    extra: Vec<(&'static str, f64)>,
}

impl Outcome {
    fn new(statistic: f64) -> Self {
        Outcome { statistic, extra: Vec::new() }
    }

    fn with(mut self, key: &'static str, v: f64) -> Self {
        self.extra.push((key, v));
        self
    }
}

type Run = Box<dyn Fn() -> Result<Outcome> + Send + Sync>;
type GroupRun = Box<dyn Fn() -> Result<Vec<Outcome>> + Send + Sync>;

struct Spec {
    id: String,
    params: CheckParams,
    threshold: f64,
    semantics: Semantics,
    sampling: Option<(f64, u64)>,
    /// Bonferroni family; members compare `min(1, m·p)` with the threshold.
    family: Option<&'static str>,
}

impl Spec {
    fn new(id: String, params: CheckParams, threshold: f64, semantics: Semantics) -> Self {
        Spec {
            id,
            params,
            threshold,
            semantics,
            sampling: None,
            family: None,
        }
    }

    fn sampled(mut self, significance: f64, n: usize) -> Self {
        self.sampling = Some((significance, n as u64));
        self
    }

    fn family(mut self, name: &'static str) -> Self {
        self.family = Some(name);
        self
    }

    fn report(&self, outcome: Result<Outcome>) -> CheckReport {
        let mut report = match outcome {
            Ok(o) => {
                let mut r = CheckReport::new(self.id.clone(), self.params.clone(), o.statistic, self.threshold, self.semantics);
                for (k, v) in o.extra {
                    r = r.with_extra(k, v);
                }
                r
            }
            Err(e) => CheckReport::failed(self.id.clone(), self.params.clone(), self.threshold, self.semantics, &e),
        };
        if let Some((s, n)) = self.sampling {
            report = report.with_sampling(s, n);
        }
        report
    }
}

/// One unit of work producing one report per spec.
struct Job {
    specs: Vec<Spec>,
    run: GroupRun,
}

impl Job {
    fn new(id: String, params: CheckParams, threshold: f64, semantics: Semantics, run: Run) -> Self {
        Job {
            specs: vec![Spec::new(id, params, threshold, semantics)],
            run: Box::new(move || run().map(|o| vec![o])),
        }
    }

    fn group(specs: Vec<Spec>, run: GroupRun) -> Self {
        Job { specs, run }
    }

    fn sampled(mut self, significance: f64, n: usize) -> Self {
        let last = self.specs.pop().expect("job has a spec").sampled(significance, n);
        self.specs.push(last);
        self
    }

    fn family(mut self, name: &'static str) -> Self {
        let last = self.specs.pop().expect("job has a spec").family(name);
        self.specs.push(last);
        self
    }

    fn execute(&self, timings: bool) -> Vec<CheckReport> {
        let start = Instant::now();
        let mut reports: Vec<CheckReport> = match (self.run)() {
            Ok(outs) => {
                assert_eq!(outs.len(), self.specs.len(), "one outcome per spec");
                self.specs.iter().zip(outs).map(|(s, o)| s.report(Ok(o))).collect()
            }
            Err(e) => self.specs.iter().map(|s| s.report(Err(e.clone()))).collect(),
        };
        if timings {
            let ms = start.elapsed().as_millis() as u64;
            for r in &mut reports {
                r.runtime_ms = Some(ms);
            }
        }
        reports
    }
}

fn cell_params(cell: &Cell) -> CheckParams {
    CheckParams::new(&cell.model.params).time(cell.t).point(cell.x.as_slice())
}

/// Runs one suite; reports come back sorted by `check_id`.
pub fn run_suite(suite_id: &str, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    opts.quad.validate()?;
    let jobs = match suite_id {
        "reductions" => reductions(opts),
        "pde" => pde(opts),
        "lemma1" => lemma1(opts),
        "semigroup" => semigroup(opts),
        "sampler-vs-density" => sampler_vs_density(opts),
        "oracle" => oracle(opts)?,
        "all" => {
            let mut all = Vec::new();
            for s in SUITES.iter().filter(|s| **s != "all") {
                all.extend(run_suite(s, opts)?);
            }
            all.sort_by(|a, b| a.check_id.cmp(&b.check_id));
            return Ok(all);
        }
        other => return Err(Error::UnknownSuite(other.to_string())),
    };
    let mut reports: Vec<CheckReport> = jobs.par_iter().flat_map_iter(|j| j.execute(opts.timings)).collect();
    let specs: Vec<&Spec> = jobs.iter().flat_map(|j| &j.specs).collect();
    apply_bonferroni(&specs, &mut reports);
    reports.sort_by(|a, b| a.check_id.cmp(&b.check_id));
    Ok(reports)
}

fn apply_bonferroni(specs: &[&Spec], reports: &mut [CheckReport]) {
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for j in specs {
        if let Some(f) = j.family {
            *sizes.entry(f).or_default() += 1;
        }
    }
    for (j, r) in specs.iter().zip(reports.iter_mut()) {
        let Some(f) = j.family else { continue };
        if r.error.is_some() {
            continue;
        }
        let m = sizes[f] as f64;
        r.extra.insert("p_raw".into(), r.statistic);
        r.extra.insert("family_size".into(), m);
        r.statistic = (r.statistic * m).min(1.0);
        r.passed = r.semantics.passes(r.statistic, r.threshold);
    }
}

/// Corners of a 21×21 grid over the bulk of `G(t, x, ·)`.
fn spatial_grid(cell: &Cell) -> Vec<DVector<f64>> {
    let dec = &cell.model.dec;
    let t = cell.t;
    let sd = dec.sigma() * t.sqrt();
    let x_nu = cell.x.dot(dec.nu());
    let s_x = dec.lateral_coords(&cell.x);
    let shift = dec.lateral_coords(cell.model.params.alpha()) * (3.0 * t.sqrt() / dec.sigma());
    let k = dec.dim() - 1;
    let lat_sd: Vec<f64> = (0..k)
        .map(|i| (t * (dec.lateral_cov()[(i, i)] + dec.sigma2() * dec.lateral_drift()[i].powi(2))).sqrt())
        .collect();
    let mut out = Vec::new();
    for a in 0..21 {
        let y_nu = x_nu - 3.0 * sd + 0.3 * sd * a as f64;
        for b in 0..21 {
            let s = DVector::from_fn(k, |i, _| {
                let lo = s_x[i] - 3.0 * lat_sd[i] + shift[i].min(0.0);
                let hi = s_x[i] + 3.0 * lat_sd[i] + shift[i].max(0.0);
                lo + (hi - lo) * b as f64 / 20.0
            });
            out.push(dec.from_coords(y_nu, &s));
        }
    }
    out
}

fn reductions(opts: &SuiteOptions) -> Vec<Job> {
    let mut jobs = Vec::new();
    for cell in opts.cells() {
        let label = cell.label();
        let quad = opts.quad;
        let q = cell.model.params.q();
        let alpha_zero = cell.model.params.alpha().norm() == 0.0;
        let cell = Arc::new(cell);

        let c = cell.clone();
        jobs.push(Job::new(
            format!("reductions/positivity/{label}"),
            cell_params(&cell),
            -1e-12,
            Semantics::Above,
            Box::new(move || {
                let kernel = TransitionKernel::new(&c.model.params, &c.model.dec, &quad)?;
                let mut min = f64::INFINITY;
                for y in spatial_grid(&c) {
                    min = min.min(kernel.density(c.t, &c.x, &y)?);
                }
                Ok(Outcome::new(min))
            }),
        ));

        let c = cell.clone();
        jobs.push(Job::new(
            format!("reductions/normalization/{label}"),
            cell_params(&cell),
            1e-6,
            Semantics::Below,
            Box::new(move || {
                let mass = density_u(c.t, &c.x, &TestFunction::constant(1.0), &c.model.params, &c.model.dec, &quad)?;
                Ok(Outcome::new((mass - 1.0).abs()).with("mass", mass))
            }),
        ));

        if alpha_zero {
            let c = cell.clone();
            jobs.push(Job::new(
                format!("reductions/skew/{label}"),
                cell_params(&cell),
                1e-8,
                Semantics::Below,
                Box::new(move || {
                    let kernel = TransitionKernel::new(&c.model.params, &c.model.dec, &quad)?;
                    let mut err: f64 = 0.0;
                    for y in spatial_grid(&c) {
                        let g = kernel.density(c.t, &c.x, &y)?;
                        err = err.max((g - skew_density(c.t, &c.x, &y, &c.model.dec, q)?).abs());
                    }
                    Ok(Outcome::new(err))
                }),
            ));
        }
        if alpha_zero && q == 0.0 {
            let c = cell.clone();
            jobs.push(Job::new(
                format!("reductions/free/{label}"),
                cell_params(&cell),
                1e-10,
                Semantics::Below,
                Box::new(move || {
                    let kernel = TransitionKernel::new(&c.model.params, &c.model.dec, &quad)?;
                    let mut err: f64 = 0.0;
                    for y in spatial_grid(&c) {
                        let g = kernel.density(c.t, &c.x, &y)?;
                        err = err.max((g - free_density(c.t, &c.x, &y, &c.model.dec)?).abs());
                    }
                    Ok(Outcome::new(err))
                }),
            ));
        }
    }
    jobs
}

fn pde(opts: &SuiteOptions) -> Vec<Job> {
    let mut jobs = Vec::new();
    let models = opts.models(|_, _| true);
    for m in &models {
        for &t in &opts.times() {
            let off = cells_for(std::slice::from_ref(m), &[t], &[0.5]).remove(0);
            let on = cells_for(std::slice::from_ref(m), &[t], &[0.0]).remove(0);
            let off = Arc::new(off);
            let on = Arc::new(on);

            let c = off.clone();
            jobs.push(Job::new(
                format!("pde/heat/{}", off.label()),
                cell_params(&off),
                1.7,
                Semantics::Above,
                Box::new(move || {
                    let h = check_heat_equation(c.t, &c.x, &c.model.params, &c.model.dec)?;
                    Ok(Outcome::new(h.order)
                        .with("residual_h0", h.residuals[0])
                        .with("residual_h1", h.residuals[1])
                        .with("residual_h2", h.residuals[2]))
                }),
            ));

            let c = on.clone();
            jobs.push(Job::new(
                format!("pde/continuity/{}", on.label()),
                cell_params(&on),
                1e-6,
                Semantics::Below,
                Box::new(move || {
                    let phi = default_bump(&c.model.dec);
                    let r = check_continuity(c.t, &c.x, &c.model.params, &c.model.dec, &phi)?;
                    Ok(Outcome::new(r.extrapolated.abs())
                        .with("jump_e0", r.jumps[0])
                        .with("jump_e1", r.jumps[1])
                        .with("jump_e2", r.jumps[2]))
                }),
            ));

            let c = on.clone();
            jobs.push(Job::new(
                format!("pde/flux/{}", on.label()),
                cell_params(&on),
                1e-5,
                Semantics::Below,
                Box::new(move || {
                    let phi = default_bump(&c.model.dec);
                    let r = check_flux(c.t, &c.x, &c.model.params, &c.model.dec, &phi)?;
                    Ok(Outcome::new(r.extrapolated.abs())
                        .with("residual_e0", r.residuals[0])
                        .with("residual_e1", r.residuals[1])
                        .with("residual_e2", r.residuals[2])
                        .with("conormal_plus", r.conormal_plus)
                        .with("conormal_minus", r.conormal_minus))
                }),
            ));

            if m.params.q() == 1.0 && m.params.alpha().norm() == 0.0 {
                let c = on.clone();
                jobs.push(Job::new(
                    format!("pde/reflection/{}", on.label()),
                    cell_params(&on),
                    1e-5,
                    Semantics::Below,
                    Box::new(move || {
                        let phi = default_bump(&c.model.dec);
                        let r = check_flux(c.t, &c.x, &c.model.params, &c.model.dec, &phi)?;
                        Ok(Outcome::new(r.conormal_plus.abs()))
                    }),
                ));
            }
        }
    }
    jobs
}

fn planar(b: &[f64; 4], q: f64) -> ModelParams {
    ModelParams::with_standard_normal(DMatrix::from_row_slice(2, 2, b), q, DVector::zeros(2)).expect("valid planar model")
}

const IDENTITY: [f64; 4] = [1.0, 0.0, 0.0, 1.0];
const CORRELATED: [f64; 4] = [2.0, 1.0, 1.0, 2.0];

/// `erfi` by its Taylor series; used for the half-normal characteristic
/// function at moderate arguments.
fn erfi(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for k in 1..400 {
        let k = k as f64;
        term *= x * x / k;
        let add = term / (2.0 * k + 1.0);
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    2.0 * sum / std::f64::consts::PI.sqrt()
}

fn lemma1(opts: &SuiteOptions) -> Vec<Job> {
    let mut jobs = Vec::new();
    let quad = opts.quad;
    let n = opts.n;

    // atom + ∫ continuous dθ = g̃ at random points
    let id = "lemma1/theta-marginal".to_string();
    let state = opts.rng_state(&id);
    jobs.push(Job::new(
        id,
        CheckParams::default().value("points", 100.0),
        1e-10,
        Semantics::Below,
        Box::new(move || {
            let mut rng = state.rng();
            let mut worst: f64 = 0.0;
            for i in 0..100 {
                let t = rng.random_range(0.1..2.0);
                let q = rng.random_range(-1.0..=1.0);
                let mut x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
                if i % 10 == 0 {
                    x[1] = 0.0;
                }
                let p = planar(if i % 2 == 0 { &IDENTITY } else { &CORRELATED }, q);
                let dec = build_decomposition(&p)?;
                let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
                let atom = joint_density(t, &x, &y, 0.0, &dec, q)?.atom;
                let theta_max = quad.tail_sigmas * t.sqrt() / dec.sigma();
                let cont = integrate_doubling(|th| joint_density(t, &x, &y, th, &dec, q).map(|j| j.continuous).unwrap_or(f64::NAN), 0.0, theta_max, &quad)?;
                let g = skew_density(t, &x, &y, &dec, q)?;
                worst = worst.max((atom + cont.value - g).abs());
            }
            Ok(Outcome::new(worst))
        }),
    ));

    // η from a start on S with q = 0, σ = 1, t = 1
    let target = (2.0 / std::f64::consts::PI).sqrt();
    let id = "lemma1/local-time-mean".to_string();
    let state = opts.rng_state(&id);
    jobs.push(
        Job::new(
            id,
            CheckParams::new(&planar(&IDENTITY, 0.0)).time(1.0).point(&[0.0, 0.0]),
            3.0,
            Semantics::Below,
            Box::new(move || {
                let thetas = local_times(n, state)?;
                let (mean, se, z) = mean_z(&thetas, target);
                Ok(Outcome::new(z.abs()).with("mean", mean).with("se", se).with("expected", target))
            }),
        )
        .sampled(SINGLE_SIGNIFICANCE, n),
    );
    let id = "lemma1/local-time-ks".to_string();
    let state = opts.rng_state(&id);
    jobs.push(
        Job::new(
            id,
            CheckParams::new(&planar(&IDENTITY, 0.0)).time(1.0).point(&[0.0, 0.0]),
            SINGLE_SIGNIFICANCE,
            Semantics::Above,
            Box::new(move || {
                let thetas = local_times(n, state)?;
                let ks = ks_one_sample(&thetas, |th| (2.0 * normal_cdf(th) - 1.0).max(0.0));
                Ok(Outcome::new(ks.p_value).with("ks_statistic", ks.statistic))
            }),
        )
        .sampled(SINGLE_SIGNIFICANCE, n),
    );

    // sign of y_ν on the hit branch
    for &q in &crate::verify::grid::DEFAULT_Q {
        let id = format!("lemma1/sign-law/q{q}");
        let state = opts.rng_state(&id);
        let p = planar(&CORRELATED, q);
        jobs.push(
            Job::new(
                id,
                CheckParams::new(&p).time(1.0).point(&[0.0, 0.5]),
                3.0,
                Semantics::Below,
                Box::new(move || {
                    let dec = build_decomposition(&p)?;
                    let x = DVector::from_vec(vec![0.0, 0.5]);
                    let draws = draw_batch(n, state, |rng| sample_joint(1.0, &x, &p, &dec, rng))?;
                    let hits: Vec<_> = draws.iter().filter(|d| d.hit).collect();
                    let up = hits.iter().filter(|d| d.y[1] > 0.0).count();
                    let z = binomial_z(up, hits.len(), 0.5 * (1.0 + q));
                    Ok(Outcome::new(z.abs()).with("hits", hits.len() as f64).with("positive", up as f64))
                }),
            )
            .sampled(SINGLE_SIGNIFICANCE, n),
        );
    }

    // half-normal characteristic function of η
    for &lambda in &[0.3, 0.7, 2.0] {
        let p = planar(&CORRELATED, 0.0);
        jobs.push(Job::new(
            format!("lemma1/local-time-cf/l{lambda}"),
            CheckParams::new(&p).time(1.0).point(&[0.0, 0.0]).value("lambda", lambda),
            1e-6,
            Semantics::Below,
            Box::new(move || {
                let dec = build_decomposition(&p)?;
                let u = char_fn_joint(1.0, &DVector::zeros(2), lambda, &DVector::zeros(2), 0.0, &dec);
                let a = lambda / dec.sigma();
                let exact = nalgebra::Complex::new(1.0, erfi(a / 2f64.sqrt())) * (-0.5 * a * a).exp();
                Ok(Outcome::new((u - exact).norm()))
            }),
        ));
    }

    // integral equation on the (λ, μ) grid
    for &q in &[0.0, 0.5] {
        for &lambda in &[0.0, 0.3, 0.7] {
            for mu in [[0.0, 0.0], [0.3, -0.2]] {
                for &x_nu in &[0.0, 0.4] {
                    let p = planar(&CORRELATED, q);
                    let x = [0.1, x_nu];
                    jobs.push(Job::new(
                        format!("lemma1/integral-equation/q{q}_l{lambda}_m{},{}_x{x_nu}", mu[0], mu[1]),
                        CheckParams::new(&p).time(1.0).point(&x).value("lambda", lambda).value("mu_1", mu[0]).value("mu_2", mu[1]),
                        1e-4,
                        Semantics::Below,
                        Box::new(move || {
                            let dec = build_decomposition(&p)?;
                            let r = check_integral_equation(1.0, &DVector::from_vec(x.to_vec()), lambda, &DVector::from_vec(mu.to_vec()), &p, &dec)?;
                            Ok(Outcome::new(r.relative_error)
                                .with("lhs_re", r.lhs.re)
                                .with("lhs_im", r.lhs.im)
                                .with("rhs_re", r.rhs.re)
                                .with("rhs_im", r.rhs.im))
                        }),
                    ));
                }
            }
        }
    }
    jobs
}

fn local_times(n: usize, state: RngState) -> Result<Vec<f64>> {
    let p = planar(&IDENTITY, 0.0);
    let dec = build_decomposition(&p)?;
    let x = DVector::zeros(2);
    draw_batch(n, state, |rng| sample_joint(1.0, &x, &p, &dec, rng).map(|j| j.theta))
}

/// `(s, t)` pairs and end points of the Chapman–Kolmogorov checks.
pub const CK_TIMES: [(f64, f64); 2] = [(0.25, 0.25), (0.5, 1.0)];
pub const CK_TARGETS: [[f64; 2]; 3] = [[0.3, 0.6], [-0.4, -0.3], [0.2, 0.05]];

fn semigroup(opts: &SuiteOptions) -> Vec<Job> {
    let mut jobs = Vec::new();
    let quad = opts.quad;
    for m in opts.models(|_, _| true) {
        for &x_nu in &DEFAULT_X_NU {
            for &(s, t) in &CK_TIMES {
                let cell = cells_for(std::slice::from_ref(&m), &[s + t], &[x_nu]).remove(0);
                let params = CheckParams::new(&m.params).time(s).time(t).point(cell.x.as_slice());
                let c = Arc::new(cell);
                jobs.push(Job::new(
                    format!("semigroup/chapman-kolmogorov/{}_x{x_nu}_s{s}_t{t}", m.label),
                    params,
                    1e-4,
                    Semantics::Below,
                    Box::new(move || {
                        let mut worst: f64 = 0.0;
                        let mut nodes = 0;
                        for y in &CK_TARGETS {
                            let y = DVector::from_vec(y.to_vec());
                            let r = check_chapman_kolmogorov(s, t, &c.x, &y, &c.model.params, &c.model.dec, &quad)?;
                            worst = worst.max(r.residual);
                            nodes = nodes.max(r.nodes);
                        }
                        Ok(Outcome::new(worst).with("nodes", nodes as f64))
                    }),
                ));
            }
        }
    }

    // sample level: one step of length 1 against two steps of 1/2
    let n = opts.n;
    for m in opts.models(|_, _| true) {
        let id = format!("semigroup/two-step/{}", m.label);
        let state = opts.rng_state(&id);
        let x = m.dec.from_coords(0.5, &DVector::zeros(m.dec.dim() - 1));
        jobs.push(
            Job::new(
                id,
                CheckParams::new(&m.params).time(0.5).time(1.0).point(x.as_slice()),
                FAMILY_SIGNIFICANCE,
                Semantics::Above,
                Box::new(move || {
                    let one = sample_paths(n, &x, &[0.0, 1.0], &m.params, &m.dec, state.child(0))?;
                    let two = sample_paths(n, &x, &[0.0, 0.5, 1.0], &m.params, &m.dec, state.child(1))?;
                    let a: Vec<f64> = one.iter().map(|p| p.states[1].dot(m.dec.nu())).collect();
                    let b: Vec<f64> = two.iter().map(|p| p.states[2].dot(m.dec.nu())).collect();
                    let ks = ks_two_sample(&a, &b);
                    Ok(Outcome::new(ks.p_value).with("ks_statistic", ks.statistic))
                }),
            )
            .sampled(FAMILY_SIGNIFICANCE, n)
            .family("two-step"),
        );
    }
    jobs
}

/// χ² per cell; the frequency of `θ = 0` is tested per group of cells that
/// share `P(θ = 0)`, i.e. the same `(B, t, x_ν)`, with the counts pooled.
fn sampler_vs_density(opts: &SuiteOptions) -> Vec<Job> {
    let quad = opts.quad;
    let n = opts.n;
    let mut groups: BTreeMap<String, Vec<Cell>> = BTreeMap::new();
    for cell in opts.cells() {
        let b: Vec<String> = cell.model.params.diffusion().iter().map(|v| format!("{v}")).collect();
        let x_nu = cell.x.dot(cell.model.dec.nu());
        groups.entry(format!("B{}_t{}_x{x_nu}", b.join(","), cell.t)).or_default().push(cell);
    }
    let mut jobs = Vec::new();
    for (key, cells) in groups {
        let x_nu = cells[0].x.dot(cells[0].model.dec.nu());
        let mut specs: Vec<Spec> = cells
            .iter()
            .map(|c| {
                Spec::new(format!("sampler-vs-density/chi-square/{}", c.label()), cell_params(c), FAMILY_SIGNIFICANCE, Semantics::Above)
                    .sampled(FAMILY_SIGNIFICANCE, n)
                    .family("chi-square")
            })
            .collect();
        let states: Vec<RngState> = specs.iter().map(|s| opts.rng_state(&s.id)).collect();
        let pooled = x_nu != 0.0;
        if pooled {
            let first = &cells[0];
            let params = CheckParams::new(&first.model.params)
                .time(first.t)
                .point(first.x.as_slice())
                .value("cells", cells.len() as f64);
            specs.push(
                Spec::new(format!("sampler-vs-density/no-hit-frequency/{key}"), params, 3.0, Semantics::Below)
                    .sampled(SINGLE_SIGNIFICANCE, n * cells.len()),
            );
        }
        jobs.push(Job::group(
            specs,
            Box::new(move || {
                let mut outs = Vec::new();
                let (mut no_hit, mut total, mut expected) = (0, 0, 0.0);
                for (c, state) in cells.iter().zip(&states) {
                    let r = check_step_histogram(c.t, &c.x, &c.model.params, &c.model.dec, &quad, n, *state)?;
                    no_hit += r.no_hit;
                    total += r.n;
                    expected = r.no_hit_expected;
                    outs.push(
                        Outcome::new(r.chi_square.p_value)
                            .with("chi_square", r.chi_square.statistic)
                            .with("dof", r.chi_square.dof as f64)
                            .with("no_hit", r.no_hit as f64)
                            .with("no_hit_z", r.no_hit_z),
                    );
                }
                if pooled {
                    let z = binomial_z(no_hit, total, expected);
                    outs.push(Outcome::new(z.abs()).with("no_hit", no_hit as f64).with("expected_fraction", expected));
                }
                Ok(outs)
            }),
        ));
    }
    jobs
}

/// Start point and time of the oracle comparisons.
pub const ORACLE_X: [f64; 2] = [0.1, 0.25];
pub const ORACLE_T: f64 = 1.0;

fn oracle(opts: &SuiteOptions) -> Result<Vec<Job>> {
    let calibration_state = opts.rng_state("oracle/calibration");
    let calibration = calibrate(CALIBRATION_PATHS, calibration_state)?;
    let mut jobs = Vec::new();
    jobs.push(
        Job::new(
            "oracle/calibration".to_string(),
            CheckParams::default().time(1.0).value("paths", CALIBRATION_PATHS as f64),
            0.1,
            Semantics::Below,
            Box::new(move || Ok(Outcome::new((calibration - 1.0).abs()).with("calibration", calibration))),
        )
        .sampled(SINGLE_SIGNIFICANCE, CALIBRATION_PATHS),
    );
    for (q, a) in [(0.6, 0.0), (0.6, 0.8), (-1.0, 0.0)] {
        let p = ModelParams::with_standard_normal(DMatrix::from_row_slice(2, 2, &CORRELATED), q, DVector::from_vec(vec![a, 0.0]))?;
        let label = format!("q{q}_a{a}");
        let state = opts.rng_state(&format!("oracle/run/{label}"));
        let params = CheckParams::new(&p).time(ORACLE_T).point(&ORACLE_X).value("calibration", calibration);
        let mut specs = vec![
            Spec::new(format!("oracle/ks-nu/{label}"), params.clone(), FAMILY_SIGNIFICANCE, Semantics::Above)
                .sampled(FAMILY_SIGNIFICANCE, ORACLE_PATHS),
            Spec::new(format!("oracle/ks-lateral/{label}"), params.clone(), FAMILY_SIGNIFICANCE, Semantics::Above)
                .sampled(FAMILY_SIGNIFICANCE, ORACLE_PATHS),
        ];
        if a != 0.0 {
            specs.push(Spec::new(format!("oracle/lateral-mean/{label}"), params, 3.0, Semantics::Below).sampled(SINGLE_SIGNIFICANCE, ORACLE_PATHS));
        }
        jobs.push(Job::group(
            specs,
            Box::new(move || {
                let e = oracle_pair(&p, calibration, state)?;
                let ks_nu = ks_two_sample(&e.oracle_nu, &e.exact_nu);
                let ks_lat = ks_two_sample(&e.oracle_lateral, &e.exact_lateral);
                let mut outs = vec![
                    Outcome::new(ks_nu.p_value).with("ks_statistic", ks_nu.statistic),
                    Outcome::new(ks_lat.p_value).with("ks_statistic", ks_lat.statistic),
                ];
                if a != 0.0 {
                    let (mo, so, _) = mean_z(&e.oracle_lateral, 0.0);
                    let (me, se, _) = mean_z(&e.exact_lateral, 0.0);
                    let z = (mo - me) / (so * so + se * se).sqrt();
                    outs.push(Outcome::new(z.abs()).with("oracle_mean", mo).with("exact_mean", me));
                }
                Ok(outs)
            }),
        ));
    }
    Ok(jobs)
}

/// Components of oracle and exact endpoints: `ν` and a lateral direction,
/// along `α` when `α ≠ 0`.
struct Endpoints {
    oracle_nu: Vec<f64>,
    oracle_lateral: Vec<f64>,
    exact_nu: Vec<f64>,
    exact_lateral: Vec<f64>,
}

fn oracle_pair(p: &ModelParams, calibration: f64, state: RngState) -> Result<Endpoints> {
    let dec = build_decomposition(p)?;
    let x = DVector::from_vec(ORACLE_X.to_vec());
    let cfg = OracleConfig::for_start(ORACLE_T, x.dot(dec.nu()), dec.sigma(), ORACLE_PATHS, calibration)?;
    let direction = if p.alpha().norm() > 0.0 {
        p.alpha() / p.alpha().norm()
    } else {
        dec.basis().column(0).into_owned()
    };
    let oracle = oracle_walk(p, &dec, &cfg, ORACLE_T, &x, state.child(0))?;
    let exact = sample_paths(ORACLE_PATHS, &x, &[0.0, ORACLE_T], p, &dec, state.child(1))?;
    Ok(Endpoints {
        oracle_nu: oracle.iter().map(|o| o.y.dot(dec.nu())).collect(),
        oracle_lateral: oracle.iter().map(|o| o.y.dot(&direction)).collect(),
        exact_nu: exact.iter().map(|e| e.states[1].dot(dec.nu())).collect(),
        exact_lateral: exact.iter().map(|e| e.states[1].dot(&direction)).collect(),
    })
}
