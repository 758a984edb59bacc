//! Model parameters and the linear-algebra decomposition of ℝ^d induced by the
//! membrane hyperplane `S = {x : (x, ν) = 0}` and the diffusion operator `B`.
//!
//! Every point is handled in the coordinates `(x_ν, s)` where `x_ν = (x, ν)` and
//! `s = Uᵀx` are the coordinates of the projection `π_S x` in a fixed orthonormal
//! basis `U` of `S`. The basis is the first `d − 1` columns of the Householder
//! reflection that maps `ν` onto `±e_d`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the exact-linear-algebra invariants of [`ModelParams`].
pub const EXACT_TOL: f64 = 1e-12;

/// A problem instance: dimension, diffusion operator, membrane normal,
/// skewness and tangential drift.
///
/// Construction validates every invariant, so a `ModelParams` value is always
/// admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelParams", into = "RawModelParams")]
pub struct ModelParams {
    diffusion: DMatrix<f64>,
    nu: DVector<f64>,
    q: f64,
    alpha: DVector<f64>,
}

/// Serialized form: `B` is stored row-major next to an explicit `d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModelParams {
    pub d: usize,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    pub nu: Vec<f64>,
    pub q: f64,
    pub alpha: Vec<f64>,
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawModelParams) -> Result<Self> {
        let d = raw.d;
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        check_len("B", d * d, raw.b.len())?;
        check_len("nu", d, raw.nu.len())?;
        check_len("alpha", d, raw.alpha.len())?;
        ModelParams::new(
            DMatrix::from_row_slice(d, d, &raw.b),
            DVector::from_vec(raw.nu),
            raw.q,
            DVector::from_vec(raw.alpha),
        )
    }
}

impl From<ModelParams> for RawModelParams {
    fn from(p: ModelParams) -> Self {
        let d = p.dim();
        let mut b = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                b.push(p.diffusion[(i, j)]);
            }
        }
        RawModelParams {
            d,
            b,
            nu: p.nu.iter().copied().collect(),
            q: p.q,
            alpha: p.alpha.iter().copied().collect(),
        }
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

impl ModelParams {
    pub fn new(
        diffusion: DMatrix<f64>,
        nu: DVector<f64>,
        q: f64,
        alpha: DVector<f64>,
    ) -> Result<Self> {
        let d = diffusion.nrows();
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        check_len("B columns", d, diffusion.ncols())?;
        check_len("nu", d, nu.len())?;
        check_len("alpha", d, alpha.len())?;
        if diffusion.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "B" });
        }
        if nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "nu" });
        }
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "alpha" });
        }
        if !q.is_finite() {
            return Err(Error::NonFinite { what: "q" });
        }

        let max_asymmetry = (&diffusion - diffusion.transpose()).amax();
        if max_asymmetry > EXACT_TOL {
            return Err(Error::NotSymmetric { max_asymmetry });
        }
        let min_eigenvalue = diffusion
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(min_eigenvalue > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        let norm = nu.norm();
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(Error::NotUnitNormal { norm });
        }
        let dot = alpha.dot(&nu);
        if dot.abs() > EXACT_TOL {
            return Err(Error::AlphaNotInPlane { dot });
        }
        if q.abs() > 1.0 {
            return Err(Error::SkewOutOfRange(q));
        }
        Ok(ModelParams {
            diffusion,
            nu,
            q,
            alpha,
        })
    }

    /// Membrane `S = {x_d = 0}` with normal `e_d`.
    pub fn with_standard_normal(diffusion: DMatrix<f64>, q: f64, alpha: DVector<f64>) -> Result<Self> {
        let d = diffusion.nrows();
        let mut nu = DVector::zeros(d.max(1));
        if d > 0 {
            nu[d - 1] = 1.0;
        }
        Self::new(diffusion, nu, q, alpha)
    }

    pub fn dim(&self) -> usize {
        self.diffusion.nrows()
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    pub fn nu(&self) -> &DVector<f64> {
        &self.nu
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Same instance with a different skewness.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::new(self.diffusion.clone(), self.nu.clone(), q, self.alpha.clone())
    }

    /// Same instance with a different tangential drift.
    pub fn with_alpha(&self, alpha: DVector<f64>) -> Result<Self> {
        Self::new(self.diffusion.clone(), self.nu.clone(), self.q, alpha)
    }
}

/// Geometry derived from `(B, ν)`; consumed by every density and sampler.
#[derive(Debug, Clone)]
pub struct SpaceDecomposition {
    nu: DVector<f64>,
    sigma2: f64,
    conormal: DVector<f64>,
    b: DVector<f64>,
    basis: DMatrix<f64>,
    lateral_cov: DMatrix<f64>,
    lateral_chol: DMatrix<f64>,
    lateral_log_det: f64,
    /// `Uᵀb / σ²`: lateral mean shift per unit of ν-displacement.
    lateral_drift: DVector<f64>,
    diffusion_chol: DMatrix<f64>,
    diffusion_log_det: f64,
}

impl SpaceDecomposition {
    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn nu(&self) -> &DVector<f64> {
        &self.nu
    }

    /// `σ² = (Bν, ν)`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Conormal vector `N = Bν`.
    pub fn conormal(&self) -> &DVector<f64> {
        &self.conormal
    }

    /// `b = π_S Bν`, as a vector of ℝ^d.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// `d × (d−1)` matrix whose columns are an orthonormal basis of `S`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `B_S` in basis coordinates.
    pub fn lateral_cov(&self) -> &DMatrix<f64> {
        &self.lateral_cov
    }

    /// Lower Cholesky factor of `B_S`.
    pub fn lateral_chol(&self) -> &DMatrix<f64> {
        &self.lateral_chol
    }

    pub fn lateral_log_det(&self) -> f64 {
        self.lateral_log_det
    }

    pub fn lateral_drift(&self) -> &DVector<f64> {
        &self.lateral_drift
    }

    pub fn diffusion_chol(&self) -> &DMatrix<f64> {
        &self.diffusion_chol
    }

    pub fn diffusion_log_det(&self) -> f64 {
        self.diffusion_log_det
    }

    /// Coordinates `Uᵀx` of `π_S x`.
    pub fn lateral_coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(x)
    }

    /// Rebuilds a point of ℝ^d from its `(x_ν, s)` coordinates.
    pub fn from_coords(&self, x_nu: f64, lateral: &DVector<f64>) -> DVector<f64> {
        &self.basis * lateral + &self.nu * x_nu
    }

    /// Solves `L w = v` with `L` the lower Cholesky factor of `B_S`.
    pub fn whiten_lateral(&self, v: &DVector<f64>) -> DVector<f64> {
        self.lateral_chol
            .solve_lower_triangular(v)
            .expect("Cholesky factor of B_S is nonsingular")
    }

    /// Largest eigenvalue of `B_S`.
    pub fn lateral_max_eigenvalue(&self) -> f64 {
        self.lateral_cov
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Orthonormal basis of `ν^⊥` from the Householder reflection taking `ν` to `∓e_d`.
fn householder_basis(nu: &DVector<f64>) -> DMatrix<f64> {
    let d = nu.len();
    let last = nu[d - 1];
    let sign = if last >= 0.0 { 1.0 } else { -1.0 };
    let mut v = nu.clone();
    v[d - 1] += sign;
    let vv = v.norm_squared();
    let h = DMatrix::<f64>::identity(d, d) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(0, d - 1).into_owned()
}

pub fn build_decomposition(params: &ModelParams) -> Result<SpaceDecomposition> {
    let bmat = params.diffusion();
    let nu = params.nu();

    let max_asymmetry = (bmat - bmat.transpose()).amax();
    if max_asymmetry > EXACT_TOL {
        return Err(Error::NotSymmetric { max_asymmetry });
    }
    let dot = params.alpha().dot(nu);
    if dot.abs() > EXACT_TOL {
        return Err(Error::AlphaNotInPlane { dot });
    }

    let diffusion_chol = bmat
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
        })?
        .l();
    let diffusion_log_det = 2.0 * diffusion_chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();

    let conormal = bmat * nu;
    let sigma2 = conormal.dot(nu);
    if !(sigma2 > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: sigma2,
        });
    }
    let b = &conormal - nu * sigma2;
    let basis = householder_basis(nu);

    // Schur complement of the ν-block: U^T B U - (U^T b)(U^T b)^T / σ².
    let b_coords = basis.tr_mul(&b);
    let mut lateral_cov = basis.tr_mul(&(bmat * &basis)) - (&b_coords * b_coords.transpose()) / sigma2;
    lateral_cov = (&lateral_cov + lateral_cov.transpose()) * 0.5;

    let lateral_chol = lateral_cov
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
        })?
        .l();
    let lateral_log_det = 2.0 * lateral_chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let lateral_drift = b_coords / sigma2;

    Ok(SpaceDecomposition {
        nu: nu.clone(),
        sigma2,
        conormal,
        b,
        basis,
        lateral_cov,
        lateral_chol,
        lateral_log_det,
        lateral_drift,
        diffusion_chol,
        diffusion_log_det,
    })
}

/// `x − (x, ν)ν`.
pub fn project_to_s(x: &DVector<f64>, dec: &SpaceDecomposition) -> DVector<f64> {
    x - dec.nu() * x.dot(dec.nu())
}

/// `(x, ν)`.
pub fn nu_component(x: &DVector<f64>, dec: &SpaceDecomposition) -> f64 {
    x.dot(dec.nu())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(d: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    }

    fn params(b: DMatrix<f64>) -> ModelParams {
        let d = b.nrows();
        ModelParams::with_standard_normal(b, 0.0, DVector::zeros(d)).unwrap()
    }

    #[test]
    fn identity_operator() {
        let dec = build_decomposition(&params(DMatrix::identity(2, 2))).unwrap();
        assert_eq!(dec.sigma2(), 1.0);
        assert!(dec.b().norm() < 1e-15);
        assert!((dec.lateral_cov()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn correlated_2d_schur_complement() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let dec = build_decomposition(&params(b.clone())).unwrap();
        assert!((dec.sigma2() - 2.0).abs() < 1e-15);
        assert!((dec.b() - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
        assert!((dec.lateral_cov()[(0, 0)] - 1.5).abs() < 1e-14);

        // Definition: B_S = (π_S B⁻¹ π_S)⁻¹ on S. In basis coordinates
        // this is the inverse of Uᵀ B⁻¹ U.
        let binv = b.try_inverse().unwrap();
        let u = dec.basis();
        let via_inverse = (u.transpose() * binv * u).try_inverse().unwrap();
        assert!((via_inverse - dec.lateral_cov()).amax() < 1e-12);
    }

    #[test]
    fn decoupled_diagonal_3d() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0, 1.0]));
        let dec = build_decomposition(&params(b)).unwrap();
        assert_eq!(dec.sigma2(), 1.0);
        assert!(dec.b().norm() < 1e-15);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        assert!((dec.lateral_cov() - expected).amax() < 1e-14);
    }

    #[test]
    fn projections() {
        let dec = build_decomposition(&params(DMatrix::identity(2, 2))).unwrap();
        let nu = dec.nu().clone();
        assert!(project_to_s(&nu, &dec).norm() < 1e-15);
        let x = DVector::from_vec(vec![3.0, 5.0]);
        assert_eq!(project_to_s(&x, &dec), DVector::from_vec(vec![3.0, 0.0]));
        assert_eq!(nu_component(&x, &dec), 5.0);
        assert_eq!(nu_component(&(&nu * 2.0), &dec), 2.0);
        let in_s = DVector::from_vec(vec![-1.5, 0.0]);
        assert_eq!(project_to_s(&in_s, &dec), in_s);
        assert_eq!(nu_component(&in_s, &dec), 0.0);
    }

    #[test]
    fn rejects_invalid_params() {
        let d = 2;
        let nu = e(d, 1);
        let zero = DVector::zeros(d);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            ModelParams::new(asym, nu.clone(), 0.0, zero.clone()),
            Err(Error::NotSymmetric { .. })
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            ModelParams::new(indefinite, nu.clone(), 0.0, zero.clone()),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            ModelParams::new(DMatrix::identity(2, 2), nu.clone() * 1.1, 0.0, zero.clone()),
            Err(Error::NotUnitNormal { .. })
        ));
        assert!(matches!(
            ModelParams::new(DMatrix::identity(2, 2), nu.clone(), 0.0, e(d, 1)),
            Err(Error::AlphaNotInPlane { .. })
        ));
        assert!(matches!(
            ModelParams::new(DMatrix::identity(2, 2), nu.clone(), 1.5, zero.clone()),
            Err(Error::SkewOutOfRange(_))
        ));
        assert!(matches!(
            ModelParams::new(DMatrix::identity(1, 1), e(1, 0), 0.0, DVector::zeros(1)),
            Err(Error::DimensionTooSmall(1))
        ));
    }

    #[test]
    fn json_round_trip() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let p = ModelParams::with_standard_normal(b, 0.5, DVector::from_vec(vec![0.8, 0.0])).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"d":2,"B":[2.0,1.0,1.0,2.0],"nu":[0.0,1.0],"q":0.5,"alpha":[0.8,0.0]}"#);
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"d":2,"B":[1,0,0,1],"nu":[0,1],"q":1.5,"alpha":[0,0]}"#;
        assert!(serde_json::from_str::<ModelParams>(bad).is_err());
    }

    fn spd_strategy(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |v| {
            let a = DMatrix::from_row_slice(d, d, &v);
            let m = &a * a.transpose() + DMatrix::identity(d, d) * 0.3;
            (&m + m.transpose()) * 0.5
        })
    }

    fn unit_strategy(d: usize) -> impl Strategy<Value = DVector<f64>> {
        prop::collection::vec(-1.0f64..1.0, d)
            .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
            .prop_map(|v| {
                let v = DVector::from_vec(v);
                let n = v.norm();
                v / n
            })
    }

    proptest! {
        #[test]
        fn reconstruction_and_basis(nu in unit_strategy(3), x in prop::collection::vec(-5.0f64..5.0, 3)) {
            let p = ModelParams::new(DMatrix::identity(3, 3), nu, 0.0, DVector::zeros(3)).unwrap();
            let dec = build_decomposition(&p).unwrap();
            let x = DVector::from_vec(x);
            let rebuilt = project_to_s(&x, &dec) + dec.nu() * nu_component(&x, &dec);
            prop_assert!((rebuilt - &x).norm() < 1e-12);
            let u = dec.basis();
            prop_assert!((u.transpose() * u - DMatrix::identity(2, 2)).amax() < 1e-12);
            prop_assert!(u.tr_mul(dec.nu()).amax() < 1e-12);
            let back = dec.from_coords(nu_component(&x, &dec), &dec.lateral_coords(&x));
            prop_assert!((back - &x).norm() < 1e-12);
        }

        #[test]
        fn schur_identity(b in spd_strategy(3), nu in unit_strategy(3)) {
            let p = ModelParams::new(b.clone(), nu.clone(), 0.0, DVector::zeros(3)).unwrap();
            let dec = build_decomposition(&p).unwrap();
            let bn = &b * &nu;
            let s2 = bn.dot(&nu);
            prop_assert!((dec.sigma2() - s2).abs() < 1e-12);
            let u = dec.basis();
            let schur = u.transpose() * (&b - &bn * bn.transpose() / s2) * u;
            prop_assert!((dec.lateral_cov() - &schur).amax() < 1e-10);
            let via_inverse = (u.transpose() * b.try_inverse().unwrap() * u).try_inverse().unwrap();
            prop_assert!((dec.lateral_cov() - via_inverse).amax() < 1e-10);
        }
    }
}
