//! The default parameter grid of the verification suites.
//!
//! `d = 2`, `ν = e₂`, and every combination of
//! `q ∈ {−1, −0.5, 0, 0.5, 1}`, `α ∈ {0, 0.8e₁}`, `B ∈ {I, [[2,1],[1,2]]}`,
//! `t ∈ {0.25, 1}`, `x = (0, x_ν)` with `x_ν ∈ {0, 0.5}`: 80 cells.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geometry::{build_decomposition, ModelParams, SpaceDecomposition};

pub const DEFAULT_Q: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
pub const DEFAULT_ALPHA: [f64; 2] = [0.0, 0.8];
pub const DEFAULT_T: [f64; 2] = [0.25, 1.0];
pub const DEFAULT_X_NU: [f64; 2] = [0.0, 0.5];

/// Named diffusion operators of the grid.
pub fn default_diffusions() -> Vec<(&'static str, DMatrix<f64>)> {
    vec![
        ("I", DMatrix::identity(2, 2)),
        ("C", DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])),
    ]
}

/// A model together with its decomposition and a short label.
#[derive(Debug, Clone)]
pub struct ModelCell {
    pub label: String,
    pub params: ModelParams,
    pub dec: SpaceDecomposition,
}

impl ModelCell {
    pub fn new(label: impl Into<String>, params: ModelParams) -> Result<Self> {
        let dec = build_decomposition(&params)?;
        Ok(ModelCell {
            label: label.into(),
            params,
            dec,
        })
    }
}

/// A model plus a time and a start point.
#[derive(Debug, Clone)]
pub struct Cell {
    pub model: ModelCell,
    pub t: f64,
    pub x: DVector<f64>,
}

impl Cell {
    pub fn label(&self) -> String {
        let xs: Vec<String> = self.x.iter().map(|v| format!("{v}")).collect();
        format!("{}_t{}_x{}", self.model.label, self.t, xs.join(","))
    }
}

/// The 20 models of the grid (`q × α × B`), filtered by `keep(q, α₁)`.
pub fn default_models(keep: impl Fn(f64, f64) -> bool) -> Vec<ModelCell> {
    let mut out = Vec::new();
    for (bname, b) in default_diffusions() {
        for &a in &DEFAULT_ALPHA {
            for &q in &DEFAULT_Q {
                if !keep(q, a) {
                    continue;
                }
                let params = ModelParams::with_standard_normal(b.clone(), q, DVector::from_vec(vec![a, 0.0]))
                    .expect("default grid parameters are valid");
                out.push(ModelCell::new(format!("B{bname}_q{q}_a{a}"), params).expect("default grid parameters are valid"));
            }
        }
    }
    out
}

/// Cells for the given models over the default times and start points.
pub fn cells_for(models: &[ModelCell], times: &[f64], x_nus: &[f64]) -> Vec<Cell> {
    let mut out = Vec::new();
    for m in models {
        for &t in times {
            for &x_nu in x_nus {
                let x = m.dec.from_coords(x_nu, &DVector::zeros(m.dec.dim() - 1));
                out.push(Cell {
                    model: m.clone(),
                    t,
                    x,
                });
            }
        }
    }
    out
}

/// All 80 cells of the default grid.
pub fn default_cells() -> Vec<Cell> {
    cells_for(&default_models(|_, _| true), &DEFAULT_T, &DEFAULT_X_NU)
}
