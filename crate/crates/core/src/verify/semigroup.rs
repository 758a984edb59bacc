//! Chapman–Kolmogorov identity `∫G(s, x, z)G(t, z, y)dz = G(s + t, x, y)`.

use nalgebra::DVector;

use crate::density::{for_each_tensor_node, mass_box, tensor_nodes, TransitionKernel};
use crate::error::{Error, Result};
use crate::geometry::{ModelParams, SpaceDecomposition};
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChapmanKolmogorov {
    pub composed: f64,
    pub direct: f64,
    pub residual: f64,
    pub nodes: usize,
}

/// Tensor quadrature over `z` on the intersection of the forward mass box of
/// `G(s, x, ·)` and the backward mass box of `G(t, ·, y)`, with the
/// `z_ν`-axis split at the membrane.
pub fn check_chapman_kolmogorov(
    s: f64,
    t: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
    params: &ModelParams,
    dec: &SpaceDecomposition,
    quad: &QuadratureSpec,
) -> Result<ChapmanKolmogorov> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::NonPositiveTime(s));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveTime(t));
    }
    let kernel = TransitionKernel::new(params, dec, quad)?;
    let bx = mass_box(s, x, params, dec, quad, true).intersect(&mass_box(t, y, params, dec, quad, false));
    let mut composed = 0.0;
    let mut nodes = 0;
    if !bx.is_empty() {
        let (nu_nodes, lateral) = tensor_nodes(s.min(t), &bx, dec, quad);
        for_each_tensor_node(dec, &nu_nodes, &lateral, |z, w| {
            nodes += 1;
            let a = kernel.density(s, x, z)?;
            if a != 0.0 {
                composed += w * a * kernel.density(t, z, y)?;
            }
            Ok(())
        })?;
    }
    let direct = kernel.density(s + t, x, y)?;
    Ok(ChapmanKolmogorov {
        composed,
        direct,
        residual: (composed - direct).abs(),
        nodes,
    })
}
