//! Evaluates the transition density along a line crossing the membrane and
//! compares it with the closed form it reduces to when alpha = 0.

use membrane_bm::density::{density_u, free_density, skew_density, TestFunction, TransitionKernel};
use membrane_bm::geometry::{build_decomposition, ModelParams};
use membrane_bm::quadrature::QuadratureSpec;
use nalgebra::{DMatrix, DVector};

fn main() -> membrane_bm::Result<()> {
    let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let quad = QuadratureSpec::default();
    let (t, x) = (1.0, DVector::from_vec(vec![0.0, 0.5]));

    let params = ModelParams::with_standard_normal(b.clone(), 0.5, DVector::from_vec(vec![0.8, 0.0]))?;
    let dec = build_decomposition(&params)?;
    let kernel = TransitionKernel::new(&params, &dec, &quad)?;
    println!("{:>6} {:>14} {:>14}", "y_2", "G", "free");
    for k in -4..=4 {
        let y = DVector::from_vec(vec![0.4, 0.25 * k as f64]);
        println!("{:>6.2} {:>14.8} {:>14.8}", y[1], kernel.density(t, &x, &y)?, free_density(t, &x, &y, &dec)?);
    }
    let mass = density_u(t, &x, &TestFunction::constant(1.0), &params, &dec, &quad)?;
    println!("total mass = {mass:.12}");

    // without the drift along S the density is the skew Gaussian in closed form
    let flat = ModelParams::with_standard_normal(b, 0.5, DVector::zeros(2))?;
    let flat_dec = build_decomposition(&flat)?;
    let flat_kernel = TransitionKernel::new(&flat, &flat_dec, &quad)?;
    let y = DVector::from_vec(vec![0.4, -0.3]);
    let g = flat_kernel.density(t, &x, &y)?;
    let closed = skew_density(t, &x, &y, &flat_dec, 0.5)?;
    println!("alpha = 0: quadrature {g:.15}, closed form {closed:.15}");
    Ok(())
}
