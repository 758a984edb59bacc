//! Splits R^3 along the membrane normal and prints the pieces the density and
//! the sampler work with.

use membrane_bm::geometry::{build_decomposition, ModelParams};
use nalgebra::{DMatrix, DVector};

fn row(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:+.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn main() -> membrane_bm::Result<()> {
    let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.3, 0.0, 0.3, 1.5]);
    let nu = DVector::from_vec(vec![0.0, 0.6, 0.8]);
    let alpha = DVector::from_vec(vec![0.5, 0.4, -0.3]);
    let params = ModelParams::new(b, nu, 0.25, alpha)?;
    let dec = build_decomposition(&params)?;

    println!("sigma^2 = (B nu, nu) = {:.6}", dec.sigma2());
    println!("conormal N = B nu  = {}", row(dec.conormal()));
    println!("b = N - sigma^2 nu = {}", row(dec.b()));
    println!("basis of S (columns):{:.6}", dec.basis());
    println!("lateral covariance B_S:{:.6}", dec.lateral_cov());
    println!("lateral drift per unit of y_nu - x_nu: {}", row(dec.lateral_drift()));

    let x = DVector::from_vec(vec![0.3, -0.2, 0.7]);
    let x_nu = x.dot(dec.nu());
    let s = dec.lateral_coords(&x);
    let back = dec.from_coords(x_nu, &s);
    println!("x = {} -> (x_nu = {x_nu:+.6}, s = {}) -> {}", row(&x), row(&s), row(&back));
    Ok(())
}
