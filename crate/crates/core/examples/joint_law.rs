//! Joint density of the endpoint and the local time: the atom at theta = 0
//! plus the continuous part integrate back to the skew density.

use membrane_bm::density::{joint_density, skew_density};
use membrane_bm::geometry::{build_decomposition, ModelParams};
use membrane_bm::quadrature::{integrate_doubling, QuadratureSpec};
use nalgebra::{DMatrix, DVector};

fn main() -> membrane_bm::Result<()> {
    let q = -0.4;
    let params = ModelParams::with_standard_normal(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), q, DVector::zeros(2))?;
    let dec = build_decomposition(&params)?;
    let quad = QuadratureSpec::default();
    let t = 0.7;
    let x = DVector::from_vec(vec![0.1, 0.3]);

    for y in [[0.2, 0.6], [0.2, -0.4], [-0.5, 0.05]] {
        let y = DVector::from_vec(y.to_vec());
        let atom = joint_density(t, &x, &y, 0.0, &dec, q)?.atom;
        let upper = quad.tail_sigmas * t.sqrt() / dec.sigma();
        let cont = integrate_doubling(|th| joint_density(t, &x, &y, th, &dec, q).map(|v| v.continuous).unwrap_or(f64::NAN), 0.0, upper, &quad)?;
        let g = skew_density(t, &x, &y, &dec, q)?;
        println!(
            "y = ({:+.2}, {:+.2}): atom {:.10} + continuous {:.10} = {:.12}, skew density {:.12}",
            y[0],
            y[1],
            atom,
            cont.value,
            atom + cont.value,
            g
        );
    }
    Ok(())
}
