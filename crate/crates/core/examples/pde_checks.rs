//! Finite-difference checks of the heat equation off S and of the two
//! gluing conditions on S, for one correlated model.

use membrane_bm::geometry::{build_decomposition, ModelParams};
use membrane_bm::verify::pde::{check_continuity, check_flux, check_heat_equation, default_bump};
use nalgebra::{DMatrix, DVector};

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    parts.join(" ")
}

fn main() -> membrane_bm::Result<()> {
    let params = ModelParams::with_standard_normal(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), 0.5, DVector::from_vec(vec![0.8, 0.0]))?;
    let dec = build_decomposition(&params)?;
    let t = 0.25;

    let heat = check_heat_equation(t, &DVector::from_vec(vec![0.0, 0.5]), &params, &dec)?;
    println!("heat residuals [{}], observed order {:.3}", sci(&heat.residuals), heat.order);

    let on_s = DVector::zeros(2);
    let phi = default_bump(&dec);
    let cont = check_continuity(t, &on_s, &params, &dec, &phi)?;
    println!("continuity jumps [{}], extrapolated {:.3e}", sci(&cont.jumps), cont.extrapolated);
    let flux = check_flux(t, &on_s, &params, &dec, &phi)?;
    println!(
        "flux residuals [{}], extrapolated {:.3e} (conormal derivatives {:.6} above, {:.6} below)",
        sci(&flux.residuals), flux.extrapolated, flux.conormal_plus, flux.conormal_minus
    );
    Ok(())
}
