//! Draws exact one-step samples and checks a few of their laws.

use membrane_bm::geometry::{build_decomposition, ModelParams};
use membrane_bm::sampler::{hit_probability, sample_joint_batch, RngState};
use membrane_bm::stats::{binomial_z, ks_one_sample, mean_z, normal_cdf};
use nalgebra::{DMatrix, DVector};

fn main() -> membrane_bm::Result<()> {
    let n = 200_000;

    // from a start on S with q = 0 the local time at t = 1 is half-normal
    let params = ModelParams::with_standard_normal(DMatrix::identity(2, 2), 0.0, DVector::zeros(2))?;
    let dec = build_decomposition(&params)?;
    let draws = sample_joint_batch(n, 1.0, &DVector::zeros(2), &params, &dec, RngState::new(1, 0))?;
    let theta: Vec<f64> = draws.iter().map(|d| d.theta).collect();
    let (mean, se, z) = mean_z(&theta, (2.0 / std::f64::consts::PI).sqrt());
    let ks = ks_one_sample(&theta, |v| (2.0 * normal_cdf(v) - 1.0).max(0.0));
    println!("E[eta] = {mean:.5} +- {se:.5} (z = {z:+.2}), KS p = {:.3}", ks.p_value);

    // off S: how often the membrane is reached, and on which side the path ends
    let q = 0.6;
    let params = ModelParams::with_standard_normal(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), q, DVector::zeros(2))?;
    let dec = build_decomposition(&params)?;
    let x = DVector::from_vec(vec![0.0, 0.5]);
    let draws = sample_joint_batch(n, 1.0, &x, &params, &dec, RngState::new(1, 1))?;
    let hits: Vec<_> = draws.iter().filter(|d| d.hit).collect();
    let p_hit = hit_probability(1.0, 0.5, &dec)?;
    println!(
        "hit fraction {:.5}, expected {:.5} (z = {:+.2})",
        hits.len() as f64 / n as f64,
        p_hit,
        binomial_z(hits.len(), n, p_hit)
    );
    let up = hits.iter().filter(|d| d.y[1] > 0.0).count();
    println!("after a hit, P(y_nu > 0) = {:.5}, expected (1 + q)/2 = {:.5}", up as f64 / hits.len() as f64, 0.5 * (1.0 + q));
    Ok(())
}
