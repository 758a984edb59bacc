//! Compares the exact sampler with an independent lattice-walk approximation.

use membrane_bm::geometry::{build_decomposition, ModelParams};
use membrane_bm::sampler::{sample_paths, RngState};
use membrane_bm::stats::ks_two_sample;
use membrane_bm::verify::oracle::{calibrate, oracle_walk, OracleConfig};
use nalgebra::{DMatrix, DVector};

fn main() -> membrane_bm::Result<()> {
    let calibration = calibrate(40_000, RngState::new(5, 0))?;
    println!("calibration constant {calibration:.4}");

    let params = ModelParams::with_standard_normal(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), 0.6, DVector::from_vec(vec![0.8, 0.0]))?;
    let dec = build_decomposition(&params)?;
    let x0 = DVector::from_vec(vec![0.1, 0.25]);
    let n = 10_000;
    let cfg = OracleConfig::for_start(1.0, x0.dot(dec.nu()), dec.sigma(), n, calibration)?;
    println!("lattice step {:.5}, {} steps per path", cfg.dx, cfg.n_steps);

    let walk = oracle_walk(&params, &dec, &cfg, 1.0, &x0, RngState::new(5, 1))?;
    let exact = sample_paths(n, &x0, &[0.0, 1.0], &params, &dec, RngState::new(5, 2))?;
    for (name, k) in [("x_1", 0), ("x_2", 1)] {
        let a: Vec<f64> = walk.iter().map(|s| s.y[k]).collect();
        let b: Vec<f64> = exact.iter().map(|p| p.states[1][k]).collect();
        let ks = ks_two_sample(&a, &b);
        println!("{name}: KS statistic {:.4}, p = {:.3}", ks.statistic, ks.p_value);
    }
    let eta_walk = walk.iter().map(|s| s.eta).sum::<f64>() / n as f64;
    let eta_exact = exact.iter().map(|p| p.local_time[1]).sum::<f64>() / n as f64;
    println!("E[eta]: walk {eta_walk:.4}, exact {eta_exact:.4}");
    Ok(())
}
