//! Simulates paths of a 3-d process on a time grid and summarizes the local
//! time and the drift it induces along S.

use membrane_bm::geometry::{build_decomposition, ModelParams};
use membrane_bm::sampler::{sample_paths, RngState};
use nalgebra::{DMatrix, DVector};

fn main() -> membrane_bm::Result<()> {
    let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.3, 0.0, 0.3, 1.5]);
    let alpha = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let params = ModelParams::with_standard_normal(b, -0.3, alpha)?;
    let dec = build_decomposition(&params)?;
    let grid: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
    let x0 = DVector::from_vec(vec![0.0, 0.0, 0.2]);

    let paths = sample_paths(20_000, &x0, &grid, &params, &dec, RngState::new(11, 0))?;
    for k in [5, 10, 20] {
        let n = paths.len() as f64;
        let eta: f64 = paths.iter().map(|p| p.local_time[k]).sum::<f64>() / n;
        let x1: f64 = paths.iter().map(|p| p.states[k][0]).sum::<f64>() / n;
        let below = paths.iter().filter(|p| p.states[k][2] < 0.0).count() as f64 / n;
        println!("t = {:.2}: E[eta] = {eta:.4}, E[x_1] = {x1:.4}, P(x_3 < 0) = {below:.4}", grid[k]);
    }
    let p = &paths[0];
    println!("first path:");
    for k in (0..grid.len()).step_by(4) {
        let x: Vec<String> = p.states[k].iter().map(|v| format!("{v:+.4}")).collect();
        println!("  t = {:.2}  x = ({})  eta = {:.4}", p.times[k], x.join(", "), p.local_time[k]);
    }
    Ok(())
}
