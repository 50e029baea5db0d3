//! Sine vectors as eigenvectors of the mean-square operator, and its spectrum.

use spde_mlmc::fdcore::ModelParams;
use spde_mlmc::stability::{
    build_stability_matrices, ms_amplification, verify_matrix_eigenstructure,
};

fn main() -> spde_mlmc::Result<()> {
    let p = ModelParams::reference();
    let (h, k) = (1.6, 0.25);
    for j in [6, 16, 64] {
        let dev = verify_matrix_eigenstructure(j, &p, h, k)?;
        println!("J = {j:>2}: max |M w - S w| / |w| = {dev:.3e}");
    }
    let j = 6;
    let m = build_stability_matrices(j, &p, h, k)?.m;
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let mut s: Vec<f64> = (1..j)
        .map(|i| ms_amplification(i as f64 * std::f64::consts::PI / j as f64, &p, h, k))
        .collect();
    s.sort_by(f64::total_cmp);
    println!("eigenvalues of M (J = {j}): {eig:.10?}");
    println!("S(m pi / J):               {s:.10?}");
    Ok(())
}
