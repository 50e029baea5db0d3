//! Mean-square amplification across wavenumbers on both sides of the mesh-ratio limit.

use spde_mlmc::fdcore::ModelParams;
use spde_mlmc::stability::{check_stability, sup_amplification};

fn main() {
    let p = ModelParams::reference();
    let h = 1.6;
    let limit = 1.0 / (1.0 + 2.0 * p.rho * p.rho);
    for frac in [0.5, 0.9, 0.999, 1.02, 1.2] {
        let k = frac * limit * h * h;
        let (theta, s) = sup_amplification(&p, h, k, 10_000);
        let c = check_stability(&p, h, k);
        println!(
            "k/h^2 = {:.4} ({frac} x limit): sup S = {s:.6} at theta = {theta:.4}, stable = {}",
            k / (h * h),
            c.stable
        );
    }
}
