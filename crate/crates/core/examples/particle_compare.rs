//! SPDE loss model against a finite basket of firms on the same market factor.

use spde_mlmc::harness::{particle_compare, ParticleCompareConfig};

fn main() -> spde_mlmc::Result<()> {
    let n_firms = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);
    let c = particle_compare(&ParticleCompareConfig {
        n_firms,
        baskets: 1000,
        ..Default::default()
    })?;
    println!(
        "SPDE-MLMC        {:.5} +- {:.5}",
        c.spde_value, c.spde_std_err
    );
    println!(
        "{n_firms:>6} firms     {:.5} +- {:.5}",
        c.particle_value, c.particle_std_err
    );
    println!("z = {:.2}, agree = {}", c.z_score, c.agree);
    Ok(())
}
