//! Cost against accuracy for SPDE-MLMC and for timestep MLMC on a firm basket.

use spde_mlmc::harness::{mlmc_complexity, ComplexityConfig, CostStudy};

fn show(label: &str, s: &CostStudy) {
    println!(
        "{label}: slope {:.2} +- {:.2}",
        s.fit.slope, s.fit.half_width
    );
    for p in &s.points {
        let firms = p.n_firms.map_or(String::new(), |n| format!(" N = {n}"));
        println!("  eps {:.0e}{firms}: cost {:.3e}", p.epsilon, p.cost);
    }
}

fn main() -> spde_mlmc::Result<()> {
    let r = mlmc_complexity(&ComplexityConfig {
        spde_epsilons: vec![5e-3, 2e-3, 1e-3],
        sde_epsilons: vec![1e-2, 5e-3, 2e-3],
        ..Default::default()
    })?;
    show("SPDE", &r.spde);
    show("basket, fixed N", &r.sde_fixed);
    show("basket, N ~ 1/eps", &r.sde_scaled);
    if let Some(c) = &r.spde_regime {
        println!(
            "SPDE regime {:?}, cost ~ eps^{:.1}",
            c.regime, c.eps_exponent
        );
    }
    Ok(())
}
