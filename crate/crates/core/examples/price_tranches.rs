//! Spreads for the standard tranche structure with continuous default monitoring.

use spde_mlmc::harness::{price_tranches, PricingConfig, PricingSetup};

fn main() -> spde_mlmc::Result<()> {
    let cfg = PricingConfig {
        epsilons: vec![2e-3],
        ..PricingConfig::new(PricingSetup::continuous())
    };
    let r = price_tranches(&cfg)?;
    if let Some(rates) = &r.rates {
        println!(
            "alpha {:.2}, beta {:.2}, gamma {:.2}",
            rates.alpha(),
            rates.beta(),
            rates.gamma()
        );
    }
    for run in &r.runs {
        println!(
            "eps {}: levels 0..={}, samples {:?}, cost {:.3e}",
            run.epsilon, run.finest_level, run.samples, run.mlmc_cost
        );
    }
    for q in &r.quotes {
        println!(
            "[{:.2}, {:.2}]: protection {:.5}, spread {:.1} bp",
            q.tranche.attachment,
            q.tranche.detachment,
            q.protection,
            q.spread * 1e4
        );
    }
    Ok(())
}
