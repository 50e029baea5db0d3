//! First-tranche pricing with default checked only on payment dates.

use spde_mlmc::harness::{price_tranches, PricingConfig, PricingSetup};

fn main() -> spde_mlmc::Result<()> {
    for setup in [PricingSetup::continuous(), PricingSetup::discrete()] {
        let label = if setup.discrete {
            "payment dates"
        } else {
            "continuous"
        };
        let cfg = PricingConfig {
            epsilons: vec![2e-3],
            ..PricingConfig::new(setup.first_tranche_only())
        };
        let r = price_tranches(&cfg)?;
        let beta = r.rates.as_ref().map_or(f64::NAN, |x| x.beta());
        let q = &r.quotes[0];
        println!(
            "{label}: beta {beta:.2}, protection {:.5}, spread {:.1} bp",
            q.protection,
            q.spread * 1e4
        );
    }
    Ok(())
}
