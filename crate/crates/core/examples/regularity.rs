//! Second difference of the density at the absorbing boundary across levels.

use spde_mlmc::harness::{regularity_diagnostic, RegularityConfig};

fn main() -> spde_mlmc::Result<()> {
    for row in regularity_diagnostic(&RegularityConfig::default())? {
        println!(
            "level {} h = {:.4}: mean {:.5} +- {:.5}, variance {:.4e}",
            row.level, row.h, row.mean, row.std_err, row.variance
        );
    }
    Ok(())
}
