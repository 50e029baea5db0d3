//! Fine/coarse differences with absorption at the origin, for two starting points.

use spde_mlmc::harness::{converge_bounded, ConvergenceConfig};

fn main() -> spde_mlmc::Result<()> {
    for x0 in [5.0, 1.0] {
        let r = converge_bounded(&ConvergenceConfig {
            x0,
            ..ConvergenceConfig::bounded()
        })?;
        println!("x0 = {x0}");
        for row in &r.rows {
            println!(
                "  level {}: e^2 = {:.4e} +- {:.1e}",
                row.level, row.value, row.std_err
            );
        }
        println!(
            "  log2 slope: {:.3} +- {:.3}",
            r.fit.slope, r.fit.half_width
        );
    }
    Ok(())
}
