//! RMS error of a single Fourier mode under the discrete multiplier.

use spde_mlmc::harness::{fourier_mode_accuracy, FourierConfig};

fn main() -> spde_mlmc::Result<()> {
    for kappa in [0.5, 1.0, 2.0] {
        let r = fourier_mode_accuracy(&FourierConfig {
            kappa,
            ..Default::default()
        })?;
        let errs: Vec<String> = r
            .rows
            .iter()
            .map(|row| format!("{:.3e}", row.value))
            .collect();
        println!(
            "kappa = {kappa}: RMS [{}], slope {:.3}",
            errs.join(", "),
            r.fit.slope
        );
    }
    Ok(())
}
