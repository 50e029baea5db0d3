//! Reproducible experiment drivers and their CSV/summary output.

mod complexity;
mod convergence;
mod fourier;
pub mod output;
mod pricing;
mod regularity;

pub use complexity::{
    mlmc_complexity, particle_compare, ComplexityConfig, ComplexityReport, CostPoint, CostStudy,
    ParticleCompareConfig, ParticleComparison,
};
pub use convergence::{
    converge_bounded, converge_unbounded, ConvergenceConfig, ConvergenceReport, ConvergenceRow,
};
pub use fourier::{fourier_mode_accuracy, FourierConfig};
pub use pricing::{
    price_tranches, EpsilonRun, PricingConfig, PricingReport, PricingSetup, SpdeTrancheSampler,
    TrancheQuote, COST_STUDY_WARMUP, DEFAULT_RECOVERY,
};
pub use regularity::{regularity_diagnostic, RegularityConfig, RegularityRow};

use crate::error::{Error, Result};
use crate::fdcore::{GridSpec, ModelParams};
use crate::paths::{coarsen_path, generate_fine_path, BrownianPath, SeedSpec};
use crate::stability::check_stability;

/// Paths for levels `0..=finest`, the finest drawn from `seed` and every
/// coarser one summed from it.
pub(crate) fn path_hierarchy(
    seed: SeedSpec,
    base: &GridSpec,
    finest: usize,
    maturity: f64,
) -> Result<Vec<BrownianPath>> {
    let fine_grid = base.level(finest);
    let mut path = generate_fine_path(seed, fine_grid.steps_to(maturity)?, fine_grid.k())?;
    let mut out = vec![path.clone()];
    for _ in 0..finest {
        path = coarsen_path(&path, 4)?;
        out.push(path.clone());
    }
    out.reverse();
    Ok(out)
}

pub(crate) fn ensure_stable(params: &ModelParams, grid: &GridSpec) -> Result<()> {
    let c = check_stability(params, grid.h(), grid.k());
    if c.stable {
        Ok(())
    } else {
        Err(Error::Unstable(format!(
            "h = {}, k = {}: drift margin {:.4}, mesh margin {:.4}",
            grid.h(),
            grid.k(),
            c.margin_drift,
            c.margin_mesh
        )))
    }
}

/// Mean and standard error of the mean.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let (mean, _) = mean_se(xs);
    let n = xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}
