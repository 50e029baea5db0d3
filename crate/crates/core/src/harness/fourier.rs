use num_complex::Complex64;
use rayon::prelude::*;

use super::convergence::ConvergenceReport;
use super::path_hierarchy;
use crate::error::{Error, Result};
use crate::fdcore::{GridSpec, ModelParams};
use crate::paths::SeedSpec;
use crate::stability::fourier_symbols;

#[derive(Clone, Debug, PartialEq)]
pub struct FourierConfig {
    pub params: ModelParams,
    /// Wavenumber of the mode `exp(i kappa x)`.
    pub kappa: f64,
    pub maturity: f64,
    pub h0: f64,
    pub k0: f64,
    pub max_level: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::reference(),
            kappa: 1.0,
            maturity: 5.0,
            h0: 4.0 / 3.0,
            k0: 0.25,
            max_level: 4,
            paths: 1000,
            seed: 0,
        }
    }
}

/// RMS over paths of `|g_N - g(T)|` for a single Fourier mode, where `g_N`
/// follows the discrete multiplier and `g(T)` the exact factor along the same
/// Brownian path. Rows report the RMS value per level.
pub fn fourier_mode_accuracy(cfg: &FourierConfig) -> Result<ConvergenceReport> {
    if cfg.paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    // the mode lives on the whole line; the grid only carries h and k
    let base = GridSpec::with_intervals(0.0, 2, cfg.h0, cfg.k0)?;
    let p = &cfg.params;
    let per_path: Vec<Vec<f64>> = (0..cfg.paths)
        .into_par_iter()
        .map(|m| {
            let seed = SeedSpec::new(cfg.seed, cfg.max_level as u32, m as u64);
            let paths = path_hierarchy(seed, &base, cfg.max_level, cfg.maturity)?;
            let m_t = paths[0].endpoint();
            let exact = Complex64::new(
                -0.5 * (1.0 - p.rho) * cfg.kappa * cfg.kappa * cfg.maturity,
                -cfg.kappa * (p.mu * cfg.maturity + p.rho.sqrt() * m_t),
            )
            .exp();
            Ok(paths
                .iter()
                .enumerate()
                .map(|(l, path)| {
                    let g = base.level(l);
                    let sym = fourier_symbols(cfg.kappa * g.h(), p, g.h(), g.k());
                    let num = path
                        .z
                        .iter()
                        .fold(Complex64::new(1.0, 0.0), |acc, &z| acc * sym.multiplier(z));
                    (num - exact).norm_sqr()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let levels: Vec<usize> = (0..=cfg.max_level).collect();
    let mut report = ConvergenceReport::from_samples(&base, &levels, &per_path)?;
    // mean-square -> RMS; the slope halves and the error bar follows the delta method
    for row in &mut report.rows {
        let rms = row.value.sqrt();
        row.std_err = if rms > 0.0 {
            row.std_err / (2.0 * rms)
        } else {
            0.0
        };
        row.value = rms;
    }
    report.fit.slope *= 0.5;
    report.fit.intercept *= 0.5;
    report.fit.half_width *= 0.5;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_wavenumber_is_exact() {
        let cfg = FourierConfig {
            kappa: 0.0,
            paths: 4,
            max_level: 2,
            ..Default::default()
        };
        // every error vanishes, so there is nothing to fit
        assert!(fourier_mode_accuracy(&cfg).is_err());
    }

    #[test]
    fn deterministic_mode_converges_at_second_order() {
        let cfg = FourierConfig {
            params: ModelParams::new(0.0, 0.0, 1.0, 0.0).unwrap(),
            paths: 2,
            max_level: 4,
            ..Default::default()
        };
        let r = fourier_mode_accuracy(&cfg).unwrap();
        assert!((r.fit.slope + 2.0).abs() < 0.1, "{:?}", r.fit);
        assert!(r.rows.iter().all(|row| row.std_err < 1e-14));
    }
}
