use rayon::prelude::*;

use super::{ensure_stable, mean_se, path_hierarchy, sample_variance};
use crate::error::{Error, Result};
use crate::fdcore::{solve_path, GridSpec, InitialCondition, ModelParams, SolveOptions};
use crate::paths::SeedSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityConfig {
    pub params: ModelParams,
    pub x0: f64,
    pub maturity: f64,
    pub x_max: f64,
    pub h0: f64,
    pub k0: f64,
    pub max_level: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for RegularityConfig {
    /// The pricing hierarchy on `[0, 16]`: `h0 = 8/5`, `k0 = 1/4`.
    fn default() -> Self {
        Self {
            params: ModelParams::reference(),
            x0: 5.0,
            maturity: 5.0,
            x_max: 16.0,
            h0: 1.6,
            k0: 0.25,
            max_level: 4,
            paths: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityRow {
    pub level: usize,
    pub h: f64,
    /// Mean of `(v_2 - 2 v_1 + v_0) / h^2` at maturity.
    pub mean: f64,
    pub std_err: f64,
    pub variance: f64,
    pub samples: usize,
}

/// Second difference at the absorbing boundary on each level of the hierarchy.
pub fn regularity_diagnostic(cfg: &RegularityConfig) -> Result<Vec<RegularityRow>> {
    if cfg.paths < 2 {
        return Err(Error::Config(
            "variance estimates need at least two paths".into(),
        ));
    }
    let base = GridSpec::new(0.0, cfg.x_max, cfg.h0, cfg.k0)?;
    if base.intervals() < 3 {
        return Err(Error::Config(
            "the boundary stencil needs two interior nodes".into(),
        ));
    }
    for l in 0..=cfg.max_level {
        ensure_stable(&cfg.params, &base.level(l))?;
    }
    let ic = InitialCondition::PointMass { x0: cfg.x0 };
    let per_path: Vec<Vec<f64>> = (0..cfg.paths)
        .into_par_iter()
        .map(|m| {
            let seed = SeedSpec::new(cfg.seed, cfg.max_level as u32, m as u64);
            let paths = path_hierarchy(seed, &base, cfg.max_level, cfg.maturity)?;
            paths
                .iter()
                .enumerate()
                .map(|(l, p)| {
                    let g = base.level(l);
                    let s = solve_path(&g, &cfg.params, &ic, p, &SolveOptions::default())?.terminal;
                    Ok((s.node_value(2) - 2.0 * s.node_value(1)) / (g.h() * g.h()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..=cfg.max_level)
        .map(|l| {
            let col: Vec<f64> = per_path.iter().map(|p| p[l]).collect();
            let (mean, std_err) = mean_se(&col);
            RegularityRow {
                level: l,
                h: base.level(l).h(),
                mean,
                std_err,
                variance: sample_variance(&col),
                samples: col.len(),
            }
        })
        .collect())
}
