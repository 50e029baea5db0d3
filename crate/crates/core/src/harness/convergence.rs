use rayon::prelude::*;

use super::{ensure_stable, mean_se, path_hierarchy};
use crate::error::{Error, Result};
use crate::fdcore::{
    exact_density, solve_path, GridSpec, InitialCondition, ModelParams, Scheme, SolveOptions,
    SolverState,
};
use crate::paths::SeedSpec;
use crate::regression::{fit_log2, LinearFit};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceConfig {
    pub params: ModelParams,
    pub x0: f64,
    pub maturity: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub h0: f64,
    pub k0: f64,
    pub max_level: usize,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl ConvergenceConfig {
    /// `[-16/3, 16]`, `h0 = 4/3`, `k0 = 1/4`, levels 0 to 4, 100 paths.
    pub fn unbounded() -> Self {
        Self {
            params: ModelParams::reference(),
            x0: 5.0,
            maturity: 5.0,
            x_min: -16.0 / 3.0,
            x_max: 16.0,
            h0: 4.0 / 3.0,
            k0: 0.25,
            max_level: 4,
            paths: 100,
            seed: 0,
            scheme: Scheme::Tridiagonal,
        }
    }

    /// As [`ConvergenceConfig::unbounded`] on `[0, 16]`.
    pub fn bounded() -> Self {
        Self {
            x_min: 0.0,
            ..Self::unbounded()
        }
    }

    pub fn base_grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.x_min, self.x_max, self.h0, self.k0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub k: f64,
    /// Sample mean of the per-path error measure.
    pub value: f64,
    pub std_err: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `log2 value` against level over the levels `>= 1`.
    pub fit: LinearFit,
}

impl ConvergenceReport {
    pub(crate) fn from_samples(
        grid: &GridSpec,
        levels: &[usize],
        per_path: &[Vec<f64>],
    ) -> Result<Self> {
        let rows: Vec<ConvergenceRow> = levels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let col: Vec<f64> = per_path.iter().map(|p| p[i]).collect();
                let (value, std_err) = mean_se(&col);
                let g = grid.level(l);
                ConvergenceRow {
                    level: l,
                    h: g.h(),
                    k: g.k(),
                    value,
                    std_err,
                    samples: col.len(),
                }
            })
            .collect();
        let fitted: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.level >= 1).collect();
        let fit = fit_log2(
            &fitted.iter().map(|r| r.level as f64).collect::<Vec<_>>(),
            &fitted.iter().map(|r| r.value).collect::<Vec<_>>(),
        )?;
        Ok(Self { rows, fit })
    }
}

fn check_config(cfg: &ConvergenceConfig, base: &GridSpec) -> Result<()> {
    if cfg.paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    for l in 0..=cfg.max_level {
        ensure_stable(&cfg.params, &base.level(l))?;
    }
    Ok(())
}

/// Terminal states on every level for one sample.
fn terminal_states(
    cfg: &ConvergenceConfig,
    base: &GridSpec,
    m: usize,
) -> Result<(Vec<SolverState>, f64)> {
    let seed = SeedSpec::new(cfg.seed, cfg.max_level as u32, m as u64);
    let paths = path_hierarchy(seed, base, cfg.max_level, cfg.maturity)?;
    let ic = InitialCondition::PointMass { x0: cfg.x0 };
    let opts = SolveOptions {
        scheme: cfg.scheme,
        ..Default::default()
    };
    let states = paths
        .iter()
        .enumerate()
        .map(|(l, p)| Ok(solve_path(&base.level(l), &cfg.params, &ic, p, &opts)?.terminal))
        .collect::<Result<Vec<_>>>()?;
    Ok((states, paths[0].endpoint()))
}

/// Mean-square `L2` distance to the exact Gaussian solution on each level.
///
/// Every level of a sample is driven by sums of the same fine increments, so
/// all levels compare against one exact solution.
pub fn converge_unbounded(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    let base = cfg.base_grid()?;
    check_config(cfg, &base)?;
    let per_path: Vec<Vec<f64>> = (0..cfg.paths)
        .into_par_iter()
        .map(|m| {
            let (states, m_t) = terminal_states(cfg, &base, m)?;
            states
                .iter()
                .enumerate()
                .map(|(l, s)| {
                    let g = base.level(l);
                    let mut acc = 0.0;
                    for j in 0..=g.intervals() {
                        let exact =
                            exact_density(g.node(j), cfg.maturity, m_t, cfg.x0, &cfg.params)?;
                        acc += (s.node_value(j) - exact).powi(2) * g.h();
                    }
                    Ok(acc)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let levels: Vec<usize> = (0..=cfg.max_level).collect();
    ConvergenceReport::from_samples(&base, &levels, &per_path)
}

/// Mean-square difference between consecutive levels on coinciding nodes,
/// `sum_j (f_2j - c_j)^2 h` with `h` the fine spacing; rows for levels `1..`.
pub fn converge_bounded(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    let base = cfg.base_grid()?;
    check_config(cfg, &base)?;
    if cfg.max_level < 1 {
        return Err(Error::Config(
            "fine/coarse differences need max_level >= 1".into(),
        ));
    }
    let per_path: Vec<Vec<f64>> = (0..cfg.paths)
        .into_par_iter()
        .map(|m| {
            let (states, _) = terminal_states(cfg, &base, m)?;
            Ok((1..=cfg.max_level)
                .map(|l| {
                    let coarse = base.level(l - 1);
                    let h = base.level(l).h();
                    (0..=coarse.intervals())
                        .map(|j| {
                            (states[l].node_value(2 * j) - states[l - 1].node_value(j)).powi(2) * h
                        })
                        .sum()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let levels: Vec<usize> = (1..=cfg.max_level).collect();
    ConvergenceReport::from_samples(&base, &levels, &per_path)
}
