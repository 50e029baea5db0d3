use crate::credit::{
    protection_leg, standard_tranches, tranche_notional, tranche_spread, PaymentSchedule,
    TrancheSpec,
};
use crate::error::{Error, Result};
use crate::fdcore::{
    solve_path, GridSpec, InitialCondition, ModelParams, Monitoring, Scheme, SolveOptions,
};
use crate::mlmc::{
    fit_rates, level_diagnostics, run_mlmc, FittedRates, LevelSample, LevelStats, MlmcConfig,
    MlmcSampler,
};
use crate::paths::{coarsen_path, generate_fine_path, BrownianPath, SeedSpec};

use super::ensure_stable;

/// Market, grid hierarchy and contract terms of a pricing run.
#[derive(Clone, Debug, PartialEq)]
pub struct PricingSetup {
    pub params: ModelParams,
    pub x0: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub h0: f64,
    pub k0: f64,
    pub schedule: PaymentSchedule,
    pub tranches: Vec<TrancheSpec>,
    /// Default checked only on payment dates instead of continuously.
    pub discrete: bool,
    pub scheme: Scheme,
}

pub const DEFAULT_RECOVERY: f64 = 0.4;

/// Warm-up samples per level in the accuracy sweeps. At loose tolerances the
/// warm-up on the finest level otherwise dominates the total cost.
pub const COST_STUDY_WARMUP: u64 = 20;

impl PricingSetup {
    /// Absorption at `x = 0` on `[0, 16]` with `h0 = 8/5`, `k0 = 1/4`, all six tranches.
    pub fn continuous() -> Self {
        Self {
            params: ModelParams::reference(),
            x0: 5.0,
            x_min: 0.0,
            x_max: 16.0,
            h0: 1.6,
            k0: 0.25,
            schedule: PaymentSchedule::regular(5.0, 0.25, 0.042).expect("valid schedule"),
            tranches: standard_tranches(DEFAULT_RECOVERY).expect("valid tranches"),
            discrete: false,
            scheme: Scheme::Tridiagonal,
        }
    }

    /// Default monitored quarterly on `[-4, 16]` with `h0 = 2`.
    pub fn discrete() -> Self {
        Self {
            x_min: -4.0,
            h0: 2.0,
            discrete: true,
            ..Self::continuous()
        }
    }

    /// Same setup restricted to the first tranche.
    pub fn first_tranche_only(mut self) -> Self {
        self.tranches.truncate(1);
        self
    }
}

/// Vector payoff of the SPDE loss model: for each tranche the protection leg
/// over the tranche width, then the width-normalised outstanding notionals
/// at `T_0 = 0, T_1, ..., T_n` of each tranche.
#[derive(Clone, Debug)]
pub struct SpdeTrancheSampler {
    setup: PricingSetup,
    base: GridSpec,
    base_work: f64,
}

impl SpdeTrancheSampler {
    pub fn new(setup: PricingSetup) -> Result<Self> {
        if setup.tranches.is_empty() {
            return Err(Error::Config("no tranches to price".into()));
        }
        let base = GridSpec::new(setup.x_min, setup.x_max, setup.h0, setup.k0)?;
        ensure_stable(&setup.params, &base)?;
        if setup.discrete && base.zero_node().is_none() {
            return Err(Error::Config(
                "discrete monitoring needs a node at x = 0".into(),
            ));
        }
        let base_work = (base.steps_to(setup.schedule.maturity())? * base.intervals()) as f64;
        Ok(Self {
            setup,
            base,
            base_work,
        })
    }

    pub fn setup(&self) -> &PricingSetup {
        &self.setup
    }

    pub fn base_grid(&self) -> &GridSpec {
        &self.base
    }

    pub fn protection_index(&self, tranche: usize) -> usize {
        tranche
    }

    pub fn notional_index(&self, tranche: usize, date: usize) -> usize {
        self.setup.tranches.len() + tranche * (self.setup.schedule.dates().len() + 1) + date
    }

    /// Cost of one solve on `level`, in units of a level-0 solve.
    pub fn solve_cost(&self, level: u32) -> f64 {
        let g = self.base.level(level as usize);
        let steps = self
            .base
            .steps_to(self.setup.schedule.maturity())
            .unwrap_or(0)
            << (2 * level);
        (steps * g.intervals()) as f64 / self.base_work
    }

    fn payoff(&self, grid: &GridSpec, path: &BrownianPath) -> Result<Vec<f64>> {
        let s = &self.setup;
        let dates = s.schedule.dates();
        let opts = SolveOptions {
            scheme: s.scheme,
            monitoring: if s.discrete {
                Monitoring::Dates(dates.to_vec())
            } else {
                Monitoring::Continuous
            },
            observation_times: dates.to_vec(),
            record_all: false,
        };
        let sol = solve_path(
            grid,
            &s.params,
            &InitialCondition::PointMass { x0: s.x0 },
            path,
            &opts,
        )?;
        let masses: Vec<f64> = sol.observations.iter().map(|o| o.mass(grid)).collect();
        let mut out = vec![0.0; self.dim()];
        for (t, tr) in s.tranches.iter().enumerate() {
            let mut losses = vec![0.0];
            losses.extend(
                masses
                    .iter()
                    .map(|m| ((1.0 - tr.recovery) * (1.0 - m)).clamp(0.0, 1.0 - tr.recovery)),
            );
            out[self.protection_index(t)] = protection_leg(&losses, &s.schedule, tr)? / tr.width();
            for (i, l) in losses.iter().enumerate() {
                out[self.notional_index(t, i)] = tranche_notional(*l, tr)? / tr.width();
            }
        }
        Ok(out)
    }
}

impl MlmcSampler for SpdeTrancheSampler {
    fn dim(&self) -> usize {
        self.setup.tranches.len() * (self.setup.schedule.dates().len() + 2)
    }

    fn sample(&self, level: u32, seed: SeedSpec) -> Result<LevelSample> {
        let fine_grid = self.base.level(level as usize);
        let n = fine_grid.steps_to(self.setup.schedule.maturity())?;
        let path = generate_fine_path(seed, n, fine_grid.k())?;
        let fine = self.payoff(&fine_grid, &path)?;
        if level == 0 {
            return Ok(LevelSample {
                fine,
                coarse: Vec::new(),
                cost: self.solve_cost(0),
            });
        }
        let coarse_grid = self.base.level(level as usize - 1);
        let coarse = self.payoff(&coarse_grid, &coarsen_path(&path, 4)?)?;
        Ok(LevelSample {
            fine,
            coarse,
            cost: self.solve_cost(level) + self.solve_cost(level - 1),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PricingConfig {
    pub setup: PricingSetup,
    pub epsilons: Vec<f64>,
    pub mlmc: MlmcConfig,
    /// Fixed sample counts for the level-by-level rate study, levels `0..`.
    pub diagnostic_samples: Vec<u64>,
}

impl PricingConfig {
    pub fn new(setup: PricingSetup) -> Self {
        Self {
            setup,
            epsilons: vec![5e-3, 2e-3, 1e-3, 5e-4],
            mlmc: MlmcConfig {
                warmup: COST_STUDY_WARMUP,
                ..MlmcConfig::default()
            },
            diagnostic_samples: vec![20000, 10000, 4000, 2000, 1000],
        }
    }
}

/// One adaptive run at a fixed accuracy.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonRun {
    pub epsilon: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub finest_level: u32,
    pub samples: Vec<u64>,
    pub mlmc_cost: f64,
    /// Plain Monte Carlo on the finest level at the same accuracy, with the
    /// payoff variance taken from the level study when it has one.
    pub standard_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrancheQuote {
    pub tranche: TrancheSpec,
    /// Protection leg over the tranche width.
    pub protection: f64,
    /// Annualised spread, as a fraction.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PricingReport {
    pub diagnostics: Vec<LevelStats>,
    pub rates: Option<FittedRates>,
    pub runs: Vec<EpsilonRun>,
    /// Quotes from the run with the smallest tolerance.
    pub quotes: Vec<TrancheQuote>,
}

/// Level study plus one adaptive run per tolerance. Allocation is driven by
/// the first tranche's protection leg.
pub fn price_tranches(cfg: &PricingConfig) -> Result<PricingReport> {
    let sampler = SpdeTrancheSampler::new(cfg.setup.clone())?;
    let diagnostics = if cfg.diagnostic_samples.is_empty() {
        Vec::new()
    } else {
        level_diagnostics(
            &sampler,
            cfg.diagnostic_samples.len() as u32 - 1,
            &cfg.diagnostic_samples,
            cfg.mlmc.experiment_seed,
        )?
    };
    let rates = if diagnostics.len() >= 3 {
        Some(fit_rates(&diagnostics)?)
    } else {
        None
    };
    let mut runs = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for &eps in &cfg.epsilons {
        let res = run_mlmc(&sampler, eps, &cfg.mlmc)?;
        let top = res.finest_level();
        runs.push(EpsilonRun {
            epsilon: eps,
            estimate: res.estimate(),
            std_err: res.variance.sqrt(),
            finest_level: top,
            samples: res.levels.iter().map(|s| s.n_samples).collect(),
            mlmc_cost: res.total_cost,
            standard_cost: match diagnostics.get((top as usize).min(diagnostics.len().max(1) - 1)) {
                Some(d) => 2.0 * d.fine_variance() * sampler.solve_cost(top) / (eps * eps),
                None => res.standard_mc_cost(sampler.solve_cost(top)),
            },
        });
        if best.as_ref().is_none_or(|(e, _)| eps < *e) {
            best = Some((eps, res.estimates.clone()));
        }
    }
    let quotes = match best {
        None => Vec::new(),
        Some((_, est)) => cfg
            .setup
            .tranches
            .iter()
            .enumerate()
            .map(|(t, tr)| {
                let notionals: Vec<f64> = (0..=cfg.setup.schedule.dates().len())
                    .map(|i| est[sampler.notional_index(t, i)])
                    .collect();
                Ok(TrancheQuote {
                    tranche: *tr,
                    protection: est[sampler.protection_index(t)],
                    spread: tranche_spread(&notionals, &cfg.setup.schedule)?,
                })
            })
            .collect::<Result<_>>()?,
    };
    Ok(PricingReport {
        diagnostics,
        rates,
        runs,
        quotes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlmc::extend_level;

    #[test]
    fn layout_and_costs() {
        let s = SpdeTrancheSampler::new(PricingSetup::continuous()).unwrap();
        assert_eq!(s.dim(), 6 * 22);
        assert_eq!(s.notional_index(0, 0), 6);
        assert_eq!(s.notional_index(5, 20), 6 + 5 * 21 + 20);
        assert_eq!(s.solve_cost(0), 1.0);
        assert_eq!(s.solve_cost(3), 512.0);
        let x = s.sample(2, SeedSpec::new(0, 2, 0)).unwrap();
        assert_eq!(x.cost, 64.0 + 8.0);
    }

    #[test]
    fn notionals_start_at_one_and_partition_sums() {
        let s = SpdeTrancheSampler::new(PricingSetup::continuous()).unwrap();
        let tr = s.setup().tranches.clone();
        for i in 0..5 {
            let x = s.sample(1, SeedSpec::new(3, 1, i)).unwrap();
            for t in 0..tr.len() {
                assert_eq!(x.fine[s.notional_index(t, 0)], 1.0);
            }
            for date in 0..=20 {
                let total: f64 = tr
                    .iter()
                    .enumerate()
                    .map(|(t, spec)| x.fine[s.notional_index(t, date)] * spec.width())
                    .sum();
                // losses never exceed 1 - R, so the partition leaves 1 - L
                let l = 1.0 - total;
                assert!((0.0..=0.6 + 1e-12).contains(&l));
            }
        }
    }

    #[test]
    fn discrete_setup_needs_origin_node() {
        let mut setup = PricingSetup::discrete();
        setup.x_min = -3.0;
        setup.h0 = 1.9;
        assert!(SpdeTrancheSampler::new(setup).is_err());
        assert!(SpdeTrancheSampler::new(PricingSetup::discrete()).is_ok());
    }

    #[test]
    fn protection_leg_from_notionals() {
        let setup = PricingSetup::continuous();
        let s = SpdeTrancheSampler::new(setup.clone()).unwrap();
        let mut st = LevelStats::new(0, s.dim());
        extend_level(&s, &mut st, 1, 50).unwrap();
        for t in 0..6 {
            let recon: f64 = setup
                .schedule
                .discount_factors()
                .enumerate()
                .map(|(i, df)| {
                    df * (st.mean_of(s.notional_index(t, i))
                        - st.mean_of(s.notional_index(t, i + 1)))
                })
                .sum();
            assert!((recon - st.mean_of(s.protection_index(t))).abs() < 1e-12);
        }
    }
}
