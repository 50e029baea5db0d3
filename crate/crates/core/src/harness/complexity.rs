use super::pricing::{PricingSetup, SpdeTrancheSampler, COST_STUDY_WARMUP};
use crate::error::{Error, Result};
use crate::mlmc::{
    complexity_regime, level_diagnostics, run_mlmc, Complexity, FittedRates, MlmcConfig,
};
use crate::particles::{sde_timestep_mlmc, BasketSampler, BasketSpec};
use crate::regression::{fit_line, LinearFit};

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCompareConfig {
    /// Pricing setup; only its first tranche is used.
    pub setup: PricingSetup,
    pub spde_epsilon: f64,
    pub mlmc: MlmcConfig,
    pub n_firms: usize,
    pub baskets: u64,
    pub seed: u64,
}

impl Default for ParticleCompareConfig {
    fn default() -> Self {
        Self {
            setup: PricingSetup::discrete(),
            spde_epsilon: 2e-3,
            mlmc: MlmcConfig::default(),
            n_firms: 100_000,
            baskets: 2000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleComparison {
    pub spde_value: f64,
    pub spde_std_err: f64,
    pub spde_cost: f64,
    pub particle_value: f64,
    pub particle_std_err: f64,
    /// Difference over the combined standard error.
    pub z_score: f64,
    /// `|z| <= 3`.
    pub agree: bool,
}

/// First-tranche protection leg from SPDE-MLMC against a finite basket.
///
/// With payment-date monitoring the basket steps exactly on the date grid, so
/// its only errors are statistical and the finite size of the basket. The
/// SPDE estimate carries its bias budget `eps / sqrt 2` as well.
pub fn particle_compare(cfg: &ParticleCompareConfig) -> Result<ParticleComparison> {
    let setup = cfg.setup.clone().first_tranche_only();
    let spde = SpdeTrancheSampler::new(setup.clone())?;
    let mlmc = MlmcConfig {
        experiment_seed: cfg.seed,
        ..cfg.mlmc.clone()
    };
    let res = run_mlmc(&spde, cfg.spde_epsilon, &mlmc)?;
    let spde_std_err = (res.variance + 0.5 * cfg.spde_epsilon.powi(2)).sqrt();

    let basket = BasketSampler {
        spec: BasketSpec::new(cfg.n_firms, setup.x0, setup.params)?,
        schedule: setup.schedule.clone(),
        tranche: setup.tranches[0],
        k0: setup.schedule.delta(),
        continuous: !setup.discrete,
    };
    // independent stream family from the SPDE run
    let stats = level_diagnostics(&basket, 0, &[cfg.baskets], cfg.seed ^ 0x00ba_5ce7)?;
    let particle_value = stats[0].fine_mean();
    let particle_std_err = (stats[0].fine_variance() / cfg.baskets as f64).sqrt();

    let combined = (spde_std_err.powi(2) + particle_std_err.powi(2)).sqrt();
    let z_score = (res.estimate() - particle_value) / combined;
    Ok(ParticleComparison {
        spde_value: res.estimate(),
        spde_std_err,
        spde_cost: res.total_cost,
        particle_value,
        particle_std_err,
        z_score,
        agree: z_score.abs() <= 3.0,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityConfig {
    pub setup: PricingSetup,
    pub mlmc: MlmcConfig,
    pub spde_epsilons: Vec<f64>,
    pub sde_epsilons: Vec<f64>,
    /// Basket size of the fixed-size SDE study.
    pub fixed_firms: usize,
    /// Basket size `ceil(c / eps)` of the growing-basket study.
    pub firms_per_inverse_eps: f64,
    pub seed: u64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self {
            setup: PricingSetup::continuous().first_tranche_only(),
            mlmc: MlmcConfig {
                warmup: COST_STUDY_WARMUP,
                ..MlmcConfig::default()
            },
            spde_epsilons: vec![5e-3, 2e-3, 1e-3, 5e-4],
            sde_epsilons: vec![1e-2, 5e-3, 2e-3, 1e-3],
            fixed_firms: 200,
            firms_per_inverse_eps: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostPoint {
    pub epsilon: f64,
    /// Basket size, for the particle runs.
    pub n_firms: Option<usize>,
    pub estimate: f64,
    pub finest_level: u32,
    pub cost: f64,
    /// Plain Monte Carlo on the finest level, for the SPDE runs.
    pub standard_cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostStudy {
    pub points: Vec<CostPoint>,
    /// `ln cost` against `ln eps`.
    pub fit: LinearFit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityReport {
    pub spde: CostStudy,
    pub sde_fixed: CostStudy,
    /// Cost of the growing basket.
    pub sde_scaled: CostStudy,
    /// Rates fitted on the finest SPDE run, and the regime they imply.
    pub spde_rates: Option<FittedRates>,
    pub spde_regime: Option<Complexity>,
}

fn cost_study(points: Vec<CostPoint>) -> Result<CostStudy> {
    let xs: Vec<f64> = points.iter().map(|p| p.epsilon.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.cost.ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(CostStudy { points, fit })
}

fn basket_for(cfg: &ComplexityConfig, n_firms: usize) -> Result<BasketSampler> {
    let s = &cfg.setup;
    Ok(BasketSampler {
        spec: BasketSpec::new(n_firms, s.x0, s.params)?,
        schedule: s.schedule.clone(),
        tranche: s.tranches[0],
        k0: s.schedule.delta(),
        continuous: false,
    })
}

/// Cost against accuracy for SPDE-MLMC and for SDE-timestep MLMC on a basket
/// of fixed size and on one growing like `1 / eps`.
///
/// The SDE runs monitor default on the payment dates, where stepping on the
/// date grid is exact; their cost is counted in firm-steps.
pub fn mlmc_complexity(cfg: &ComplexityConfig) -> Result<ComplexityReport> {
    if cfg.spde_epsilons.len() < 3 || cfg.sde_epsilons.len() < 3 {
        return Err(Error::Config(
            "cost slopes need at least three tolerances".into(),
        ));
    }
    if !(cfg.firms_per_inverse_eps > 0.0) {
        return Err(Error::Config(
            "basket growth constant must be positive".into(),
        ));
    }
    let mlmc = MlmcConfig {
        experiment_seed: cfg.seed,
        ..cfg.mlmc.clone()
    };
    let spde = SpdeTrancheSampler::new(cfg.setup.clone().first_tranche_only())?;
    let mut spde_points = Vec::new();
    let mut spde_rates = None;
    for &eps in &cfg.spde_epsilons {
        let res = run_mlmc(&spde, eps, &mlmc)?;
        let top = res.finest_level();
        spde_points.push(CostPoint {
            epsilon: eps,
            n_firms: None,
            estimate: res.estimate(),
            finest_level: top,
            cost: res.total_cost,
            standard_cost: Some(res.standard_mc_cost(spde.solve_cost(top))),
        });
        spde_rates = res.rates.or(spde_rates);
    }
    let spde_regime =
        spde_rates.and_then(|r| complexity_regime(r.alpha(), r.beta(), r.gamma()).ok());

    let fixed = basket_for(cfg, cfg.fixed_firms)?;
    let mut fixed_points = Vec::new();
    let mut scaled_points = Vec::new();
    for &eps in &cfg.sde_epsilons {
        let res = sde_timestep_mlmc(&fixed, eps, &mlmc)?;
        fixed_points.push(CostPoint {
            epsilon: eps,
            n_firms: Some(cfg.fixed_firms),
            estimate: res.estimate(),
            finest_level: res.finest_level(),
            cost: res.total_cost,
            standard_cost: None,
        });
        let n = (cfg.firms_per_inverse_eps / eps).ceil() as usize;
        let res = sde_timestep_mlmc(&basket_for(cfg, n)?, eps, &mlmc)?;
        scaled_points.push(CostPoint {
            epsilon: eps,
            n_firms: Some(n),
            estimate: res.estimate(),
            finest_level: res.finest_level(),
            cost: res.total_cost,
            standard_cost: None,
        });
    }
    Ok(ComplexityReport {
        spde: cost_study(spde_points)?,
        sde_fixed: cost_study(fixed_points)?,
        sde_scaled: cost_study(scaled_points)?,
        spde_rates,
        spde_regime,
    })
}
