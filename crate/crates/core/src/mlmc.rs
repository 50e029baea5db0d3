//! Multilevel Monte Carlo driver.
//!
//! A sampler returns, for a level `l` and a sample seed, the vector payoff on
//! level `l` and on level `l - 1` computed from the same Brownian input. The
//! driver estimates `E[P_0] + sum_l E[P_l - P_{l-1}]` for every component and
//! sizes the levels from component 0.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::paths::SeedSpec;
use crate::regression::{fit_log2, LinearFit};

/// Payoffs of one coupled sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSample {
    /// Payoff on the sample's own level.
    pub fine: Vec<f64>,
    /// Payoff on the next coarser level; ignored on level 0.
    pub coarse: Vec<f64>,
    /// Work spent on both solves, in the sampler's cost unit.
    pub cost: f64,
}

pub trait MlmcSampler: Sync {
    /// Number of payoff components.
    fn dim(&self) -> usize;

    fn sample(&self, level: u32, seed: SeedSpec) -> Result<LevelSample>;
}

/// `P_0` on level 0 and `P_l - P_{l-1}` above, component 0.
pub fn level_sample<S: MlmcSampler + ?Sized>(
    sampler: &S,
    level: u32,
    seed: SeedSpec,
) -> Result<f64> {
    let s = sampler.sample(level, seed)?;
    Ok(correction(&s, level)[0])
}

fn correction(s: &LevelSample, level: u32) -> Vec<f64> {
    if level == 0 {
        s.fine.clone()
    } else {
        s.fine.iter().zip(&s.coarse).map(|(f, c)| f - c).collect()
    }
}

/// Running sums for one level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub level: u32,
    pub n_samples: u64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    /// Sums of the level's own payoff (component 0), for single-level comparisons.
    pub fine_sum: f64,
    pub fine_sum_sq: f64,
    pub cost_sum: f64,
}

impl LevelStats {
    pub fn new(level: u32, dim: usize) -> Self {
        Self {
            level,
            n_samples: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
            fine_sum: 0.0,
            fine_sum_sq: 0.0,
            cost_sum: 0.0,
        }
    }

    fn push(&mut self, s: &LevelSample) -> Result<()> {
        let y = correction(s, self.level);
        if y.len() != self.sum.len() {
            return Err(Error::LengthMismatch {
                what: "sampler output vs declared dimension",
                expected: self.sum.len(),
                actual: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite payoff on level {}",
                self.level
            )));
        }
        for ((a, b), v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(&y) {
            *a += v;
            *b += v * v;
        }
        self.fine_sum += s.fine[0];
        self.fine_sum_sq += s.fine[0] * s.fine[0];
        self.cost_sum += s.cost;
        self.n_samples += 1;
        Ok(())
    }

    pub fn mean_of(&self, component: usize) -> f64 {
        self.sum[component] / self.n_samples as f64
    }

    pub fn mean(&self) -> f64 {
        self.mean_of(0)
    }

    /// Unbiased sample variance of the correction.
    pub fn variance_of(&self, component: usize) -> f64 {
        sample_variance(self.sum[component], self.sum_sq[component], self.n_samples)
    }

    pub fn variance(&self) -> f64 {
        self.variance_of(0)
    }

    /// Variance of the level's own payoff `P_l`.
    pub fn fine_variance(&self) -> f64 {
        sample_variance(self.fine_sum, self.fine_sum_sq, self.n_samples)
    }

    pub fn fine_mean(&self) -> f64 {
        self.fine_sum / self.n_samples as f64
    }

    pub fn cost_per_sample(&self) -> f64 {
        self.cost_sum / self.n_samples as f64
    }
}

fn sample_variance(sum: f64, sum_sq: f64, n: u64) -> f64 {
    if n < 2 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = sum / nf;
    ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
}

const CHUNK: u64 = 1 << 14;

/// Draws samples `first .. first + count` of `level` into `stats`, in index order.
pub fn extend_level<S: MlmcSampler + ?Sized>(
    sampler: &S,
    stats: &mut LevelStats,
    experiment_seed: u64,
    count: u64,
) -> Result<()> {
    let level = stats.level;
    let mut next = stats.n_samples;
    let end = next + count;
    while next < end {
        let stop = (next + CHUNK).min(end);
        let batch: Vec<LevelSample> = (next..stop)
            .into_par_iter()
            .map(|i| sampler.sample(level, SeedSpec::new(experiment_seed, level, i)))
            .collect::<Result<_>>()?;
        for s in &batch {
            stats.push(s)?;
        }
        next = stop;
    }
    Ok(())
}

/// Fixed number of samples on each of the levels `0..=max_level`.
pub fn level_diagnostics<S: MlmcSampler + ?Sized>(
    sampler: &S,
    max_level: u32,
    samples: &[u64],
    experiment_seed: u64,
) -> Result<Vec<LevelStats>> {
    if samples.len() != max_level as usize + 1 {
        return Err(Error::LengthMismatch {
            what: "per-level sample counts vs levels",
            expected: max_level as usize + 1,
            actual: samples.len(),
        });
    }
    (0..=max_level)
        .map(|l| {
            let mut st = LevelStats::new(l, sampler.dim());
            extend_level(sampler, &mut st, experiment_seed, samples[l as usize])?;
            Ok(st)
        })
        .collect()
}

/// Sample counts `N_l = ceil(2 eps^-2 sqrt(V_l/C_l) sum_j sqrt(V_j C_j))`.
///
/// Levels with zero variance get `min_samples`.
pub fn optimal_allocation(
    variances: &[f64],
    costs: &[f64],
    epsilon: f64,
    min_samples: u64,
) -> Result<Vec<u64>> {
    if variances.is_empty() {
        return Err(Error::Config("allocation needs at least one level".into()));
    }
    if variances.len() != costs.len() {
        return Err(Error::LengthMismatch {
            what: "variances vs costs",
            expected: variances.len(),
            actual: costs.len(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if variances.iter().any(|v| !(*v >= 0.0)) || costs.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::Numeric(
            "allocation needs finite V >= 0 and C > 0 on every level".into(),
        ));
    }
    let total: f64 = variances
        .iter()
        .zip(costs)
        .map(|(v, c)| (v * c).sqrt())
        .sum();
    Ok(variances
        .iter()
        .zip(costs)
        .map(|(&v, &c)| {
            if v == 0.0 {
                min_samples
            } else {
                (2.0 / (epsilon * epsilon) * (v / c).sqrt() * total).ceil() as u64
            }
        })
        .collect())
}

/// Weak-rate rule used by the bias test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaRule {
    Fixed(f64),
    /// Regression over the levels `>= 1` sampled so far, floored at `floor`,
    /// falling back to `fallback` while fewer than three such levels exist.
    Fitted {
        fallback: f64,
        floor: f64,
    },
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::Fixed(2.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlmcConfig {
    pub l_min: u32,
    pub l_max: u32,
    pub warmup: u64,
    pub alpha: AlphaRule,
    pub experiment_seed: u64,
}

impl Default for MlmcConfig {
    fn default() -> Self {
        Self {
            l_min: 2,
            l_max: 10,
            warmup: 100,
            alpha: AlphaRule::default(),
            experiment_seed: 0,
        }
    }
}

/// Rates fitted over levels `>= 1`: `|E[Y_l]| ~ 2^-alpha l`, `V_l ~ 2^-beta l`, `C_l ~ 2^gamma l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FittedRates {
    pub alpha: LinearFit,
    pub beta: LinearFit,
    pub gamma: LinearFit,
}

impl FittedRates {
    pub fn alpha(&self) -> f64 {
        -self.alpha.slope
    }
    pub fn beta(&self) -> f64 {
        -self.beta.slope
    }
    pub fn gamma(&self) -> f64 {
        self.gamma.slope
    }
}

pub fn fit_rates(levels: &[LevelStats]) -> Result<FittedRates> {
    let upper: Vec<&LevelStats> = levels.iter().filter(|s| s.level >= 1).collect();
    let xs: Vec<f64> = upper.iter().map(|s| s.level as f64).collect();
    let means: Vec<f64> = upper.iter().map(|s| s.mean()).collect();
    let vars: Vec<f64> = upper.iter().map(|s| s.variance()).collect();
    let costs: Vec<f64> = upper.iter().map(|s| s.cost_per_sample()).collect();
    Ok(FittedRates {
        alpha: fit_log2(&xs, &means)?,
        beta: fit_log2(&xs, &vars)?,
        gamma: fit_log2(&xs, &costs)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlmcResult {
    /// Multilevel estimate of every payoff component.
    pub estimates: Vec<f64>,
    pub levels: Vec<LevelStats>,
    pub epsilon: f64,
    pub total_cost: f64,
    /// Estimator variance `sum V_l / N_l` of component 0.
    pub variance: f64,
    pub bias_estimate: f64,
    pub rates: Option<FittedRates>,
}

impl MlmcResult {
    pub fn estimate(&self) -> f64 {
        self.estimates[0]
    }

    pub fn finest_level(&self) -> u32 {
        self.levels.last().map_or(0, |s| s.level)
    }

    /// Predicted cost of plain Monte Carlo on the finest level at the same accuracy,
    /// `2 V[P_L] C_L / eps^2` with `C_L` the cost of one fine solve on that level.
    pub fn standard_mc_cost(&self, fine_cost: f64) -> f64 {
        let top = self.levels.last().expect("at least one level");
        2.0 * top.fine_variance() * fine_cost / (self.epsilon * self.epsilon)
    }
}

fn bias_estimate(levels: &[LevelStats], rule: AlphaRule) -> f64 {
    let alpha = match rule {
        AlphaRule::Fixed(a) => a,
        AlphaRule::Fitted { fallback, floor } => {
            let upper: Vec<&LevelStats> = levels.iter().filter(|s| s.level >= 1).collect();
            if upper.len() < 3 {
                fallback
            } else {
                let xs: Vec<f64> = upper.iter().map(|s| s.level as f64).collect();
                let ys: Vec<f64> = upper.iter().map(|s| s.mean()).collect();
                fit_log2(&xs, &ys).map_or(fallback, |f| (-f.slope).max(floor))
            }
        }
    };
    let f = 2f64.powf(alpha);
    let n = levels.len();
    let last = levels[n - 1].mean().abs();
    let prev = if n >= 2 {
        levels[n - 2].mean().abs() / f
    } else {
        last
    };
    last.max(prev) / (f - 1.0)
}

/// Adaptive MLMC to root-mean-square accuracy `epsilon`.
pub fn run_mlmc<S: MlmcSampler + ?Sized>(
    sampler: &S,
    epsilon: f64,
    config: &MlmcConfig,
) -> Result<MlmcResult> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if config.warmup < 2 || config.l_min > config.l_max {
        return Err(Error::Config("need warmup >= 2 and l_min <= l_max".into()));
    }
    let dim = sampler.dim();
    let seed = config.experiment_seed;
    let mut levels: Vec<LevelStats> = Vec::new();
    for l in 0..=config.l_min {
        let mut st = LevelStats::new(l, dim);
        extend_level(sampler, &mut st, seed, config.warmup)?;
        levels.push(st);
    }
    loop {
        loop {
            let v: Vec<f64> = levels.iter().map(|s| s.variance()).collect();
            let c: Vec<f64> = levels.iter().map(|s| s.cost_per_sample()).collect();
            let target = optimal_allocation(&v, &c, epsilon, config.warmup)?;
            let mut extended = false;
            for (st, &n) in levels.iter_mut().zip(&target) {
                if n > st.n_samples {
                    extend_level(sampler, st, seed, n - st.n_samples)?;
                    extended = true;
                }
            }
            if !extended {
                break;
            }
        }
        let bias = bias_estimate(&levels, config.alpha);
        let top = levels.len() as u32 - 1;
        if bias <= epsilon / 2f64.sqrt() {
            return Ok(finish(levels, epsilon, bias));
        }
        if top >= config.l_max {
            return Err(Error::NoConvergence {
                level: top as usize,
                bias_estimate: bias,
                target: epsilon / 2f64.sqrt(),
            });
        }
        let mut st = LevelStats::new(top + 1, dim);
        extend_level(sampler, &mut st, seed, config.warmup)?;
        levels.push(st);
    }
}

fn finish(levels: Vec<LevelStats>, epsilon: f64, bias: f64) -> MlmcResult {
    let dim = levels[0].sum.len();
    let estimates = (0..dim)
        .map(|c| levels.iter().map(|s| s.mean_of(c)).sum())
        .collect();
    let total_cost = levels.iter().map(|s| s.cost_sum).sum();
    let variance = levels
        .iter()
        .map(|s| s.variance() / s.n_samples as f64)
        .sum();
    let rates = (levels.len() >= 3)
        .then(|| fit_rates(&levels).ok())
        .flatten();
    MlmcResult {
        estimates,
        levels,
        epsilon,
        total_cost,
        variance,
        bias_estimate: bias,
        rates,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Variance decays faster than cost grows: `O(eps^-2)`.
    VarianceDominated,
    /// Balanced decay: `O(eps^-2 log^2 eps)`.
    Balanced,
    /// Cost dominated: `O(eps^-2 - (gamma - beta)/alpha)`.
    CostDominated,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complexity {
    pub regime: Regime,
    /// Power of `eps` in the cost bound.
    pub eps_exponent: f64,
    /// Power of `log(1/eps)` in the cost bound.
    pub log_power: u32,
}

/// Power of `eps` in the cost bound, `-2 - max(gamma - beta, 0) / alpha`,
/// without checking the hypothesis `alpha >= gamma / 2`.
pub fn cost_exponent(alpha: f64, beta: f64, gamma: f64) -> f64 {
    -2.0 - (gamma - beta).max(0.0) / alpha
}

pub fn complexity_regime(alpha: f64, beta: f64, gamma: f64) -> Result<Complexity> {
    if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) {
        return Err(Error::Config("rates must be positive".into()));
    }
    if alpha < 0.5 * gamma {
        return Err(Error::Config(format!(
            "alpha = {alpha} is below gamma/2 = {}",
            0.5 * gamma
        )));
    }
    let tol = 1e-12 * beta.max(gamma);
    let eps_exponent = cost_exponent(alpha, beta, gamma);
    Ok(if (beta - gamma).abs() <= tol {
        Complexity {
            regime: Regime::Balanced,
            eps_exponent: -2.0,
            log_power: 2,
        }
    } else if beta > gamma {
        Complexity {
            regime: Regime::VarianceDominated,
            eps_exponent: -2.0,
            log_power: 0,
        }
    } else {
        Complexity {
            regime: Regime::CostDominated,
            eps_exponent,
            log_power: 0,
        }
    })
}
