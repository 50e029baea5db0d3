//! Finite baskets of firms driven by one market factor, absorbed at zero.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::credit::{protection_leg, PaymentSchedule, TrancheSpec};
use crate::error::{Error, Result};
use crate::fdcore::{ModelParams, Monitoring};
use crate::mlmc::{run_mlmc, LevelSample, MlmcConfig, MlmcResult, MlmcSampler};
use crate::paths::{coarsen_path, generate_fine_path, BrownianPath, SeedSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct BasketSpec {
    pub n_firms: usize,
    /// Common initial distance to default.
    pub x0: f64,
    pub params: ModelParams,
}

impl BasketSpec {
    pub fn new(n_firms: usize, x0: f64, params: ModelParams) -> Result<Self> {
        if n_firms == 0 {
            return Err(Error::Config("a basket needs at least one firm".into()));
        }
        if !(x0 > 0.0) {
            return Err(Error::Domain(format!(
                "initial distance to default must be positive, got {x0}"
            )));
        }
        Ok(Self {
            n_firms,
            x0,
            params,
        })
    }
}

/// Absorbed fraction of the basket at `times[0] = 0` and each observation date.
#[derive(Clone, Debug, PartialEq)]
pub struct LossPath {
    pub times: Vec<f64>,
    pub absorbed: Vec<f64>,
}

impl LossPath {
    /// Portfolio loss `(1 - R)` times the absorbed fraction.
    pub fn losses(&self, recovery: f64) -> Vec<f64> {
        self.absorbed.iter().map(|f| (1.0 - recovery) * f).collect()
    }
}

fn step_indices(times: &[f64], k: f64, n_steps: usize) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let n = (t / k).round();
            if !(n >= 0.0) || (n * k - t).abs() > 1e-9 * k.max(t) {
                return Err(Error::Config(format!(
                    "date {t} is not a multiple of the timestep {k}"
                )));
            }
            let n = n as usize;
            if n > n_steps {
                return Err(Error::LengthMismatch {
                    what: "path steps vs observation date",
                    expected: n,
                    actual: n_steps,
                });
            }
            Ok(n)
        })
        .collect()
}

/// Which steps check for absorption.
fn check_mask(monitoring: &Monitoring, k: f64, n_steps: usize) -> Result<Vec<bool>> {
    match monitoring {
        Monitoring::Continuous => Ok(vec![true; n_steps + 1]),
        Monitoring::Dates(dates) => {
            let mut mask = vec![false; n_steps + 1];
            for n in step_indices(dates, k, n_steps)? {
                mask[n] = true;
            }
            Ok(mask)
        }
    }
}

/// First checked step at which the firm sits at or below zero.
fn absorption_step(
    x0: f64,
    drift: f64,
    idio: f64,
    common: f64,
    market: &[f64],
    noise: &[f64],
    checked: &[bool],
) -> Option<usize> {
    let mut x = x0;
    for (n, (z, zeta)) in market.iter().zip(noise).enumerate() {
        x += drift + idio * zeta + common * z;
        if checked[n + 1] && x <= 0.0 {
            return Some(n + 1);
        }
    }
    None
}

fn absorbed_fractions(hits: &[Option<usize>], obs: &[usize]) -> Vec<f64> {
    let n = hits.len() as f64;
    obs.iter()
        .map(|&m| hits.iter().filter(|h| h.is_some_and(|s| s <= m)).count() as f64 / n)
        .collect()
}

fn firm_noise(seed: &SeedSpec, firm: u64, n_steps: usize, buf: &mut Vec<f64>) {
    let mut rng = seed.firm_rng(firm);
    buf.clear();
    buf.extend((0..n_steps).map(|_| rng.sample::<f64, _>(StandardNormal)));
}

fn simulate_with_ids(
    spec: &BasketSpec,
    market: &BrownianPath,
    seed: SeedSpec,
    monitoring: &Monitoring,
    dates: &[f64],
    firm_ids: impl Iterator<Item = u64>,
) -> Result<LossPath> {
    let k = market.k;
    let n_steps = market.n_steps();
    let checked = check_mask(monitoring, k, n_steps)?;
    let mut times = vec![0.0];
    times.extend_from_slice(dates);
    let obs = step_indices(&times, k, n_steps)?;
    let p = &spec.params;
    let (drift, idio, common) = (p.mu * k, ((1.0 - p.rho) * k).sqrt(), (p.rho * k).sqrt());
    let mut noise = Vec::with_capacity(n_steps);
    let hits: Vec<Option<usize>> = firm_ids
        .map(|id| {
            firm_noise(&seed, id, n_steps, &mut noise);
            absorption_step(spec.x0, drift, idio, common, &market.z, &noise, &checked)
        })
        .collect();
    Ok(LossPath {
        absorbed: absorbed_fractions(&hits, &obs),
        times,
    })
}

/// Evolves every firm along the shared market draws of `market`; firm `i`
/// takes its idiosyncratic draws from stream `i` of `seed`.
pub fn simulate_basket(
    spec: &BasketSpec,
    market: &BrownianPath,
    seed: SeedSpec,
    monitoring: &Monitoring,
    dates: &[f64],
) -> Result<LossPath> {
    simulate_with_ids(
        spec,
        market,
        seed,
        monitoring,
        dates,
        0..spec.n_firms as u64,
    )
}

/// Normalised tranche protection leg of a basket, with levels refining the
/// timestep `k_l = k0 2^-l`. Fine and coarse baskets share both the market and
/// the idiosyncratic increments.
#[derive(Clone, Debug)]
pub struct BasketSampler {
    pub spec: BasketSpec,
    pub schedule: PaymentSchedule,
    pub tranche: TrancheSpec,
    pub k0: f64,
    /// Absorption every step, or only on the payment dates.
    pub continuous: bool,
}

impl BasketSampler {
    fn steps(&self, level: u32) -> Result<(usize, f64)> {
        let k = self.k0 / f64::from(1u32 << level);
        let n = (self.schedule.maturity() / k).round();
        if (n * k - self.schedule.maturity()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "maturity is not a multiple of the timestep {k}"
            )));
        }
        Ok((n as usize, k))
    }

    fn monitoring(&self) -> Monitoring {
        if self.continuous {
            Monitoring::Continuous
        } else {
            Monitoring::Dates(self.schedule.dates().to_vec())
        }
    }

    fn payoff(&self, hits: &[Option<usize>], k: f64, n_steps: usize) -> Result<f64> {
        let mut times = vec![0.0];
        times.extend_from_slice(self.schedule.dates());
        let obs = step_indices(&times, k, n_steps)?;
        let losses: Vec<f64> = absorbed_fractions(hits, &obs)
            .iter()
            .map(|f| (1.0 - self.tranche.recovery) * f)
            .collect();
        Ok(protection_leg(&losses, &self.schedule, &self.tranche)? / self.tranche.width())
    }
}

impl MlmcSampler for BasketSampler {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, level: u32, seed: SeedSpec) -> Result<LevelSample> {
        let (nf, kf) = self.steps(level)?;
        let market = generate_fine_path(seed, nf, kf)?;
        let p = &self.spec.params;
        let fine_mask = check_mask(&self.monitoring(), kf, nf)?;
        let coef = |k: f64| (p.mu * k, ((1.0 - p.rho) * k).sqrt(), (p.rho * k).sqrt());
        let (d, i, c) = coef(kf);
        let mut noise = Vec::with_capacity(nf);
        let mut fine_hits = Vec::with_capacity(self.spec.n_firms);
        let mut coarse_hits = Vec::with_capacity(self.spec.n_firms);

        let coarse = if level > 0 {
            let cm = coarsen_path(&market, 2)?;
            let mask = check_mask(&self.monitoring(), cm.k, cm.n_steps())?;
            Some((cm, mask))
        } else {
            None
        };
        let mut coarse_noise = Vec::with_capacity(nf / 2);
        for firm in 0..self.spec.n_firms as u64 {
            firm_noise(&seed, firm, nf, &mut noise);
            fine_hits.push(absorption_step(
                self.spec.x0,
                d,
                i,
                c,
                &market.z,
                &noise,
                &fine_mask,
            ));
            if let Some((cm, mask)) = &coarse {
                coarse_noise.clear();
                coarse_noise.extend(
                    noise
                        .chunks_exact(2)
                        .map(|w| (w[0] + w[1]) * std::f64::consts::FRAC_1_SQRT_2),
                );
                let (d, i, c) = coef(cm.k);
                coarse_hits.push(absorption_step(
                    self.spec.x0,
                    d,
                    i,
                    c,
                    &cm.z,
                    &coarse_noise,
                    mask,
                ));
            }
        }
        let fine = self.payoff(&fine_hits, kf, nf)?;
        let firm_steps = (self.spec.n_firms * nf) as f64;
        let (coarse_val, cost) = match &coarse {
            Some((cm, _)) => (
                self.payoff(&coarse_hits, cm.k, cm.n_steps())?,
                1.5 * firm_steps,
            ),
            None => (0.0, firm_steps),
        };
        Ok(LevelSample {
            fine: vec![fine],
            coarse: vec![coarse_val],
            cost,
        })
    }
}

/// Multilevel estimate over the SDE timestep for a basket of fixed size.
pub fn sde_timestep_mlmc(
    sampler: &BasketSampler,
    epsilon: f64,
    config: &MlmcConfig,
) -> Result<MlmcResult> {
    run_mlmc(sampler, epsilon, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlmc::level_diagnostics;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn reference_basket(n: usize, x0: f64) -> BasketSpec {
        BasketSpec::new(n, x0, ModelParams::reference()).unwrap()
    }

    fn quarterly() -> Vec<f64> {
        (1..=20).map(|i| i as f64 * 0.25).collect()
    }

    #[test]
    fn validation() {
        assert!(BasketSpec::new(0, 1.0, ModelParams::reference()).is_err());
        assert!(BasketSpec::new(5, 0.0, ModelParams::reference()).is_err());
        let spec = reference_basket(10, 5.0);
        let path = generate_fine_path(SeedSpec::new(0, 0, 0), 20, 0.25).unwrap();
        assert!(simulate_basket(
            &spec,
            &path,
            SeedSpec::new(0, 0, 0),
            &Monitoring::Continuous,
            &[6.0]
        )
        .is_err());
        assert!(simulate_basket(
            &spec,
            &path,
            SeedSpec::new(0, 0, 0),
            &Monitoring::Continuous,
            &[0.3]
        )
        .is_err());
    }

    #[test]
    fn losses_start_at_zero_and_never_decrease() {
        let spec = reference_basket(500, 1.5);
        for s in 0..20 {
            let seed = SeedSpec::new(4, 0, s);
            let path = generate_fine_path(seed, 320, 1.0 / 64.0).unwrap();
            let lp =
                simulate_basket(&spec, &path, seed, &Monitoring::Continuous, &quarterly()).unwrap();
            assert_eq!(lp.times.len(), 21);
            assert_eq!(lp.absorbed[0], 0.0);
            assert!(lp.absorbed.windows(2).all(|w| w[1] >= w[0]));
            assert!(lp.absorbed.iter().all(|f| (0.0..=1.0).contains(f)));
        }
    }

    #[test]
    fn perfectly_correlated_firms_move_together() {
        let p = ModelParams::reference().with_rho(1.0).unwrap();
        let spec = BasketSpec::new(50, 0.5, p).unwrap();
        for s in 0..50 {
            let seed = SeedSpec::new(8, 0, s);
            let path = generate_fine_path(seed, 80, 1.0 / 16.0).unwrap();
            let lp =
                simulate_basket(&spec, &path, seed, &Monitoring::Continuous, &quarterly()).unwrap();
            assert!(lp.absorbed.iter().all(|&f| f == 0.0 || f == 1.0));
        }
    }

    #[test]
    fn far_from_barrier_never_defaults() {
        let spec = reference_basket(100_000, 100.0);
        for s in 0..10 {
            let seed = SeedSpec::new(2, 0, s);
            let path = generate_fine_path(seed, 20, 0.25).unwrap();
            let lp =
                simulate_basket(&spec, &path, seed, &Monitoring::Continuous, &quarterly()).unwrap();
            assert!(lp.absorbed.iter().all(|&f| f == 0.0));
        }
    }

    #[test]
    fn discrete_monitoring_defaults_less() {
        let spec = reference_basket(2000, 1.0);
        let seed = SeedSpec::new(6, 0, 0);
        let path = generate_fine_path(seed, 320, 1.0 / 64.0).unwrap();
        let cont =
            simulate_basket(&spec, &path, seed, &Monitoring::Continuous, &quarterly()).unwrap();
        let disc = simulate_basket(
            &spec,
            &path,
            seed,
            &Monitoring::Dates(quarterly()),
            &quarterly(),
        )
        .unwrap();
        for (c, d) in cont.absorbed.iter().zip(&disc.absorbed) {
            assert!(d <= c);
        }
    }

    #[test]
    fn exchangeable_under_firm_relabelling() {
        // two-sample KS on L_T with firm stream ids reversed, 1% level
        let spec = reference_basket(200, 2.0);
        let runs = 1000u64;
        let final_loss = |ids_rev: bool, offset: u64| -> Vec<f64> {
            (0..runs)
                .map(|s| {
                    let seed = SeedSpec::new(21, 0, offset + s);
                    let path = generate_fine_path(seed, 20, 0.25).unwrap();
                    let n = spec.n_firms as u64;
                    let ids: Box<dyn Iterator<Item = u64>> = if ids_rev {
                        Box::new((0..n).rev().map(|i| i + 7 * n))
                    } else {
                        Box::new(0..n)
                    };
                    let lp = simulate_with_ids(
                        &spec,
                        &path,
                        seed,
                        &Monitoring::Dates(quarterly()),
                        &quarterly(),
                        ids,
                    )
                    .unwrap();
                    *lp.absorbed.last().unwrap()
                })
                .collect()
        };
        let mut a = final_loss(false, 0);
        let mut b = final_loss(true, runs);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for x in a.iter().chain(&b) {
            let fa = a.partition_point(|v| v <= x) as f64 / runs as f64;
            let fb = b.partition_point(|v| v <= x) as f64 / runs as f64;
            d = d.max((fa - fb).abs());
        }
        let crit = 1.628 * (2.0 / runs as f64).sqrt();
        assert!(d < crit, "KS statistic {d} >= {crit}");
    }

    #[test]
    fn independent_firms_match_first_passage_probability() {
        // rho = 0: E[L_T] is the single-firm default probability. The
        // monitored walk is compared with the continuous barrier shifted by
        // 0.5826 sqrt(k).
        let p = ModelParams::reference().with_rho(0.0).unwrap();
        let (x0, t, k) = (1.0, 1.0, 1.0 / 1024.0);
        let spec = BasketSpec::new(100_000, x0, p).unwrap();
        let seed = SeedSpec::new(13, 0, 0);
        let path = generate_fine_path(seed, 1024, k).unwrap();
        let lp = simulate_basket(&spec, &path, seed, &Monitoring::Continuous, &[t]).unwrap();
        let est = lp.absorbed[1];
        let phi = Normal::new(0.0, 1.0).unwrap();
        let x = x0 + 0.5826 * k.sqrt();
        let mu = p.mu;
        let exact = phi.cdf((-x - mu * t) / t.sqrt())
            + (-2.0 * mu * x).exp() * phi.cdf((-x + mu * t) / t.sqrt());
        let se = (exact * (1.0 - exact) / 1e5).sqrt();
        assert!((est - exact).abs() < 4.0 * se + 2e-3, "{est} vs {exact}");
    }

    #[test]
    fn exact_levels_have_no_correction_on_payment_dates() {
        let sched = PaymentSchedule::regular(5.0, 0.25, 0.042).unwrap();
        let s = BasketSampler {
            spec: reference_basket(200, 5.0),
            schedule: sched,
            tranche: TrancheSpec::new(0.0, 0.03, 0.4).unwrap(),
            k0: 0.25,
            continuous: false,
        };
        let stats = level_diagnostics(&s, 2, &[200, 50, 50], 3).unwrap();
        assert!(stats[0].mean() > 0.0);
        assert!(stats[1].variance() < 1e-20 && stats[2].variance() < 1e-20);
        assert_eq!(stats[1].cost_per_sample(), 1.5 * 200.0 * 40.0);
    }

    #[test]
    fn continuous_levels_couple() {
        let sched = PaymentSchedule::regular(2.0, 0.25, 0.042).unwrap();
        let s = BasketSampler {
            spec: reference_basket(100, 2.0),
            schedule: sched,
            tranche: TrancheSpec::new(0.0, 0.03, 0.4).unwrap(),
            k0: 0.25,
            continuous: true,
        };
        let stats = level_diagnostics(&s, 3, &[400; 4], 1).unwrap();
        // coupled corrections are far less variable than the payoff itself
        for st in &stats[1..] {
            assert!(st.variance() < 0.5 * st.fine_variance(), "{st:?}");
        }
    }
}
