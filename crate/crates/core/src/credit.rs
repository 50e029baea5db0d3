//! Basket loss, tranche notionals and the two legs of a tranche swap.

use crate::error::{Error, Result};
use crate::fdcore::{GridSpec, SolverState};

/// Loss layer `[a, d]` of the basket with a common recovery rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrancheSpec {
    pub attachment: f64,
    pub detachment: f64,
    pub recovery: f64,
}

impl TrancheSpec {
    pub fn new(attachment: f64, detachment: f64, recovery: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&attachment) || !(detachment > attachment && detachment <= 1.0) {
            return Err(Error::Domain(format!(
                "tranche needs 0 <= a < d <= 1, got [{attachment}, {detachment}]"
            )));
        }
        if !(0.0..=1.0).contains(&recovery) {
            return Err(Error::Domain(format!("recovery {recovery} outside [0, 1]")));
        }
        Ok(Self {
            attachment,
            detachment,
            recovery,
        })
    }

    pub fn width(&self) -> f64 {
        self.detachment - self.attachment
    }
}

/// The standard index partition `[0,3%], [3,6%], [6,9%], [9,12%], [12,22%], [22,100%]`.
pub fn standard_tranches(recovery: f64) -> Result<Vec<TrancheSpec>> {
    const BOUNDS: [f64; 7] = [0.0, 0.03, 0.06, 0.09, 0.12, 0.22, 1.0];
    BOUNDS
        .windows(2)
        .map(|w| TrancheSpec::new(w[0], w[1], recovery))
        .collect()
}

/// Premium dates `T_1 < ... < T_n`, accrual `delta` and flat discount rate.
#[derive(Clone, Debug, PartialEq)]
pub struct PaymentSchedule {
    dates: Vec<f64>,
    delta: f64,
    rate: f64,
}

impl PaymentSchedule {
    pub fn new(dates: Vec<f64>, delta: f64, rate: f64) -> Result<Self> {
        if dates.is_empty() || dates[0] <= 0.0 || dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "payment dates must be positive and strictly increasing".into(),
            ));
        }
        if !(delta > 0.0) {
            return Err(Error::Domain(format!(
                "accrual interval must be positive, got {delta}"
            )));
        }
        Ok(Self { dates, delta, rate })
    }

    /// `T_i = i * delta` up to `maturity`.
    pub fn regular(maturity: f64, delta: f64, rate: f64) -> Result<Self> {
        let n = (maturity / delta).round();
        if !(n >= 1.0) || (n * delta - maturity).abs() > 1e-9 * maturity.max(1.0) {
            return Err(Error::Domain(format!(
                "maturity {maturity} is not a whole number of periods {delta}"
            )));
        }
        Self::new(
            (1..=n as usize).map(|i| i as f64 * delta).collect(),
            delta,
            rate,
        )
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn maturity(&self) -> f64 {
        *self.dates.last().expect("non-empty")
    }

    pub fn discount_factors(&self) -> impl Iterator<Item = f64> + '_ {
        self.dates.iter().map(|t| (-self.rate * t).exp())
    }
}

/// `(1 - R)(1 - h sum v)` clamped to `[0, 1 - R]`.
pub fn loss_from_state(state: &SolverState, grid: &GridSpec, recovery: f64) -> f64 {
    ((1.0 - recovery) * (1.0 - state.mass(grid))).clamp(0.0, 1.0 - recovery)
}

/// Outstanding notional `max(d - L, 0) - max(a - L, 0)`.
pub fn tranche_notional(loss: f64, tranche: &TrancheSpec) -> Result<f64> {
    if !(0.0..=1.0).contains(&loss) {
        return Err(Error::Domain(format!("loss {loss} outside [0, 1]")));
    }
    Ok((tranche.detachment - loss).max(0.0) - (tranche.attachment - loss).max(0.0))
}

/// Discounted notional decrements along one loss path.
///
/// `losses[0]` is the loss at time zero, followed by one value per payment date.
pub fn protection_leg(
    losses: &[f64],
    schedule: &PaymentSchedule,
    tranche: &TrancheSpec,
) -> Result<f64> {
    if losses.len() != schedule.dates.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "losses vs payment dates + 1",
            expected: schedule.dates.len() + 1,
            actual: losses.len(),
        });
    }
    let notionals = losses
        .iter()
        .map(|&l| tranche_notional(l, tranche))
        .collect::<Result<Vec<_>>>()?;
    Ok(notionals
        .windows(2)
        .zip(schedule.discount_factors())
        .map(|(w, df)| df * (w[0] - w[1]))
        .sum())
}

/// Par spread from expected outstanding notionals at `T_0 = 0, T_1, ..., T_n`.
pub fn tranche_spread(expected_notionals: &[f64], schedule: &PaymentSchedule) -> Result<f64> {
    if expected_notionals.len() != schedule.dates.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "expected notionals vs payment dates + 1",
            expected: schedule.dates.len() + 1,
            actual: expected_notionals.len(),
        });
    }
    let (mut protection, mut annuity) = (0.0, 0.0);
    for (w, df) in expected_notionals
        .windows(2)
        .zip(schedule.discount_factors())
    {
        protection += df * (w[0] - w[1]);
        annuity += df * w[1];
    }
    if !(annuity > 0.0) {
        return Err(Error::DegenerateTranche);
    }
    Ok(protection / (schedule.delta * annuity))
}
