use std::f64::consts::PI;

use super::grid::{GridSpec, ModelParams};
use crate::error::{Error, Result};

/// Interior density values `v_1 .. v_{J-1}` at timestep `time_index`.
///
/// The boundary values `v_0 = v_J = 0` are implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub values: Vec<f64>,
    pub time_index: usize,
}

impl SolverState {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.interior_len()],
            time_index: 0,
        }
    }

    /// Discrete mass `h * sum_j v_j`.
    pub fn mass(&self, grid: &GridSpec) -> f64 {
        grid.h() * self.values.iter().sum::<f64>()
    }

    /// Value at node `j` including the implicit zero boundary nodes.
    pub fn node_value(&self, j: usize) -> f64 {
        if j == 0 || j > self.values.len() {
            0.0
        } else {
            self.values[j - 1]
        }
    }

    pub(crate) fn check_len(&self, grid: &GridSpec) -> Result<()> {
        if self.values.len() != grid.interior_len() {
            return Err(Error::LengthMismatch {
                what: "state vs grid interior",
                expected: grid.interior_len(),
                actual: self.values.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Numeric(format!(
                "non-finite state value at interior node {} (step {})",
                i + 1,
                self.time_index
            ))),
        }
    }
}

/// Initial measure projected onto the grid.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// Unit point mass at `x0`.
    PointMass { x0: f64 },
    /// Piecewise-linear density through `(xs[i], density[i])`, zero outside `[xs[0], xs[n-1]]`.
    Tabulated { xs: Vec<f64>, density: Vec<f64> },
}

/// Hat function centred on `xj` with half-width `h`, peak value 1.
fn hat(x: f64, xj: f64, h: f64) -> f64 {
    ((h - (x - xj).abs()) / h).max(0.0)
}

/// Projects an initial measure onto the nodal hat basis.
///
/// Values are normalised by `1/h` so that a point mass away from the
/// boundaries has discrete mass exactly one.
pub fn project_initial(ic: &InitialCondition, grid: &GridSpec) -> Result<SolverState> {
    let h = grid.h();
    let mut state = SolverState::zeros(grid);
    match ic {
        InitialCondition::PointMass { x0 } => {
            if !(*x0 > grid.x_min() && *x0 < grid.x_max()) {
                return Err(Error::Domain(format!(
                    "point mass at {x0} lies outside ({}, {})",
                    grid.x_min(),
                    grid.x_max()
                )));
            }
            let left = ((x0 - grid.x_min()) / h).floor() as usize;
            for j in [left, left + 1] {
                if (1..grid.intervals()).contains(&j) {
                    state.values[j - 1] = hat(*x0, grid.node(j), h) / h;
                }
            }
        }
        InitialCondition::Tabulated { xs, density } => {
            if xs.len() != density.len() {
                return Err(Error::LengthMismatch {
                    what: "tabulated density abscissae vs values",
                    expected: xs.len(),
                    actual: density.len(),
                });
            }
            if xs.len() < 2 || xs.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Domain(
                    "tabulated density needs at least two strictly increasing abscissae".into(),
                ));
            }
            if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
                return Err(Error::Domain(
                    "tabulated density must be finite and non-negative".into(),
                ));
            }
            for j in 1..grid.intervals() {
                let xj = grid.node(j);
                state.values[j - 1] = hat_moment(xs, density, xj, h) / h;
            }
        }
    }
    Ok(state)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&t| t <= x).clamp(1, n - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] * (1.0 - w) + ys[i] * w
}

/// `int hat_j(x) f(x) dx` for piecewise-linear `f`, exact: on every sub-interval
/// between merged breakpoints the integrand is quadratic, so Simpson's rule is exact.
fn hat_moment(xs: &[f64], ys: &[f64], xj: f64, h: f64) -> f64 {
    let (lo, hi) = (xj - h, xj + h);
    let mut cuts = vec![lo, xj, hi];
    let start = xs.partition_point(|&t| t <= lo);
    cuts.extend(xs[start..].iter().copied().take_while(|&t| t < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            // the table is discontinuous at its end points; sample just inside
            let eps = 1e-12 * (b - a);
            let fa = interp(xs, ys, a + eps) * hat(a, xj, h);
            let fb = interp(xs, ys, b - eps) * hat(b, xj, h);
            let m = 0.5 * (a + b);
            let fm = interp(xs, ys, m) * hat(m, xj, h);
            (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        })
        .sum()
}

/// Closed-form density of the boundary-free problem started from a point mass:
/// a Gaussian of variance `(1 - rho) t` centred at `x0 + mu t + sqrt(rho) M_t`.
pub fn exact_density(x: f64, t: f64, m_t: f64, x0: f64, params: &ModelParams) -> Result<f64> {
    if params.rho >= 1.0 {
        return Err(Error::Domain(
            "rho = 1 gives a travelling point mass with no density".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let var = (1.0 - params.rho) * t;
    let d = x - x0 - params.mu * t - params.rho.sqrt() * m_t;
    Ok((-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt())
}
