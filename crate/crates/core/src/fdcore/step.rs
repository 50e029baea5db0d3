use super::grid::{GridSpec, ModelParams};
use super::state::SolverState;
use crate::error::{Error, Result};

/// Spatial discretisation of the Ito correction term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    /// Central second difference for the whole diffusion term (three-point stencil).
    #[default]
    Tridiagonal,
    /// Method-of-lines variant: the Ito correction uses the square of the
    /// central first difference (five-point stencil).
    Pentadiagonal,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tridiagonal" | "tri" => Ok(Self::Tridiagonal),
            "pentadiagonal" | "penta" => Ok(Self::Pentadiagonal),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Five-point weights `w[-2..=2]` of one explicit step, fixed for all nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Stencil {
    pub far: f64,
    pub lower: f64,
    pub centre: f64,
    pub upper: f64,
}

impl Stencil {
    pub(crate) fn new(scheme: Scheme, z: f64, params: &ModelParams, grid: &GridSpec) -> Self {
        let (h, k) = (grid.h(), grid.k());
        let advect = (params.mu * k + (params.rho * k).sqrt() * z) / (2.0 * h);
        match scheme {
            Scheme::Tridiagonal => {
                let diffuse = ((1.0 - params.rho) * k + params.rho * k * z * z) / (2.0 * h * h);
                Self {
                    far: 0.0,
                    lower: advect + diffuse,
                    centre: 1.0 - 2.0 * diffuse,
                    upper: diffuse - advect,
                }
            }
            Scheme::Pentadiagonal => {
                let diffuse = k / (2.0 * h * h);
                // (D1/2h)^2 V approximates v_xx, hence the 1/(8h^2) weight on D1^2
                let ito = params.rho * k * (z * z - 1.0) / (8.0 * h * h);
                Self {
                    far: ito,
                    lower: advect + diffuse,
                    centre: 1.0 - 2.0 * diffuse - 2.0 * ito,
                    upper: diffuse - advect,
                }
            }
        }
    }

    /// Writes `out = S v` with zero values outside the stored range.
    pub(crate) fn apply(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), out.len());
        if self.far == 0.0 {
            apply3(v, out, self.lower, self.centre, self.upper);
        } else {
            apply5(v, out, self);
        }
    }
}

fn apply3(v: &[f64], out: &mut [f64], lo: f64, c: f64, up: f64) {
    let n = v.len();
    match n {
        0 => {}
        1 => out[0] = c * v[0],
        _ => {
            out[0] = c * v[0] + up * v[1];
            out[n - 1] = lo * v[n - 2] + c * v[n - 1];
            for (o, w) in out[1..n - 1].iter_mut().zip(v.windows(3)) {
                *o = lo * w[0] + c * w[1] + up * w[2];
            }
        }
    }
}

fn apply5(v: &[f64], out: &mut [f64], s: &Stencil) {
    let n = v.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i >= n as isize {
            0.0
        } else {
            v[i as usize]
        }
    };
    let edge = |j: usize| -> f64 {
        let j = j as isize;
        s.far * (at(j - 2) + at(j + 2))
            + s.lower * at(j - 1)
            + s.centre * at(j)
            + s.upper * at(j + 1)
    };
    if n < 5 {
        for (j, o) in out.iter_mut().enumerate() {
            *o = edge(j);
        }
        return;
    }
    for j in [0, 1, n - 2, n - 1] {
        out[j] = edge(j);
    }
    for (o, w) in out[2..n - 2].iter_mut().zip(v.windows(5)) {
        *o = s.far * (w[0] + w[4]) + s.lower * w[1] + s.centre * w[2] + s.upper * w[3];
    }
}

fn checked_step(
    scheme: Scheme,
    state: &SolverState,
    z: f64,
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<SolverState> {
    if !z.is_finite() {
        return Err(Error::Numeric(format!("non-finite normal draw {z}")));
    }
    state.check_len(grid)?;
    state.check_finite()?;
    let mut out = vec![0.0; state.values.len()];
    Stencil::new(scheme, z, params, grid).apply(&state.values, &mut out);
    Ok(SolverState {
        values: out,
        time_index: state.time_index + 1,
    })
}

/// One explicit Milstein step with the three-point stencil
/// `v_j <- a v_{j-1} + b v_j + c v_{j+1}`.
///
/// Runs regardless of the stability limit.
pub fn milstein_step_tridiagonal(
    state: &SolverState,
    z: f64,
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<SolverState> {
    checked_step(Scheme::Tridiagonal, state, z, params, grid)
}

/// One explicit Milstein step of the five-point variant. Ghost values beyond
/// the Dirichlet nodes are zero.
pub fn milstein_step_pentadiagonal(
    state: &SolverState,
    z: f64,
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<SolverState> {
    checked_step(Scheme::Pentadiagonal, state, z, params, grid)
}

/// Default-monitoring interface condition: density below the barrier is
/// removed and the value at the barrier node is halved.
pub fn apply_monitoring(state: &SolverState, grid: &GridSpec) -> Result<SolverState> {
    state.check_len(grid)?;
    let mut out = state.clone();
    monitor_in_place(&mut out.values, grid)?;
    Ok(out)
}

pub(crate) fn monitor_in_place(values: &mut [f64], grid: &GridSpec) -> Result<()> {
    let zero = grid
        .zero_node()
        .ok_or_else(|| Error::Config("discrete monitoring needs a grid node at x = 0".into()))?;
    // stored index i holds node i + 1
    for (i, v) in values.iter_mut().enumerate() {
        let j = i + 1;
        if j < zero {
            *v = 0.0;
        } else if j == zero {
            *v *= 0.5;
        } else {
            break;
        }
    }
    Ok(())
}
