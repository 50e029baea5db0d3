//! Grid, state and the explicit Milstein finite-difference scheme.

mod grid;
mod solve;
mod state;
mod step;

pub use grid::{GridSpec, ModelParams};
pub use solve::{solve_from, solve_path, Monitoring, Solution, SolveOptions};
pub use state::{exact_density, project_initial, InitialCondition, SolverState};
pub use step::{apply_monitoring, milstein_step_pentadiagonal, milstein_step_tridiagonal, Scheme};
