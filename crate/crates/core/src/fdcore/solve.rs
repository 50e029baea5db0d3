use super::grid::{GridSpec, ModelParams};
use super::state::{project_initial, InitialCondition, SolverState};
use super::step::{monitor_in_place, Scheme, Stencil};
use crate::error::{Error, Result};
use crate::paths::BrownianPath;

/// When default is checked.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Monitoring {
    /// Absorption only through the Dirichlet boundary nodes, every step.
    #[default]
    Continuous,
    /// Interface condition applied at these dates (must lie on the time grid).
    Dates(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveOptions {
    pub scheme: Scheme,
    pub monitoring: Monitoring,
    /// States are returned at these times, in the order given.
    pub observation_times: Vec<f64>,
    /// Keep every intermediate state (memory grows with the step count).
    pub record_all: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub observations: Vec<SolverState>,
    pub terminal: SolverState,
    pub trajectory: Option<Vec<SolverState>>,
    /// Node updates performed, `steps * (J - 1)`.
    pub work: u64,
}

/// Maps dates to step indices, rejecting anything off the time grid.
pub(crate) fn date_steps(grid: &GridSpec, dates: &[f64]) -> Result<Vec<usize>> {
    dates.iter().map(|&t| grid.steps_to(t)).collect()
}

/// Runs the explicit scheme along `path` from the projected initial condition.
pub fn solve_path(
    grid: &GridSpec,
    params: &ModelParams,
    ic: &InitialCondition,
    path: &BrownianPath,
    options: &SolveOptions,
) -> Result<Solution> {
    let start = project_initial(ic, grid)?;
    solve_from(start, grid, params, path, options)
}

/// As [`solve_path`] but from an explicit starting state.
pub fn solve_from(
    start: SolverState,
    grid: &GridSpec,
    params: &ModelParams,
    path: &BrownianPath,
    options: &SolveOptions,
) -> Result<Solution> {
    start.check_len(grid)?;
    if (path.k - grid.k()).abs() > 1e-12 * grid.k() {
        return Err(Error::Config(format!(
            "path timestep {} does not match grid timestep {}",
            path.k,
            grid.k()
        )));
    }
    let n_steps = path.n_steps();
    let observe = date_steps(grid, &options.observation_times)?;
    if let Some(&last) = observe.iter().max() {
        if last > n_steps {
            return Err(Error::LengthMismatch {
                what: "path steps vs last observation date",
                expected: last,
                actual: n_steps,
            });
        }
    }
    let mut monitor = match &options.monitoring {
        Monitoring::Continuous => Vec::new(),
        Monitoring::Dates(dates) => {
            if grid.zero_node().is_none() {
                return Err(Error::Config(
                    "discrete monitoring needs a grid node at x = 0".into(),
                ));
            }
            date_steps(grid, dates)?
        }
    };
    monitor.sort_unstable();
    monitor.dedup();

    let mut observations: Vec<Option<SolverState>> = vec![None; observe.len()];
    let mut trajectory = options.record_all.then(Vec::new);

    let mut cur = start.values;
    let mut next = vec![0.0; cur.len()];
    let mut mon = monitor.iter().peekable();
    let base_index = start.time_index;

    let mut visit = |n: usize, values: &mut Vec<f64>| -> Result<()> {
        while mon.next_if(|&&m| m == n).is_some() {
            monitor_in_place(values, grid)?;
        }
        let wants_state = observe.contains(&n) || trajectory.is_some();
        if wants_state {
            let state = SolverState {
                values: values.clone(),
                time_index: base_index + n,
            };
            state.check_finite()?;
            for (slot, &m) in observations.iter_mut().zip(&observe) {
                if m == n {
                    *slot = Some(state.clone());
                }
            }
            if let Some(t) = trajectory.as_mut() {
                t.push(state);
            }
        }
        Ok(())
    };

    visit(0, &mut cur)?;
    for (n, &z) in path.z.iter().enumerate() {
        if !z.is_finite() {
            return Err(Error::Numeric(format!("non-finite draw at step {n}")));
        }
        Stencil::new(options.scheme, z, params, grid).apply(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        visit(n + 1, &mut cur)?;
    }

    let terminal = SolverState {
        values: cur,
        time_index: base_index + n_steps,
    };
    terminal.check_finite()?;
    Ok(Solution {
        observations: observations
            .into_iter()
            .map(|o| o.expect("visited"))
            .collect(),
        terminal,
        trajectory,
        work: (n_steps * grid.interior_len()) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcore::exact_density;
    use crate::paths::{coarsen_path, generate_fine_path, SeedSpec};

    #[test]
    fn zero_steps_returns_projection() {
        let g = GridSpec::new(0.0, 16.0, 1.6, 0.25).unwrap();
        let ic = InitialCondition::PointMass { x0: 5.0 };
        let path = BrownianPath {
            level: 0,
            k: 0.25,
            z: vec![],
        };
        let sol = solve_path(
            &g,
            &ModelParams::reference(),
            &ic,
            &path,
            &SolveOptions {
                observation_times: vec![0.0],
                ..Default::default()
            },
        )
        .unwrap();
        let proj = project_initial(&ic, &g).unwrap();
        assert_eq!(sol.terminal, proj);
        assert_eq!(sol.observations[0], proj);
        assert_eq!(sol.work, 0);
    }

    #[test]
    fn deterministic_pde_matches_oracle_and_converges() {
        let p = ModelParams::reference().with_rho(0.0).unwrap();
        let base = GridSpec::new(-16.0 / 3.0, 16.0, 4.0 / 3.0, 0.25).unwrap();
        let t = 5.0;
        let errs: Vec<f64> = (1..=4)
            .map(|l| {
                let g = base.level(l);
                let n = g.steps_to(t).unwrap();
                let path = BrownianPath::new(l as u32, g.k(), vec![0.0; n]).unwrap();
                let sol = solve_path(
                    &g,
                    &p,
                    &InitialCondition::PointMass { x0: 5.0 },
                    &path,
                    &SolveOptions::default(),
                )
                .unwrap();
                let e2: f64 = (0..=g.intervals())
                    .map(|j| {
                        let exact = exact_density(g.node(j), t, 0.0, 5.0, &p).unwrap();
                        (sol.terminal.node_value(j) - exact).powi(2) * g.h()
                    })
                    .sum();
                e2.sqrt()
            })
            .collect();
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!((3.0..5.0).contains(&r), "{errs:?}");
        }
    }

    #[test]
    fn boundary_flux_balances_mass() {
        // per step: h sum v changes by -h (v_1 (D - A) + v_{J-1} (D + A))
        let p = ModelParams::reference();
        let g = GridSpec::new(0.0, 16.0, 0.4, 0.25 / 16.0).unwrap();
        let (h, k) = (g.h(), g.k());
        let ic = InitialCondition::PointMass { x0: 1.0 };
        for s in 0..5 {
            let path = generate_fine_path(SeedSpec::new(3, 0, s), 320, k).unwrap();
            let sol = solve_path(
                &g,
                &p,
                &ic,
                &path,
                &SolveOptions {
                    record_all: true,
                    ..Default::default()
                },
            )
            .unwrap();
            let traj = sol.trajectory.unwrap();
            assert_eq!(traj.len(), 321);
            for (w, &z) in traj.windows(2).zip(&path.z) {
                let a = (p.mu * k + (p.rho * k).sqrt() * z) / (2.0 * h);
                let d = ((1.0 - p.rho) * k + p.rho * k * z * z) / (2.0 * h * h);
                let v = &w[0].values;
                let flux = h * (v[0] * (d - a) + v[v.len() - 1] * (d + a));
                let change = w[1].mass(&g) - w[0].mass(&g);
                assert!((change + flux).abs() < 1e-13, "{change} vs {flux}");
            }
        }
    }

    #[test]
    fn mass_stays_below_one_away_from_the_boundary() {
        let p = ModelParams::reference();
        let g = GridSpec::new(0.0, 16.0, 0.4, 0.25 / 16.0).unwrap();
        let ic = InitialCondition::PointMass { x0: 5.0 };
        for s in 0..5 {
            let path = generate_fine_path(SeedSpec::new(3, 0, s), 320, g.k()).unwrap();
            let sol = solve_path(
                &g,
                &p,
                &ic,
                &path,
                &SolveOptions {
                    record_all: true,
                    ..Default::default()
                },
            )
            .unwrap();
            let traj = sol.trajectory.unwrap();
            assert_eq!(traj.len(), 321);
            for st in &traj {
                let m = st.mass(&g);
                assert!((0.0..=1.0 + 1e-6).contains(&m), "mass {m}");
            }
        }
    }

    #[test]
    fn monitoring_fires_only_on_dates() {
        let p = ModelParams::reference();
        let g = GridSpec::new(-4.0, 16.0, 0.5, 1.0 / 64.0).unwrap();
        let ic = InitialCondition::PointMass { x0: 0.75 };
        let path = generate_fine_path(SeedSpec::new(11, 0, 0), 64, g.k()).unwrap();
        let with = solve_path(
            &g,
            &p,
            &ic,
            &path,
            &SolveOptions {
                monitoring: Monitoring::Dates(vec![0.25, 0.5, 0.75, 1.0]),
                observation_times: vec![0.125, 0.25],
                ..Default::default()
            },
        )
        .unwrap();
        let without = solve_path(
            &g,
            &p,
            &ic,
            &path,
            &SolveOptions {
                observation_times: vec![0.125, 0.25],
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(with.observations[0], without.observations[0]);
        let zero = g.zero_node().unwrap();
        let o = &with.observations[1];
        assert!(o.values[..zero - 1].iter().all(|&v| v == 0.0));
        assert!(o.mass(&g) < without.observations[1].mass(&g));
    }

    #[test]
    fn configuration_errors() {
        let p = ModelParams::reference();
        let g = GridSpec::new(0.0, 16.0, 1.6, 0.25).unwrap();
        let ic = InitialCondition::PointMass { x0: 5.0 };
        let path = generate_fine_path(SeedSpec::new(1, 0, 0), 20, 0.25).unwrap();
        let off_grid = SolveOptions {
            monitoring: Monitoring::Dates(vec![0.3]),
            ..Default::default()
        };
        assert!(matches!(
            solve_path(&g, &p, &ic, &path, &off_grid),
            Err(Error::Config(_))
        ));
        let late = SolveOptions {
            observation_times: vec![6.0],
            ..Default::default()
        };
        assert!(matches!(
            solve_path(&g, &p, &ic, &path, &late),
            Err(Error::LengthMismatch { .. })
        ));
        let wrong_k = coarsen_path(&path, 4).unwrap();
        assert!(solve_path(&g, &p, &ic, &wrong_k, &SolveOptions::default()).is_err());
        let unaligned = GridSpec::new(-5.0, 16.0, 1.5, 0.25).unwrap();
        let disc = SolveOptions {
            monitoring: Monitoring::Dates(vec![0.25]),
            ..Default::default()
        };
        assert!(matches!(
            solve_path(&unaligned, &p, &ic, &path, &disc),
            Err(Error::Config(_))
        ));
    }
}
