//! Mean-square stability of the explicit Milstein scheme.
//!
//! A Fourier mode `exp(i j theta)` is multiplied each step by
//! `a(theta) + b(theta) Z + c(theta) Z^2`; its second moment grows by
//! `S(theta) = |a + c|^2 + |b|^2 + 2|c|^2`. The matrix form on a bounded grid
//! has a symmetric operator `M` whose eigenpairs are `(S(theta_m), sin(j theta_m))`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fdcore::ModelParams;

/// Per-step amplification polynomial coefficients of one Fourier mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierSymbol {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl FourierSymbol {
    /// Multiplier for a given normal draw.
    pub fn multiplier(&self, z: f64) -> Complex64 {
        self.a + self.b * z + self.c * (z * z)
    }

    /// `E|a + bZ + cZ^2|^2` for standard normal `Z`.
    pub fn ms_amplification(&self) -> f64 {
        (self.a + self.c).norm_sqr() + self.b.norm_sqr() + 2.0 * self.c.norm_sqr()
    }
}

pub fn fourier_symbols(theta: f64, params: &ModelParams, h: f64, k: f64) -> FourierSymbol {
    let s2 = (0.5 * theta).sin().powi(2);
    let sn = theta.sin();
    let lam = k / (h * h);
    FourierSymbol {
        a: Complex64::new(
            1.0 - 2.0 * (1.0 - params.rho) * lam * s2,
            -params.mu * k / h * sn,
        ),
        b: Complex64::new(0.0, -(params.rho * k).sqrt() / h * sn),
        c: Complex64::new(-2.0 * params.rho * lam * s2, 0.0),
    }
}

pub fn ms_amplification(theta: f64, params: &ModelParams, h: f64, k: f64) -> f64 {
    fourier_symbols(theta, params, h, k).ms_amplification()
}

/// Outcome of the two-condition mean-square stability test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityCheck {
    pub stable: bool,
    /// `mu^2 k / (1 - rho)`; stable needs `<= 1`.
    pub margin_drift: f64,
    /// `(k / h^2)(1 + 2 rho^2)`; stable needs `<= 1`.
    pub margin_mesh: f64,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn check_stability(params: &ModelParams, h: f64, k: f64) -> StabilityCheck {
    let drift_lhs = params.mu * params.mu * k;
    let drift_rhs = 1.0 - params.rho;
    let mesh_lhs = k / (h * h);
    let mesh_rhs = 1.0 / (1.0 + 2.0 * params.rho * params.rho);
    StabilityCheck {
        stable: drift_lhs <= drift_rhs && mesh_lhs <= mesh_rhs,
        margin_drift: ratio(drift_lhs, drift_rhs),
        margin_mesh: ratio(mesh_lhs, mesh_rhs),
    }
}

/// `S` sampled on `n` equispaced angles covering `[-pi, pi]`.
pub fn stability_scan(params: &ModelParams, h: f64, k: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let theta = -PI + 2.0 * PI * i as f64 / (n - 1) as f64;
            (theta, ms_amplification(theta, params, h, k))
        })
        .collect()
}

/// Largest `S(theta)` over a dense scan plus the analytic extremum candidates
/// (`0`, `pi`, and the interior stationary point of the quadratic in
/// `sin^2(theta/2)`). Returns `(theta, S)`.
pub fn sup_amplification(params: &ModelParams, h: f64, k: f64, n: usize) -> (f64, f64) {
    let lam = k / (h * h);
    let m = (params.mu * k / h).powi(2);
    let lin = lam - m - params.rho * lam;
    let quad = m + params.rho * lam - (1.0 + 2.0 * params.rho * params.rho) * lam * lam;
    let mut candidates = vec![0.0, PI];
    if quad != 0.0 {
        let s = -lin / (2.0 * quad);
        if s > 0.0 && s < 1.0 {
            candidates.push(2.0 * s.sqrt().asin());
        }
    }
    stability_scan(params, h, k, n)
        .into_iter()
        .chain(
            candidates
                .into_iter()
                .map(|t| (t, ms_amplification(t, params, h, k))),
        )
        .fold((0.0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
}

/// Difference matrices and the mean-square operator on `J - 1` interior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityMatrices {
    /// Central first difference (anti-symmetric).
    pub d1: DMatrix<f64>,
    /// Central second difference.
    pub d2: DMatrix<f64>,
    /// Second difference with doubled span, odd reflection at the ends (corners -3).
    pub d3: DMatrix<f64>,
    /// Zero except 2 in the first diagonal corner.
    pub corner_first: DMatrix<f64>,
    /// Zero except 2 in the last diagonal corner.
    pub corner_last: DMatrix<f64>,
    /// Symmetric operator with `E[V'^T V'] = E[V^T M V] - boundary corrections`.
    pub m: DMatrix<f64>,
    pub e1: f64,
    pub e2: f64,
}

pub fn build_stability_matrices(
    intervals: usize,
    params: &ModelParams,
    h: f64,
    k: f64,
) -> Result<StabilityMatrices> {
    if intervals < 3 {
        return Err(Error::Config(format!(
            "matrix analysis needs J >= 3, got {intervals}"
        )));
    }
    let n = intervals - 1;
    let d1 = DMatrix::from_fn(n, n, |i, j| match j as isize - i as isize {
        1 => 1.0,
        -1 => -1.0,
        _ => 0.0,
    });
    let d2 = DMatrix::from_fn(n, n, |i, j| match (j as isize - i as isize).abs() {
        0 => -2.0,
        1 => 1.0,
        _ => 0.0,
    });
    let d3 = DMatrix::from_fn(n, n, |i, j| match (j as isize - i as isize).abs() {
        0 if i == 0 || i == n - 1 => -3.0,
        0 => -2.0,
        2 => 1.0,
        _ => 0.0,
    });
    let mut corner_first = DMatrix::zeros(n, n);
    corner_first[(0, 0)] = 2.0;
    let mut corner_last = DMatrix::zeros(n, n);
    corner_last[(n - 1, n - 1)] = 2.0;

    let (mu, rho) = (params.mu, params.rho);
    let lam = k / (h * h);
    let d2sq = &d2 * &d2;
    let m =
        DMatrix::identity(n, n) + &d2 * lam + d2sq * ((1.0 + 2.0 * rho * rho) * lam * lam / 4.0)
            - &d3 * (rho * k / (4.0 * h * h) + mu * mu * k * k / (4.0 * h * h));
    Ok(StabilityMatrices {
        d1,
        d2,
        d3,
        corner_first,
        corner_last,
        m,
        e1: rho * k / (2.0 * h * h) + mu * mu * k * k / (2.0 * h * h),
        e2: mu * k * k / (2.0 * h.powi(3)),
    })
}

/// `(A + C)^T (A + C) + B^T B + 2 C^T C` built directly from the step matrices
/// `A = I - (mu k/2h) D1 + ((1-rho)k/2h^2) D2`, `B = -(sqrt(rho k)/2h) D1`,
/// `C = (rho k/2h^2) D2`.
pub fn mean_square_operator(
    intervals: usize,
    params: &ModelParams,
    h: f64,
    k: f64,
) -> Result<DMatrix<f64>> {
    let mats = build_stability_matrices(intervals, params, h, k)?;
    let n = intervals - 1;
    let id = DMatrix::<f64>::identity(n, n);
    let a = &id - &mats.d1 * (params.mu * k / (2.0 * h))
        + &mats.d2 * ((1.0 - params.rho) * k / (2.0 * h * h));
    let b = &mats.d1 * (-(params.rho * k).sqrt() / (2.0 * h));
    let c = &mats.d2 * (params.rho * k / (2.0 * h * h));
    let ac = &a + &c;
    Ok(ac.transpose() * &ac + b.transpose() * &b + (c.transpose() * &c) * 2.0)
}

/// Largest relative residual `|M w - S(theta_m) w|_inf / |w|_inf` over the
/// claimed eigenvectors `w_j = sin(j theta_m)`, `theta_m = m pi / J`.
pub fn verify_matrix_eigenstructure(
    intervals: usize,
    params: &ModelParams,
    h: f64,
    k: f64,
) -> Result<f64> {
    let mats = build_stability_matrices(intervals, params, h, k)?;
    let n = intervals - 1;
    let mut worst: f64 = 0.0;
    for mode in 1..intervals {
        let theta = mode as f64 * PI / intervals as f64;
        let w = DVector::from_fn(n, |i, _| ((i + 1) as f64 * theta).sin());
        let s = ms_amplification(theta, params, h, k);
        let resid = &mats.m * &w - &w * s;
        worst = worst.max(resid.amax() / w.amax());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::reference()
    }

    /// Closed form of S as a quadratic in s = sin^2(theta/2).
    fn closed_form(theta: f64, p: &ModelParams, h: f64, k: f64) -> f64 {
        let s = (0.5 * theta).sin().powi(2);
        let lam = k / (h * h);
        let m = (p.mu * k / h).powi(2);
        1.0 - 4.0
            * s
            * (lam - (1.0 + 2.0 * p.rho * p.rho) * lam * lam * s - (m + p.rho * lam) * (1.0 - s))
    }

    #[test]
    fn symbols_at_zero_and_pi() {
        let p = params();
        let s0 = fourier_symbols(0.0, &p, 1.6, 0.25);
        assert_eq!(s0.a, Complex64::new(1.0, 0.0));
        assert_eq!(s0.b.norm(), 0.0);
        assert_eq!(s0.c.norm(), 0.0);
        assert_eq!(ms_amplification(0.0, &p, 1.6, 0.25), 1.0);

        let p0 = p.with_mu(0.0).unwrap();
        let (h, k) = (0.5, 0.1);
        let lam = k / (h * h);
        let sp = fourier_symbols(PI, &p0, h, k);
        assert!((sp.a.re - (1.0 - 2.0 * (1.0 - p0.rho) * lam)).abs() < 1e-15);
        assert!(sp.a.im.abs() < 1e-15);
        assert!(sp.b.norm() < 1e-15);
        assert!((sp.c.re + 2.0 * p0.rho * lam).abs() < 1e-15);
    }

    #[test]
    fn rho_zero_gives_ftcs_factor() {
        let p = params().with_rho(0.0).unwrap();
        for theta in [0.3, 1.1, 2.9] {
            let s = fourier_symbols(theta, &p, 0.5, 0.05);
            assert_eq!(s.b.norm(), 0.0);
            assert_eq!(s.c.norm(), 0.0);
            let lam = 0.05 / 0.25;
            let ftcs = Complex64::new(
                1.0 - 4.0 * lam * 0.5 * (0.5 * theta).sin().powi(2) * 1.0,
                -p.mu * 0.05 / 0.5 * theta.sin(),
            );
            assert!((s.a - ftcs).norm() < 1e-15);
        }
    }

    #[test]
    fn amplification_matches_closed_form_and_is_even() {
        let p = params();
        for i in 0..200 {
            let theta = -PI + 2.0 * PI * i as f64 / 199.0;
            let s = ms_amplification(theta, &p, 0.8, 0.0625);
            assert!((s - closed_form(theta, &p, 0.8, 0.0625)).abs() < 1e-14);
            assert!((s - ms_amplification(-theta, &p, 0.8, 0.0625)).abs() < 1e-15);
        }
    }

    #[test]
    fn binding_mode_at_mesh_limit() {
        let rho = 0.2;
        let p = params().with_rho(rho).unwrap().with_mu(0.0).unwrap();
        let h = 0.5;
        let k = h * h / (1.0 + 2.0 * rho * rho);
        assert!((ms_amplification(PI, &p, h, k) - 1.0).abs() < 1e-14);
        let k_over = 1.1 * h * h / (1.0 + 2.0 * rho * rho);
        assert!(ms_amplification(PI, &p, h, k_over) > 1.0);
    }

    #[test]
    fn pricing_grid_is_stable() {
        let c = check_stability(&params(), 8.0 / 5.0, 0.25);
        assert!(c.stable);
        // k/h^2 = 0.09765625, limit 1/1.08
        assert!((c.margin_mesh - 0.097_656_25 * 1.08).abs() < 1e-12);
    }

    #[test]
    fn drift_boundary_is_inclusive() {
        let rho: f64 = 0.5;
        let k = 0.01;
        let mu = ((1.0 - rho) / k).sqrt();
        let p = ModelParams::new(mu, rho, 1.0, 0.0).unwrap();
        let c = check_stability(&p, 1.0, k);
        assert!((c.margin_drift - 1.0).abs() < 1e-12);
        let p = ModelParams::new(mu * (1.0 - 1e-12), rho, 1.0, 0.0).unwrap();
        assert!(check_stability(&p, 1.0, k).stable);
        let p = ModelParams::new(0.3, 1.0, 1.0, 0.0).unwrap();
        let c = check_stability(&p, 1.0, 0.01);
        assert!(!c.stable);
        assert!(c.margin_drift.is_infinite());
    }

    #[test]
    fn scan_agrees_with_conditions() {
        let p = params();
        for &(h, lam) in &[(0.5, 0.5), (1.0, 0.9), (0.25, 0.95), (1.6, 1.0), (0.8, 0.2)] {
            let k = lam * h * h;
            let check = check_stability(&p, h, k);
            let (_, sup) = sup_amplification(&p, h, k, 10_000);
            assert_eq!(
                check.stable,
                sup <= 1.0 + 1e-14,
                "h={h} lam={lam} sup={sup}"
            );
        }
        // drift condition violated on its own
        let p = ModelParams::new(5.0, 0.2, 1.0, 0.0).unwrap();
        let (h, k) = (4.0, 0.1);
        let c = check_stability(&p, h, k);
        assert!(c.margin_mesh < 1.0 && c.margin_drift > 1.0);
        assert!(sup_amplification(&p, h, k, 10_000).1 > 1.0);
    }

    #[test]
    fn paper_matrix_displays_for_j6() {
        let m = build_stability_matrices(6, &params(), 1.6, 0.25).unwrap();
        #[rustfmt::skip]
        let d1 = DMatrix::from_row_slice(5, 5, &[
             0.0,  1.0,  0.0,  0.0, 0.0,
            -1.0,  0.0,  1.0,  0.0, 0.0,
             0.0, -1.0,  0.0,  1.0, 0.0,
             0.0,  0.0, -1.0,  0.0, 1.0,
             0.0,  0.0,  0.0, -1.0, 0.0,
        ]);
        #[rustfmt::skip]
        let d2 = DMatrix::from_row_slice(5, 5, &[
            -2.0,  1.0,  0.0,  0.0,  0.0,
             1.0, -2.0,  1.0,  0.0,  0.0,
             0.0,  1.0, -2.0,  1.0,  0.0,
             0.0,  0.0,  1.0, -2.0,  1.0,
             0.0,  0.0,  0.0,  1.0, -2.0,
        ]);
        #[rustfmt::skip]
        let d3 = DMatrix::from_row_slice(5, 5, &[
            -3.0,  0.0,  1.0,  0.0,  0.0,
             0.0, -2.0,  0.0,  1.0,  0.0,
             1.0,  0.0, -2.0,  0.0,  1.0,
             0.0,  1.0,  0.0, -2.0,  0.0,
             0.0,  0.0,  1.0,  0.0, -3.0,
        ]);
        assert_eq!(m.d1, d1);
        assert_eq!(m.d2, d2);
        assert_eq!(m.d3, d3);
    }

    #[test]
    fn difference_matrix_identities() {
        for j in 6..=64 {
            let m = build_stability_matrices(j, &params(), 1.0, 0.1).unwrap();
            assert_eq!(m.d1.transpose(), -&m.d1);
            assert_eq!(m.d2.transpose(), m.d2);
            assert_eq!(m.d3.transpose(), m.d3);
            let comm = &m.d1 * &m.d2 - &m.d2 * &m.d1;
            assert_eq!(comm, &m.corner_first - &m.corner_last);
            assert_eq!(&m.d1 * &m.d1, &m.d3 + &m.corner_first + &m.corner_last);
        }
    }

    #[test]
    fn operator_equals_direct_product_up_to_corner_terms() {
        for (j, h, k) in [(6, 1.6, 0.25), (16, 1.0, 0.3), (33, 0.5, 0.01)] {
            let p = params();
            let mats = build_stability_matrices(j, &p, h, k).unwrap();
            let q = mean_square_operator(j, &p, h, k).unwrap();
            let mut expect = mats.m.clone();
            let n = j - 1;
            expect[(0, 0)] -= mats.e1 - mats.e2;
            expect[(n - 1, n - 1)] -= mats.e1 + mats.e2;
            let diff = (&q - &expect).amax();
            assert!(diff < 1e-13, "J={j}: {diff}");
            assert_eq!(mats.m.transpose(), mats.m);
        }
    }

    #[test]
    fn eigenvectors_are_sine_modes() {
        let p = params();
        for j in [6, 16, 64] {
            let err = verify_matrix_eigenstructure(j, &p, 1.6, 0.25).unwrap();
            assert!(err <= 1e-12, "J={j}: {err}");
        }
        assert!(build_stability_matrices(2, &p, 1.0, 0.1).is_err());
    }

    #[test]
    fn deterministic_eigenvalues_are_a_squared() {
        let p = params().with_rho(0.0).unwrap().with_mu(0.0).unwrap();
        let (j, h, k) = (12, 0.5, 0.05);
        let mats = build_stability_matrices(j, &p, h, k).unwrap();
        for mode in 1..j {
            let theta = mode as f64 * PI / j as f64;
            let a = fourier_symbols(theta, &p, h, k).a;
            let w = DVector::from_fn(j - 1, |i, _| ((i + 1) as f64 * theta).sin());
            let mw = &mats.m * &w;
            let a2 = a.norm_sqr();
            assert!((mw - &w * a2).amax() < 1e-13);
        }
    }

    #[test]
    fn boundary_corrections_positive_in_the_limit() {
        let p = params();
        let lam = 0.5;
        let mut h = 1.0;
        let mut last = None;
        for _ in 0..8 {
            let m = build_stability_matrices(8, &p, h, lam * h * h).unwrap();
            last = Some((m.e1 - m.e2, m.e1 + m.e2));
            h /= 2.0;
        }
        let (lo, hi) = last.unwrap();
        assert!(lo > 0.0 && hi > 0.0);
    }

    /// One solver step applied to `cos(j theta)` and `sin(j theta)` reproduces
    /// the symbol at interior nodes, and the sample mean of `|g|^2` matches `S`.
    #[test]
    fn solver_step_matches_symbol() {
        use crate::fdcore::{milstein_step_tridiagonal, GridSpec, SolverState};
        use crate::paths::{generate_fine_path, SeedSpec};

        let p = params();
        let (h, k) = (1.6, 0.25);
        let grid = GridSpec::with_intervals(0.0, 40, h, k).unwrap();
        let j = 20;
        let theta = 0.9;
        let mode = |f: fn(f64) -> f64| SolverState {
            values: (1..40).map(|i| f(i as f64 * theta)).collect(),
            time_index: 0,
        };
        let (vc, vs) = (mode(f64::cos), mode(f64::sin));
        let zs = generate_fine_path(SeedSpec::new(11, 0, 0), 20_000, k)
            .unwrap()
            .z;
        let phase = Complex64::from_polar(1.0, j as f64 * theta);
        let sym = fourier_symbols(theta, &p, h, k);
        let mut sq = Vec::with_capacity(zs.len());
        for &z in &zs {
            let c = milstein_step_tridiagonal(&vc, z, &p, &grid)
                .unwrap()
                .node_value(j);
            let s = milstein_step_tridiagonal(&vs, z, &p, &grid)
                .unwrap()
                .node_value(j);
            let g = Complex64::new(c, s) / phase;
            assert!((g - sym.multiplier(z)).norm() < 1e-13);
            sq.push(g.norm_sqr());
        }
        let n = sq.len() as f64;
        let mean = sq.iter().sum::<f64>() / n;
        let sd = (sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!(
            (mean - sym.ms_amplification()).abs() < 3.0 * sd,
            "{mean} vs {}",
            sym.ms_amplification()
        );
    }
}
