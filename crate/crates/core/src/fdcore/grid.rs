use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

/// Uniform space-time mesh: nodes `x_j = x_min + j*h` for `j = 0..=J`, timestep `k`.
///
/// Node 0 and node `J` carry homogeneous Dirichlet data; only the `J - 1`
/// interior values are ever stored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    h: f64,
    k: f64,
    x_min: f64,
    intervals: usize,
}

impl GridSpec {
    /// Builds a grid on `[x_min, x_max]`. The width must be an integer multiple of `h`.
    pub fn new(x_min: f64, x_max: f64, h: f64, k: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!(
                "h and k must be positive, got h={h}, k={k}"
            )));
        }
        if !(x_max > x_min) {
            return Err(Error::Config(format!("empty domain [{x_min}, {x_max}]")));
        }
        let ratio = (x_max - x_min) / h;
        let intervals = ratio.round();
        if (ratio - intervals).abs() > ALIGN_TOL * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "domain width {} is not a multiple of h={h}",
                x_max - x_min
            )));
        }
        Self::with_intervals(x_min, intervals as usize, h, k)
    }

    pub fn with_intervals(x_min: f64, intervals: usize, h: f64, k: f64) -> Result<Self> {
        if intervals < 2 {
            return Err(Error::Config(format!(
                "need at least 2 intervals (one interior node), got {intervals}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) || !(k > 0.0 && k.is_finite()) || !x_min.is_finite() {
            return Err(Error::Config(format!(
                "invalid grid parameters x_min={x_min}, h={h}, k={k}"
            )));
        }
        Ok(Self {
            h,
            k,
            x_min,
            intervals,
        })
    }

    /// Level `level` of the standard hierarchy `h_l = h_0 2^-l`, `k_l = k_0 4^-l`.
    pub fn level(&self, level: usize) -> Self {
        let s = 1usize << level;
        Self {
            h: self.h / s as f64,
            k: self.k / (s * s) as f64,
            x_min: self.x_min,
            intervals: self.intervals * s,
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.intervals as f64 * self.h
    }

    /// Number of grid intervals `J`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of stored unknowns, `J - 1`.
    pub fn interior_len(&self) -> usize {
        self.intervals - 1
    }

    pub fn node(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.h
    }

    /// `k / h^2`, the parabolic mesh ratio.
    pub fn mesh_ratio(&self) -> f64 {
        self.k / (self.h * self.h)
    }

    /// Index `j` with `x_j = 0`, if the origin is a grid node.
    pub fn zero_node(&self) -> Option<usize> {
        let r = -self.x_min / self.h;
        let j = r.round();
        if j >= 0.0 && j <= self.intervals as f64 && (r - j).abs() <= ALIGN_TOL * r.abs().max(1.0) {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Number of timesteps needed to reach `t`, if `t` is on the time grid.
    pub fn steps_to(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Config(format!("invalid time {t}")));
        }
        let r = t / self.k;
        let n = r.round();
        if (r - n).abs() > ALIGN_TOL * r.max(1.0) {
            return Err(Error::Config(format!(
                "time {t} is not a multiple of the timestep k={}",
                self.k
            )));
        }
        Ok(n as usize)
    }
}

/// Coefficients of the drift-diffusion SPDE and of the credit model behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Drift of the distance-to-default, per unit time.
    pub mu: f64,
    /// Weight of the common (market) factor, in `[0, 1]`.
    pub rho: f64,
    /// Firm-value volatility.
    pub sigma: f64,
    /// Risk-free rate.
    pub r: f64,
}

impl ModelParams {
    pub fn new(mu: f64, rho: f64, sigma: f64, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!("rho must lie in [0,1], got {rho}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !mu.is_finite() || !r.is_finite() {
            return Err(Error::Domain("mu and r must be finite".into()));
        }
        Ok(Self { mu, rho, sigma, r })
    }

    /// Structural credit model: distance-to-default drift `(r - sigma^2/2) / sigma`.
    pub fn credit(sigma: f64, rho: f64, r: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Self::new((r - 0.5 * sigma * sigma) / sigma, rho, sigma, r)
    }

    /// Market-calibrated parameter set: sigma = 0.22, rho = 0.2, r = 0.042.
    pub fn reference() -> Self {
        Self::credit(0.22, 0.2, 0.042).expect("reference parameters are valid")
    }

    /// Same parameters with a different correlation weight.
    pub fn with_rho(self, rho: f64) -> Result<Self> {
        Self::new(self.mu, rho, self.sigma, self.r)
    }

    pub fn with_mu(self, mu: f64) -> Result<Self> {
        Self::new(mu, self.rho, self.sigma, self.r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_requires_integral_width() {
        let g = GridSpec::new(-16.0 / 3.0, 16.0, 4.0 / 3.0, 0.25).unwrap();
        assert_eq!(g.intervals(), 16);
        assert!((g.x_max() - 16.0).abs() < 1e-12);
        assert!(GridSpec::new(0.0, 16.0, 3.0, 0.25).is_err());
        assert!(GridSpec::new(0.0, 16.0, -1.0, 0.25).is_err());
        assert!(GridSpec::new(0.0, 16.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn level_hierarchy_keeps_mesh_ratio() {
        let g = GridSpec::new(0.0, 16.0, 1.6, 0.25).unwrap();
        let g3 = g.level(3);
        assert_eq!(g3.intervals(), 80);
        assert!((g3.h() - 0.2).abs() < 1e-15);
        assert!((g3.mesh_ratio() - g.mesh_ratio()).abs() < 1e-12);
        assert!((g3.x_max() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn zero_node_detection() {
        assert_eq!(
            GridSpec::new(-4.0, 16.0, 2.0, 0.25).unwrap().zero_node(),
            Some(2)
        );
        assert_eq!(
            GridSpec::new(0.0, 16.0, 1.6, 0.25).unwrap().zero_node(),
            Some(0)
        );
        assert_eq!(
            GridSpec::new(-16.0 / 3.0, 16.0, 4.0 / 3.0, 0.25)
                .unwrap()
                .zero_node(),
            Some(4)
        );
        assert_eq!(
            GridSpec::new(1.0, 16.0, 1.0, 0.25).unwrap().zero_node(),
            None
        );
    }

    #[test]
    fn steps_to_rejects_off_grid_dates() {
        let g = GridSpec::new(0.0, 16.0, 1.6, 0.25).unwrap().level(2);
        assert_eq!(g.steps_to(0.25).unwrap(), 16);
        assert_eq!(g.steps_to(5.0).unwrap(), 320);
        assert!(g.steps_to(0.01).is_err());
    }

    #[test]
    fn credit_drift() {
        let p = ModelParams::reference();
        assert!((p.mu - (0.042 - 0.5 * 0.22 * 0.22) / 0.22).abs() < 1e-15);
        assert!(ModelParams::credit(0.2, 1.5, 0.0).is_err());
        assert!(ModelParams::credit(0.0, 0.5, 0.0).is_err());
    }
}
