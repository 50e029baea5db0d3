//! Reproducible Brownian drivers.
//!
//! Every sample owns an independent ChaCha stream whose key is derived from
//! `(experiment_seed, level, sample_index)`. Stream 0 of that key drives the
//! common factor; streams `1..` are handed out to per-firm idiosyncratic noise.
//! Nothing here is shared or mutable across samples, so results never depend
//! on how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Identifies the random stream of one Monte Carlo sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub experiment_seed: u64,
    pub level: u32,
    pub sample_index: u64,
}

impl SeedSpec {
    pub fn new(experiment_seed: u64, level: u32, sample_index: u64) -> Self {
        Self {
            experiment_seed,
            level,
            sample_index,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut state = splitmix64(self.experiment_seed ^ 0x5350_4445_4d4c_4d43);
        state = splitmix64(state ^ u64::from(self.level).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        state = splitmix64(state ^ self.sample_index);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        key
    }

    /// Generator for sub-stream `stream` of this sample.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(stream);
        rng
    }

    /// Generator for the idiosyncratic noise of firm `firm`.
    pub fn firm_rng(&self, firm: u64) -> ChaCha8Rng {
        self.rng(firm + 1)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal draws `Z_n` for one path; the Brownian increments are `sqrt(k) Z_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    /// Level of the sample that generated the path.
    pub level: u32,
    /// Timestep the draws belong to.
    pub k: f64,
    pub z: Vec<f64>,
}

impl BrownianPath {
    pub fn new(level: u32, k: f64, z: Vec<f64>) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Config(format!("timestep must be positive, got {k}")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite normal draw in path".into()));
        }
        Ok(Self { level, k, z })
    }

    pub fn n_steps(&self) -> usize {
        self.z.len()
    }

    /// Brownian value at the end of the path, `M_T = sqrt(k) sum Z_n`.
    pub fn endpoint(&self) -> f64 {
        self.k.sqrt() * self.z.iter().sum::<f64>()
    }

    /// Brownian value after `n` steps.
    pub fn value_at(&self, n: usize) -> f64 {
        self.k.sqrt() * self.z[..n].iter().sum::<f64>()
    }
}

/// Fine-level path of one sample: `n_steps` draws from stream 0 of `seed`.
pub fn generate_fine_path(seed: SeedSpec, n_steps: usize, k: f64) -> Result<BrownianPath> {
    if n_steps == 0 {
        return Err(Error::Config("a path needs at least one step".into()));
    }
    let mut rng = seed.rng(0);
    let z = (0..n_steps).map(|_| rng.sample(StandardNormal)).collect();
    BrownianPath::new(seed.level, k, z)
}

/// Coarse path with timestep `time_ratio * k` whose increments are block sums
/// of the fine increments, so both paths share the same Brownian motion.
pub fn coarsen_path(fine: &BrownianPath, time_ratio: usize) -> Result<BrownianPath> {
    if time_ratio == 0 || !fine.n_steps().is_multiple_of(time_ratio) {
        return Err(Error::Config(format!(
            "time ratio {time_ratio} does not divide {} steps",
            fine.n_steps()
        )));
    }
    let scale = 1.0 / (time_ratio as f64).sqrt();
    let z = fine
        .z
        .chunks_exact(time_ratio)
        .map(|block| block.iter().sum::<f64>() * scale)
        .collect();
    Ok(BrownianPath {
        level: fine.level,
        k: fine.k * time_ratio as f64,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn moments(z: &[f64]) -> (f64, f64) {
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn deterministic_per_seed() {
        let s = SeedSpec::new(42, 3, 17);
        let a = generate_fine_path(s, 64, 0.01).unwrap();
        let b = generate_fine_path(s, 64, 0.01).unwrap();
        assert_eq!(a, b);
        let c = generate_fine_path(SeedSpec::new(42, 3, 18), 64, 0.01).unwrap();
        assert_ne!(a.z, c.z);
        let d = generate_fine_path(SeedSpec::new(42, 2, 17), 64, 0.01).unwrap();
        assert_ne!(a.z, d.z);
        let e = generate_fine_path(SeedSpec::new(43, 3, 17), 64, 0.01).unwrap();
        assert_ne!(a.z, e.z);
    }

    #[test]
    fn prefix_stable() {
        let s = SeedSpec::new(1, 0, 0);
        let a = generate_fine_path(s, 10, 0.1).unwrap();
        let b = generate_fine_path(s, 40, 0.1).unwrap();
        assert_eq!(a.z[..], b.z[..10]);
    }

    #[test]
    fn normal_moments() {
        let p = generate_fine_path(SeedSpec::new(7, 0, 0), 1_000_000, 1.0).unwrap();
        let (mean, var) = moments(&p.z);
        assert!(mean.abs() < 4.0 / 1000.0, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn streams_uncorrelated() {
        let n = 100_000;
        let a = generate_fine_path(SeedSpec::new(7, 1, 0), n, 1.0).unwrap();
        let b = generate_fine_path(SeedSpec::new(7, 1, 1), n, 1.0).unwrap();
        let corr = a.z.iter().zip(&b.z).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(corr.abs() < 0.02, "corr {corr}");
        // firm streams of one sample are distinct from the market stream
        let s = SeedSpec::new(7, 1, 0);
        let mut m = s.rng(0);
        let mut f = s.firm_rng(0);
        let corr = (0..n)
            .map(|_| m.sample::<f64, _>(StandardNormal) * f.sample::<f64, _>(StandardNormal))
            .sum::<f64>()
            / n as f64;
        assert!(corr.abs() < 0.02, "corr {corr}");
    }

    #[test]
    fn coarsen_block_sum() {
        let fine = BrownianPath::new(1, 0.25, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let coarse = coarsen_path(&fine, 4).unwrap();
        assert_eq!(coarse.z, vec![2.0]);
        assert_eq!(coarse.k, 1.0);
        let zero = BrownianPath::new(1, 0.25, vec![0.0; 16]).unwrap();
        assert!(coarsen_path(&zero, 4).unwrap().z.iter().all(|&v| v == 0.0));
        assert!(coarsen_path(&fine, 3).is_err());
        assert!(generate_fine_path(SeedSpec::new(0, 0, 0), 0, 0.1).is_err());
    }

    #[test]
    fn coarse_draws_are_standard_normal() {
        let fine = generate_fine_path(SeedSpec::new(9, 0, 0), 1_600_000, 1.0).unwrap();
        let coarse = coarsen_path(&fine, 4).unwrap();
        let (mean, var) = moments(&coarse.z);
        assert!(mean.abs() < 4.0 / 400_000f64.sqrt());
        assert!((var - 1.0).abs() < 0.015, "var {var}");
    }

    proptest! {
        #[test]
        fn coarsening_preserves_endpoint(seed in any::<u64>(), blocks in 1usize..20) {
            let fine = generate_fine_path(SeedSpec::new(seed, 4, 0), 16 * blocks, 1.0 / 256.0).unwrap();
            let c4 = coarsen_path(&fine, 4).unwrap();
            let c44 = coarsen_path(&c4, 4).unwrap();
            let c16 = coarsen_path(&fine, 16).unwrap();
            prop_assert!((c44.endpoint() - c16.endpoint()).abs() < 1e-12);
            prop_assert!((c4.endpoint() - fine.endpoint()).abs() < 1e-12);
            prop_assert!((c16.endpoint() - fine.endpoint()).abs() < 1e-12);
        }
    }
}
