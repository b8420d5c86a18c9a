//! Finite-mode additive forcing `Phi dW = sum_k sigma_k d beta_k`.
//!
//! The modes are Fourier pairs `gamma_k sqrt(2) cos(2 pi k x)`,
//! `gamma_k sqrt(2) sin(2 pi k x)` with `gamma_k = A k^(-p)`; this basis is
//! a construction of this crate, any square-summable family would do.
//! Gaussian increments come from counter-based streams keyed by
//! `(master seed, path, step)`, drawn in mode order, so a path is
//! reproducible regardless of how an ensemble is scheduled.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SvwError};
use crate::grid::{Field, Grid, Mollifier};

#[derive(Debug, Clone)]
pub struct NoiseModel {
    grid: Grid,
    pairs: usize,
    amplitude: f64,
    decay: f64,
    eps: Option<f64>,
    sigma: Vec<Field>,
    sigma_eps: Vec<Field>,
    q: Field,
    q_eps: Field,
    q0: f64,
}

impl NoiseModel {
    /// Builds `2 * pairs` modes; `eps` selects the mollified family used by
    /// the regularized system (`None` leaves it equal to the raw family).
    pub fn build(grid: Grid, pairs: usize, amplitude: f64, decay: f64, eps: Option<f64>) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(SvwError::InvalidParameter(format!("noise amplitude must be >= 0, got {amplitude}")));
        }
        if !(decay >= 3.0) {
            return Err(SvwError::InvalidParameter(format!("noise decay exponent must be >= 3, got {decay}")));
        }
        let mollifier = eps.map(|e| Mollifier::new(grid, e)).transpose()?;
        let mut sigma = Vec::with_capacity(2 * pairs);
        let mut q0 = 0.0;
        for k in 1..=pairs {
            let gamma = Self::gamma(amplitude, decay, k);
            let freq = 2.0 * PI * k as f64;
            sigma.push(Field::from_fn(grid, |x| gamma * SQRT_2 * (freq * x).cos()));
            sigma.push(Field::from_fn(grid, |x| gamma * SQRT_2 * (freq * x).sin()));
            // Squared W^{1,inf} norm (sup |f| + sup |f'|)^2 of each mode of the pair.
            q0 += 2.0 * (gamma * SQRT_2 * (1.0 + freq)).powi(2);
        }
        let sigma_eps: Vec<Field> = match &mollifier {
            Some(m) => sigma.iter().map(|s| m.apply(s)).collect(),
            None => sigma.clone(),
        };
        let q = sum_of_squares(grid, &sigma);
        let q_eps = sum_of_squares(grid, &sigma_eps);
        Ok(Self { grid, pairs, amplitude, decay, eps, sigma, sigma_eps, q, q_eps, q0 })
    }

    pub fn zero(grid: Grid) -> Self {
        Self::build(grid, 0, 0.0, 3.0, None).expect("empty noise model is valid")
    }

    #[inline]
    pub fn gamma(amplitude: f64, decay: f64, k: usize) -> f64 {
        amplitude * (k as f64).powf(-decay)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn mode_count(&self) -> usize {
        self.sigma.len()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    pub fn is_silent(&self) -> bool {
        self.sigma.is_empty() || self.amplitude == 0.0
    }

    pub fn sigma(&self) -> &[Field] {
        &self.sigma
    }

    pub fn sigma_eps(&self) -> &[Field] {
        &self.sigma_eps
    }

    /// Mode family driving the given system.
    pub fn modes(&self, regularized: bool) -> &[Field] {
        if regularized {
            &self.sigma_eps
        } else {
            &self.sigma
        }
    }

    pub fn q(&self) -> &Field {
        &self.q
    }

    pub fn q_eps(&self) -> &Field {
        &self.q_eps
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    /// `int q dx` (or `int q^eps dx`) for the given system.
    pub fn q_integral(&self, regularized: bool) -> f64 {
        if regularized {
            self.q_eps.integral()
        } else {
            self.q.integral()
        }
    }

    /// Relative size of the truncated tail `sum_{k>K}` against the retained
    /// head in the squared `W^{1,inf}` norm.
    pub fn tail_ratio(&self) -> f64 {
        let term = |k: usize| {
            let g = Self::gamma(self.amplitude, self.decay, k);
            4.0 * g * g * (1.0 + 2.0 * PI * k as f64).powi(2)
        };
        let head: f64 = (1..=self.pairs).map(term).sum();
        let tail: f64 = (self.pairs + 1..self.pairs + 100_000).map(term).sum();
        if head == 0.0 {
            if tail == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            tail / head
        }
    }

    /// Forcing field `sum_k sigma_k Delta beta_k` for the chosen family.
    pub fn forcing(&self, increments: &ModeIncrements, regularized: bool) -> Field {
        let mut out = Field::zeros(self.grid);
        for (mode, db) in self.modes(regularized).iter().zip(&increments.dbeta) {
            for (o, s) in out.values_mut().iter_mut().zip(mode.values()) {
                *o += s * db;
            }
        }
        out
    }

    /// Draws the increments for one step and returns them with the forcing
    /// field they produce.
    pub fn sample_increment(
        &self,
        dt: f64,
        stream: &PathStream,
        step: u64,
        regularized: bool,
    ) -> Result<(ModeIncrements, Field)> {
        if !(dt > 0.0) {
            return Err(SvwError::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let increments = stream.increments(step, self.mode_count(), dt);
        let field = self.forcing(&increments, regularized);
        Ok((increments, field))
    }
}

fn sum_of_squares(grid: Grid, modes: &[Field]) -> Field {
    let mut q = Field::zeros(grid);
    for m in modes {
        for (acc, v) in q.values_mut().iter_mut().zip(m.values()) {
            *acc += v * v;
        }
    }
    q
}

/// Brownian increments of every mode over one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeIncrements {
    pub dbeta: Vec<f64>,
    pub dt: f64,
}

impl ModeIncrements {
    pub fn zero(modes: usize, dt: f64) -> Self {
        Self { dbeta: vec![0.0; modes], dt }
    }
}

/// Counter-based Gaussian stream owned by one ensemble path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStream {
    master_seed: u64,
    path: u64,
}

impl PathStream {
    pub fn new(master_seed: u64, path: u64) -> Self {
        Self { master_seed, path }
    }

    pub fn path(&self) -> u64 {
        self.path
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        let words = [
            splitmix64(self.master_seed),
            splitmix64(self.path ^ 0x5851_f42d_4c95_7f2d),
            splitmix64(self.master_seed.rotate_left(17) ^ self.path),
            0x243f_6a88_85a3_08d3,
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        key
    }

    /// Standard normals for `(step, mode)`, `mode = 0..modes`, scaled by `sqrt(dt)`.
    pub fn increments(&self, step: u64, modes: usize, dt: f64) -> ModeIncrements {
        if modes == 0 {
            return ModeIncrements::zero(0, dt);
        }
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(step);
        let scale = dt.sqrt();
        let dbeta = (0..modes)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        ModeIncrements { dbeta, dt }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        Grid::new(128).unwrap()
    }

    #[test]
    fn empty_family_is_silent() {
        let m = NoiseModel::build(grid(), 0, 0.25, 3.0, Some(0.1)).unwrap();
        assert!(m.q().values().iter().all(|&v| v == 0.0));
        assert_eq!(m.q0(), 0.0);
        let (inc, field) = m.sample_increment(0.01, &PathStream::new(1, 0), 0, true).unwrap();
        assert!(inc.dbeta.is_empty());
        assert!(field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pair_has_flat_variance() {
        let m = NoiseModel::build(grid(), 1, 0.25, 3.0, None).unwrap();
        for &v in m.q().values() {
            assert_abs_diff_eq!(v, 0.125, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_pairs_variance() {
        let m = NoiseModel::build(grid(), 2, 0.25, 3.0, None).unwrap();
        let expected = 2.0 * (0.0625 + 0.0625 / 64.0);
        for &v in m.q().values() {
            assert_abs_diff_eq!(v, expected, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(expected, 0.126953, epsilon = 1e-6);
        assert!(m.q0() >= m.q().integral());
    }

    #[test]
    fn parameter_validation() {
        assert!(NoiseModel::build(grid(), 2, -0.1, 3.0, None).is_err());
        assert!(NoiseModel::build(grid(), 2, 0.1, 2.5, None).is_err());
        let m = NoiseModel::build(grid(), 2, 0.1, 3.0, None).unwrap();
        assert!(m.sample_increment(0.0, &PathStream::new(0, 0), 0, false).is_err());
    }

    #[test]
    fn mollified_modes_are_dominated() {
        let m = NoiseModel::build(grid(), 8, 0.25, 3.0, Some(0.1)).unwrap();
        for (raw, moll) in m.sigma().iter().zip(m.sigma_eps()) {
            assert!(moll.sup_norm() <= raw.sup_norm() * (1.0 + 1e-14));
        }
        let sum_sup: f64 = m.sigma_eps().iter().map(|s| s.sup_norm().powi(2)).sum();
        assert!(sum_sup <= m.q0());
        assert!(m.q0() >= m.q().integral());
        // Default truncation keeps the tail negligible.
        assert!(m.tail_ratio() < 1e-3, "tail ratio {}", m.tail_ratio());
    }

    #[test]
    fn mollified_variance_converges() {
        let g = Grid::new(1024).unwrap();
        let mut previous = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05, 0.025, 0.0125] {
            let m = NoiseModel::build(g, 4, 0.25, 3.0, Some(eps)).unwrap();
            let gap = m.q().zip_map(m.q_eps(), |a, b| a - b).sup_norm();
            assert!(gap < previous);
            previous = gap;
        }
        assert!(previous < 2e-3);
    }

    #[test]
    fn stream_is_reproducible_and_path_distinct() {
        let a = PathStream::new(42, 3).increments(17, 6, 0.01);
        let b = PathStream::new(42, 3).increments(17, 6, 0.01);
        let c = PathStream::new(42, 4).increments(17, 6, 0.01);
        let d = PathStream::new(42, 3).increments(18, 6, 0.01);
        assert_eq!(a, b);
        assert_ne!(a.dbeta, c.dbeta);
        assert_ne!(a.dbeta, d.dbeta);
        // Mode prefix is stable when more modes are requested.
        let longer = PathStream::new(42, 3).increments(17, 10, 0.01);
        assert_eq!(&longer.dbeta[..6], &a.dbeta[..]);
    }

    #[test]
    fn increment_moments() {
        let dt = 0.004;
        let draws = 100_000usize;
        let stream = PathStream::new(2024, 0);
        let samples: Vec<f64> = (0..draws as u64).map(|s| stream.increments(s, 1, dt).dbeta[0]).collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!(mean.abs() <= 4.0 * (dt / draws as f64).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() <= 0.05, "variance ratio {}", var / dt);
    }

    #[test]
    fn pointwise_variance_matches_q_eps() {
        let g = Grid::new(64).unwrap();
        let m = NoiseModel::build(g, 3, 0.4, 3.0, Some(0.1)).unwrap();
        let dt = 0.01;
        let stream = PathStream::new(9, 1);
        let draws = 40_000;
        let x = 17;
        let mut acc = 0.0;
        for step in 0..draws {
            let (_, f) = m.sample_increment(dt, &stream, step, true).unwrap();
            acc += f[x] * f[x];
        }
        let ratio = acc / draws as f64 / (m.q_eps()[x] * dt);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }
}
