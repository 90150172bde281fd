//! Seeded scalar Wiener paths on a uniform time grid.
//!
//! Increments come from a counter-based generator: the value at index `k` is
//! a pure function of `(seed, replica, k)`, so replicas are independent
//! streams, regeneration is order-insensitive, and Monte Carlo runs are
//! reproducible at any parallelism degree.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct WienerPath {
    pub dt: f64,
    /// Gaussian increments, mean zero, variance `dt`.
    pub increments: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a bijective avalanche mix.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(seed: u64, replica: u64) -> u64 {
    mix64(seed ^ mix64(replica.wrapping_mul(GOLDEN).wrapping_add(0x6A09_E667_F3BC_C909)))
}

/// Uniform draw in the half-open interval (0, 1]; never zero, so logs are safe.
fn uniform_open(key: u64, idx: u64) -> f64 {
    let bits = mix64(key.wrapping_add(idx.wrapping_mul(GOLDEN)));
    ((bits >> 11) + 1) as f64 / (1u64 << 53) as f64
}

/// Standard normal via the cosine branch of Box-Muller.
fn standard_normal(key: u64, k: u64) -> f64 {
    let u1 = uniform_open(key, 2 * k);
    let u2 = uniform_open(key, 2 * k + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn sample_wiener_path(t_final: f64, dt: f64, seed: u64, replica: u64) -> Result<WienerPath> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveTimeStep { dt });
    }
    let steps_real = t_final / dt;
    let n_steps = steps_real.round();
    if n_steps < 1.0 || (steps_real - n_steps).abs() > 1e-9 * steps_real.max(1.0) {
        return Err(Error::InvalidTimeGrid { t_final, dt });
    }
    let n_steps = n_steps as usize;
    let key = stream_key(seed, replica);
    let sqrt_dt = dt.sqrt();
    let increments =
        (0..n_steps).map(|k| sqrt_dt * standard_normal(key, k as u64)).collect();
    Ok(WienerPath { dt, increments, seed, replica })
}

impl WienerPath {
    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    /// `W(T) = sum of increments`.
    pub fn terminal_value(&self) -> f64 {
        self.increments.iter().sum()
    }

    /// Running sums `W(t_k)`, starting at zero.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.increments.iter().map(move |dw| {
                acc += dw;
                acc
            }))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_and_terminal_sum() {
        let path = sample_wiener_path(1.0, 0.25, 7, 0).unwrap();
        assert_eq!(path.n_steps(), 4);
        let w = path.cumulative();
        assert_eq!(w.len(), 5);
        assert!((w[4] - path.terminal_value()).abs() < 1e-15);
    }

    #[test]
    fn fixed_seed_reproduces() {
        let a = sample_wiener_path(0.5, 1e-3, 42, 3).unwrap();
        let b = sample_wiener_path(0.5, 1e-3, 42, 3).unwrap();
        assert_eq!(a.increments, b.increments);

        let c = sample_wiener_path(0.5, 1e-3, 42, 4).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn terminal_variance_matches_horizon() {
        // Var W(1) = 1; the sample mean of W(1)^2 over 10^4 replicas has
        // standard error sqrt(2)/100.
        let n = 10_000u64;
        let mean_sq: f64 = (0..n)
            .map(|r| sample_wiener_path(1.0, 0.05, 2024, r).unwrap().terminal_value().powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((mean_sq - 1.0).abs() < 0.05, "E W(1)^2 = {mean_sq}");
    }

    #[test]
    fn increment_moments() {
        let path = sample_wiener_path(10.0, 1e-2, 11, 0).unwrap();
        let n = path.n_steps() as f64;
        let mean: f64 = path.increments.iter().sum::<f64>() / n;
        let var: f64 = path.increments.iter().map(|x| x * x).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 * (path.dt / n).sqrt());
        assert!((var / path.dt - 1.0).abs() < 0.1);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(matches!(
            sample_wiener_path(1.0, 0.0, 1, 0),
            Err(Error::NonPositiveTimeStep { .. })
        ));
        assert!(matches!(
            sample_wiener_path(1.0, 0.3, 1, 0),
            Err(Error::InvalidTimeGrid { .. })
        ));
    }
}
