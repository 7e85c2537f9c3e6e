//! Seeded Brownian increments.
//!
//! Every path owns an independent ChaCha8 stream selected by `(seed, path_id)`, so
//! increments never depend on which worker simulated the path or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Increments `ΔW_k ~ N(0, h·I_m)` for `k = 0..n_T`, stored row-major (`k`, then component).
#[derive(Clone, Debug, PartialEq)]
pub struct Noise<T> {
    dw: Vec<T>,
    m: usize,
    h: T,
    seed: u64,
    path_id: u64,
}

/// Counter-based generator for a given path.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// `generate_noise(seed, path_id, n_T, m)` with step `h`.
pub fn generate_noise<T: Real>(seed: u64, path_id: u64, n_t: usize, m: usize, h: T) -> Noise<T> {
    assert!(n_t >= 1 && m >= 1, "noise needs at least one step and one component");
    let mut rng = path_rng(seed, path_id);
    let sd = h.as_f64().sqrt();
    let dw = (0..n_t * m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(z * sd)
        })
        .collect();
    Noise { dw, m, h, seed, path_id }
}

impl<T: Real> Noise<T> {
    /// Noise from explicit increments (tests and oracles).
    pub fn from_increments(dw: Vec<T>, m: usize, h: T) -> Result<Self> {
        if m == 0 || dw.is_empty() || dw.len() % m != 0 {
            return Err(Error::GridMismatch(format!("{} increments do not split into {m} components", dw.len())));
        }
        Ok(Self { dw, m, h, seed: 0, path_id: 0 })
    }

    #[inline]
    pub fn dw(&self, k: usize) -> &[T] {
        &self.dw[k * self.m..(k + 1) * self.m]
    }
    pub fn increments(&self) -> &[T] {
        &self.dw
    }
    pub fn n_steps(&self) -> usize {
        self.dw.len() / self.m
    }
    pub fn dim(&self) -> usize {
        self.m
    }
    pub fn step(&self) -> T {
        self.h
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn path_id(&self) -> u64 {
        self.path_id
    }

    /// `W(t_k)` for component `l`.
    pub fn brownian(&self, k: usize, l: usize) -> T {
        (0..k).fold(T::zero(), |acc, j| acc + self.dw(j)[l])
    }

    /// Same noise with `ΔW_j[l]` shifted by `eps`.
    pub fn bumped(&self, j: usize, l: usize, eps: T) -> Self {
        let mut out = self.clone();
        out.dw[j * self.m + l] += eps;
        out
    }

    /// Increments on a grid `factor` times coarser, summed from consecutive fine steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let n = self.n_steps();
        if factor == 0 || n % factor != 0 {
            return Err(Error::InvalidGrid(format!("cannot coarsen {n} steps by {factor}")));
        }
        let mut dw = vec![T::zero(); (n / factor) * self.m];
        for k in 0..n {
            for l in 0..self.m {
                dw[(k / factor) * self.m + l] += self.dw[k * self.m + l];
            }
        }
        Ok(Self { dw, m: self.m, h: self.h * T::from_usize_lossy(factor), seed: self.seed, path_id: self.path_id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regeneration_is_bitwise_identical() {
        let a = generate_noise::<f64>(42, 7, 64, 2, 1.0 / 64.0);
        let b = generate_noise::<f64>(42, 7, 64, 2, 1.0 / 64.0);
        assert_eq!(a, b);
        let c = generate_noise::<f64>(42, 8, 64, 2, 1.0 / 64.0);
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        let n = 10_000;
        let a = generate_noise::<f64>(9, 0, n, 1, 1.0);
        let b = generate_noise::<f64>(9, 1, n, 1, 1.0);
        let (mut sab, mut saa, mut sbb, mut ma, mut mb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            ma += a.dw(k)[0];
            mb += b.dw(k)[0];
        }
        ma /= n as f64;
        mb /= n as f64;
        for k in 0..n {
            let (x, y) = (a.dw(k)[0] - ma, b.dw(k)[0] - mb);
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        let rho = sab / (saa * sbb).sqrt();
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho = {rho}");
    }

    #[test]
    fn increments_have_variance_h() {
        let h = 1.0 / 256.0;
        let mut s = 0.0;
        let mut mean = 0.0;
        let mut count = 0usize;
        for p in 0..400 {
            let z = generate_noise::<f64>(3, p, 256, 1, h);
            for &x in z.increments() {
                s += x * x / h;
                mean += x / h.sqrt();
                count += 1;
            }
        }
        assert!(count >= 100_000);
        assert!((s / count as f64 - 1.0).abs() < 0.02);
        assert!((mean / count as f64).abs() < 4.0 / (count as f64).sqrt());
    }

    #[test]
    fn coarsening_sums_pairs() {
        let z = Noise::from_increments(vec![1.0, 2.0, 3.0, 4.0], 1, 0.25).unwrap();
        let c = z.coarsen(2).unwrap();
        assert_eq!(c.increments(), &[3.0, 7.0]);
        assert_eq!(c.step(), 0.5);
        assert!(z.coarsen(3).is_err());
    }

    #[test]
    fn single_precision_streams_match_double() {
        let a = generate_noise::<f64>(5, 2, 8, 1, 0.125);
        let b = generate_noise::<f32>(5, 2, 8, 1, 0.125);
        for k in 0..8 {
            assert!((a.dw(k)[0] as f32 - b.dw(k)[0]).abs() < 1e-6);
        }
    }
}
