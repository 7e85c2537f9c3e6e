//! Monte Carlo driver: deterministic chunked parallel reduction.

use rayon::prelude::*;

use crate::engine::Stepping;
use crate::error::{invalid, Error, Result};

/// Path count, master seed and stepping shared by every Monte Carlo routine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McParams {
    pub n_paths: usize,
    pub seed: u64,
    pub stepping: Stepping,
}

impl McParams {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed, stepping: Stepping::LogEuler }
    }

    pub fn with_stepping(self, stepping: Stepping) -> Self {
        Self { stepping, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(invalid("n_paths", "need at least two paths for a standard error"));
        }
        Ok(())
    }
}

/// Paths per work unit. Fixed so that the reduction tree, and therefore every
/// floating point result, is independent of the worker count.
pub const CHUNK: usize = 256;

/// Monte Carlo result.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
    pub n_paths: usize,
    /// `1.96·stderr`.
    pub ci95: f64,
    /// Paths dropped after a numerical blow-up.
    pub rejected: usize,
}

impl Estimate {
    /// `|self − target| ≤ k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Welford accumulator with Chan's pairwise merge.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self, rejected: usize) -> Estimate {
        let n = self.n as usize;
        let var = if n > 1 { self.m2 / (n - 1) as f64 } else { 0.0 };
        let stderr = if n > 0 { (var / n as f64).sqrt() } else { f64::NAN };
        Estimate { mean: self.mean, stderr, n_paths: n, ci95: 1.96 * stderr, rejected }
    }
}

#[derive(Clone)]
struct ChunkResult {
    acc: Vec<Accumulator>,
    rejected: usize,
}

/// Evaluates `f(path_id, out)` for every path, where `out` has `width` slots, and
/// returns one estimate per slot. Paths whose evaluation blows up are rejected;
/// more than 0.1% rejections is an error. Runs on the current rayon pool.
pub fn run_paths<F>(n_paths: usize, width: usize, f: F) -> Result<Vec<Estimate>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    let chunks: Vec<Result<ChunkResult>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Accumulator::default(); width];
            let mut out = vec![0.0; width];
            let mut rejected = 0;
            for p in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                match f(p as u64, &mut out) {
                    Ok(()) if out.iter().all(|x| x.is_finite()) => {
                        for (a, &x) in acc.iter_mut().zip(&out) {
                            a.push(x);
                        }
                    }
                    Ok(()) | Err(Error::BlowUp { .. }) => rejected += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(ChunkResult { acc, rejected })
        })
        .collect();
    let mut total = vec![Accumulator::default(); width];
    let mut rejected = 0;
    for chunk in chunks {
        let chunk = chunk?;
        rejected += chunk.rejected;
        for (t, a) in total.iter_mut().zip(&chunk.acc) {
            t.merge(a);
        }
    }
    if rejected * 1000 > n_paths {
        return Err(Error::RejectBudget { rejected, total: n_paths });
    }
    if rejected > 0 {
        log::warn!("{rejected} of {n_paths} paths rejected after numerical blow-up");
    }
    Ok(total.iter().map(|a| a.estimate(rejected)).collect())
}
