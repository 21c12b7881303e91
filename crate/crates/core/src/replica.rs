//! Replica layer: seeded streams, ordered parallel evaluation and the
//! mean/standard-error summaries built from it.
//!
//! Replica `r` of a run with master seed `s` draws from ChaCha8 keyed by
//! `s` (expanded with `SeedableRng::seed_from_u64`) on stream `r`. Replicas
//! are evaluated in parallel but collected in index order and reduced with
//! [`pairwise_sum`], so results are bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::pairwise_sum;

/// The independent stream of replica `replica` under master seed `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Runs `f(r, stream_r)` for every replica on the current rayon pool and
/// returns the outputs in replica order.
pub fn map_replicas<T, F>(replicas: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            f(r, &mut rng)
        })
        .collect()
}

/// Like [`map_replicas`] for fallible work; the first error in replica order wins.
pub fn try_map_replicas<T, E, F>(replicas: usize, seed: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T, E> + Sync,
{
    map_replicas(replicas, seed, f).into_iter().collect()
}

/// Sample mean with its standard error `sd / √R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
        }
    }

    /// Mean and standard error of the samples (unbiased variance; a single
    /// sample has zero standard error).
    pub fn from_samples(samples: &[f64]) -> Self {
        let count = samples.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = pairwise_sum(samples) / count as f64;
        if count == 1 {
            return Self::exact(mean);
        }
        let squares: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&squares) / (count - 1) as f64;
        Self {
            mean,
            stderr: (var / count as f64).sqrt(),
        }
    }

    /// `sqrt(se₁² + se₂²)`, for estimates from independent runs.
    pub fn combined_stderr(&self, other: &Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Empirical standard deviation (unbiased), 0 for fewer than two samples.
pub fn sample_sd(samples: &[f64]) -> f64 {
    let e = Estimate::from_samples(samples);
    if samples.len() < 2 {
        0.0
    } else {
        e.stderr * (samples.len() as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn estimate_of_constant_is_exact() {
        let e = Estimate::from_samples(&[2.5; 10]);
        assert_eq!(e, Estimate::exact(2.5));
    }

    #[test]
    fn estimate_known_values() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(e.covers(2.0, 1.0));
        assert!(!e.covers(0.0, 3.0));
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: u64 = replica_rng(7, 3).random();
        let b: u64 = replica_rng(7, 3).random();
        let c: u64 = replica_rng(7, 4).random();
        let d: u64 = replica_rng(8, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn map_replicas_is_worker_independent() {
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| map_replicas(64, 42, |r, rng| r as f64 + rng.random::<f64>()))
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one, four);
        assert_eq!(
            Estimate::from_samples(&one).mean.to_bits(),
            Estimate::from_samples(&four).mean.to_bits()
        );
    }
}
