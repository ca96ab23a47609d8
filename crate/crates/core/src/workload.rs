//! Seeded synthetic workloads with normally distributed lengths.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::ConfigError;

const PROMPT_STREAM: u64 = 0;
const GENERATION_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub prompt_mean: f64,
    pub generation_mean: f64,
    /// Standard deviation as a fraction of the mean.
    pub relative_stddev: f64,
    pub seed: u64,
    pub total_requests: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            prompt_mean: 2600.0,
            generation_mean: 60.0,
            relative_stddev: 0.3,
            seed: 42,
            total_requests: 512,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.prompt_mean.is_finite() && self.prompt_mean >= 1.0) {
            return Err(ConfigError::new("workload.prompt_mean", "must be >= 1"));
        }
        if !(self.generation_mean.is_finite() && self.generation_mean >= 1.0) {
            return Err(ConfigError::new("workload.generation_mean", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.relative_stddev) {
            return Err(ConfigError::new(
                "workload.relative_stddev",
                "must lie in [0, 1)",
            ));
        }
        if self.total_requests < 1 {
            return Err(ConfigError::new("workload.total_requests", "must be >= 1"));
        }
        Ok(())
    }
}

/// Prompt and generation length of one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestShape {
    pub prompt_tokens: u64,
    pub generation_tokens: u64,
}

/// Independent sub-stream of standard-normal draws, produced by inverse-CDF
/// on a ChaCha keystream.
struct NormalStream {
    rng: ChaCha8Rng,
    unit: Normal,
}

impl NormalStream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            unit: Normal::standard(),
        }
    }

    fn next_z(&mut self) -> f64 {
        // 53 random bits mapped into the open interval (0, 1).
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        self.unit.inverse_cdf(u)
    }

    fn length(&mut self, mean: f64, relative_stddev: f64) -> u64 {
        let z = self.next_z();
        let x = mean + relative_stddev * mean * z;
        x.round().max(1.0) as u64
    }
}

pub fn generate_workload(spec: &WorkloadSpec) -> Vec<RequestShape> {
    let mut prompts = NormalStream::new(spec.seed, PROMPT_STREAM);
    let mut gens = NormalStream::new(spec.seed, GENERATION_STREAM);
    (0..spec.total_requests)
        .map(|_| RequestShape {
            prompt_tokens: prompts.length(spec.prompt_mean, spec.relative_stddev),
            generation_tokens: gens.length(spec.generation_mean, spec.relative_stddev),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_is_constant() {
        let spec = WorkloadSpec {
            relative_stddev: 0.0,
            total_requests: 3,
            ..WorkloadSpec::default()
        };
        let shapes = generate_workload(&spec);
        assert_eq!(
            shapes,
            vec![
                RequestShape {
                    prompt_tokens: 2600,
                    generation_tokens: 60
                };
                3
            ]
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = WorkloadSpec::default();
        assert_eq!(generate_workload(&spec), generate_workload(&spec));
        let other = WorkloadSpec { seed: 43, ..spec };
        assert_ne!(generate_workload(&spec), generate_workload(&other));
    }

    #[test]
    fn sample_moments_match_declared_distribution() {
        let shapes = generate_workload(&WorkloadSpec::default());
        let n = shapes.len() as f64;
        let prompts: Vec<f64> = shapes.iter().map(|s| s.prompt_tokens as f64).collect();
        let mean = prompts.iter().sum::<f64>() / n;
        let var = prompts.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 2600.0).abs() / 2600.0 < 0.05, "mean {mean}");
        assert!(
            (var.sqrt() - 780.0).abs() / 780.0 < 0.15,
            "sd {}",
            var.sqrt()
        );
    }

    #[test]
    fn lengths_clamped_to_one() {
        let spec = WorkloadSpec {
            prompt_mean: 1.0,
            generation_mean: 1.0,
            relative_stddev: 0.99,
            total_requests: 2000,
            ..WorkloadSpec::default()
        };
        assert!(generate_workload(&spec)
            .iter()
            .all(|s| s.prompt_tokens >= 1 && s.generation_tokens >= 1));
    }

    #[test]
    fn streams_are_independent() {
        // Changing the generation mean must not perturb prompt draws.
        let a = WorkloadSpec::default();
        let b = WorkloadSpec {
            generation_mean: 500.0,
            ..a
        };
        let pa: Vec<_> = generate_workload(&a)
            .iter()
            .map(|s| s.prompt_tokens)
            .collect();
        let pb: Vec<_> = generate_workload(&b)
            .iter()
            .map(|s| s.prompt_tokens)
            .collect();
        assert_eq!(pa, pb);
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = WorkloadSpec {
            relative_stddev: 1.0,
            ..WorkloadSpec::default()
        };
        assert_eq!(bad.validate().unwrap_err().path, "workload.relative_stddev");
        let bad = WorkloadSpec {
            total_requests: 0,
            ..WorkloadSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
