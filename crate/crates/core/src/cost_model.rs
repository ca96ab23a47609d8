//! Analytic forward-pass cost model.
//!
//! Latency of a forward pass is driven almost entirely by the number of
//! tokens in it. Two regimes exist: a memory-bound region where latency is
//! flat at `base_latency_ms`, and a compute-bound region where latency grows
//! linearly at `1 / saturated_rate`. Throughput as a function of tokens is
//! concave and non-decreasing under both supported forms, which is what makes
//! equal-sized forward passes optimal.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Upper bound for the saturation bisection. Anything past this is treated
/// as unreachable.
const SATURATION_SEARCH_LIMIT: u64 = 1 << 40;

/// Latency functional form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `max(base, tokens / rate)`: flat, then linear.
    #[default]
    RampSaturate,
    /// `base + tokens / rate`.
    Affine,
}

/// Parameters of the simulated forward-pass latency curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub kind: ModelKind,
    pub base_latency_ms: f64,
    pub saturated_rate_tokens_per_s: f64,
    pub per_sequence_overhead_ms: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        Self {
            kind: ModelKind::RampSaturate,
            base_latency_ms: 20.0,
            saturated_rate_tokens_per_s: 10_000.0,
            per_sequence_overhead_ms: 0.0,
        }
    }
}

impl CostModelParams {
    pub fn new(
        kind: ModelKind,
        base_latency_ms: f64,
        saturated_rate_tokens_per_s: f64,
        per_sequence_overhead_ms: f64,
    ) -> Result<Self, ConfigError> {
        let params = Self {
            kind,
            base_latency_ms,
            saturated_rate_tokens_per_s,
            per_sequence_overhead_ms,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.base_latency_ms.is_finite() && self.base_latency_ms > 0.0) {
            return Err(ConfigError::new(
                "cost_model.base_latency_ms",
                "must be > 0",
            ));
        }
        if !(self.saturated_rate_tokens_per_s.is_finite() && self.saturated_rate_tokens_per_s > 0.0)
        {
            return Err(ConfigError::new(
                "cost_model.saturated_rate_tokens_per_s",
                "must be > 0",
            ));
        }
        if !(self.per_sequence_overhead_ms.is_finite() && self.per_sequence_overhead_ms >= 0.0) {
            return Err(ConfigError::new(
                "cost_model.per_sequence_overhead_ms",
                "must be >= 0",
            ));
        }
        Ok(())
    }

    /// Forward-pass latency in milliseconds for a pass holding `tokens`
    /// tokens spread across `sequences` sequences. An empty pass costs 0.
    pub fn forward_latency(&self, tokens: u64, sequences: u64) -> f64 {
        if tokens == 0 && sequences == 0 {
            return 0.0;
        }
        debug_assert!(tokens == 0 || sequences <= tokens);
        let compute_ms = tokens as f64 * 1000.0 / self.saturated_rate_tokens_per_s;
        let body = match self.kind {
            ModelKind::RampSaturate => self.base_latency_ms.max(compute_ms),
            ModelKind::Affine => self.base_latency_ms + compute_ms,
        };
        body + sequences as f64 * self.per_sequence_overhead_ms
    }

    /// Forward-pass latency rounded to whole microseconds. The simulator
    /// clock only ever advances by this value.
    pub fn forward_latency_us(&self, tokens: u64, sequences: u64) -> u64 {
        (self.forward_latency(tokens, sequences) * 1000.0).round() as u64
    }

    /// Throughput in tokens/second of a single-sequence pass of `tokens`.
    pub fn throughput_at(&self, tokens: u64) -> f64 {
        debug_assert!(tokens >= 1);
        tokens as f64 * 1000.0 / self.forward_latency(tokens, 1)
    }

    /// Smallest token count whose throughput reaches `fraction` of the
    /// saturated rate. `None` when the target is never reached (e.g. a
    /// fraction of 1.0 under the affine form).
    pub fn saturation_tokens(&self, fraction: f64) -> Option<u64> {
        assert!(
            fraction > 0.0 && fraction <= 1.0,
            "fraction must lie in (0, 1], got {fraction}"
        );
        let target = fraction * self.saturated_rate_tokens_per_s;
        let reaches = |t: u64| self.throughput_at(t) >= target;

        if !reaches(SATURATION_SEARCH_LIMIT) {
            return None;
        }
        // Invariant: reaches(hi) holds; lo is either 0 or fails.
        let (mut lo, mut hi) = (0u64, SATURATION_SEARCH_LIMIT);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reaches(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Default SplitFuse budget: the full-saturation point rounded up to a
    /// multiple of 64 tokens.
    pub fn default_token_budget(&self) -> Option<u64> {
        self.saturation_tokens(1.0).map(|t| t.div_ceil(64) * 64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> CostModelParams {
        CostModelParams::default()
    }

    fn affine() -> CostModelParams {
        CostModelParams {
            kind: ModelKind::Affine,
            ..CostModelParams::default()
        }
    }

    #[test]
    fn forward_latency_examples() {
        assert_eq!(ramp().forward_latency(100, 1), 20.0);
        assert_eq!(ramp().forward_latency(400, 1), 40.0);
        assert_eq!(ramp().forward_latency(0, 0), 0.0);
        assert_eq!(affine().forward_latency(0, 0), 0.0);
        assert_eq!(affine().forward_latency(100, 1), 30.0);
    }

    #[test]
    fn per_sequence_overhead_adds_linearly() {
        let p = CostModelParams {
            per_sequence_overhead_ms: 0.5,
            ..ramp()
        };
        assert_eq!(p.forward_latency(100, 4), 22.0);
        assert_eq!(p.forward_latency_us(100, 4), 22_000);
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(ramp().throughput_at(200), 10_000.0);
        assert_eq!(ramp().throughput_at(50), 2_500.0);
        let far = ramp().throughput_at(100_000);
        assert!((far - 10_000.0).abs() / 10_000.0 < 0.01);
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(ramp().saturation_tokens(1.0), Some(200));
        assert_eq!(ramp().saturation_tokens(0.5), Some(100));
        assert_eq!(affine().saturation_tokens(1.0), None);
        assert_eq!(ramp().default_token_budget(), Some(256));
    }

    #[test]
    fn affine_saturation_matches_linear_scan() {
        let p = affine();
        let target = 0.9 * p.saturated_rate_tokens_per_s;
        let scanned = (1..=1_000_000u64).find(|&t| p.throughput_at(t) >= target);
        assert_eq!(scanned, Some(1800));
        assert_eq!(p.saturation_tokens(0.9), scanned);
    }

    #[test]
    fn regime_boundary_is_exact() {
        let p = ramp();
        for t in [200u64, 201, 512, 4096, 100_000] {
            assert_eq!(p.throughput_at(t), 10_000.0, "t = {t}");
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(CostModelParams::new(ModelKind::Affine, 0.0, 1.0, 0.0).is_err());
        assert!(CostModelParams::new(ModelKind::Affine, 1.0, -1.0, 0.0).is_err());
        assert!(CostModelParams::new(ModelKind::Affine, 1.0, 1.0, -0.1).is_err());
        assert!(CostModelParams::new(ModelKind::Affine, 1.0, 1.0, 0.0).is_ok());
    }
}
