//! Evaluation metrics over a finished [`SimReport`].
//!
//! A request is successful when its first token arrives within
//! `prompt_tokens / prompt_rate` seconds of arrival and its exponentially
//! smoothed generation rate never drops under the configured floor.
//! Effective throughput counts only successful requests.

use serde::{Deserialize, Serialize};

use crate::engine::{RequestRecord, SimReport};
use crate::error::{ConfigError, EmptySample};

/// Generation-rate floors reported in every summary, tokens/s.
pub const SLA_TIERS: [f64; 3] = [2.0, 4.0, 6.0];

const US_PER_S: f64 = 1_000_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaConfig {
    pub prompt_rate_tokens_per_s: f64,
    pub generation_rate_floor_tokens_per_s: f64,
    pub ema_alpha: f64,
    /// Leading generation tokens exempt from the rate check.
    pub grace_tokens: u64,
}

impl Default for SlaConfig {
    fn default() -> Self {
        Self {
            prompt_rate_tokens_per_s: 512.0,
            generation_rate_floor_tokens_per_s: 2.0,
            ema_alpha: 0.1,
            grace_tokens: 1,
        }
    }
}

impl SlaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.prompt_rate_tokens_per_s.is_finite() && self.prompt_rate_tokens_per_s > 0.0) {
            return Err(ConfigError::new(
                "sla.prompt_rate_tokens_per_s",
                "must be > 0",
            ));
        }
        if !(self.generation_rate_floor_tokens_per_s.is_finite()
            && self.generation_rate_floor_tokens_per_s > 0.0)
        {
            return Err(ConfigError::new(
                "sla.generation_rate_floor_tokens_per_s",
                "must be > 0",
            ));
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return Err(ConfigError::new("sla.ema_alpha", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn with_floor(self, floor: f64) -> Self {
        Self {
            generation_rate_floor_tokens_per_s: floor,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestOutcome {
    pub first_token_latency_s: f64,
    pub prompt_deadline_s: f64,
    pub ema_rate_series: Vec<f64>,
    pub met_prompt_sla: bool,
    pub met_generation_sla: bool,
}

impl RequestOutcome {
    pub fn successful(&self) -> bool {
        self.met_prompt_sla && self.met_generation_sla
    }
}

pub fn prompt_sla_deadline(prompt_tokens: u64, cfg: &SlaConfig) -> f64 {
    prompt_tokens as f64 / cfg.prompt_rate_tokens_per_s
}

/// Smoothed generation rate after each token from the second on.
///
/// The EMA runs over inter-token gaps, seeded with the first gap, and each
/// smoothed gap is reported as its reciprocal rate.
///
/// # Panics
///
/// If `token_times_s` is not non-decreasing.
pub fn ema_generation_rates(token_times_s: &[f64], cfg: &SlaConfig) -> Vec<f64> {
    assert!(
        token_times_s.windows(2).all(|w| w[1] >= w[0]),
        "token timestamps must be non-decreasing"
    );
    let mut ema: Option<f64> = None;
    token_times_s
        .windows(2)
        .map(|w| {
            let gap = w[1] - w[0];
            let next = match ema {
                None => gap,
                Some(prev) => cfg.ema_alpha * gap + (1.0 - cfg.ema_alpha) * prev,
            };
            ema = Some(next);
            1.0 / next
        })
        .collect()
}

pub fn request_outcome(record: &RequestRecord, cfg: &SlaConfig) -> RequestOutcome {
    let deadline = prompt_sla_deadline(record.prompt_tokens, cfg);
    let first = (record.first_token_us - record.arrival_us) as f64 / US_PER_S;
    let times: Vec<f64> = record
        .token_times_us
        .iter()
        .map(|&t| t as f64 / US_PER_S)
        .collect();
    let series = ema_generation_rates(&times, cfg);
    // series[k] is the rate observed at token k + 2.
    let skip = cfg.grace_tokens.saturating_sub(1) as usize;
    let met_generation = series
        .iter()
        .skip(skip)
        .all(|&r| r >= cfg.generation_rate_floor_tokens_per_s);
    RequestOutcome {
        first_token_latency_s: first,
        prompt_deadline_s: deadline,
        ema_rate_series: series,
        met_prompt_sla: first <= deadline,
        met_generation_sla: met_generation,
    }
}

pub fn successful_requests(report: &SimReport, cfg: &SlaConfig) -> usize {
    report
        .requests
        .iter()
        .filter(|r| request_outcome(r, cfg).successful())
        .count()
}

/// Successful requests per second of simulated time.
pub fn effective_throughput(report: &SimReport, cfg: &SlaConfig) -> f64 {
    let end_s = report.end_time_us as f64 / US_PER_S;
    if end_s <= 0.0 {
        return 0.0;
    }
    successful_requests(report, cfg) as f64 / end_s
}

/// Nearest-rank percentile.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, EmptySample> {
    assert!(
        p > 0.0 && p <= 1.0,
        "percentile rank must lie in (0, 1], got {p}"
    );
    if values.is_empty() {
        return Err(EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Guard against 0.95 * 100 landing a hair above 95.
    let rank = ((p * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// (requests/s, mean end-to-end latency in seconds).
pub fn throughput_latency_point(report: &SimReport) -> (f64, f64) {
    let n = report.requests.len() as f64;
    let end_s = report.end_time_us as f64 / US_PER_S;
    let rps = if end_s > 0.0 { n / end_s } else { 0.0 };
    let total_latency_us: u64 = report
        .requests
        .iter()
        .map(|r| r.done_us - r.arrival_us)
        .sum();
    let mean = if n > 0.0 {
        total_latency_us as f64 / US_PER_S / n
    } else {
        0.0
    };
    (rps, mean)
}

/// Inter-token gaps in seconds, pooled over all requests.
pub fn token_gap_distribution(report: &SimReport) -> Vec<f64> {
    report
        .requests
        .iter()
        .flat_map(|r| {
            r.token_times_us
                .windows(2)
                .map(|w| (w[1] - w[0]) as f64 / US_PER_S)
        })
        .collect()
}

/// Headline numbers attached to every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rps: f64,
    pub mean_latency_s: f64,
    pub effective_rps_at_2tps: f64,
    pub effective_rps_at_4tps: f64,
    pub effective_rps_at_6tps: f64,
    pub p50_gap_ms: Option<f64>,
    pub p90_gap_ms: Option<f64>,
    pub p95_gap_ms: Option<f64>,
    pub max_pass_tokens: u64,
}

impl Summary {
    pub fn effective_rps(&self) -> [f64; 3] {
        [
            self.effective_rps_at_2tps,
            self.effective_rps_at_4tps,
            self.effective_rps_at_6tps,
        ]
    }
}

pub fn summarize(report: &SimReport) -> Summary {
    let sla = report.scenario.sla;
    let (rps, mean_latency_s) = throughput_latency_point(report);
    let [e2, e4, e6] = SLA_TIERS.map(|floor| effective_throughput(report, &sla.with_floor(floor)));
    let gaps = token_gap_distribution(report);
    let gap_ms = |p| percentile(&gaps, p).ok().map(|s| s * 1000.0);
    Summary {
        rps,
        mean_latency_s,
        effective_rps_at_2tps: e2,
        effective_rps_at_4tps: e4,
        effective_rps_at_6tps: e6,
        p50_gap_ms: gap_ms(0.50),
        p90_gap_ms: gap_ms(0.90),
        p95_gap_ms: gap_ms(0.95),
        max_pass_tokens: report
            .passes
            .iter()
            .map(|p| p.total_tokens)
            .max()
            .unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn prompt_deadline_examples() {
        let cfg = SlaConfig::default();
        assert_eq!(prompt_sla_deadline(1024, &cfg), 2.0);
        assert_eq!(prompt_sla_deadline(512, &cfg), 1.0);
        assert_eq!(prompt_sla_deadline(1, &cfg), 1.0 / 512.0);
    }

    #[test]
    fn ema_examples() {
        let times_const = [0.0, 0.5, 1.0, 1.5, 2.0];
        for alpha in [0.1, 0.5, 1.0] {
            let cfg = SlaConfig {
                ema_alpha: alpha,
                ..SlaConfig::default()
            };
            assert!(ema_generation_rates(&times_const, &cfg)
                .iter()
                .all(|&r| r == 2.0));
        }
        let times = [0.0, 0.1, 1.0];
        let raw = SlaConfig {
            ema_alpha: 1.0,
            ..SlaConfig::default()
        };
        let rates = ema_generation_rates(&times, &raw);
        assert!(close(rates[0], 10.0) && close(rates[1], 1.0 / 0.9));
        let half = SlaConfig {
            ema_alpha: 0.5,
            ..SlaConfig::default()
        };
        let rates = ema_generation_rates(&times, &half);
        assert!(close(rates[0], 10.0) && close(rates[1], 2.0));
    }

    #[test]
    fn ema_of_single_token_is_empty() {
        assert!(ema_generation_rates(&[3.0], &SlaConfig::default()).is_empty());
    }

    #[test]
    #[should_panic(expected = "non-decreasing")]
    fn ema_rejects_time_travel() {
        ema_generation_rates(&[1.0, 0.5], &SlaConfig::default());
    }

    #[test]
    fn percentile_examples() {
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&hundred, 0.95).unwrap(), 95.0);
        assert_eq!(percentile(&hundred, 1.0).unwrap(), 100.0);
        assert_eq!(percentile(&[7.0], 0.3).unwrap(), 7.0);
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        assert_eq!(percentile(&[], 0.5), Err(EmptySample));
    }

    #[test]
    fn grace_skips_leading_rates() {
        let record = RequestRecord {
            id: 0,
            client: 0,
            arrival_us: 0,
            first_token_us: 1_000,
            // First gap is slow (1 s), then fast.
            token_times_us: vec![1_000, 1_001_000, 1_011_000],
            done_us: 1_011_000,
            prompt_tokens: 512,
            gen_tokens: 3,
        };
        let strict = SlaConfig {
            ema_alpha: 1.0,
            ..SlaConfig::default()
        };
        assert!(!request_outcome(&record, &strict).met_generation_sla);
        let lenient = SlaConfig {
            grace_tokens: 2,
            ..strict
        };
        assert!(request_outcome(&record, &lenient).met_generation_sla);
    }
}
