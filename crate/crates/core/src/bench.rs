//! Benchmark harness: scenario configs, client-count sweeps, curve CSVs and
//! policy comparisons.
//!
//! Config files are TOML. Every key is optional; absent keys take the
//! defaults of [`Scenario::default`]. An absent `scheduler.token_budget` is
//! derived from the cost model's saturation point.
//!
//! ```toml
//! clients = 16
//!
//! [workload]
//! prompt_mean = 2600
//! generation_mean = 60
//! relative_stddev = 0.3
//! seed = 42
//! total_requests = 512
//!
//! [cost_model]
//! kind = "ramp_saturate"          # or "affine"
//! base_latency_ms = 20.0
//! saturated_rate_tokens_per_s = 10000.0
//! per_sequence_overhead_ms = 0.0
//!
//! [kv_cache]
//! total_blocks = 4096
//! block_size_tokens = 64
//!
//! [scheduler]
//! policy = "splitfuse"            # preemptive_prompt | orca_style
//! token_budget = 256
//! max_sequences = 64
//!
//! [sla]
//! prompt_rate_tokens_per_s = 512.0
//! generation_rate_floor_tokens_per_s = 2.0
//! ema_alpha = 0.1
//! grace_tokens = 1
//!
//! [sweep]                         # optional; turns the file into a sweep
//! client_counts = [1, 2, 4, 8, 16, 32]
//! policies = ["splitfuse", "preemptive_prompt"]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost_model::{CostModelParams, ModelKind};
use crate::engine::{run_simulation, validate_scenario, Scenario, ENGINE_VERSION};
use crate::error::{BenchError, ConfigError};
use crate::kv_cache::KvConfig;
use crate::metrics::{SlaConfig, Summary};
use crate::scheduler::{Policy, SchedulerConfig};
use crate::workload::WorkloadSpec;

pub const DEFAULT_CLIENT_COUNTS: [u64; 6] = [1, 2, 4, 8, 16, 32];

/// Client count of the headline tail-latency comparison.
pub const HEADLINE_CLIENTS: u64 = 16;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    clients: Option<u64>,
    #[serde(default)]
    workload: RawWorkload,
    #[serde(default)]
    cost_model: RawCostModel,
    #[serde(default)]
    kv_cache: RawKv,
    #[serde(default)]
    scheduler: RawScheduler,
    #[serde(default)]
    sla: RawSla,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    prompt_mean: Option<f64>,
    generation_mean: Option<f64>,
    relative_stddev: Option<f64>,
    seed: Option<u64>,
    total_requests: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCostModel {
    kind: Option<ModelKind>,
    base_latency_ms: Option<f64>,
    saturated_rate_tokens_per_s: Option<f64>,
    per_sequence_overhead_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKv {
    total_blocks: Option<u64>,
    block_size_tokens: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheduler {
    policy: Option<Policy>,
    token_budget: Option<u64>,
    max_sequences: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSla {
    prompt_rate_tokens_per_s: Option<f64>,
    generation_rate_floor_tokens_per_s: Option<f64>,
    ema_alpha: Option<f64>,
    grace_tokens: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    client_counts: Option<Vec<u64>>,
    policies: Option<Vec<Policy>>,
}

/// A client-count × policy grid over one base scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: Scenario,
    pub client_counts: Vec<u64>,
    pub policies: Vec<SchedulerConfig>,
}

impl SweepSpec {
    /// Default grid: 1..32 clients, SplitFuse against PreemptivePrompt.
    pub fn over(base: Scenario) -> Self {
        Self {
            base,
            client_counts: DEFAULT_CLIENT_COUNTS.to_vec(),
            policies: [Policy::SplitFuse, Policy::PreemptivePrompt]
                .map(|p| SchedulerConfig {
                    policy: p,
                    ..base.scheduler
                })
                .to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.client_counts.is_empty() {
            return Err(ConfigError::new("sweep.client_counts", "must not be empty"));
        }
        if self.policies.is_empty() {
            return Err(ConfigError::new("sweep.policies", "must not be empty"));
        }
        for &clients in &self.client_counts {
            for sched in &self.policies {
                validate_scenario(&Scenario {
                    clients,
                    scheduler: *sched,
                    ..self.base
                })
                .map_err(|e| match e.path.as_str() {
                    "clients" => ConfigError::new("sweep.client_counts", e.constraint),
                    _ => e,
                })?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedConfig {
    Scenario(Scenario),
    Sweep(SweepSpec),
}

impl LoadedConfig {
    pub fn scenario(&self) -> &Scenario {
        match self {
            LoadedConfig::Scenario(s) => s,
            LoadedConfig::Sweep(s) => &s.base,
        }
    }

    /// The sweep this config describes, falling back to the default grid.
    pub fn into_sweep(self) -> SweepSpec {
        match self {
            LoadedConfig::Scenario(s) => SweepSpec::over(s),
            LoadedConfig::Sweep(s) => s,
        }
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, BenchError> {
    let text = fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

/// Parse config text. `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<LoadedConfig, BenchError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| line_col(text, span.start))
            .unwrap_or((0, 0));
        BenchError::Parse {
            path: origin.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let loaded = build(raw)?;
    match &loaded {
        LoadedConfig::Scenario(s) => validate_scenario(s)?,
        LoadedConfig::Sweep(s) => s.validate()?,
    }
    Ok(loaded)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn build(raw: RawConfig) -> Result<LoadedConfig, ConfigError> {
    let d = Scenario::default();
    let workload = WorkloadSpec {
        prompt_mean: raw.workload.prompt_mean.unwrap_or(d.workload.prompt_mean),
        generation_mean: raw
            .workload
            .generation_mean
            .unwrap_or(d.workload.generation_mean),
        relative_stddev: raw
            .workload
            .relative_stddev
            .unwrap_or(d.workload.relative_stddev),
        seed: raw.workload.seed.unwrap_or(d.workload.seed),
        total_requests: raw
            .workload
            .total_requests
            .unwrap_or(d.workload.total_requests),
    };
    let cost_model = CostModelParams {
        kind: raw.cost_model.kind.unwrap_or(d.cost_model.kind),
        base_latency_ms: raw
            .cost_model
            .base_latency_ms
            .unwrap_or(d.cost_model.base_latency_ms),
        saturated_rate_tokens_per_s: raw
            .cost_model
            .saturated_rate_tokens_per_s
            .unwrap_or(d.cost_model.saturated_rate_tokens_per_s),
        per_sequence_overhead_ms: raw
            .cost_model
            .per_sequence_overhead_ms
            .unwrap_or(d.cost_model.per_sequence_overhead_ms),
    };
    cost_model.validate()?;
    let token_budget = match raw.scheduler.token_budget {
        Some(b) => b,
        None => cost_model.default_token_budget().ok_or_else(|| {
            ConfigError::new(
                "scheduler.token_budget",
                "required: the cost model never reaches its saturated rate",
            )
        })?,
    };
    let scheduler = SchedulerConfig {
        policy: raw.scheduler.policy.unwrap_or(d.scheduler.policy),
        token_budget,
        max_sequences: raw
            .scheduler
            .max_sequences
            .unwrap_or(d.scheduler.max_sequences),
    };
    let kv_cache = KvConfig {
        total_blocks: raw.kv_cache.total_blocks.unwrap_or(d.kv_cache.total_blocks),
        block_size_tokens: raw
            .kv_cache
            .block_size_tokens
            .unwrap_or(d.kv_cache.block_size_tokens),
    };
    let sla = SlaConfig {
        prompt_rate_tokens_per_s: raw
            .sla
            .prompt_rate_tokens_per_s
            .unwrap_or(d.sla.prompt_rate_tokens_per_s),
        generation_rate_floor_tokens_per_s: raw
            .sla
            .generation_rate_floor_tokens_per_s
            .unwrap_or(d.sla.generation_rate_floor_tokens_per_s),
        ema_alpha: raw.sla.ema_alpha.unwrap_or(d.sla.ema_alpha),
        grace_tokens: raw.sla.grace_tokens.unwrap_or(d.sla.grace_tokens),
    };
    let scenario = Scenario {
        workload,
        clients: raw.clients.unwrap_or(d.clients),
        cost_model,
        scheduler,
        kv_cache,
        sla,
    };
    Ok(match raw.sweep {
        None => LoadedConfig::Scenario(scenario),
        Some(sweep) => {
            let mut spec = SweepSpec::over(scenario);
            if let Some(counts) = sweep.client_counts {
                spec.client_counts = counts;
            }
            if let Some(policies) = sweep.policies {
                spec.policies = policies
                    .into_iter()
                    .map(|policy| SchedulerConfig {
                        policy,
                        ..scheduler
                    })
                    .collect();
            }
            LoadedConfig::Sweep(spec)
        }
    })
}

/// One (policy, client count) cell of a sweep. Also the CSV row layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub policy: Policy,
    pub clients: u64,
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

impl CurvePoint {
    pub fn from_summary(policy: Policy, clients: u64, s: &Summary) -> Self {
        Self {
            policy,
            clients,
            rps: s.rps,
            mean_latency_s: s.mean_latency_s,
            effective_rps_at_2tps: s.effective_rps_at_2tps,
            effective_rps_at_4tps: s.effective_rps_at_4tps,
            effective_rps_at_6tps: s.effective_rps_at_6tps,
            p50_gap_ms: s.p50_gap_ms,
            p90_gap_ms: s.p90_gap_ms,
            p95_gap_ms: s.p95_gap_ms,
            max_pass_tokens: s.max_pass_tokens,
        }
    }

    pub fn effective_rps(&self) -> [f64; 3] {
        [
            self.effective_rps_at_2tps,
            self.effective_rps_at_4tps,
            self.effective_rps_at_6tps,
        ]
    }
}

/// Run every (policy, clients) cell. Cells run in parallel; the result is
/// ordered by policy, then client count.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CurvePoint>, BenchError> {
    spec.validate()?;
    let cells: Vec<(SchedulerConfig, u64)> = spec
        .policies
        .iter()
        .flat_map(|p| spec.client_counts.iter().map(move |&c| (*p, c)))
        .collect();
    let mut points = cells
        .par_iter()
        .map(|&(scheduler, clients)| {
            let scenario = Scenario {
                clients,
                scheduler,
                ..spec.base
            };
            run_simulation(&scenario)
                .map(|r| CurvePoint::from_summary(scheduler.policy, clients, &r.summary))
        })
        .collect::<Result<Vec<_>, _>>()?;
    points.sort_by_key(|p| (p.policy, p.clients));
    Ok(points)
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(input: R) -> Result<Vec<CurvePoint>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(BenchError::from))
        .collect()
}

#[derive(Debug, Serialize)]
struct SweepBundle<'a> {
    engine_version: &'a str,
    spec: &'a SweepSpec,
    points: &'a [CurvePoint],
}

/// Write `curve.csv` and `sweep.json` into `out_dir`.
pub fn write_sweep_outputs(
    spec: &SweepSpec,
    points: &[CurvePoint],
    out_dir: &Path,
) -> Result<(), BenchError> {
    fs::create_dir_all(out_dir)?;
    let mut csv_bytes = Vec::new();
    write_curve_csv(points, &mut csv_bytes)?;
    let json = serde_json::to_string_pretty(&SweepBundle {
        engine_version: ENGINE_VERSION,
        spec,
        points,
    })?;
    fs::write(out_dir.join("curve.csv"), csv_bytes)?;
    fs::write(out_dir.join("sweep.json"), json)?;
    Ok(())
}

/// `subject` relative to `baseline` at one client count. Every ratio is
/// oriented so that values above 1 favour the subject; `None` marks a
/// ratio with a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRatios {
    pub clients: u64,
    /// baseline p95 gap / subject p95 gap.
    pub p95_gap_ratio: Option<f64>,
    pub p90_gap_ratio: Option<f64>,
    pub p50_gap_ratio: Option<f64>,
    /// baseline mean latency / subject mean latency.
    pub mean_latency_ratio: Option<f64>,
    /// subject rps / baseline rps.
    pub rps_ratio: Option<f64>,
    /// subject effective rps / baseline effective rps at 2, 4, 6 tokens/s.
    pub effective_rps_ratio: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub subject: Policy,
    pub baseline: Policy,
    pub per_clients: Vec<PointRatios>,
    /// Ratio of the best effective rps over the sweep, per SLA tier.
    pub max_effective_rps_ratio: [Option<f64>; 3],
    /// p95 gap ratio at the headline client count, when swept.
    pub headline_p95_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub comparisons: Vec<PolicyComparison>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if num == den {
        Some(1.0)
    } else if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

fn opt_ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    ratio(num?, den?)
}

/// Compare every other policy in `points` against SplitFuse (or, without
/// SplitFuse, against the first policy in sort order).
pub fn compare_report(points: &[CurvePoint]) -> Result<ComparisonReport, BenchError> {
    let mut by_policy: BTreeMap<Policy, BTreeMap<u64, CurvePoint>> = BTreeMap::new();
    for p in points {
        if by_policy
            .entry(p.policy)
            .or_default()
            .insert(p.clients, *p)
            .is_some()
        {
            return Err(BenchError::Mismatch(format!(
                "duplicate point for {} at {} clients",
                p.policy, p.clients
            )));
        }
    }
    if by_policy.len() < 2 {
        return Err(BenchError::Mismatch(
            "need points for at least two policies".into(),
        ));
    }
    let client_sets: BTreeSet<Vec<u64>> = by_policy
        .values()
        .map(|m| m.keys().copied().collect())
        .collect();
    if client_sets.len() != 1 {
        return Err(BenchError::Mismatch(
            "policies were swept over different client counts".into(),
        ));
    }

    let subject = if by_policy.contains_key(&Policy::SplitFuse) {
        Policy::SplitFuse
    } else {
        *by_policy.keys().next().expect("non-empty")
    };
    let subject_points = &by_policy[&subject];
    let best = |m: &BTreeMap<u64, CurvePoint>, tier: usize| {
        m.values()
            .map(|p| p.effective_rps()[tier])
            .fold(0.0, f64::max)
    };

    let comparisons = by_policy
        .iter()
        .filter(|(policy, _)| **policy != subject)
        .map(|(&baseline, base_points)| {
            let per_clients: Vec<PointRatios> = subject_points
                .iter()
                .map(|(&clients, s)| {
                    let b = &base_points[&clients];
                    let (se, be) = (s.effective_rps(), b.effective_rps());
                    PointRatios {
                        clients,
                        p95_gap_ratio: opt_ratio(b.p95_gap_ms, s.p95_gap_ms),
                        p90_gap_ratio: opt_ratio(b.p90_gap_ms, s.p90_gap_ms),
                        p50_gap_ratio: opt_ratio(b.p50_gap_ms, s.p50_gap_ms),
                        mean_latency_ratio: ratio(b.mean_latency_s, s.mean_latency_s),
                        rps_ratio: ratio(s.rps, b.rps),
                        effective_rps_ratio: [0, 1, 2].map(|t| ratio(se[t], be[t])),
                    }
                })
                .collect();
            let headline_p95_ratio = per_clients
                .iter()
                .find(|r| r.clients == HEADLINE_CLIENTS)
                .and_then(|r| r.p95_gap_ratio);
            PolicyComparison {
                subject,
                baseline,
                max_effective_rps_ratio: [0, 1, 2]
                    .map(|t| ratio(best(subject_points, t), best(base_points, t))),
                per_clients,
                headline_p95_ratio,
            }
        })
        .collect();
    Ok(ComparisonReport { comparisons })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(policy: Policy, clients: u64, p95: f64) -> CurvePoint {
        CurvePoint {
            policy,
            clients,
            rps: 1.5,
            mean_latency_s: 3.0,
            effective_rps_at_2tps: 1.2,
            effective_rps_at_4tps: 1.0,
            effective_rps_at_6tps: 0.5,
            p50_gap_ms: Some(25.0),
            p90_gap_ms: Some(40.0),
            p95_gap_ms: Some(p95),
            max_pass_tokens: 256,
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let text = "[workload]\nprompt_mean = 1000\ngeneration_mean = 50\n";
        let LoadedConfig::Scenario(s) = parse_config(text, "mem").unwrap() else {
            panic!("expected a scenario");
        };
        assert_eq!(s.workload.prompt_mean, 1000.0);
        assert_eq!(s.workload.generation_mean, 50.0);
        assert_eq!(s.clients, 16);
        assert_eq!(s.scheduler.token_budget, 256);
        assert_eq!(s.sla, SlaConfig::default());
        assert_eq!(s.kv_cache, KvConfig::default());
    }

    #[test]
    fn zero_clients_is_config_error() {
        let err = parse_config("clients = 0\n", "mem").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("clients ≥ 1"), "{err}");
    }

    #[test]
    fn parse_error_reports_position() {
        let err =
            parse_config("clients = 4\n[workload]\nprompt_mean = \"x\"\n", "f.toml").unwrap_err();
        match err {
            BenchError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_config("[scheduler]\nbudget = 3\n", "mem").is_err());
    }

    #[test]
    fn affine_without_budget_needs_explicit_budget() {
        let err = parse_config("[cost_model]\nkind = \"affine\"\n", "mem").unwrap_err();
        assert!(err.to_string().contains("scheduler.token_budget"));
        let ok = parse_config(
            "[cost_model]\nkind = \"affine\"\n[scheduler]\ntoken_budget = 512\n",
            "mem",
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn sweep_section() {
        let text = "[sweep]\nclient_counts = [1, 4]\npolicies = [\"splitfuse\", \"orca\"]\n";
        let LoadedConfig::Sweep(s) = parse_config(text, "mem").unwrap() else {
            panic!("expected a sweep");
        };
        assert_eq!(s.client_counts, vec![1, 4]);
        assert_eq!(s.policies[1].policy, Policy::OrcaStyle);
        assert!(parse_config("[sweep]\nclient_counts = []\n", "mem").is_err());
        assert!(parse_config("[sweep]\nclient_counts = [0]\n", "mem").is_err());
    }

    #[test]
    fn identical_points_compare_to_one() {
        let pts: Vec<_> = [1, 16]
            .into_iter()
            .flat_map(|c| {
                [
                    point(Policy::SplitFuse, c, 200.0),
                    point(Policy::PreemptivePrompt, c, 200.0),
                ]
            })
            .collect();
        let cmp = compare_report(&pts).unwrap();
        let c = &cmp.comparisons[0];
        for r in &c.per_clients {
            assert_eq!(r.p95_gap_ratio, Some(1.0));
            assert_eq!(r.mean_latency_ratio, Some(1.0));
            assert_eq!(r.effective_rps_ratio, [Some(1.0); 3]);
        }
        assert_eq!(c.headline_p95_ratio, Some(1.0));
    }

    #[test]
    fn headline_ratio() {
        let pts = vec![
            point(Policy::SplitFuse, 16, 200.0),
            point(Policy::PreemptivePrompt, 16, 740.0),
        ];
        let cmp = compare_report(&pts).unwrap();
        let r = cmp.comparisons[0].headline_p95_ratio.unwrap();
        assert!((r - 3.7).abs() < 1e-12);
    }

    #[test]
    fn mismatched_sweeps_rejected() {
        let pts = vec![
            point(Policy::SplitFuse, 16, 200.0),
            point(Policy::PreemptivePrompt, 8, 740.0),
        ];
        assert!(matches!(compare_report(&pts), Err(BenchError::Mismatch(_))));
        let single = vec![point(Policy::SplitFuse, 16, 200.0)];
        assert!(compare_report(&single).is_err());
    }

    #[test]
    fn csv_has_fixed_header() {
        let mut buf = Vec::new();
        write_curve_csv(&[point(Policy::SplitFuse, 4, 30.0)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "policy,clients,rps,mean_latency_s,effective_rps_at_2tps,effective_rps_at_4tps,\
             effective_rps_at_6tps,p50_gap_ms,p90_gap_ms,p95_gap_ms,max_pass_tokens"
        );
        assert!(text.lines().nth(1).unwrap().starts_with("splitfuse,4,"));
    }
}
