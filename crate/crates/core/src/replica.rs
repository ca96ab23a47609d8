//! Replica-level load balancing across independent engine instances.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_requests, run_simulation, Scenario, SimReport};
use crate::error::{ConfigError, SimError};
use crate::kv_cache::SequenceId;
use crate::metrics::Summary;
use crate::workload::{generate_workload, RequestShape, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LbPolicy {
    #[default]
    RoundRobin,
    LeastOutstanding,
}

impl fmt::Display for LbPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            LbPolicy::RoundRobin => "round_robin",
            LbPolicy::LeastOutstanding => "least_outstanding",
        })
    }
}

impl FromStr for LbPolicy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round_robin" | "rr" => Ok(LbPolicy::RoundRobin),
            "least_outstanding" | "lor" => Ok(LbPolicy::LeastOutstanding),
            other => Err(ConfigError::new(
                "lb_policy",
                format!("unknown policy `{other}` (round_robin | least_outstanding)"),
            )),
        }
    }
}

/// Pick a replica for the `request_index`-th request.
pub fn dispatch(request_index: usize, outstanding: &[u64], policy: LbPolicy) -> usize {
    assert!(!outstanding.is_empty(), "need at least one replica");
    match policy {
        LbPolicy::RoundRobin => request_index % outstanding.len(),
        LbPolicy::LeastOutstanding => outstanding
            .iter()
            .enumerate()
            .min_by_key(|(i, load)| (**load, *i))
            .map(|(i, _)| i)
            .expect("non-empty"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub replica: usize,
    pub requests: usize,
    pub end_time_us: u64,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledReport {
    pub replicas: usize,
    pub lb_policy: LbPolicy,
    pub total_requests: usize,
    pub aggregate_end_time_us: u64,
    pub aggregate_rps: f64,
    pub single_replica_rps: f64,
    pub scaling_efficiency: f64,
    pub per_replica: Vec<ReplicaSummary>,
    #[serde(skip)]
    pub reports: Vec<SimReport>,
}

/// Dispatch `replicas × total_requests` requests drawn from the scenario's
/// seed and simulate each replica with the scenario's per-replica settings.
///
/// Outstanding load for [`LbPolicy::LeastOutstanding`] is measured in
/// assigned tokens (prompt plus generation), since dispatch happens before
/// any replica runs.
pub fn run_scaled(
    scenario: &Scenario,
    replicas: usize,
    policy: LbPolicy,
) -> Result<ScaledReport, SimError> {
    if replicas < 1 {
        return Err(ConfigError::new("replicas", "must be >= 1").into());
    }
    let baseline = run_simulation(scenario)?;
    let single_replica_rps = baseline.summary.rps;

    let scaled_spec = WorkloadSpec {
        total_requests: scenario.workload.total_requests * replicas as u64,
        ..scenario.workload
    };
    let shapes = generate_workload(&scaled_spec);

    let mut assigned: Vec<Vec<(SequenceId, RequestShape)>> = vec![Vec::new(); replicas];
    let mut outstanding = vec![0u64; replicas];
    for (i, shape) in shapes.into_iter().enumerate() {
        let r = dispatch(i, &outstanding, policy);
        outstanding[r] += shape.prompt_tokens + shape.generation_tokens;
        assigned[r].push((i as SequenceId, shape));
    }

    let reports = if replicas == 1 {
        vec![baseline]
    } else {
        assigned
            .par_iter()
            .map(|reqs| run_requests(scenario, reqs))
            .collect::<Result<Vec<_>, _>>()?
    };

    let total_requests: usize = reports.iter().map(|r| r.requests.len()).sum();
    let aggregate_end_time_us = reports.iter().map(|r| r.end_time_us).max().unwrap_or(0);
    let aggregate_rps = total_requests as f64 / (aggregate_end_time_us as f64 / 1e6);
    let per_replica = reports
        .iter()
        .enumerate()
        .map(|(replica, r)| ReplicaSummary {
            replica,
            requests: r.requests.len(),
            end_time_us: r.end_time_us,
            summary: r.summary,
        })
        .collect();
    Ok(ScaledReport {
        replicas,
        lb_policy: policy,
        total_requests,
        aggregate_end_time_us,
        aggregate_rps,
        single_replica_rps,
        scaling_efficiency: aggregate_rps / (replicas as f64 * single_replica_rps),
        per_replica,
        reports,
    })
}
