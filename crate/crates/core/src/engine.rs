//! Deterministic discrete-event engine.
//!
//! Requests are pre-assigned round-robin to closed-loop clients. Every client
//! submits its first request at t = 0 and its next one the instant the
//! previous one finishes. The engine alternates schedule, advance the virtual
//! clock by the pass latency, and apply completions, until every request is
//! done. Time is kept in integer microseconds.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cost_model::CostModelParams;
use crate::error::{ConfigError, SimError};
use crate::kv_cache::{BlockPool, KvConfig, SequenceId};
use crate::metrics::{self, SlaConfig, Summary};
use crate::scheduler::{
    apply_batch_completion, schedule, BatchEntry, Policy, Request, SchedulerConfig, SequenceSet,
};
use crate::workload::{generate_workload, RequestShape, WorkloadSpec};

pub const ENGINE_VERSION: &str = concat!("batchsim/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub workload: WorkloadSpec,
    pub clients: u64,
    pub cost_model: CostModelParams,
    pub scheduler: SchedulerConfig,
    pub kv_cache: KvConfig,
    pub sla: SlaConfig,
}

impl Default for Scenario {
    /// Long-prompt workload (2600/60 tokens, 30% relative stddev, 512
    /// requests) with 16 clients under SplitFuse.
    fn default() -> Self {
        let cost_model = CostModelParams::default();
        let budget = cost_model
            .default_token_budget()
            .expect("default cost model saturates");
        Self {
            workload: WorkloadSpec::default(),
            clients: 16,
            cost_model,
            scheduler: SchedulerConfig::new(Policy::SplitFuse, budget),
            kv_cache: KvConfig::default(),
            sla: SlaConfig::default(),
        }
    }
}

impl Scenario {
    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.scheduler.policy = policy;
        self
    }

    pub fn with_clients(mut self, clients: u64) -> Self {
        self.clients = clients;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.workload.seed = seed;
        self
    }
}

/// Check every field constraint plus the KV capacity bound, returning the
/// first violation.
pub fn validate_scenario(scenario: &Scenario) -> Result<(), ConfigError> {
    scenario.workload.validate()?;
    validate_settings(scenario)?;
    check_kv_capacity(&scenario.kv_cache, &generate_workload(&scenario.workload))
}

/// Everything except the workload itself.
fn validate_settings(scenario: &Scenario) -> Result<(), ConfigError> {
    if scenario.clients < 1 {
        return Err(ConfigError::new("clients", "clients ≥ 1"));
    }
    scenario.cost_model.validate()?;
    scenario.scheduler.validate()?;
    scenario.kv_cache.validate()?;
    scenario.sla.validate()
}

fn check_kv_capacity(kv: &KvConfig, shapes: &[RequestShape]) -> Result<(), ConfigError> {
    let largest = shapes
        .iter()
        .map(|s| s.prompt_tokens + s.generation_tokens)
        .max()
        .unwrap_or(0);
    if kv.capacity_tokens() < largest {
        return Err(ConfigError::new(
            "kv_cache.total_blocks",
            format!(
                "pool holds {} tokens but the largest request needs {largest}; \
                 the engine would deadlock",
                kv.capacity_tokens()
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub index: u64,
    pub start_us: u64,
    pub end_us: u64,
    pub policy: Policy,
    pub total_tokens: u64,
    pub total_sequences: u64,
    pub entries: Vec<BatchEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: SequenceId,
    pub client: u64,
    pub arrival_us: u64,
    pub first_token_us: u64,
    pub token_times_us: Vec<u64>,
    pub done_us: u64,
    pub prompt_tokens: u64,
    pub gen_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub engine_version: String,
    pub scenario: Scenario,
    pub end_time_us: u64,
    pub passes: Vec<PassRecord>,
    /// Ordered by request id.
    pub requests: Vec<RequestRecord>,
    pub summary: Summary,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn max_pass_tokens(&self) -> u64 {
        self.passes
            .iter()
            .map(|p| p.total_tokens)
            .max()
            .unwrap_or(0)
    }
}

/// Simulate the scenario's own seeded workload.
pub fn run_simulation(scenario: &Scenario) -> Result<SimReport, SimError> {
    validate_scenario(scenario)?;
    let shapes = generate_workload(&scenario.workload);
    let requests: Vec<(SequenceId, RequestShape)> = shapes
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i as SequenceId, s))
        .collect();
    simulate(scenario, &requests)
}

/// Simulate an explicit request list. Ids must be unique; they are carried
/// through to the report. `scenario.workload` is ignored apart from being
/// echoed.
pub fn run_requests(
    scenario: &Scenario,
    requests: &[(SequenceId, RequestShape)],
) -> Result<SimReport, SimError> {
    validate_settings(scenario)?;
    let shapes: Vec<RequestShape> = requests.iter().map(|(_, s)| *s).collect();
    check_kv_capacity(&scenario.kv_cache, &shapes)?;
    simulate(scenario, requests)
}

fn simulate(
    scenario: &Scenario,
    requests: &[(SequenceId, RequestShape)],
) -> Result<SimReport, SimError> {
    let clients = scenario.clients as usize;
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); clients];
    for i in 0..requests.len() {
        queues[i % clients].push_back(i);
    }
    // Request slot -> owning client.
    let client_of: Vec<usize> = (0..requests.len()).map(|i| i % clients).collect();
    let slot_of: std::collections::BTreeMap<SequenceId, usize> = requests
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (*id, i))
        .collect();
    assert_eq!(slot_of.len(), requests.len(), "request ids must be unique");

    let mut set = SequenceSet::new();
    let mut pool = BlockPool::from_config(&scenario.kv_cache);
    let mut records: Vec<Option<RequestRecord>> = vec![None; requests.len()];
    let mut passes = Vec::new();
    let mut now = 0u64;
    let mut finished = 0usize;

    let submit = |set: &mut SequenceSet, slot: usize, at: u64| {
        let (id, shape) = requests[slot];
        set.submit(Request {
            id,
            prompt_tokens: shape.prompt_tokens,
            target_generation_tokens: shape.generation_tokens,
            arrival_us: at,
        });
    };
    for queue in &mut queues {
        if let Some(slot) = queue.pop_front() {
            submit(&mut set, slot, 0);
        }
    }

    while finished < requests.len() {
        let batch = schedule(&set, &pool, &scenario.scheduler);
        if batch.is_empty() {
            return Err(SimError::Stalled {
                time_us: now,
                pending: requests.len() - finished,
            });
        }
        let latency = scenario
            .cost_model
            .forward_latency_us(batch.total_tokens, batch.total_sequences);
        let start = now;
        now += latency;
        apply_batch_completion(&mut set, &mut pool, &batch, now);
        passes.push(PassRecord {
            index: passes.len() as u64,
            start_us: start,
            end_us: now,
            policy: scenario.scheduler.policy,
            total_tokens: batch.total_tokens,
            total_sequences: batch.total_sequences,
            entries: batch.entries,
        });

        for done in set.drain_finished() {
            let slot = slot_of[&done.id()];
            let client = client_of[slot];
            records[slot] = Some(RequestRecord {
                id: done.id(),
                client: client as u64,
                arrival_us: done.request.arrival_us,
                first_token_us: done.first_token_us.expect("finished implies a first token"),
                done_us: done.done_us.expect("finished implies done time"),
                token_times_us: done.token_times_us,
                prompt_tokens: done.request.prompt_tokens,
                gen_tokens: done.request.target_generation_tokens,
            });
            finished += 1;
            if let Some(next) = queues[client].pop_front() {
                submit(&mut set, next, now);
            }
        }
    }

    let mut requests: Vec<RequestRecord> = records
        .into_iter()
        .map(|r| r.expect("all finished"))
        .collect();
    requests.sort_by_key(|r| r.id);
    let mut report = SimReport {
        engine_version: ENGINE_VERSION.to_string(),
        scenario: *scenario,
        end_time_us: now,
        passes,
        requests,
        summary: Summary {
            rps: 0.0,
            mean_latency_s: 0.0,
            effective_rps_at_2tps: 0.0,
            effective_rps_at_4tps: 0.0,
            effective_rps_at_6tps: 0.0,
            p50_gap_ms: None,
            p90_gap_ms: None,
            p95_gap_ms: None,
            max_pass_tokens: 0,
        },
    };
    report.summary = metrics::summarize(&report);
    Ok(report)
}
