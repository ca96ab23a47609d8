//! Batch-composition policies.
//!
//! Every policy is a pure function of the live sequence set, the KV pool and
//! the scheduler config. It returns a [`ForwardBatch`] describing how many
//! prompt and generation tokens each sequence contributes to the next forward
//! pass. [`apply_batch_completion`] then advances sequence state once the
//! pass has run.
//!
//! Three policies are provided:
//!
//! - [`Policy::SplitFuse`] decomposes long prompts into chunks and fuses them
//!   with decode tokens so every pass holds at most `token_budget` tokens.
//! - [`Policy::PreemptivePrompt`] runs waiting prompts whole, stalling decode
//!   for the duration of the prompt pass.
//! - [`Policy::OrcaStyle`] adds whole prompts to the running decode batch
//!   until a sequence-count bound is reached.

mod baseline;
mod splitfuse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::kv_cache::{blocks_required, BlockPool, SequenceId};

pub use baseline::{schedule_orca, schedule_preemptive};
pub use splitfuse::schedule_splitfuse;

/// A client request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: SequenceId,
    pub prompt_tokens: u64,
    pub target_generation_tokens: u64,
    pub arrival_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Waiting,
    Prefilling,
    Generating,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceState {
    pub request: Request,
    pub phase: Phase,
    pub prompt_consumed: u64,
    pub generated: u64,
    pub first_token_us: Option<u64>,
    pub token_times_us: Vec<u64>,
    pub done_us: Option<u64>,
}

impl SequenceState {
    pub fn new(request: Request) -> Self {
        assert!(request.prompt_tokens >= 1, "prompt_tokens must be >= 1");
        assert!(
            request.target_generation_tokens >= 1,
            "target_generation_tokens must be >= 1"
        );
        Self {
            request,
            phase: Phase::Waiting,
            prompt_consumed: 0,
            generated: 0,
            first_token_us: None,
            token_times_us: Vec::new(),
            done_us: None,
        }
    }

    pub fn id(&self) -> SequenceId {
        self.request.id
    }

    pub fn remaining_prompt(&self) -> u64 {
        self.request.prompt_tokens - self.prompt_consumed
    }

    /// Total KV slots this sequence occupies once finished.
    pub fn kv_footprint(&self) -> u64 {
        self.request.prompt_tokens + self.request.target_generation_tokens
    }

    fn fcfs_key(&self) -> (u64, SequenceId) {
        (self.request.arrival_us, self.request.id)
    }
}

/// Live sequences keyed by id.
#[derive(Debug, Clone, Default)]
pub struct SequenceSet {
    seqs: BTreeMap<SequenceId, SequenceState>,
}

impl SequenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn submit(&mut self, request: Request) {
        let prev = self.seqs.insert(request.id, SequenceState::new(request));
        assert!(prev.is_none(), "request {} submitted twice", request.id);
    }

    pub fn get(&self, id: SequenceId) -> Option<&SequenceState> {
        self.seqs.get(&id)
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SequenceState> {
        self.seqs.values()
    }

    /// Sequences in `phase`, ordered by arrival then id.
    pub fn fcfs(&self, phase: Phase) -> Vec<&SequenceState> {
        let mut out: Vec<_> = self.seqs.values().filter(|s| s.phase == phase).collect();
        out.sort_by_key(|s| s.fcfs_key());
        out
    }

    /// Remove and return every finished sequence, in id order.
    pub fn drain_finished(&mut self) -> Vec<SequenceState> {
        let done: Vec<SequenceId> = self
            .seqs
            .values()
            .filter(|s| s.phase == Phase::Finished)
            .map(|s| s.id())
            .collect();
        done.into_iter()
            .map(|id| self.seqs.remove(&id).expect("listed above"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[serde(
        rename = "splitfuse",
        alias = "split_fuse",
        alias = "dynamic_splitfuse"
    )]
    SplitFuse,
    #[serde(alias = "preemptive")]
    PreemptivePrompt,
    #[serde(alias = "orca")]
    OrcaStyle,
}

impl Policy {
    pub const ALL: [Policy; 3] = [
        Policy::SplitFuse,
        Policy::PreemptivePrompt,
        Policy::OrcaStyle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::SplitFuse => "splitfuse",
            Policy::PreemptivePrompt => "preemptive_prompt",
            Policy::OrcaStyle => "orca_style",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Policy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "splitfuse" | "split_fuse" | "dynamic_splitfuse" => Ok(Policy::SplitFuse),
            "preemptive_prompt" | "preemptive" => Ok(Policy::PreemptivePrompt),
            "orca_style" | "orca" => Ok(Policy::OrcaStyle),
            other => Err(ConfigError::new(
                "scheduler.policy",
                format!("unknown policy `{other}` (splitfuse | preemptive_prompt | orca_style)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub policy: Policy,
    /// Per-pass token cap for SplitFuse; admission cap for PreemptivePrompt.
    pub token_budget: u64,
    /// Sequence bound for OrcaStyle.
    pub max_sequences: u64,
}

impl SchedulerConfig {
    pub const DEFAULT_MAX_SEQUENCES: u64 = 64;

    pub fn new(policy: Policy, token_budget: u64) -> Self {
        Self {
            policy,
            token_budget,
            max_sequences: Self::DEFAULT_MAX_SEQUENCES,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.token_budget < 1 {
            return Err(ConfigError::new("scheduler.token_budget", "must be >= 1"));
        }
        if self.max_sequences < 1 {
            return Err(ConfigError::new("scheduler.max_sequences", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub sequence_id: SequenceId,
    pub prompt_tokens: u64,
    /// 0 or 1.
    pub generation_tokens: u64,
}

impl BatchEntry {
    pub fn tokens(&self) -> u64 {
        self.prompt_tokens + self.generation_tokens
    }
}

/// Token composition of one forward pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardBatch {
    pub entries: Vec<BatchEntry>,
    pub total_tokens: u64,
    pub total_sequences: u64,
}

impl ForwardBatch {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, sequence_id: SequenceId, prompt_tokens: u64, generation_tokens: u64) {
        debug_assert!(generation_tokens <= 1);
        debug_assert!(prompt_tokens + generation_tokens > 0);
        self.entries.push(BatchEntry {
            sequence_id,
            prompt_tokens,
            generation_tokens,
        });
        self.total_tokens += prompt_tokens + generation_tokens;
        self.total_sequences += 1;
    }

    pub fn entry(&self, id: SequenceId) -> Option<&BatchEntry> {
        self.entries.iter().find(|e| e.sequence_id == id)
    }

    pub fn prompt_tokens(&self) -> u64 {
        self.entries.iter().map(|e| e.prompt_tokens).sum()
    }

    pub fn generation_tokens(&self) -> u64 {
        self.entries.iter().map(|e| e.generation_tokens).sum()
    }

    /// Check the structural invariants of a batch against the state it was
    /// scheduled from.
    pub fn check(&self, set: &SequenceSet) -> Result<(), String> {
        let sum: u64 = self.entries.iter().map(BatchEntry::tokens).sum();
        if sum != self.total_tokens {
            return Err(format!(
                "total_tokens {} != entry sum {sum}",
                self.total_tokens
            ));
        }
        if self.entries.len() as u64 != self.total_sequences {
            return Err("total_sequences disagrees with entries".into());
        }
        let mut ids: Vec<_> = self.entries.iter().map(|e| e.sequence_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err("sequence scheduled twice in one pass".into());
        }
        for e in &self.entries {
            let s = set
                .get(e.sequence_id)
                .ok_or_else(|| format!("unknown sequence {}", e.sequence_id))?;
            if e.generation_tokens > 1 {
                return Err(format!(
                    "sequence {} given {} gen tokens",
                    s.id(),
                    e.generation_tokens
                ));
            }
            if e.prompt_tokens > s.remaining_prompt() {
                return Err(format!("sequence {} over-scheduled prompt", s.id()));
            }
            let completes = e.prompt_tokens > 0 && e.prompt_tokens == s.remaining_prompt();
            if e.generation_tokens == 1 && !(completes || s.phase == Phase::Generating) {
                return Err(format!(
                    "sequence {} generates before its prompt completes",
                    s.id()
                ));
            }
        }
        Ok(())
    }
}

/// Split `total` tokens over `passes` forward passes as evenly as possible.
/// Sizes differ by at most one; larger chunks come first.
pub fn equal_partition(total: u64, passes: usize) -> Vec<u64> {
    assert!(passes >= 1, "passes must be >= 1");
    let n = passes as u64;
    let (base, rem) = (total / n, total % n);
    (0..n).map(|i| base + u64::from(i < rem)).collect()
}

/// Run the configured policy.
pub fn schedule(set: &SequenceSet, pool: &BlockPool, cfg: &SchedulerConfig) -> ForwardBatch {
    match cfg.policy {
        Policy::SplitFuse => schedule_splitfuse(set, pool, cfg),
        Policy::PreemptivePrompt => schedule_preemptive(set, pool, cfg),
        Policy::OrcaStyle => schedule_orca(set, pool, cfg),
    }
}

/// Shadow view of the pool used while composing a batch. Besides tracking
/// free blocks it keeps the outstanding demand of every admitted sequence,
/// so a new sequence is only admitted when its whole footprint fits next to
/// the footprints already promised. Admitted sequences therefore never
/// starve each other of blocks.
struct KvShadow<'a> {
    pool: &'a BlockPool,
    free: usize,
    committed: usize,
}

impl<'a> KvShadow<'a> {
    fn new(set: &SequenceSet, pool: &'a BlockPool) -> Self {
        let bs = pool.block_size();
        let committed = set
            .iter()
            .filter(|s| !matches!(s.phase, Phase::Waiting | Phase::Finished))
            .map(|s| {
                let held = pool.table(s.id()).map_or(0, |t| t.blocks.len());
                blocks_required(s.kv_footprint(), bs).saturating_sub(held)
            })
            .sum();
        Self {
            pool,
            free: pool.free_blocks(),
            committed,
        }
    }

    /// Reserve room for `tokens` more tokens of `seq`; false if the pool
    /// cannot take them.
    fn try_grow(&mut self, seq: &SequenceState, tokens: u64) -> bool {
        if seq.phase == Phase::Waiting {
            let full = blocks_required(seq.kv_footprint(), self.pool.block_size());
            if self.free.saturating_sub(self.committed) < full {
                return false;
            }
            self.committed += full;
        }
        let needed = self.pool.blocks_to_grow(seq.id(), tokens);
        if needed > self.free {
            return false;
        }
        self.free -= needed;
        self.committed = self.committed.saturating_sub(needed);
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LifecycleEvent {
    FirstToken {
        sequence_id: SequenceId,
        time_us: u64,
    },
    TokenGenerated {
        sequence_id: SequenceId,
        time_us: u64,
    },
    RequestFinished {
        sequence_id: SequenceId,
        time_us: u64,
    },
}

/// Advance sequence state after `batch` ran to completion at `end_us`.
///
/// # Panics
///
/// On any inconsistency between the batch and the state it is applied to;
/// such a batch can only come from a scheduler bug.
pub fn apply_batch_completion(
    set: &mut SequenceSet,
    pool: &mut BlockPool,
    batch: &ForwardBatch,
    end_us: u64,
) -> Vec<LifecycleEvent> {
    let mut events = Vec::new();
    for entry in &batch.entries {
        let id = entry.sequence_id;
        let seq = set
            .seqs
            .get_mut(&id)
            .unwrap_or_else(|| panic!("batch references unknown sequence {id}"));
        assert_ne!(seq.phase, Phase::Finished, "sequence {id} already finished");
        assert!(
            entry.prompt_tokens <= seq.remaining_prompt(),
            "sequence {id}: prompt over-consumed"
        );
        pool.reserve(id, entry.tokens())
            .unwrap_or_else(|e| panic!("sequence {id}: scheduled without KV room: {e}"));

        if entry.prompt_tokens > 0 {
            seq.prompt_consumed += entry.prompt_tokens;
            if seq.phase == Phase::Waiting {
                seq.phase = Phase::Prefilling;
            }
        }
        if seq.phase == Phase::Prefilling && seq.remaining_prompt() == 0 {
            seq.phase = Phase::Generating;
        }
        if entry.generation_tokens == 0 {
            continue;
        }
        assert_eq!(entry.generation_tokens, 1);
        assert_eq!(
            seq.phase,
            Phase::Generating,
            "sequence {id} generated before prefill"
        );
        seq.generated += 1;
        seq.token_times_us.push(end_us);
        if seq.generated == 1 {
            seq.first_token_us = Some(end_us);
            events.push(LifecycleEvent::FirstToken {
                sequence_id: id,
                time_us: end_us,
            });
        }
        events.push(LifecycleEvent::TokenGenerated {
            sequence_id: id,
            time_us: end_us,
        });
        if seq.generated == seq.request.target_generation_tokens {
            seq.phase = Phase::Finished;
            seq.done_us = Some(end_us);
            pool.free(id).expect("finished sequence holds a table");
            events.push(LifecycleEvent::RequestFinished {
                sequence_id: id,
                time_us: end_us,
            });
        }
    }
    events
}
