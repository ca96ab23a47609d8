//! Baseline continuous-batching policies. Neither ever splits a prompt.

use super::{ForwardBatch, KvShadow, Phase, SchedulerConfig, SequenceSet};
use crate::kv_cache::BlockPool;

/// Prompt passes preempt decode: whenever a new prompt can be admitted the
/// pass holds only whole prompts, FCFS, up to `token_budget` tokens. The
/// first prompt is always taken even when it alone exceeds the cap.
pub fn schedule_preemptive(
    set: &SequenceSet,
    pool: &BlockPool,
    cfg: &SchedulerConfig,
) -> ForwardBatch {
    let mut batch = ForwardBatch::default();
    let mut kv = KvShadow::new(set, pool);

    for seq in set.fcfs(Phase::Waiting) {
        let prompt = seq.request.prompt_tokens;
        if !batch.is_empty() && batch.total_tokens + prompt > cfg.token_budget {
            break;
        }
        if kv.try_grow(seq, prompt) {
            batch.push(seq.id(), prompt, 0);
        }
    }
    if !batch.is_empty() {
        return batch;
    }

    decode_all(set, &mut kv, &mut batch);
    batch
}

/// Decode for every running sequence, plus whole new prompts while the
/// number of live sequences stays under `max_sequences`.
pub fn schedule_orca(set: &SequenceSet, pool: &BlockPool, cfg: &SchedulerConfig) -> ForwardBatch {
    let mut batch = ForwardBatch::default();
    let mut kv = KvShadow::new(set, pool);

    decode_all(set, &mut kv, &mut batch);

    let mut live = set
        .iter()
        .filter(|s| matches!(s.phase, Phase::Prefilling | Phase::Generating))
        .count() as u64;
    for seq in set.fcfs(Phase::Waiting) {
        if live >= cfg.max_sequences {
            break;
        }
        let prompt = seq.request.prompt_tokens;
        if kv.try_grow(seq, prompt) {
            batch.push(seq.id(), prompt, 0);
            live += 1;
        }
    }
    batch
}

fn decode_all(set: &SequenceSet, kv: &mut KvShadow<'_>, batch: &mut ForwardBatch) {
    for seq in set.fcfs(Phase::Generating) {
        if kv.try_grow(seq, 1) {
            batch.push(seq.id(), 0, 1);
        }
    }
}
