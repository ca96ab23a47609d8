use super::{ForwardBatch, KvShadow, Phase, SchedulerConfig, SequenceSet};
use crate::kv_cache::BlockPool;

/// Compose a fixed-budget pass: one decode token per generating sequence,
/// then prompt chunks (in-flight prompts first, then new ones) until the
/// budget is exactly used. A chunk that finishes its prompt with room to
/// spare also carries that sequence's first generation token.
pub fn schedule_splitfuse(
    set: &SequenceSet,
    pool: &BlockPool,
    cfg: &SchedulerConfig,
) -> ForwardBatch {
    let mut batch = ForwardBatch::default();
    let mut kv = KvShadow::new(set, pool);
    let mut budget = cfg.token_budget;

    for seq in set.fcfs(Phase::Generating) {
        if budget == 0 {
            // Decode tokens were denied for lack of budget; no prompt work
            // may jump ahead of them.
            return batch;
        }
        if kv.try_grow(seq, 1) {
            batch.push(seq.id(), 0, 1);
            budget -= 1;
        }
    }

    let candidates = set
        .fcfs(Phase::Prefilling)
        .into_iter()
        .chain(set.fcfs(Phase::Waiting));
    for seq in candidates {
        if budget == 0 {
            break;
        }
        let remaining = seq.remaining_prompt();
        let (chunk, gen) = if remaining < budget {
            (remaining, 1)
        } else {
            (budget, 0)
        };
        if kv.try_grow(seq, chunk + gen) {
            batch.push(seq.id(), chunk, gen);
            budget -= chunk + gen;
        }
    }
    batch
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{apply_batch_completion, BatchEntry, Policy};
    use super::*;

    fn cfg(budget: u64) -> SchedulerConfig {
        SchedulerConfig::new(Policy::SplitFuse, budget)
    }

    #[test]
    fn fuses_decode_with_prompt_chunk() {
        let mut set = SequenceSet::new();
        let mut pool = BlockPool::new(1024, 16);
        make_generating(&mut set, &mut pool, 1, 10);
        make_generating(&mut set, &mut pool, 2, 10);
        set.submit(request(3, 1300, 10));

        let batch = schedule_splitfuse(&set, &pool, &cfg(512));
        batch.check(&set).unwrap();
        assert_eq!(
            batch.entries,
            vec![
                BatchEntry {
                    sequence_id: 1,
                    prompt_tokens: 0,
                    generation_tokens: 1
                },
                BatchEntry {
                    sequence_id: 2,
                    prompt_tokens: 0,
                    generation_tokens: 1
                },
                BatchEntry {
                    sequence_id: 3,
                    prompt_tokens: 510,
                    generation_tokens: 0
                },
            ]
        );
        apply_batch_completion(&mut set, &mut pool, &batch, 1);
        assert_eq!(set.get(3).unwrap().remaining_prompt(), 790);
    }

    #[test]
    fn short_prompts_fill_budget_exactly() {
        let mut set = SequenceSet::new();
        let pool = BlockPool::new(1024, 16);
        set.submit(request(1, 300, 10));
        set.submit(request(2, 400, 10));
        let batch = schedule_splitfuse(&set, &pool, &cfg(512));
        assert_eq!(
            batch.entries,
            vec![
                BatchEntry {
                    sequence_id: 1,
                    prompt_tokens: 300,
                    generation_tokens: 1
                },
                BatchEntry {
                    sequence_id: 2,
                    prompt_tokens: 211,
                    generation_tokens: 0
                },
            ]
        );
        assert_eq!(batch.total_tokens, 512);
    }

    #[test]
    fn empty_state_gives_empty_batch() {
        let set = SequenceSet::new();
        let pool = BlockPool::new(4, 16);
        let batch = schedule_splitfuse(&set, &pool, &cfg(512));
        assert!(batch.is_empty());
        assert_eq!(batch.total_tokens, 0);
    }

    #[test]
    fn exact_fit_defers_first_token() {
        let mut set = SequenceSet::new();
        let pool = BlockPool::new(64, 16);
        set.submit(request(1, 256, 3));
        let batch = schedule_splitfuse(&set, &pool, &cfg(256));
        assert_eq!(batch.entries[0].generation_tokens, 0);
        assert_eq!(batch.total_tokens, 256);
    }

    #[test]
    fn prefilling_goes_before_waiting() {
        let mut set = SequenceSet::new();
        let mut pool = BlockPool::new(1024, 16);
        // id 1 arrives earlier but is still waiting; id 5 is mid-prefill.
        set.submit(request(1, 100, 2));
        set.submit(request(5, 600, 2));
        let first = ForwardBatch {
            entries: vec![BatchEntry {
                sequence_id: 5,
                prompt_tokens: 200,
                generation_tokens: 0,
            }],
            total_tokens: 200,
            total_sequences: 1,
        };
        apply_batch_completion(&mut set, &mut pool, &first, 1);
        let batch = schedule_splitfuse(&set, &pool, &cfg(450));
        assert_eq!(batch.entries[0].sequence_id, 5);
        assert_eq!(batch.entries[0].prompt_tokens, 400);
        assert_eq!(batch.entries[1].sequence_id, 1);
        assert_eq!(batch.entries[1].prompt_tokens, 49);
    }

    #[test]
    fn budget_exhausted_by_decode_blocks_prompts() {
        let mut set = SequenceSet::new();
        let mut pool = BlockPool::new(1024, 16);
        for id in 1..=4 {
            make_generating(&mut set, &mut pool, id, 10);
        }
        set.submit(request(10, 50, 2));
        let batch = schedule_splitfuse(&set, &pool, &cfg(3));
        assert_eq!(batch.total_tokens, 3);
        assert!(batch.entries.iter().all(|e| e.prompt_tokens == 0));
    }

    #[test]
    fn kv_shortage_skips_new_sequence_whole() {
        let mut set = SequenceSet::new();
        // 4 blocks of 16 = 64 tokens.
        let pool = BlockPool::new(4, 16);
        set.submit(request(1, 60, 4)); // footprint 64, fits
        set.submit(request(2, 10, 2)); // would not fit next to request 1
        let batch = schedule_splitfuse(&set, &pool, &cfg(512));
        assert_eq!(batch.entries.len(), 1);
        assert_eq!(batch.entries[0].sequence_id, 1);
    }
}
