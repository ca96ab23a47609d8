//! Step the token-budgeted scheduler by hand and print each forward pass.

use batchsim::scheduler::{apply_batch_completion, schedule, Request, SequenceSet};
use batchsim::{BlockPool, CostModelParams, Policy, SchedulerConfig};

fn main() {
    let cost = CostModelParams::default();
    let cfg = SchedulerConfig::new(Policy::SplitFuse, 256);
    let mut pool = BlockPool::new(256, 64);
    let mut set = SequenceSet::new();
    for (id, prompt, gen) in [(0, 700, 3), (1, 90, 4), (2, 300, 2)] {
        set.submit(Request {
            id,
            prompt_tokens: prompt,
            target_generation_tokens: gen,
            arrival_us: 0,
        });
    }

    let mut now = 0;
    let mut pass = 0;
    while !set.is_empty() {
        let batch = schedule(&set, &pool, &cfg);
        let seqs = batch.entries.len() as u64;
        now += cost.forward_latency_us(batch.total_tokens, seqs);
        let parts: Vec<String> = batch
            .entries
            .iter()
            .map(|e| {
                format!(
                    "#{}:{}p+{}g",
                    e.sequence_id, e.prompt_tokens, e.generation_tokens
                )
            })
            .collect();
        println!(
            "pass {pass:>2} t={:>6.1}ms tokens={:>3} [{}]",
            now as f64 / 1000.0,
            batch.total_tokens,
            parts.join(" ")
        );
        apply_batch_completion(&mut set, &mut pool, &batch, now);
        for done in set.drain_finished() {
            println!("         request {} finished", done.id());
        }
        pass += 1;
    }
}
