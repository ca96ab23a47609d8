//! Aggregate throughput of load-balanced replicas.

use batchsim::{run_scaled, LbPolicy, Scenario};

fn main() {
    let scenario = Scenario::default();
    for lb in [LbPolicy::RoundRobin, LbPolicy::LeastOutstanding] {
        for replicas in [1, 2, 4, 8, 16] {
            let r = run_scaled(&scenario, replicas, lb).unwrap();
            println!(
                "{lb:<18} replicas={replicas:>2} aggregate={:>7.3} rps single={:.3} rps efficiency={:.4}",
                r.aggregate_rps, r.single_replica_rps, r.scaling_efficiency
            );
        }
    }
}
