//! Run the same small workload under every policy and compare pass sizes.

use batchsim::{run_simulation, Policy, Scenario, WorkloadSpec};

fn main() {
    let base = Scenario {
        workload: WorkloadSpec {
            total_requests: 64,
            ..WorkloadSpec::default()
        },
        clients: 8,
        ..Scenario::default()
    };
    println!(
        "{:<18} {:>8} {:>10} {:>14} {:>12}",
        "policy", "passes", "end s", "max pass tok", "p95 gap ms"
    );
    for policy in Policy::ALL {
        let report = run_simulation(&base.with_policy(policy)).unwrap();
        println!(
            "{:<18} {:>8} {:>10.2} {:>14} {:>12.1}",
            policy,
            report.passes.len(),
            report.end_time_us as f64 / 1e6,
            report.max_pass_tokens(),
            report.summary.p95_gap_ms.unwrap_or(f64::NAN)
        );
    }
}
