//! Effective throughput under the three SLA tiers, plus the comparison
//! report derived from a sweep.

use batchsim::metrics::{effective_throughput, successful_requests};
use batchsim::{compare_report, run_simulation, run_sweep, Policy, Scenario, SlaConfig, SweepSpec};

fn main() {
    let scenario = Scenario::default().with_clients(8);
    for policy in [Policy::SplitFuse, Policy::PreemptivePrompt] {
        let report = run_simulation(&scenario.with_policy(policy)).unwrap();
        print!("{policy:<18}");
        for floor in [2.0, 4.0, 6.0] {
            let sla = SlaConfig::default().with_floor(floor);
            print!(
                "  @{floor}: {:>3}/{} ok {:.3} rps",
                successful_requests(&report, &sla),
                report.requests.len(),
                effective_throughput(&report, &sla)
            );
        }
        println!();
    }

    let points = run_sweep(&SweepSpec::over(Scenario::default())).unwrap();
    let cmp = compare_report(&points).unwrap();
    println!("{}", serde_json::to_string_pretty(&cmp).unwrap());
}
