//! Compare per-token gap percentiles between policies at 16 clients.

use batchsim::{run_simulation, Policy, Scenario};

fn main() {
    let base = Scenario::default().with_clients(16);
    for policy in Policy::ALL {
        let s = run_simulation(&base.with_policy(policy)).unwrap().summary;
        let ms = |v: Option<f64>| v.unwrap_or(f64::NAN);
        println!(
            "{:<18} p50={:>7.1}ms p90={:>7.1}ms p95={:>7.1}ms",
            policy,
            ms(s.p50_gap_ms),
            ms(s.p90_gap_ms),
            ms(s.p95_gap_ms)
        );
    }
}
