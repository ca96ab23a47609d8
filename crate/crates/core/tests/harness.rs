use std::path::PathBuf;

use batchsim::bench::{
    load_config, read_curve_csv, run_sweep, write_sweep_outputs, CurvePoint, LoadedConfig,
    SweepSpec,
};
use batchsim::metrics::summarize;
use batchsim::{
    compare_report, run_scaled, run_simulation, LbPolicy, Policy, Scenario, SchedulerConfig,
    WorkloadSpec,
};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn small_base() -> Scenario {
    Scenario {
        workload: WorkloadSpec {
            total_requests: 48,
            ..WorkloadSpec::default()
        },
        ..Scenario::default()
    }
}

#[test]
fn long_prompt_config_echoes_workload() {
    let LoadedConfig::Scenario(s) = load_config(&config("long_prompt.toml")).unwrap() else {
        panic!("expected a scenario");
    };
    assert_eq!(s.workload.prompt_mean, 2600.0);
    assert_eq!(s.workload.generation_mean, 60.0);
    assert_eq!(s.workload.relative_stddev, 0.3);
    assert_eq!(s.workload.total_requests, 512);
    assert_eq!(s, Scenario::default());
}

#[test]
fn bundled_configs_load() {
    for name in [
        "minimal.toml",
        "long_prompt_sweep.toml",
        "short_prompt_sweep.toml",
        "tail_latency.toml",
    ] {
        load_config(&config(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn sweep_cardinality_and_order() {
    let spec = SweepSpec::over(small_base());
    let points = run_sweep(&spec).unwrap();
    assert_eq!(points.len(), 12);
    let keys: Vec<(Policy, u64)> = points.iter().map(|p| (p.policy, p.clients)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn single_cell_sweep_equals_direct_run() {
    let base = small_base();
    let spec = SweepSpec {
        base,
        client_counts: vec![4],
        policies: vec![SchedulerConfig {
            policy: Policy::PreemptivePrompt,
            ..base.scheduler
        }],
    };
    let points = run_sweep(&spec).unwrap();
    let direct =
        run_simulation(&base.with_clients(4).with_policy(Policy::PreemptivePrompt)).unwrap();
    let expected = CurvePoint::from_summary(Policy::PreemptivePrompt, 4, &summarize(&direct));
    assert_eq!(points, vec![expected]);
}

#[test]
fn comparison_ratios_match_csv_division() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        client_counts: vec![2, 8, 16],
        ..SweepSpec::over(small_base())
    };
    let points = run_sweep(&spec).unwrap();
    write_sweep_outputs(&spec, &points, dir.path()).unwrap();
    let csv = std::fs::read(dir.path().join("curve.csv")).unwrap();
    let rows = read_curve_csv(csv.as_slice()).unwrap();
    assert_eq!(rows, points);

    let cmp = compare_report(&rows).unwrap();
    let c = &cmp.comparisons[0];
    assert_eq!(
        (c.subject, c.baseline),
        (Policy::SplitFuse, Policy::PreemptivePrompt)
    );
    for r in &c.per_clients {
        let sf = rows
            .iter()
            .find(|p| p.policy == Policy::SplitFuse && p.clients == r.clients)
            .unwrap();
        let pre = rows
            .iter()
            .find(|p| p.policy == Policy::PreemptivePrompt && p.clients == r.clients)
            .unwrap();
        assert_eq!(
            r.p95_gap_ratio,
            Some(pre.p95_gap_ms.unwrap() / sf.p95_gap_ms.unwrap())
        );
        assert_eq!(
            r.mean_latency_ratio,
            Some(pre.mean_latency_s / sf.mean_latency_s)
        );
        assert_eq!(r.rps_ratio, Some(sf.rps / pre.rps));
    }
    let headline = c
        .per_clients
        .iter()
        .find(|r| r.clients == 16)
        .unwrap()
        .p95_gap_ratio;
    assert_eq!(c.headline_p95_ratio, headline);
}

#[test]
fn tail_latency_trend_holds_for_longer_generations() {
    let spec = load_config(&config("tail_latency.toml"))
        .unwrap()
        .into_sweep();
    let points = run_sweep(&spec).unwrap();
    let cmp = compare_report(&points).unwrap();
    let ratio = cmp.comparisons[0].headline_p95_ratio.unwrap();
    assert!(ratio >= 1.5, "p95 ratio {ratio}");
}

#[test]
fn scaled_runs_are_reproducible() {
    let a = run_scaled(&small_base(), 4, LbPolicy::LeastOutstanding).unwrap();
    let b = run_scaled(&small_base(), 4, LbPolicy::LeastOutstanding).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.total_requests, 4 * 48);
}

#[test]
fn aggregate_rps_grows_with_replicas() {
    let mut last = 0.0;
    for replicas in [1, 2, 4, 8] {
        let scaled = run_scaled(&small_base(), replicas, LbPolicy::RoundRobin).unwrap();
        assert!(scaled.scaling_efficiency > 0.0);
        assert!(
            scaled.aggregate_rps >= last,
            "{replicas} replicas: {} < {last}",
            scaled.aggregate_rps
        );
        last = scaled.aggregate_rps;
    }
}

#[test]
fn least_outstanding_balances_token_load() {
    let scaled = run_scaled(&small_base(), 4, LbPolicy::LeastOutstanding).unwrap();
    let loads: Vec<u64> = scaled
        .reports
        .iter()
        .map(|r| {
            r.requests
                .iter()
                .map(|q| q.prompt_tokens + q.gen_tokens)
                .sum()
        })
        .collect();
    let (lo, hi) = (*loads.iter().min().unwrap(), *loads.iter().max().unwrap());
    // Within one maximal request of each other.
    assert!(hi - lo < 6000, "{loads:?}");
}
