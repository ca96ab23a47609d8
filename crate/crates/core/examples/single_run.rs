//! Simulate the default long-prompt scenario and print its summary.
//!
//! Pass a path as the first argument to also write the JSON report.

use batchsim::{run_simulation, Scenario};

fn main() {
    let scenario = Scenario::default();
    let report = run_simulation(&scenario).unwrap();
    let s = &report.summary;
    println!("requests         {}", report.requests.len());
    println!("passes           {}", report.passes.len());
    println!("simulated time   {:.2} s", report.end_time_us as f64 / 1e6);
    println!("throughput       {:.3} rps", s.rps);
    println!("mean latency     {:.2} s", s.mean_latency_s);
    println!(
        "effective rps    {:.3} / {:.3} / {:.3} at 2/4/6 tok/s",
        s.effective_rps_at_2tps, s.effective_rps_at_4tps, s.effective_rps_at_6tps
    );
    println!(
        "token gap p50    {:.1} ms",
        s.p50_gap_ms.unwrap_or(f64::NAN)
    );
    println!(
        "token gap p95    {:.1} ms",
        s.p95_gap_ms.unwrap_or(f64::NAN)
    );
    println!("max pass tokens  {}", s.max_pass_tokens);

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, report.to_json()).unwrap();
        println!("wrote {path}");
    }
}
