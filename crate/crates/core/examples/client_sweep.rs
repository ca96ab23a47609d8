//! Sweep client counts for two policies and print the throughput/latency curve
//! as CSV.

use batchsim::bench::write_curve_csv;
use batchsim::{run_sweep, Scenario, SweepSpec};

fn main() {
    let spec = SweepSpec::over(Scenario::default());
    let points = run_sweep(&spec).unwrap();
    write_curve_csv(&points, std::io::stdout().lock()).unwrap();
}
