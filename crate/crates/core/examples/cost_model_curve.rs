//! Print the latency and throughput curve of the default cost model and the
//! token counts at which it saturates.

use batchsim::{CostModelParams, ModelKind};

fn main() {
    let ramp = CostModelParams::default();
    let affine = CostModelParams::new(ModelKind::Affine, 20.0, 10_000.0, 0.0).unwrap();

    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}",
        "tokens", "ramp ms", "ramp tok/s", "affine ms", "affine tok/s"
    );
    for tokens in [1, 16, 64, 128, 200, 256, 512, 1024, 2048, 4096] {
        println!(
            "{tokens:>6} {:>12.2} {:>12.0} {:>12.2} {:>12.0}",
            ramp.forward_latency(tokens, 1),
            ramp.throughput_at(tokens),
            affine.forward_latency(tokens, 1),
            affine.throughput_at(tokens),
        );
    }

    for fraction in [0.5, 0.9, 1.0] {
        println!(
            "{:.0}% of peak: ramp {:?} tokens, affine {:?} tokens",
            fraction * 100.0,
            ramp.saturation_tokens(fraction),
            affine.saturation_tokens(fraction)
        );
    }
    println!("default token budget: {:?}", ramp.default_token_budget());
}
