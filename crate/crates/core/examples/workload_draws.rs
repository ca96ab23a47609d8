//! Draw a seeded workload and print its sample moments.

use batchsim::{generate_workload, WorkloadSpec};

fn main() {
    let spec = WorkloadSpec::default();
    let shapes = generate_workload(&spec);
    let n = shapes.len() as f64;
    let stats = |xs: Vec<f64>| {
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        (
            mean,
            sd,
            xs.iter().cloned().fold(f64::MAX, f64::min),
            xs.iter().cloned().fold(0.0, f64::max),
        )
    };
    let p = stats(shapes.iter().map(|s| s.prompt_tokens as f64).collect());
    let g = stats(shapes.iter().map(|s| s.generation_tokens as f64).collect());
    println!("seed {} requests {}", spec.seed, shapes.len());
    println!(
        "prompt      mean {:.1} sd {:.1} min {} max {}",
        p.0, p.1, p.2, p.3
    );
    println!(
        "generation  mean {:.1} sd {:.1} min {} max {}",
        g.0, g.1, g.2, g.3
    );
    println!("first five: {:?}", &shapes[..5]);
}
