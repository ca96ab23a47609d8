use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use batchsim::bench::{self, LoadedConfig};
use batchsim::{
    compare_report, load_config, run_scaled, run_simulation, run_sweep, BenchError, LbPolicy,
    Scenario,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "batchsim",
    version,
    about = "Simulate and compare LLM-serving batch schedulers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario or sweep config (TOML). Defaults to the built-in long-prompt scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; nothing is written outside it.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides workload.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write report.json.
    Run(Common),
    /// Sweep client counts × policies and write curve.csv and sweep.json.
    Sweep(Common),
    /// Run the scenario across load-balanced replicas and write scaled.json.
    Scale {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        replicas: usize,
        #[arg(long, default_value = "round_robin")]
        lb_policy: LbPolicy,
    },
    /// Compare policies from a curve CSV (or a fresh sweep) and write comparison.json.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Curve CSV from a previous sweep.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<LoadedConfig, BenchError> {
    let mut loaded = match &common.config {
        Some(path) => load_config(path)?,
        None => LoadedConfig::Scenario(Scenario::default()),
    };
    if let Some(seed) = common.seed {
        match &mut loaded {
            LoadedConfig::Scenario(s) => s.workload.seed = seed,
            LoadedConfig::Sweep(s) => s.base.workload.seed = seed,
        }
    }
    Ok(loaded)
}

fn write(out: &Path, name: &str, body: String) -> Result<(), BenchError> {
    fs::create_dir_all(out)?;
    fs::write(out.join(name), body)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(common) => {
            let scenario = *load(&common)?.scenario();
            let report = run_simulation(&scenario)?;
            write(&common.out, "report.json", report.to_json())?;
            let s = report.summary;
            println!(
                "policy={} clients={} rps={:.4} mean_latency_s={:.3} effective_rps@2/4/6={:.4}/{:.4}/{:.4} \
                 gap_ms p50/p90/p95={}/{}/{} max_pass_tokens={}",
                scenario.scheduler.policy,
                scenario.clients,
                s.rps,
                s.mean_latency_s,
                s.effective_rps_at_2tps,
                s.effective_rps_at_4tps,
                s.effective_rps_at_6tps,
                fmt_opt(s.p50_gap_ms),
                fmt_opt(s.p90_gap_ms),
                fmt_opt(s.p95_gap_ms),
                s.max_pass_tokens
            );
        }
        Command::Sweep(common) => {
            let spec = load(&common)?.into_sweep();
            let points = run_sweep(&spec)?;
            bench::write_sweep_outputs(&spec, &points, &common.out)?;
            println!("policy,clients,rps,mean_latency_s,eff_rps_2,eff_rps_4,eff_rps_6,p95_gap_ms");
            for p in &points {
                println!(
                    "{},{},{:.4},{:.3},{:.4},{:.4},{:.4},{}",
                    p.policy,
                    p.clients,
                    p.rps,
                    p.mean_latency_s,
                    p.effective_rps_at_2tps,
                    p.effective_rps_at_4tps,
                    p.effective_rps_at_6tps,
                    fmt_opt(p.p95_gap_ms)
                );
            }
        }
        Command::Scale {
            common,
            replicas,
            lb_policy,
        } => {
            let scenario = *load(&common)?.scenario();
            let scaled = run_scaled(&scenario, replicas, lb_policy)?;
            write(
                &common.out,
                "scaled.json",
                serde_json::to_string_pretty(&scaled)?,
            )?;
            println!(
                "replicas={} lb_policy={} aggregate_rps={:.4} single_replica_rps={:.4} efficiency={:.4}",
                scaled.replicas,
                scaled.lb_policy,
                scaled.aggregate_rps,
                scaled.single_replica_rps,
                scaled.scaling_efficiency
            );
        }
        Command::Compare { common, input } => {
            let points = match input {
                Some(path) => bench::read_curve_csv(fs::File::open(path)?)?,
                None => run_sweep(&load(&common)?.into_sweep())?,
            };
            let cmp = compare_report(&points)?;
            write(
                &common.out,
                "comparison.json",
                serde_json::to_string_pretty(&cmp)?,
            )?;
            for c in &cmp.comparisons {
                let [e2, e4, e6] = c.max_effective_rps_ratio;
                println!(
                    "{} vs {}: max effective rps ratio @2/4/6 = {}/{}/{}, p95 gap ratio @{} clients = {}",
                    c.subject,
                    c.baseline,
                    fmt_opt(e2),
                    fmt_opt(e4),
                    fmt_opt(e6),
                    bench::HEADLINE_CLIENTS,
                    fmt_opt(c.headline_p95_ratio)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
