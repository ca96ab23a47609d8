//! Deterministic discrete-event simulator and benchmark harness for
//! LLM-serving batch schedulers.
//!
//! The crate models a serving engine at forward-pass granularity:
//!
//! - [`cost_model`] maps the token count of a pass to its latency.
//! - [`kv_cache`] keeps blocked KV-cache bookkeeping.
//! - [`scheduler`] composes each pass under SplitFuse or one of the two
//!   baseline continuous-batching policies.
//! - [`engine`] drives closed-loop clients against a virtual clock and
//!   records every token timestamp.
//! - [`metrics`] turns a report into throughput, SLA-based effective
//!   throughput and tail-latency figures.
//! - [`replica`] dispatches load across independent engine replicas.
//! - [`bench`] loads TOML scenarios, runs client sweeps and compares
//!   policies.
//!
//! ```
//! use batchsim::{run_simulation, Policy, Scenario};
//!
//! let mut scenario = Scenario::default().with_policy(Policy::SplitFuse);
//! scenario.workload.total_requests = 8;
//! let report = run_simulation(&scenario).unwrap();
//! assert_eq!(report.requests.len(), 8);
//! ```

pub mod bench;
pub mod cost_model;
pub mod engine;
pub mod error;
pub mod kv_cache;
pub mod metrics;
pub mod replica;
pub mod scheduler;
pub mod workload;

pub use bench::{compare_report, load_config, run_sweep, CurvePoint, LoadedConfig, SweepSpec};
pub use cost_model::{CostModelParams, ModelKind};
pub use engine::{run_requests, run_simulation, validate_scenario, Scenario, SimReport};
pub use error::{BenchError, ConfigError, KvError, SimError};
pub use kv_cache::{BlockPool, KvConfig};
pub use metrics::{SlaConfig, Summary};
pub use replica::{dispatch, run_scaled, LbPolicy, ScaledReport};
pub use scheduler::{equal_partition, ForwardBatch, Policy, SchedulerConfig};
pub use workload::{generate_workload, WorkloadSpec};
