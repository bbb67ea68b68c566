//! Noise-aware admission policy and the FCFS bootstrap service.
//!
//! The server-side orchestration splits in two: [`policy`] decides *whether*
//! a client's refresh request is admitted right now, based on the reported
//! noise budget and queue pressure; [`service`] owns the task queue, the
//! data map, and the worker pool that actually executes admitted refreshes
//! in first-come-first-served order.

pub mod policy;
pub mod service;

pub use policy::{evaluate_policy, Decision, NoiseReport, PolicyConfig};
pub use service::{
    BootstrapRunner, BootstrapService, EnclaveRunner, InjectedDelayRunner, PollOutcome,
    SchedulerConfig, TaskRecord, WaitingStats,
};
