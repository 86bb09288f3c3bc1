//! Deterministic discrete-event replay of sensor traces.
//!
//! A run binds a validated configuration, a bound behavior program and a
//! trace into an [`ExecutionLog`]. Time is virtual: every task occupies
//! `default_task_cost_us` on a single processor, and identical inputs give
//! byte-identical logs.

mod log;
mod sim;
mod stats;
mod trace;

pub use log::{fixed6, Detail, ExecutionLog, LogEntry, LogKind, LogParseError, LogValue};
pub use sim::{
    algorithm_task, behavior_task, build_tasks, control_task, forward_task, run, safety_task, sensor_task, STOP_COMMAND,
};
pub use stats::{compute_stats, LatencyStats, MalformedLog, SimStats};
pub use trace::{load_trace, truncate_trace, TraceError, TraceEvent, TraceEventKind};
