//! Behavior-driven robot runtime: configuration, behavior language, sensor
//! processing, layered bus, adaptive scheduling and a deterministic engine.

pub mod bus;
pub mod config;
pub mod dsl;
pub mod engine;
pub mod sched;
pub mod sensorproc;

pub use bus::{Bus, BusError, Layer, Message};
pub use config::{parse_config, validate_config, ConfigError, SystemConfig};
pub use dsl::{bind_program, format_program, parse_program, BehaviorProgram, BindErrors, BoundProgram, ParseError};
pub use engine::{compute_stats, load_trace, run, ExecutionLog, LogEntry, LogKind, SimStats, TraceError, TraceEvent};
pub use sched::{TaskCategory, TaskDescriptor};
pub use sensorproc::{gate_significant, jerk_level, touch_level, Reading};
