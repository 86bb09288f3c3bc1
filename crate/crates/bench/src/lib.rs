//! Workloads shared by the runtime benchmarks.

use std::path::PathBuf;

use robosync_core::engine::{load_trace, TraceEvent};
use robosync_core::{bind_program, parse_config, parse_program, BoundProgram, SystemConfig};

pub fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub struct Workload {
    pub config: SystemConfig,
    pub program: BoundProgram,
    pub trace: Vec<TraceEvent>,
}

impl Workload {
    pub fn load(config: &str, behavior: &str, trace: &str) -> Self {
        let config = parse_config(&fixture(config)).expect("config");
        let program = bind_program(&parse_program(&fixture(behavior)).expect("program"), &config).expect("bind");
        let trace = load_trace(&fixture(trace), &config).expect("trace");
        Self { config, program, trace }
    }

    pub fn adaptive() -> Self {
        Self::load("adaptive_config.json", "adaptive.rsb", "adaptive_trace.jsonl")
    }

    /// Replaces the trace with `n` readings cycling through every sensor,
    /// `step_us` apart, with values sweeping a sawtooth over [0, 10).
    pub fn with_synthetic_trace(mut self, n: usize, step_us: u64) -> Self {
        let names: Vec<String> = self.config.sensors.iter().map(|s| s.name.clone()).collect();
        self.trace = (0..n)
            .map(|i| {
                let value = (i * 7 % 40) as f64 / 4.0;
                TraceEvent::reading(i + 1, i as u64 * step_us, names[i % names.len()].clone(), value)
            })
            .collect();
        self
    }
}
