use std::collections::BTreeMap;

use super::log::{Detail, ExecutionLog, LogKind};
use crate::bus::Layer;

/// Enqueue-to-start waiting time, in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LatencyStats {
    pub count: u64,
    pub min_us: u64,
    pub max_us: u64,
    pub total_us: u64,
}

impl LatencyStats {
    pub fn add(&mut self, us: u64) {
        if self.count == 0 {
            self.min_us = us;
            self.max_us = us;
        } else {
            self.min_us = self.min_us.min(us);
            self.max_us = self.max_us.max(us);
        }
        self.count += 1;
        self.total_us += us;
    }

    pub fn mean_us(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total_us as f64 / self.count as f64
        }
    }

    fn detail(&self) -> Detail {
        Detail::new()
            .with("count", self.count)
            .with("min", self.min_us)
            .with("mean", self.mean_us())
            .with("max", self.max_us)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub sensor_events: u64,
    /// Published messages by producing layer.
    pub messages_per_layer: BTreeMap<Layer, u64>,
    pub dispatches: u64,
    pub completions: u64,
    /// Running tasks cut short by a halt.
    pub preemptions: u64,
    /// All aborted jobs, running or queued.
    pub aborts: u64,
    pub latency: LatencyStats,
    pub task_latency: BTreeMap<String, LatencyStats>,
    pub fired: u64,
    pub suppressed: u64,
    pub actuator_cmds: u64,
    pub play_cmds: u64,
    pub priority_updates: u64,
    pub dropped: u64,
    pub halted: bool,
    pub halt_t_us: Option<u64>,
}

impl Default for SimStats {
    fn default() -> Self {
        Self {
            sensor_events: 0,
            messages_per_layer: Layer::ALL.into_iter().map(|l| (l, 0)).collect(),
            dispatches: 0,
            completions: 0,
            preemptions: 0,
            aborts: 0,
            latency: LatencyStats::default(),
            task_latency: BTreeMap::new(),
            fired: 0,
            suppressed: 0,
            actuator_cmds: 0,
            play_cmds: 0,
            priority_updates: 0,
            dropped: 0,
            halted: false,
            halt_t_us: None,
        }
    }
}

impl SimStats {
    /// Single-line JSON with fixed key order.
    pub fn to_json(&self) -> String {
        let mut layers = Detail::new();
        for (l, n) in &self.messages_per_layer {
            layers.insert(l.as_str(), *n);
        }
        let mut per_task = Detail::new();
        for (t, l) in &self.task_latency {
            per_task.insert(t, l.detail());
        }
        Detail::new()
            .with("sensor_events", self.sensor_events)
            .with("messages_per_layer", layers)
            .with("dispatches", self.dispatches)
            .with("completions", self.completions)
            .with("preemptions", self.preemptions)
            .with("aborts", self.aborts)
            .with("latency_us", self.latency.detail().with("per_task", per_task))
            .with("fired", self.fired)
            .with("suppressed", self.suppressed)
            .with("actuator_cmds", self.actuator_cmds)
            .with("play_cmds", self.play_cmds)
            .with("priority_updates", self.priority_updates)
            .with("dropped", self.dropped)
            .with("halted", self.halted)
            .with("halt_t_us", self.halt_t_us)
            .to_json()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("entry {seq}: {reason}")]
pub struct MalformedLog {
    pub seq: u64,
    pub reason: String,
}

/// Aggregates a log, checking that it is internally consistent: sequence
/// numbers are gap-free, time never runs backwards, and every task start is
/// closed by exactly one finish or abort before the next start.
pub fn compute_stats(log: &ExecutionLog) -> Result<SimStats, MalformedLog> {
    let mut s = SimStats::default();
    let mut running: Option<(String, u64)> = None;
    let mut last_t = 0;
    for (i, e) in log.entries.iter().enumerate() {
        let bad = |reason: String| MalformedLog { seq: e.seq, reason };
        if e.seq != i as u64 {
            return Err(bad(format!("expected seq {i}")));
        }
        if e.t_us < last_t {
            return Err(bad(format!("time goes back from {last_t} to {}", e.t_us)));
        }
        last_t = e.t_us;
        let field = |key: &str| e.detail.str(key).ok_or_else(|| bad(format!("missing `{key}`")));
        let int = |key: &str| e.detail.u64(key).ok_or_else(|| bad(format!("missing `{key}`")));
        match e.kind {
            LogKind::SensorEvent => s.sensor_events += 1,
            LogKind::Message => {
                let layer = Layer::parse(field("layer")?).ok_or_else(|| bad("unknown layer".into()))?;
                *s.messages_per_layer.entry(layer).or_default() += 1;
            }
            LogKind::TaskStart => {
                let task = field("task")?;
                let job = int("job")?;
                let enqueued = int("enqueued_t_us")?;
                if let Some((other, j)) = &running {
                    return Err(bad(format!("`{task}` starts while `{other}` job {j} is running")));
                }
                let wait = e
                    .t_us
                    .checked_sub(enqueued)
                    .ok_or_else(|| bad("job starts before it was enqueued".into()))?;
                s.dispatches += 1;
                s.latency.add(wait);
                s.task_latency.entry(task.to_string()).or_default().add(wait);
                running = Some((task.to_string(), job));
            }
            LogKind::TaskFinish => {
                let closing = (field("task")?.to_string(), int("job")?);
                if running.as_ref() != Some(&closing) {
                    return Err(bad(format!("`{}` job {} finishes without a start", closing.0, closing.1)));
                }
                running = None;
                s.completions += 1;
            }
            LogKind::TaskAbort => {
                let closing = (field("task")?.to_string(), int("job")?);
                match field("reason")? {
                    "preempted" => {
                        if running.as_ref() != Some(&closing) {
                            return Err(bad(format!("`{}` job {} aborts without a start", closing.0, closing.1)));
                        }
                        running = None;
                        s.preemptions += 1;
                    }
                    "purged" => {}
                    other => return Err(bad(format!("unknown abort reason `{other}`"))),
                }
                s.aborts += 1;
            }
            LogKind::BehaviorFired => s.fired += 1,
            LogKind::BehaviorSuppressed => s.suppressed += 1,
            LogKind::ActuatorCmd => s.actuator_cmds += 1,
            LogKind::PlayCmd => s.play_cmds += 1,
            LogKind::PriorityUpdate => s.priority_updates += 1,
            LogKind::SafetyHalt => {
                if s.halted {
                    return Err(bad("second halt".into()));
                }
                s.halted = true;
                s.halt_t_us = Some(e.t_us);
            }
            LogKind::TraceDropped => s.dropped += 1,
        }
    }
    if let Some((task, job)) = running {
        return Err(MalformedLog {
            seq: log.entries.len() as u64,
            reason: format!("`{task}` job {job} never finishes"),
        });
    }
    Ok(s)
}
