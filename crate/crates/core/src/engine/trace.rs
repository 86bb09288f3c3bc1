//! Recorded sensor traces in JSON-lines form.

use serde_json::Value;

use crate::config::SystemConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEventKind {
    Reading { sensor: String, value: f64 },
    Override { command: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    /// 1-based line in the trace file.
    pub line: usize,
    pub t_us: u64,
    pub kind: TraceEventKind,
}

impl TraceEvent {
    pub fn reading(line: usize, t_us: u64, sensor: impl Into<String>, value: f64) -> Self {
        Self {
            line,
            t_us,
            kind: TraceEventKind::Reading {
                sensor: sensor.into(),
                value,
            },
        }
    }

    pub fn command(line: usize, t_us: u64, command: impl Into<String>) -> Self {
        Self {
            line,
            t_us,
            kind: TraceEventKind::Override {
                command: command.into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct TraceError {
    pub line: usize,
    pub reason: String,
}

/// Parses one event per line, either `{"t_us", "sensor", "value"}` or
/// `{"t_us", "override"}`, and sorts stably by time. Blank lines are skipped.
pub fn load_trace(text: &str, config: &SystemConfig) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let err = |reason: String| TraceError { line, reason };
        let value: Value = serde_json::from_str(raw).map_err(|e| err(format!("invalid JSON: {e}")))?;
        let obj = value.as_object().ok_or_else(|| err("expected an object".into()))?;
        if let Some(key) = obj.keys().find(|k| !matches!(k.as_str(), "t_us" | "sensor" | "value" | "override")) {
            return Err(err(format!("unknown key `{key}`")));
        }
        let t_us = obj
            .get("t_us")
            .ok_or_else(|| err("missing `t_us`".into()))?
            .as_u64()
            .ok_or_else(|| err("`t_us` must be a non-negative integer".into()))?;
        let kind = match (obj.get("sensor"), obj.get("override")) {
            (Some(sensor), None) => {
                let sensor = sensor.as_str().ok_or_else(|| err("`sensor` must be a string".into()))?;
                if config.sensor(sensor).is_none() {
                    return Err(err(format!("unknown sensor `{sensor}`")));
                }
                let value = obj
                    .get("value")
                    .ok_or_else(|| err("missing `value`".into()))?
                    .as_f64()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err("`value` must be a finite number".into()))?;
                TraceEventKind::Reading {
                    sensor: sensor.to_string(),
                    value,
                }
            }
            (None, Some(cmd)) => {
                if obj.contains_key("value") {
                    return Err(err("an override takes no `value`".into()));
                }
                let command = cmd.as_str().ok_or_else(|| err("`override` must be a string".into()))?;
                TraceEventKind::Override {
                    command: command.to_string(),
                }
            }
            (Some(_), Some(_)) => return Err(err("`sensor` and `override` are mutually exclusive".into())),
            (None, None) => return Err(err("expected `sensor` or `override`".into())),
        };
        events.push(TraceEvent { line, t_us, kind });
    }
    events.sort_by_key(|e| e.t_us);
    Ok(events)
}

/// Drops every event at or after `until_us`.
pub fn truncate_trace(events: &mut Vec<TraceEvent>, until_us: u64) {
    events.retain(|e| e.t_us < until_us);
}
