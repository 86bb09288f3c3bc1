//! Execution log entries and their JSON-lines form.
//!
//! Every line is `{"seq":..,"t_us":..,"kind":..,"detail":{..}}` with keys in
//! that order and detail keys in insertion order. Reals are always written
//! with exactly six decimals so the bytes never depend on float formatting.

use std::fmt::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogKind {
    SensorEvent,
    Message,
    TaskStart,
    TaskFinish,
    TaskAbort,
    BehaviorFired,
    BehaviorSuppressed,
    ActuatorCmd,
    PlayCmd,
    PriorityUpdate,
    SafetyHalt,
    TraceDropped,
}

impl LogKind {
    pub const ALL: [LogKind; 12] = [
        LogKind::SensorEvent,
        LogKind::Message,
        LogKind::TaskStart,
        LogKind::TaskFinish,
        LogKind::TaskAbort,
        LogKind::BehaviorFired,
        LogKind::BehaviorSuppressed,
        LogKind::ActuatorCmd,
        LogKind::PlayCmd,
        LogKind::PriorityUpdate,
        LogKind::SafetyHalt,
        LogKind::TraceDropped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LogKind::SensorEvent => "sensor_event",
            LogKind::Message => "message",
            LogKind::TaskStart => "task_start",
            LogKind::TaskFinish => "task_finish",
            LogKind::TaskAbort => "task_abort",
            LogKind::BehaviorFired => "behavior_fired",
            LogKind::BehaviorSuppressed => "behavior_suppressed",
            LogKind::ActuatorCmd => "actuator_cmd",
            LogKind::PlayCmd => "play_cmd",
            LogKind::PriorityUpdate => "priority_update",
            LogKind::SafetyHalt => "safety_halt",
            LogKind::TraceDropped => "trace_dropped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for LogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A value inside an entry's detail.
#[derive(Debug, Clone, PartialEq)]
pub enum LogValue {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    List(Vec<LogValue>),
    Map(Detail),
}

impl LogValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            LogValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            LogValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        self.as_int().and_then(|i| u64::try_from(i).ok())
    }

    /// Reals and integers both read as `f64`.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            LogValue::Real(r) => Some(*r),
            LogValue::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[LogValue]> {
        match self {
            LogValue::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&Detail> {
        match self {
            LogValue::Map(m) => Some(m),
            _ => None,
        }
    }
}

impl From<bool> for LogValue {
    fn from(v: bool) -> Self {
        LogValue::Bool(v)
    }
}

impl From<i64> for LogValue {
    fn from(v: i64) -> Self {
        LogValue::Int(v)
    }
}

impl From<u64> for LogValue {
    fn from(v: u64) -> Self {
        LogValue::Int(i64::try_from(v).expect("log integer exceeds i64"))
    }
}

impl From<usize> for LogValue {
    fn from(v: usize) -> Self {
        LogValue::from(v as u64)
    }
}

impl From<f64> for LogValue {
    fn from(v: f64) -> Self {
        LogValue::Real(v)
    }
}

impl From<&str> for LogValue {
    fn from(v: &str) -> Self {
        LogValue::Str(v.to_string())
    }
}

impl From<String> for LogValue {
    fn from(v: String) -> Self {
        LogValue::Str(v)
    }
}

impl From<Detail> for LogValue {
    fn from(v: Detail) -> Self {
        LogValue::Map(v)
    }
}

impl<T: Into<LogValue>> From<Vec<T>> for LogValue {
    fn from(v: Vec<T>) -> Self {
        LogValue::List(v.into_iter().map(Into::into).collect())
    }
}

impl<T: Into<LogValue>> From<Option<T>> for LogValue {
    fn from(v: Option<T>) -> Self {
        v.map_or(LogValue::Null, Into::into)
    }
}

/// Ordered key/value pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Detail(Vec<(String, LogValue)>);

impl Detail {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<LogValue>) -> Self {
        self.insert(key, value);
        self
    }

    /// Appends, or replaces the value in place if `key` is present.
    pub fn insert(&mut self, key: &str, value: impl Into<LogValue>) {
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&LogValue> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(LogValue::as_str)
    }

    pub fn u64(&self, key: &str) -> Option<u64> {
        self.get(key).and_then(LogValue::as_u64)
    }

    pub fn f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(LogValue::as_f64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LogValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        write_map(&mut out, self);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub seq: u64,
    pub t_us: u64,
    pub kind: LogKind,
    pub detail: Detail,
}

impl LogEntry {
    pub fn to_json(&self) -> String {
        let mut out = String::with_capacity(128);
        let _ = write!(out, "{{\"seq\":{},\"t_us\":{},\"kind\":\"{}\",\"detail\":", self.seq, self.t_us, self.kind);
        write_map(&mut out, &self.detail);
        out.push('}');
        out
    }
}

/// The totally ordered record of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionLog {
    pub entries: Vec<LogEntry>,
}

impl ExecutionLog {
    pub fn push(&mut self, t_us: u64, kind: LogKind, detail: Detail) -> u64 {
        let seq = self.entries.len() as u64;
        self.entries.push(LogEntry {
            seq,
            t_us,
            kind,
            detail,
        });
        seq
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn of_kind(&self, kind: LogKind) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    pub fn count(&self, kind: LogKind) -> usize {
        self.of_kind(kind).count()
    }

    pub fn get(&self, seq: u64) -> Option<&LogEntry> {
        self.entries.get(usize::try_from(seq).ok()?)
    }

    /// One JSON object per line, each terminated by a newline.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_json());
            out.push('\n');
        }
        out
    }

    /// Reads the JSON-lines form back. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, LogParseError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| LogParseError { line: i + 1, reason };
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(format!("invalid JSON: {e}")))?;
            let obj = value.as_object().ok_or_else(|| err("expected an object".into()))?;
            for key in obj.keys() {
                if !matches!(key.as_str(), "seq" | "t_us" | "kind" | "detail") {
                    return Err(err(format!("unknown key `{key}`")));
                }
            }
            let int = |key: &str| {
                obj.get(key)
                    .and_then(serde_json::Value::as_u64)
                    .ok_or_else(|| err(format!("`{key}` must be a non-negative integer")))
            };
            let seq = int("seq")?;
            let t_us = int("t_us")?;
            let kind = obj
                .get("kind")
                .and_then(serde_json::Value::as_str)
                .and_then(LogKind::parse)
                .ok_or_else(|| err("missing or unknown `kind`".into()))?;
            let detail = match obj.get("detail").map(from_json) {
                Some(LogValue::Map(d)) => d,
                _ => return Err(err("`detail` must be an object".into())),
            };
            entries.push(LogEntry {
                seq,
                t_us,
                kind,
                detail,
            });
        }
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct LogParseError {
    pub line: usize,
    pub reason: String,
}

/// Six-decimal rendering used for every real in logs and stats.
pub fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn write_value(out: &mut String, v: &LogValue) {
    match v {
        LogValue::Null => out.push_str("null"),
        LogValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        LogValue::Int(i) => {
            let _ = write!(out, "{i}");
        }
        LogValue::Real(r) if r.is_finite() => out.push_str(&fixed6(*r)),
        LogValue::Real(_) => out.push_str("null"),
        LogValue::Str(s) => out.push_str(&serde_json::to_string(s).expect("strings always serialize")),
        LogValue::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        LogValue::Map(m) => write_map(out, m),
    }
}

fn write_map(out: &mut String, m: &Detail) {
    out.push('{');
    for (i, (k, v)) in m.0.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(k).expect("strings always serialize"));
        out.push(':');
        write_value(out, v);
    }
    out.push('}');
}

fn from_json(v: &serde_json::Value) -> LogValue {
    use serde_json::Value;
    match v {
        Value::Null => LogValue::Null,
        Value::Bool(b) => LogValue::Bool(*b),
        Value::Number(n) => match n.as_i64() {
            Some(i) if !n.is_f64() => LogValue::Int(i),
            _ => LogValue::Real(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => LogValue::Str(s.clone()),
        Value::Array(items) => LogValue::List(items.iter().map(from_json).collect()),
        Value::Object(m) => LogValue::Map(Detail(m.iter().map(|(k, v)| (k.clone(), from_json(v))).collect())),
    }
}
