//! The JSON system configuration: sensors, actuators, behaviors, algorithms,
//! safety checks and scheduler parameters.
//!
//! The accepted document is a superset of the minimal device listing format
//! (`type`, `address`, `pin`, `action`, `path`), extended with significance
//! thresholds, poll periods, behavior priorities, safety checks and a
//! `scheduler` block. Unknown keys are rejected at every level.

mod priority;
mod validate;

pub use priority::{default_priorities, PriorityRequest, P_MAX};
pub use validate::{validate_config, ValidationReport, OVERRIDE_CHECK};

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{Map, Value};

use crate::sensorproc::{ParamValue, PluginKind};

pub const DEFAULT_PERIOD_US: u64 = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_WINDOW_US: u64 = 1_000_000;
pub const DEFAULT_TASK_COST_US: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorKind {
    I2c,
    Spi,
    Gpio,
    Analog,
    Virtual,
}

impl SensorKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "i2c" => Self::I2c,
            "spi" => Self::Spi,
            "gpio" => Self::Gpio,
            "analog" => Self::Analog,
            "virtual" => Self::Virtual,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::I2c => "i2c",
            Self::Spi => "spi",
            Self::Gpio => "gpio",
            Self::Analog => "analog",
            Self::Virtual => "virtual",
        }
    }

    pub(crate) fn needs_address(self) -> bool {
        matches!(self, Self::I2c | Self::Spi)
    }

    pub(crate) fn needs_pin(self) -> bool {
        matches!(self, Self::Gpio | Self::Analog)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActuatorKind {
    Pwm,
    Gpio,
    Audio,
    Virtual,
}

impl ActuatorKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "pwm" => Self::Pwm,
            "gpio" => Self::Gpio,
            "audio" => Self::Audio,
            "virtual" => Self::Virtual,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pwm => "pwm",
            Self::Gpio => "gpio",
            Self::Audio => "audio",
            Self::Virtual => "virtual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub name: String,
    pub kind: SensorKind,
    pub address: Option<u32>,
    pub pin: Option<u32>,
    /// Minimum absolute change, in reading units, for a sample to be forwarded.
    pub delta: f64,
    pub period_us: u64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorSpec {
    pub name: String,
    pub kind: ActuatorKind,
    pub pin: Option<u32>,
    pub min_value: f64,
    pub max_value: f64,
}

impl ActuatorSpec {
    /// Command issued on a safety halt: zero, clamped into the actuator range.
    pub fn neutral(&self) -> f64 {
        0.0f64.clamp(self.min_value, self.max_value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorSpec {
    pub name: String,
    /// Declared priority; `None` draws from the default pool.
    pub priority: Option<f64>,
    pub action: Option<String>,
    pub safety: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub name: String,
    pub plugin: PluginKind,
    /// Module path as written in the file, kept for round-tripping.
    pub path: Option<String>,
    pub inputs: Vec<String>,
    pub output: String,
    pub params: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyCheckSpec {
    pub name: String,
    pub sensor: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerParams {
    /// Adaptation gain, in seconds.
    pub alpha: f64,
    pub window_us: u64,
    pub p_max: f64,
    pub default_task_cost_us: u64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            window_us: DEFAULT_WINDOW_US,
            p_max: P_MAX,
            default_task_cost_us: DEFAULT_TASK_COST_US,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SystemConfig {
    pub sensors: Vec<SensorSpec>,
    pub actuators: Vec<ActuatorSpec>,
    pub behaviors: Vec<BehaviorSpec>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub safety_checks: Vec<SafetyCheckSpec>,
    pub scheduler: SchedulerParams,
}

/// A problem located by a field path such as `behaviors[1].priority`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}", join_issues(.0))]
    Schema(Vec<Issue>),
    #[error("{path}: unknown plugin `{key}`")]
    UnknownPlugin { path: String, key: String },
}

impl ConfigError {
    /// One entry per problem, field path first.
    pub fn lines(&self) -> Vec<String> {
        match self {
            ConfigError::Schema(issues) => issues.iter().map(Issue::to_string).collect(),
            other => vec![other.to_string()],
        }
    }
}

fn join_issues(issues: &[Issue]) -> String {
    issues.iter().map(Issue::to_string).collect::<Vec<_>>().join("\n")
}

impl SystemConfig {
    pub fn sensor(&self, name: &str) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.name == name)
    }

    pub fn actuator(&self, name: &str) -> Option<&ActuatorSpec> {
        self.actuators.iter().find(|a| a.name == name)
    }

    pub fn behavior(&self, name: &str) -> Option<&BehaviorSpec> {
        self.behaviors.iter().find(|b| b.name == name)
    }

    /// Behavior priorities after defaults and safety pinning, in listing order.
    pub fn resolved_priorities(&self) -> Vec<f64> {
        let listing: Vec<_> = self
            .behaviors
            .iter()
            .map(|b| PriorityRequest {
                declared: b.priority,
                safety: b.safety,
            })
            .collect();
        default_priorities(&listing)
    }

    /// Serializes to the canonical JSON form accepted by [`parse_config`].
    pub fn to_json(&self) -> String {
        let mut root = Map::new();
        root.insert("sensors".into(), Value::Array(self.sensors.iter().map(sensor_json).collect()));
        root.insert(
            "actuators".into(),
            Value::Array(self.actuators.iter().map(actuator_json).collect()),
        );
        root.insert(
            "behaviors".into(),
            Value::Array(self.behaviors.iter().map(behavior_json).collect()),
        );
        root.insert(
            "algorithms".into(),
            Value::Array(self.algorithms.iter().map(algorithm_json).collect()),
        );
        root.insert(
            "safety_checks".into(),
            Value::Array(
                self.safety_checks
                    .iter()
                    .map(|c| {
                        let mut m = Map::new();
                        m.insert("name".into(), c.name.clone().into());
                        m.insert("sensor".into(), c.sensor.clone().into());
                        m.insert("threshold".into(), num(c.threshold));
                        Value::Object(m)
                    })
                    .collect(),
            ),
        );
        let mut sched = Map::new();
        sched.insert("alpha".into(), num(self.scheduler.alpha));
        sched.insert("window_us".into(), self.scheduler.window_us.into());
        sched.insert("p_max".into(), num(self.scheduler.p_max));
        sched.insert(
            "default_task_cost_us".into(),
            self.scheduler.default_task_cost_us.into(),
        );
        root.insert("scheduler".into(), Value::Object(sched));
        serde_json::to_string_pretty(&Value::Object(root)).expect("config serializes")
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn sensor_json(s: &SensorSpec) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), s.name.clone().into());
    m.insert("type".into(), s.kind.as_str().into());
    if let Some(a) = s.address {
        m.insert("address".into(), format!("0x{a:x}").into());
    }
    if let Some(p) = s.pin {
        m.insert("pin".into(), p.into());
    }
    m.insert("delta".into(), num(s.delta));
    m.insert("period_us".into(), s.period_us.into());
    m.insert("units".into(), s.units.clone().into());
    Value::Object(m)
}

fn actuator_json(a: &ActuatorSpec) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), a.name.clone().into());
    m.insert("type".into(), a.kind.as_str().into());
    if let Some(p) = a.pin {
        m.insert("pin".into(), p.into());
    }
    m.insert("min_value".into(), num(a.min_value));
    m.insert("max_value".into(), num(a.max_value));
    Value::Object(m)
}

fn behavior_json(b: &BehaviorSpec) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), b.name.clone().into());
    if let Some(p) = b.priority {
        m.insert("priority".into(), num(p));
    }
    if let Some(a) = &b.action {
        m.insert("action".into(), a.clone().into());
    }
    m.insert("safety".into(), b.safety.into());
    Value::Object(m)
}

fn algorithm_json(a: &AlgorithmSpec) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), a.name.clone().into());
    m.insert("plugin".into(), a.plugin.key().into());
    if let Some(p) = &a.path {
        m.insert("path".into(), p.clone().into());
    }
    if !a.inputs.is_empty() {
        m.insert(
            "inputs".into(),
            Value::Array(a.inputs.iter().cloned().map(Value::from).collect()),
        );
    }
    m.insert("output".into(), a.output.clone().into());
    if !a.params.is_empty() {
        let params = a
            .params
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    ParamValue::Number(n) => num(*n),
                    ParamValue::Text(s) => s.clone().into(),
                };
                (k.clone(), v)
            })
            .collect();
        m.insert("params".into(), Value::Object(params));
    }
    Value::Object(m)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut cx = Reader::default();
    let config = cx.root(&root);
    let mut issues = cx.issues;
    if let Some(config) = &config {
        if issues.is_empty() && cx.unknown_plugins.is_empty() {
            issues.extend(validate_config(config).entries);
        }
    }
    if !issues.is_empty() {
        return Err(ConfigError::Schema(issues));
    }
    if let Some((path, key)) = cx.unknown_plugins.into_iter().next() {
        return Err(ConfigError::UnknownPlugin { path, key });
    }
    Ok(config.expect("no issues implies a config"))
}

pub(crate) fn is_config_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Walks the JSON tree, collecting issues with field paths.
#[derive(Default)]
struct Reader {
    issues: Vec<Issue>,
    unknown_plugins: Vec<(String, String)>,
}

struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl Reader {
    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue::new(path, message));
    }

    fn object<'a>(&mut self, path: String, v: &'a Value, allowed: &[&str]) -> Option<Obj<'a>> {
        let Some(map) = v.as_object() else {
            self.issue(path, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                let p = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                self.issue(p, "unknown key");
            }
        }
        Some(Obj { path, map })
    }

    fn array<'a>(&mut self, obj: &Obj<'a>, key: &str) -> &'a [Value] {
        match obj.map.get(key) {
            None => &[],
            Some(Value::Array(items)) => items,
            Some(_) => {
                self.issue(obj.field(key), "expected an array");
                &[]
            }
        }
    }

    fn string(&mut self, obj: &Obj<'_>, key: &str) -> Option<String> {
        match obj.map.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.issue(obj.field(key), "expected a string");
                None
            }
            None => None,
        }
    }

    fn required_string(&mut self, obj: &Obj<'_>, key: &str) -> Option<String> {
        if !obj.map.contains_key(key) {
            self.issue(obj.field(key), "missing required field");
            return None;
        }
        self.string(obj, key)
    }

    fn ident(&mut self, obj: &Obj<'_>, key: &str) -> Option<String> {
        let s = self.required_string(obj, key)?;
        if !is_config_ident(&s) {
            self.issue(obj.field(key), format!("`{s}` is not a valid identifier"));
            return None;
        }
        Some(s)
    }

    fn number(&mut self, obj: &Obj<'_>, key: &str) -> Option<f64> {
        match obj.map.get(key) {
            Some(Value::Number(n)) => n.as_f64(),
            Some(_) => {
                self.issue(obj.field(key), "expected a number");
                None
            }
            None => None,
        }
    }

    fn unsigned(&mut self, obj: &Obj<'_>, key: &str) -> Option<u64> {
        match obj.map.get(key) {
            Some(Value::Number(n)) if n.is_u64() => n.as_u64(),
            // the minimal listing format writes pins as strings
            Some(Value::String(s)) if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) => {
                match s.parse() {
                    Ok(v) => Some(v),
                    Err(_) => {
                        self.issue(obj.field(key), "integer out of range");
                        None
                    }
                }
            }
            Some(_) => {
                self.issue(obj.field(key), "expected a non-negative integer");
                None
            }
            None => None,
        }
    }

    fn pin(&mut self, obj: &Obj<'_>) -> Option<u32> {
        let v = self.unsigned(obj, "pin")?;
        match u32::try_from(v) {
            Ok(p) => Some(p),
            Err(_) => {
                self.issue(obj.field("pin"), "pin out of range");
                None
            }
        }
    }

    fn boolean(&mut self, obj: &Obj<'_>, key: &str) -> Option<bool> {
        match obj.map.get(key) {
            Some(Value::Bool(b)) => Some(*b),
            Some(_) => {
                self.issue(obj.field(key), "expected a boolean");
                None
            }
            None => None,
        }
    }

    fn root(&mut self, root: &Value) -> Option<SystemConfig> {
        let obj = self.object(
            String::new(),
            root,
            &[
                "sensors",
                "actuators",
                "behaviors",
                "algorithms",
                "safety_checks",
                "scheduler",
            ],
        )?;
        let sensors = self
            .array(&obj, "sensors")
            .iter()
            .enumerate()
            .filter_map(|(i, v)| self.sensor(format!("sensors[{i}]"), v))
            .collect();
        let actuators = self
            .array(&obj, "actuators")
            .iter()
            .enumerate()
            .filter_map(|(i, v)| self.actuator(format!("actuators[{i}]"), v))
            .collect();
        let behaviors = self
            .array(&obj, "behaviors")
            .iter()
            .enumerate()
            .filter_map(|(i, v)| self.behavior(format!("behaviors[{i}]"), v))
            .collect();
        let algorithms = self
            .array(&obj, "algorithms")
            .iter()
            .enumerate()
            .filter_map(|(i, v)| self.algorithm(format!("algorithms[{i}]"), v))
            .collect();
        let safety_checks = self
            .array(&obj, "safety_checks")
            .iter()
            .enumerate()
            .filter_map(|(i, v)| self.safety_check(format!("safety_checks[{i}]"), v))
            .collect();
        let scheduler = match obj.map.get("scheduler") {
            Some(v) => self.scheduler(v)?,
            None => SchedulerParams::default(),
        };
        Some(SystemConfig {
            sensors,
            actuators,
            behaviors,
            algorithms,
            safety_checks,
            scheduler,
        })
    }

    fn sensor(&mut self, path: String, v: &Value) -> Option<SensorSpec> {
        let obj = self.object(
            path,
            v,
            &["name", "type", "address", "pin", "delta", "period_us", "units"],
        )?;
        let name = self.ident(&obj, "name");
        let kind = self.required_string(&obj, "type").and_then(|t| {
            let k = SensorKind::parse(&t);
            if k.is_none() {
                self.issue(obj.field("type"), format!("unknown sensor type `{t}`"));
            }
            k
        });
        let address = self.string(&obj, "address").and_then(|a| {
            let hex = a.strip_prefix("0x").or_else(|| a.strip_prefix("0X"));
            let parsed = hex.and_then(|h| u32::from_str_radix(h, 16).ok());
            if parsed.is_none() {
                self.issue(obj.field("address"), format!("`{a}` is not a 0x-prefixed hex address"));
            }
            parsed
        });
        let pin = self.pin(&obj);
        let delta = self.number(&obj, "delta").unwrap_or(0.0);
        let period_us = self.unsigned(&obj, "period_us").unwrap_or(DEFAULT_PERIOD_US);
        let units = self.string(&obj, "units").unwrap_or_default();
        Some(SensorSpec {
            name: name?,
            kind: kind?,
            address,
            pin,
            delta,
            period_us,
            units,
        })
    }

    fn actuator(&mut self, path: String, v: &Value) -> Option<ActuatorSpec> {
        let obj = self.object(path, v, &["name", "type", "pin", "min_value", "max_value"])?;
        let name = self.ident(&obj, "name");
        let kind = self.required_string(&obj, "type").and_then(|t| {
            let k = ActuatorKind::parse(&t);
            if k.is_none() {
                self.issue(obj.field("type"), format!("unknown actuator type `{t}`"));
            }
            k
        });
        let pin = self.pin(&obj);
        let min_value = self.number(&obj, "min_value").unwrap_or(0.0);
        let max_value = self.number(&obj, "max_value").unwrap_or(1.0);
        Some(ActuatorSpec {
            name: name?,
            kind: kind?,
            pin,
            min_value,
            max_value,
        })
    }

    fn behavior(&mut self, path: String, v: &Value) -> Option<BehaviorSpec> {
        let obj = self.object(path, v, &["name", "priority", "action", "safety"])?;
        let name = self.ident(&obj, "name");
        let priority = self.number(&obj, "priority");
        let action = self.string(&obj, "action");
        let safety = self.boolean(&obj, "safety").unwrap_or(false);
        Some(BehaviorSpec {
            name: name?,
            priority,
            action,
            safety,
        })
    }

    fn algorithm(&mut self, path: String, v: &Value) -> Option<AlgorithmSpec> {
        let obj = self.object(path, v, &["name", "plugin", "path", "inputs", "output", "params"])?;
        let name = self.ident(&obj, "name");
        let module_path = self.string(&obj, "path");
        let plugin = match (self.string(&obj, "plugin"), &module_path) {
            (Some(key), _) => {
                let kind = PluginKind::from_key(&key);
                if kind.is_none() {
                    self.unknown_plugins.push((obj.field("plugin"), key));
                }
                kind
            }
            (None, Some(p)) => Some(PluginKind::from_module_path(p)),
            (None, None) => {
                if !obj.map.contains_key("plugin") {
                    self.issue(obj.field("plugin"), "one of `plugin` or `path` is required");
                }
                None
            }
        };
        let inputs = match obj.map.get("inputs") {
            None => Vec::new(),
            Some(Value::Array(items)) => {
                if items.is_empty() {
                    self.issue(obj.field("inputs"), "must not be empty");
                }
                items
                    .iter()
                    .enumerate()
                    .filter_map(|(i, item)| match item {
                        Value::String(s) => Some(s.clone()),
                        _ => {
                            self.issue(format!("{}[{i}]", obj.field("inputs")), "expected a string");
                            None
                        }
                    })
                    .collect()
            }
            Some(_) => {
                self.issue(obj.field("inputs"), "expected an array");
                Vec::new()
            }
        };
        let output = self.string(&obj, "output");
        let mut params = BTreeMap::new();
        match obj.map.get("params") {
            None => {}
            Some(Value::Object(m)) => {
                for (k, v) in m {
                    let p = match v {
                        Value::Number(n) => n.as_f64().map(ParamValue::Number),
                        Value::String(s) => Some(ParamValue::Text(s.clone())),
                        _ => None,
                    };
                    match p {
                        Some(p) => {
                            params.insert(k.clone(), p);
                        }
                        None => self.issue(
                            format!("{}.{k}", obj.field("params")),
                            "expected a number or string",
                        ),
                    }
                }
            }
            Some(_) => self.issue(obj.field("params"), "expected an object"),
        }
        let name = name?;
        Some(AlgorithmSpec {
            output: output.unwrap_or_else(|| name.clone()),
            name,
            plugin: plugin?,
            path: module_path,
            inputs,
            params,
        })
    }

    fn safety_check(&mut self, path: String, v: &Value) -> Option<SafetyCheckSpec> {
        let obj = self.object(path, v, &["name", "sensor", "threshold"])?;
        let name = self.ident(&obj, "name");
        let sensor = self.required_string(&obj, "sensor");
        let threshold = self.number(&obj, "threshold");
        if threshold.is_none() && !obj.map.contains_key("threshold") {
            self.issue(obj.field("threshold"), "missing required field");
        }
        Some(SafetyCheckSpec {
            name: name?,
            sensor: sensor?,
            threshold: threshold?,
        })
    }

    fn scheduler(&mut self, v: &Value) -> Option<SchedulerParams> {
        let obj = self.object(
            "scheduler".into(),
            v,
            &["alpha", "window_us", "p_max", "default_task_cost_us"],
        )?;
        let d = SchedulerParams::default();
        Some(SchedulerParams {
            alpha: self.number(&obj, "alpha").unwrap_or(d.alpha),
            window_us: self.unsigned(&obj, "window_us").unwrap_or(d.window_us),
            p_max: self.number(&obj, "p_max").unwrap_or(d.p_max),
            default_task_cost_us: self
                .unsigned(&obj, "default_task_cost_us")
                .unwrap_or(d.default_task_cost_us),
        })
    }
}

impl Obj<'_> {
    fn field(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }
}
