use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{jerk_level, touch_level, ProcessedValue, Reading};

/// Keys accepted by [`PluginKind::from_key`], in documentation order.
pub const REGISTRY_KEYS: &[&str] = &[
    "passthrough",
    "touch_level",
    "jerk_level",
    "moving_average",
    "threshold_classifier",
    "stub",
];

/// A plugin parameter value as written in the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(n) => write!(f, "{n}"),
            ParamValue::Text(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PluginError {
    #[error("unknown plugin `{0}`")]
    UnknownPlugin(String),
    #[error("plugin `{plugin}`: parameter `{param}` {reason}")]
    BadParam {
        plugin: &'static str,
        param: String,
        reason: String,
    },
}

/// The built-in processing functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PluginKind {
    Passthrough,
    TouchLevel,
    JerkLevel,
    MovingAverage,
    ThresholdClassifier,
    /// Stand-in for externally trained models; forwards its input unchanged.
    Stub,
}

impl PluginKind {
    pub fn from_key(key: &str) -> Option<Self> {
        Some(match key {
            "passthrough" => Self::Passthrough,
            "touch_level" => Self::TouchLevel,
            "jerk_level" => Self::JerkLevel,
            "moving_average" => Self::MovingAverage,
            "threshold_classifier" => Self::ThresholdClassifier,
            "stub" => Self::Stub,
            _ => return None,
        })
    }

    /// Maps a module path such as `/opt/algos/libmoving_average.so` to a
    /// registry entry by file stem. Unrecognised modules become [`Self::Stub`].
    pub fn from_module_path(path: &str) -> Self {
        let file = path.rsplit(['/', '\\']).next().unwrap_or(path);
        let stem = file.split('.').next().unwrap_or(file);
        let stem = stem.strip_prefix("lib").unwrap_or(stem);
        Self::from_key(stem).unwrap_or(Self::Stub)
    }

    pub fn key(self) -> &'static str {
        match self {
            Self::Passthrough => "passthrough",
            Self::TouchLevel => "touch_level",
            Self::JerkLevel => "jerk_level",
            Self::MovingAverage => "moving_average",
            Self::ThresholdClassifier => "threshold_classifier",
            Self::Stub => "stub",
        }
    }

    /// Checks parameters without building an instance.
    pub fn validate_params(self, params: &BTreeMap<String, ParamValue>) -> Result<(), PluginError> {
        PluginState::build(self, params).map(|_| ())
    }
}

impl fmt::Display for PluginKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum PluginState {
    Passthrough,
    TouchLevel {
        thresholds: Vec<f64>,
        last: Option<usize>,
    },
    JerkLevel {
        history: BTreeMap<String, VecDeque<Reading>>,
    },
    MovingAverage {
        k: usize,
        window: VecDeque<f64>,
    },
    ThresholdClassifier {
        threshold: f64,
        last: Option<bool>,
    },
}

const JERK_HISTORY: usize = 3;

impl PluginState {
    fn build(kind: PluginKind, params: &BTreeMap<String, ParamValue>) -> Result<Self, PluginError> {
        let plugin = kind.key();
        let allowed: &[&str] = match kind {
            PluginKind::TouchLevel => &["thresholds"],
            PluginKind::MovingAverage => &["k"],
            PluginKind::ThresholdClassifier => &["threshold"],
            // stubs accept arbitrary model settings and ignore them
            PluginKind::Stub => return Ok(Self::Passthrough),
            PluginKind::Passthrough | PluginKind::JerkLevel => &[],
        };
        if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(PluginError::BadParam {
                plugin,
                param: extra.clone(),
                reason: "is not recognised".into(),
            });
        }
        let bad = |param: &str, reason: &str| PluginError::BadParam {
            plugin,
            param: param.to_string(),
            reason: reason.to_string(),
        };
        Ok(match kind {
            PluginKind::Passthrough | PluginKind::Stub => Self::Passthrough,
            PluginKind::JerkLevel => Self::JerkLevel {
                history: BTreeMap::new(),
            },
            PluginKind::TouchLevel => {
                let thresholds = match params.get("thresholds") {
                    Some(ParamValue::Text(list)) => parse_thresholds(list)
                        .ok_or_else(|| bad("thresholds", "must be a comma-separated list of numbers"))?,
                    Some(ParamValue::Number(n)) => vec![*n],
                    None => return Err(bad("thresholds", "is required")),
                };
                if !thresholds.windows(2).all(|w| w[0] < w[1]) {
                    return Err(bad("thresholds", "must be strictly ascending"));
                }
                Self::TouchLevel {
                    thresholds,
                    last: None,
                }
            }
            PluginKind::MovingAverage => {
                let k = match params.get("k") {
                    Some(ParamValue::Number(n)) if *n >= 1.0 && n.fract() == 0.0 && *n <= 4096.0 => {
                        *n as usize
                    }
                    Some(_) => return Err(bad("k", "must be an integer in 1..=4096")),
                    None => return Err(bad("k", "is required")),
                };
                Self::MovingAverage {
                    k,
                    window: VecDeque::with_capacity(k),
                }
            }
            PluginKind::ThresholdClassifier => {
                let threshold = match params.get("threshold") {
                    Some(ParamValue::Number(n)) if n.is_finite() => *n,
                    Some(_) => return Err(bad("threshold", "must be a finite number")),
                    None => return Err(bad("threshold", "is required")),
                };
                Self::ThresholdClassifier {
                    threshold,
                    last: None,
                }
            }
        })
    }
}

fn parse_thresholds(list: &str) -> Option<Vec<f64>> {
    list.split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect()
}

/// A configured plugin with its private, bounded history.
///
/// Instances are deterministic transducers: the same sequence of inputs
/// always yields the same sequence of outputs, including absences.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginInstance {
    kind: PluginKind,
    params: BTreeMap<String, ParamValue>,
    output: String,
    state: PluginState,
}

impl PluginInstance {
    pub fn new(
        key: &str,
        params: BTreeMap<String, ParamValue>,
        output: impl Into<String>,
    ) -> Result<Self, PluginError> {
        let kind = PluginKind::from_key(key).ok_or_else(|| PluginError::UnknownPlugin(key.to_string()))?;
        let state = PluginState::build(kind, &params)?;
        Ok(Self {
            kind,
            params,
            output: output.into(),
            state,
        })
    }

    pub fn kind(&self) -> PluginKind {
        self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, ParamValue> {
        &self.params
    }

    pub fn output_topic(&self) -> &str {
        &self.output
    }

    /// Number of samples currently retained.
    pub fn history_len(&self) -> usize {
        match &self.state {
            PluginState::Passthrough => 0,
            PluginState::TouchLevel { last, .. } => usize::from(last.is_some()),
            PluginState::ThresholdClassifier { last, .. } => usize::from(last.is_some()),
            PluginState::JerkLevel { history } => history.values().map(VecDeque::len).sum(),
            PluginState::MovingAverage { window, .. } => window.len(),
        }
    }

    /// Feeds one gated reading. `None` means the plugin has no new insight.
    pub fn run(&mut self, input: &Reading, source_seq: u64) -> Option<ProcessedValue> {
        let value = match &mut self.state {
            PluginState::Passthrough => Some(input.value),
            PluginState::TouchLevel { thresholds, last } => {
                let level = touch_level(input.value, thresholds);
                emit_on_change(last, level).map(|l| l as f64)
            }
            PluginState::ThresholdClassifier { threshold, last } => {
                let above = input.value > *threshold;
                emit_on_change(last, above).map(|a| if a { 1.0 } else { 0.0 })
            }
            PluginState::MovingAverage { k, window } => {
                if window.len() == *k {
                    window.pop_front();
                }
                window.push_back(input.value);
                (window.len() == *k).then(|| window.iter().sum::<f64>() / *k as f64)
            }
            PluginState::JerkLevel { history } => {
                let h = history.entry(input.sensor.clone()).or_default();
                match h.back_mut() {
                    // a repeated timestamp replaces the sample
                    Some(last) if last.t_us >= input.t_us => *last = input.clone(),
                    _ => h.push_back(input.clone()),
                }
                while h.len() > JERK_HISTORY {
                    h.pop_front();
                }
                Some(jerk_level(h.make_contiguous()))
            }
        }?;
        Some(ProcessedValue {
            topic: self.output.clone(),
            t_us: input.t_us,
            value,
            source_seq,
        })
    }
}

fn emit_on_change<T: PartialEq + Copy>(last: &mut Option<T>, current: T) -> Option<T> {
    if *last == Some(current) {
        None
    } else {
        *last = Some(current);
        Some(current)
    }
}
