//! Name resolution of a parsed program against a system configuration.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;

use super::ast::*;
use crate::bus::processed_topic;
use crate::config::{default_priorities, ActuatorKind, PriorityRequest, SystemConfig};

/// Normalized speed for `SLOWLY`.
pub const SLOWLY_SPEED: f64 = 0.25;
/// Normalized speed for `QUICKLY`.
pub const QUICKLY_SPEED: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BindOptions {
    pub slowly: f64,
    pub quickly: f64,
}

impl Default for BindOptions {
    fn default() -> Self {
        Self {
            slowly: SLOWLY_SPEED,
            quickly: QUICKLY_SPEED,
        }
    }
}

/// A resolved behavior statement.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Command { actuator: String, value: f64 },
    Play { actuator: String, file: String },
    Wait { duration_us: u64 },
}

impl Step {
    pub fn actuator(&self) -> Option<&str> {
        match self {
            Step::Command { actuator, .. } | Step::Play { actuator, .. } => Some(actuator),
            Step::Wait { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundBehavior {
    pub name: String,
    pub priority: f64,
    pub safety: bool,
    pub steps: Vec<Step>,
}

impl BoundBehavior {
    /// Actuators this behavior drives, in first-use order.
    pub fn actuators(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in self.steps.iter().filter_map(Step::actuator) {
            if !out.contains(&a) {
                out.push(a);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRule {
    /// Position of the rule in the program.
    pub index: usize,
    pub condition: Condition,
    /// Signals referenced by the condition, first-occurrence order.
    pub signals: Vec<String>,
    pub then_behavior: String,
    pub else_behavior: Option<String>,
}

/// A program whose every name resolves against one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundProgram {
    pub program: BehaviorProgram,
    pub rules: Vec<BoundRule>,
    /// All behaviors in priority-pool order: configured behaviors first,
    /// then program definitions not named in the configuration.
    pub behaviors: IndexMap<String, BoundBehavior>,
    /// Signal name to the processed topic it reads.
    pub signal_topics: BTreeMap<String, String>,
}

impl BoundProgram {
    pub fn priority(&self, behavior: &str) -> Option<f64> {
        self.behaviors.get(behavior).map(|b| b.priority)
    }

    /// Rules whose condition reads `signal`.
    pub fn rules_reading<'a>(&'a self, signal: &'a str) -> impl Iterator<Item = &'a BoundRule> + 'a {
        self.rules.iter().filter(move |r| r.signals.iter().any(|s| s == signal))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindError {
    pub name: String,
    pub span: SourceSpan,
    pub message: String,
}

impl fmt::Display for BindError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.name, self.message)
    }
}

/// Every unresolved name found while binding.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
pub struct BindErrors(pub Vec<BindError>);

pub fn bind_program(program: &BehaviorProgram, config: &SystemConfig) -> Result<BoundProgram, BindErrors> {
    bind_program_with(program, config, BindOptions::default())
}

pub fn bind_program_with(
    program: &BehaviorProgram,
    config: &SystemConfig,
    options: BindOptions,
) -> Result<BoundProgram, BindErrors> {
    let mut errors = Vec::new();
    let mut err = |ident: &Ident, message: String| {
        errors.push(BindError {
            name: ident.name.clone(),
            span: ident.span,
            message,
        })
    };

    // signals
    let mut signal_topics = BTreeMap::new();
    for rule in &program.rules {
        for signal in rule.condition.signal_occurrences() {
            if signal_topics.contains_key(&signal.name) {
                continue;
            }
            match resolve_signal(&signal.name, config) {
                Ok(topic) => {
                    signal_topics.insert(signal.name.clone(), topic);
                }
                Err(message) => err(signal, message),
            }
        }
    }

    // rule targets
    for rule in &program.rules {
        for target in std::iter::once(&rule.then_behavior).chain(&rule.else_behavior) {
            if !program.definitions.contains_key(&target.name) && config.behavior(&target.name).is_none() {
                err(target, "no DEFINE or behavior".into());
            }
        }
    }

    // priority pool: configured behaviors, then extra definitions
    let mut listing: Vec<(String, PriorityRequest)> = config
        .behaviors
        .iter()
        .map(|b| {
            (
                b.name.clone(),
                PriorityRequest {
                    declared: b.priority,
                    safety: b.safety,
                },
            )
        })
        .collect();
    let configured = listing.len();
    let config_priorities = config.resolved_priorities();
    for (i, (_, req)) in listing.iter_mut().enumerate() {
        // configured behaviors keep the priority the config resolves to
        if !req.safety {
            req.declared = Some(config_priorities[i]);
        }
    }
    for name in program.definitions.keys() {
        if config.behavior(name).is_none() {
            listing.push((name.clone(), PriorityRequest::absent()));
        }
    }
    let priorities = default_priorities(&listing.iter().map(|(_, r)| *r).collect::<Vec<_>>());

    let audio: Vec<&str> = config
        .actuators
        .iter()
        .filter(|a| a.kind == ActuatorKind::Audio)
        .map(|a| a.name.as_str())
        .collect();

    let mut behaviors = IndexMap::new();
    for (i, (name, req)) in listing.iter().enumerate() {
        let steps = match program.definitions.get(name) {
            Some(def) => {
                let mut steps = Vec::with_capacity(def.body.len());
                for stmt in &def.body {
                    match bind_statement(stmt, config, &audio, options) {
                        Ok(step) => steps.push(step),
                        Err((ident, message)) => err(ident, message),
                    }
                }
                steps
            }
            None if i < configured => match &config.behaviors[i].action {
                Some(action) => {
                    let value = config.actuator(action).map_or(1.0, |a| a.max_value);
                    vec![Step::Command {
                        actuator: action.clone(),
                        value,
                    }]
                }
                None => Vec::new(),
            },
            None => unreachable!("pool entries come from the config or the program"),
        };
        behaviors.insert(
            name.clone(),
            BoundBehavior {
                name: name.clone(),
                priority: priorities[i],
                safety: req.safety,
                steps,
            },
        );
    }

    if !errors.is_empty() {
        return Err(BindErrors(errors));
    }

    let rules = program
        .rules
        .iter()
        .enumerate()
        .map(|(index, r)| BoundRule {
            index,
            condition: r.condition.clone(),
            signals: r.condition.signals().into_iter().map(|s| s.name.clone()).collect(),
            then_behavior: r.then_behavior.name.clone(),
            else_behavior: r.else_behavior.as_ref().map(|e| e.name.clone()),
        })
        .collect();

    Ok(BoundProgram {
        program: program.clone(),
        rules,
        behaviors,
        signal_topics,
    })
}

/// A sensor name reads the output of the algorithm consuming it, or the
/// forwarded raw stream if none does. An algorithm output name reads that
/// output directly.
fn resolve_signal(name: &str, config: &SystemConfig) -> Result<String, String> {
    if config.sensor(name).is_some() {
        let consumers: Vec<&str> = config
            .algorithms
            .iter()
            .filter(|a| a.inputs.iter().any(|i| i == name))
            .map(|a| a.output.as_str())
            .collect();
        return match consumers.as_slice() {
            [] => Ok(processed_topic(name)),
            [only] => Ok(processed_topic(only)),
            many => Err(format!(
                "sensor feeds several algorithms ({}); name one of their outputs instead",
                many.join(", ")
            )),
        };
    }
    if config.algorithms.iter().any(|a| a.output == name) {
        return Ok(processed_topic(name));
    }
    Err("no sensor or algorithm output with this name".into())
}

fn bind_statement<'a>(
    stmt: &'a Statement,
    config: &SystemConfig,
    audio: &[&str],
    options: BindOptions,
) -> Result<Step, (&'a Ident, String)> {
    match stmt {
        Statement::Move { actuator, speed } => {
            if config.actuator(&actuator.name).is_none() {
                return Err((actuator, "no actuator with this name".into()));
            }
            let value = match speed {
                Speed::Slowly => options.slowly,
                Speed::Quickly => options.quickly,
                Speed::Value(v) => *v,
            };
            Ok(Step::Command {
                actuator: actuator.name.clone(),
                value,
            })
        }
        Statement::Set { actuator, value } => {
            let Some(spec) = config.actuator(&actuator.name) else {
                return Err((actuator, "no actuator with this name".into()));
            };
            if !(spec.min_value..=spec.max_value).contains(value) {
                return Err((
                    actuator,
                    format!("value {value} is outside [{}, {}]", spec.min_value, spec.max_value),
                ));
            }
            Ok(Step::Command {
                actuator: actuator.name.clone(),
                value: *value,
            })
        }
        Statement::Play { sound, file } => match audio {
            [only] => Ok(Step::Play {
                actuator: only.to_string(),
                file: file.clone(),
            }),
            [] => Err((sound, "no audio actuator is configured".into())),
            many => Err((sound, format!("several audio actuators are configured ({})", many.join(", ")))),
        },
        Statement::Wait { duration_us, .. } => Ok(Step::Wait {
            duration_us: *duration_us,
        }),
    }
}
