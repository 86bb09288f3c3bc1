use std::collections::BTreeSet;

use super::{is_config_ident, Issue, SystemConfig, P_MAX};

/// Name reserved for the synthetic check raised by a `STOP` override.
pub const OVERRIDE_CHECK: &str = "override";

/// Every internal inconsistency found in a [`SystemConfig`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub entries: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, path: String, message: impl Into<String>) {
        self.entries.push(Issue::new(path, message));
    }
}

fn check_unique<'a>(
    report: &mut ValidationReport,
    section: &str,
    names: impl Iterator<Item = &'a str>,
) {
    let mut seen = BTreeSet::new();
    for (i, name) in names.enumerate() {
        if !seen.insert(name) {
            report.push(format!("{section}[{i}].name"), format!("duplicate name `{name}`"));
        }
    }
}

/// Checks cross-references, uniqueness and value ranges.
pub fn validate_config(config: &SystemConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let sensors: BTreeSet<&str> = config.sensors.iter().map(|s| s.name.as_str()).collect();

    check_unique(&mut r, "sensors", config.sensors.iter().map(|s| s.name.as_str()));
    for (i, s) in config.sensors.iter().enumerate() {
        if s.kind.needs_address() != s.address.is_some() {
            let msg = if s.address.is_some() {
                format!("not applicable to {} sensors", s.kind.as_str())
            } else {
                format!("required for {} sensors", s.kind.as_str())
            };
            r.push(format!("sensors[{i}].address"), msg);
        }
        if s.kind.needs_pin() != s.pin.is_some() {
            let msg = if s.pin.is_some() {
                format!("not applicable to {} sensors", s.kind.as_str())
            } else {
                format!("required for {} sensors", s.kind.as_str())
            };
            r.push(format!("sensors[{i}].pin"), msg);
        }
        if !(s.delta.is_finite() && s.delta >= 0.0) {
            r.push(format!("sensors[{i}].delta"), "must be a non-negative number");
        }
        if s.period_us == 0 {
            r.push(format!("sensors[{i}].period_us"), "must be at least 1");
        }
    }

    check_unique(&mut r, "actuators", config.actuators.iter().map(|a| a.name.as_str()));
    for (i, a) in config.actuators.iter().enumerate() {
        if !(a.min_value.is_finite() && a.max_value.is_finite() && a.min_value <= a.max_value) {
            r.push(format!("actuators[{i}].min_value"), "must be finite and not exceed max_value");
        }
    }

    check_unique(&mut r, "behaviors", config.behaviors.iter().map(|b| b.name.as_str()));
    let mut declared: Vec<f64> = Vec::new();
    for (i, b) in config.behaviors.iter().enumerate() {
        if let Some(action) = &b.action {
            if config.actuator(action).is_none() {
                r.push(format!("behaviors[{i}].action"), format!("unresolved actuator `{action}`"));
            }
        }
        let Some(p) = b.priority else { continue };
        if b.safety {
            continue;
        }
        if !(p > 0.0 && p < 1.0) {
            r.push(format!("behaviors[{i}].priority"), format!("{p} is outside (0, 1)"));
        } else if declared.contains(&p) {
            r.push(format!("behaviors[{i}].priority"), format!("duplicate priority {p}"));
        } else {
            declared.push(p);
        }
    }

    check_unique(&mut r, "algorithms", config.algorithms.iter().map(|a| a.name.as_str()));
    let mut outputs = BTreeSet::new();
    for (i, a) in config.algorithms.iter().enumerate() {
        for (j, input) in a.inputs.iter().enumerate() {
            if !sensors.contains(input.as_str()) {
                r.push(format!("algorithms[{i}].inputs[{j}]"), format!("unresolved sensor `{input}`"));
            }
        }
        if !is_config_ident(&a.output) {
            r.push(format!("algorithms[{i}].output"), format!("`{}` is not a valid topic name", a.output));
        } else if !outputs.insert(a.output.as_str()) {
            r.push(format!("algorithms[{i}].output"), format!("duplicate output topic `{}`", a.output));
        } else if sensors.contains(a.output.as_str()) {
            r.push(format!("algorithms[{i}].output"), format!("`{}` shadows a sensor name", a.output));
        }
        if let Err(e) = a.plugin.validate_params(&a.params) {
            r.push(format!("algorithms[{i}].params"), e.to_string());
        }
    }

    check_unique(&mut r, "safety_checks", config.safety_checks.iter().map(|c| c.name.as_str()));
    for (i, c) in config.safety_checks.iter().enumerate() {
        if c.name == OVERRIDE_CHECK {
            r.push(format!("safety_checks[{i}].name"), "`override` is reserved");
        }
        if !sensors.contains(c.sensor.as_str()) {
            r.push(format!("safety_checks[{i}].sensor"), format!("unresolved sensor `{}`", c.sensor));
        }
        if !c.threshold.is_finite() {
            r.push(format!("safety_checks[{i}].threshold"), "must be finite");
        }
    }

    if config.sensors.is_empty() && (!config.algorithms.is_empty() || !config.safety_checks.is_empty()) {
        r.push("sensors".into(), "at least one sensor is required when algorithms or safety checks are declared");
    }

    let s = &config.scheduler;
    if !(s.alpha.is_finite() && s.alpha >= 0.0) {
        r.push("scheduler.alpha".into(), "must be a non-negative number");
    }
    if s.window_us == 0 {
        r.push("scheduler.window_us".into(), "must be at least 1");
    }
    if s.p_max != P_MAX {
        r.push("scheduler.p_max".into(), "must be 1.0");
    }
    if s.default_task_cost_us == 0 {
        r.push("scheduler.default_task_cost_us".into(), "must be at least 1");
    }
    r
}
