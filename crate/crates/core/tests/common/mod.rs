//! Shared fixtures, generators and log audits for integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use robosync_core::bus::Layer;
use robosync_core::config::{parse_config, SystemConfig};
use robosync_core::dsl::{
    bind_program, parse_program, BehaviorProgram, BoundProgram, CompareOp, Condition, Definition, Ident, Rule,
    SourceSpan, Speed, Statement, TimeUnit,
};
use robosync_core::engine::{build_tasks, load_trace, ExecutionLog, LogEntry, LogKind, TraceEvent};
use robosync_core::sched::TaskCategory;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub struct Scenario {
    pub name: &'static str,
    pub config: SystemConfig,
    pub program: BoundProgram,
    pub trace: Vec<TraceEvent>,
}

/// (name, config, behavior program, trace) for every shipped fixture run.
pub const SCENARIOS: [(&str, &str, &str, &str); 4] = [
    ("hri_touch", "hri_config.json", "behavior.rsb", "touch_trace.jsonl"),
    ("safety_halt", "safety_config.json", "behavior.rsb", "force_trace.jsonl"),
    ("single_response", "triple_config.json", "triple.rsb", "triple_trace.jsonl"),
    ("adaptive", "adaptive_config.json", "adaptive.rsb", "adaptive_trace.jsonl"),
];

pub fn load_scenario(name: &'static str, config: &str, behavior: &str, trace: &str) -> Scenario {
    let config = parse_config(&fixture(config)).expect("fixture config");
    let program = bind_program(&parse_program(&fixture(behavior)).expect("fixture program"), &config).expect("binds");
    let trace = load_trace(&fixture(trace), &config).expect("fixture trace");
    Scenario {
        name,
        config,
        program,
        trace,
    }
}

pub fn scenarios() -> Vec<Scenario> {
    SCENARIOS.iter().map(|(n, c, b, t)| load_scenario(n, c, b, t)).collect()
}

// ---- log audits ----------------------------------------------------------

fn message_by_bus_seq(log: &ExecutionLog) -> BTreeMap<u64, &LogEntry> {
    log.of_kind(LogKind::Message)
        .map(|e| (e.detail.u64("bus_seq").expect("bus_seq"), e))
        .collect()
}

/// Walks every command back to the trace event that caused it.
pub fn audit_causality(log: &ExecutionLog) -> Result<(), String> {
    let messages = message_by_bus_seq(log);
    let lookup = |seq: u64, kind: LogKind, before: u64| -> Result<&LogEntry, String> {
        let e = log.get(seq).ok_or(format!("no entry {seq}"))?;
        if e.kind != kind || e.seq >= before {
            return Err(format!("entry {seq} is not an earlier {kind}"));
        }
        Ok(e)
    };
    let message = |bus_seq: u64, layer: &str, before: u64| -> Result<&LogEntry, String> {
        let m = messages.get(&bus_seq).ok_or(format!("no message {bus_seq}"))?;
        if m.detail.str("layer") != Some(layer) || m.seq >= before {
            return Err(format!("message {bus_seq} is not an earlier {layer} message"));
        }
        Ok(m)
    };
    let to_reading = |processed: &LogEntry| -> Result<(), String> {
        let sensor = message(processed.detail.u64("source_seq").ok_or("no source_seq")?, "sensor", processed.seq)?;
        lookup(sensor.detail.u64("event").ok_or("no event")?, LogKind::SensorEvent, sensor.seq)?;
        Ok(())
    };
    for e in &log.entries {
        match e.kind {
            LogKind::ActuatorCmd | LogKind::PlayCmd => {
                let cmd = message(e.detail.u64("message").ok_or("no message")?, "behavior", e.seq)?;
                let fired = lookup(cmd.detail.u64("fired").ok_or("no fired")?, LogKind::BehaviorFired, cmd.seq)?;
                let processed = message(fired.detail.u64("message").ok_or("no message")?, "processing", fired.seq)?;
                to_reading(processed).map_err(|m| format!("entry {}: {m}", e.seq))?;
            }
            LogKind::Message if e.detail.str("layer") == Some("processing") => {
                to_reading(e).map_err(|m| format!("entry {}: {m}", e.seq))?;
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn audit_halt_finality(log: &ExecutionLog) -> Result<(), String> {
    let halts: Vec<_> = log.of_kind(LogKind::SafetyHalt).collect();
    if halts.len() > 1 {
        return Err("more than one halt".into());
    }
    if let Some(h) = halts.first() {
        for e in &log.entries[h.seq as usize..] {
            if matches!(e.kind, LogKind::ActuatorCmd | LogKind::PlayCmd | LogKind::TaskStart | LogKind::BehaviorFired) {
                return Err(format!("entry {} ({}) follows the halt", e.seq, e.kind));
            }
        }
    }
    Ok(())
}

pub fn audit_single_response(log: &ExecutionLog) -> Result<(), String> {
    let mut per_t: BTreeMap<u64, usize> = BTreeMap::new();
    for e in log.of_kind(LogKind::BehaviorFired) {
        *per_t.entry(e.t_us).or_default() += 1;
    }
    match per_t.iter().find(|(_, n)| **n > 1) {
        Some((t, n)) => Err(format!("{n} behaviors fired at {t}")),
        None => Ok(()),
    }
}

pub fn audit_conservation(log: &ExecutionLog) -> Result<(), String> {
    let readings = log.count(LogKind::SensorEvent);
    let forwarded = log
        .of_kind(LogKind::Message)
        .filter(|e| e.detail.str("layer") == Some("sensor"))
        .count();
    if forwarded > readings {
        return Err(format!("{forwarded} sensor messages from {readings} readings"));
    }
    Ok(())
}

/// Every delivery must go exactly one layer down.
pub fn layering_violations(log: &ExecutionLog) -> usize {
    log.of_kind(LogKind::Message)
        .map(|e| {
            let producer = Layer::parse(e.detail.str("layer").unwrap()).unwrap();
            e.detail
                .get("delivered")
                .and_then(|d| d.as_list())
                .unwrap()
                .iter()
                .filter(|l| Layer::parse(l.as_str().unwrap()) != producer.next())
                .count()
        })
        .sum()
}

/// Rebuilds the ready set and task priorities at every dispatch and checks
/// that the started job was the best candidate.
pub fn audit_dispatch(log: &ExecutionLog, config: &SystemConfig, program: &BoundProgram) -> Result<(), String> {
    let mut priority: BTreeMap<String, f64> =
        build_tasks(config, program).into_iter().map(|(id, t)| (id, t.current_priority)).collect();
    let starts: Vec<&LogEntry> = log.of_kind(LogKind::TaskStart).collect();
    let category: BTreeMap<&str, TaskCategory> = starts
        .iter()
        .map(|e| {
            let task = e.detail.str("task").unwrap();
            (task, TaskCategory::parse(e.detail.str("category").unwrap()).unwrap())
        })
        .collect();
    let mut next_start = 0;
    for e in &log.entries {
        match e.kind {
            LogKind::PriorityUpdate => {
                priority.insert(e.detail.str("task").unwrap().to_string(), e.detail.f64("new").unwrap());
            }
            LogKind::TaskStart => {
                let key = |s: &LogEntry| {
                    let task = s.detail.str("task").unwrap();
                    (priority[task], category[task].rank(), std::cmp::Reverse(s.detail.u64("job").unwrap()))
                };
                let chosen = key(e);
                let logged = e.detail.f64("priority").unwrap();
                if (logged - chosen.0).abs() > 1e-6 {
                    return Err(format!("entry {}: logged priority {logged} but task is at {}", e.seq, chosen.0));
                }
                for other in &starts[next_start + 1..] {
                    if other.detail.u64("enqueued_t_us").unwrap() > e.t_us {
                        continue;
                    }
                    let k = key(other);
                    if k.0 > chosen.0 || (k.0 == chosen.0 && (k.1, k.2) > (chosen.1, chosen.2)) {
                        return Err(format!(
                            "entry {}: started {} while {} was ready and ahead",
                            e.seq,
                            e.detail.str("task").unwrap(),
                            other.detail.str("task").unwrap()
                        ));
                    }
                }
                next_start += 1;
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn audit_all(log: &ExecutionLog, config: &SystemConfig, program: &BoundProgram) -> Result<(), String> {
    audit_causality(log)?;
    audit_halt_finality(log)?;
    audit_single_response(log)?;
    audit_conservation(log)?;
    audit_dispatch(log, config, program)?;
    match layering_violations(log) {
        0 => Ok(()),
        n => Err(format!("{n} layering violations")),
    }
}

// ---- generators ----------------------------------------------------------

/// Random readings over every sensor of `config`, sorted by time, with
/// values drawn from `range` and timestamps spread over `span_us`.
pub fn random_trace<R: Rng>(rng: &mut R, config: &SystemConfig, n: usize, span_us: u64, range: (f64, f64)) -> Vec<TraceEvent> {
    let mut events: Vec<TraceEvent> = (0..n)
        .map(|i| {
            let sensor = &config.sensors[rng.gen_range(0..config.sensors.len())].name;
            // quantized so repeats (and therefore gating) actually happen
            let v = (rng.gen_range(range.0..range.1) * 4.0).round() / 4.0;
            TraceEvent::reading(i + 1, rng.gen_range(0..span_us), sensor.as_str(), v)
        })
        .collect();
    events.sort_by_key(|e| e.t_us);
    events
}

const IDENTS: [&str; 8] = ["touch", "proximity", "arms", "head", "wave", "greet", "x1", "long_name_2"];
const OPS: [CompareOp; 6] = [CompareOp::Lt, CompareOp::Le, CompareOp::Gt, CompareOp::Ge, CompareOp::Eq, CompareOp::Ne];

fn ident<R: Rng>(rng: &mut R) -> Ident {
    Ident::synthetic(*IDENTS.choose(rng).unwrap())
}

fn number<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..3) {
        0 => f64::from(rng.gen_range(-50i32..50)),
        1 => f64::from(rng.gen_range(-10_000i32..10_000)) / 100.0,
        _ => f64::from(rng.gen_range(0..1000u32)) / 997.0,
    }
}

pub fn random_condition<R: Rng>(rng: &mut R, depth: u32) -> Condition {
    if depth == 0 || rng.gen_bool(0.35) {
        return Condition::Comparison {
            signal: ident(rng),
            level: rng.gen_bool(0.3),
            op: *OPS.choose(rng).unwrap(),
            value: number(rng),
        };
    }
    match rng.gen_range(0..3) {
        0 => random_condition(rng, depth - 1).and(random_condition(rng, depth - 1)),
        1 => random_condition(rng, depth - 1).or(random_condition(rng, depth - 1)),
        _ => random_condition(rng, depth - 1).not(),
    }
}

fn random_statement<R: Rng>(rng: &mut R) -> Statement {
    match rng.gen_range(0..4) {
        0 => Statement::Move {
            actuator: ident(rng),
            speed: match rng.gen_range(0..3) {
                0 => Speed::Slowly,
                1 => Speed::Quickly,
                _ => Speed::Value(f64::from(rng.gen_range(0..=100u32)) / 100.0),
            },
        },
        1 => Statement::Play {
            sound: Ident::synthetic("sound"),
            file: format!("{}.wav", IDENTS.choose(rng).unwrap()),
        },
        2 => Statement::Set {
            actuator: ident(rng),
            value: number(rng),
        },
        _ => {
            let unit = if rng.gen_bool(0.5) { TimeUnit::Millis } else { TimeUnit::Micros };
            let n = rng.gen_range(1..5000u64);
            Statement::Wait {
                duration_us: if unit == TimeUnit::Millis { n * 1000 } else { n },
                unit,
            }
        }
    }
}

/// A random syntactically valid program with condition depth at most `depth`.
pub fn random_program<R: Rng>(rng: &mut R, depth: u32) -> BehaviorProgram {
    let mut p = BehaviorProgram::default();
    for _ in 0..rng.gen_range(0..4) {
        p.rules.push(Rule {
            condition: random_condition(rng, depth),
            then_behavior: ident(rng),
            else_behavior: rng.gen_bool(0.5).then(|| ident(rng)),
            span: SourceSpan::default(),
        });
    }
    for _ in 0..rng.gen_range(0..4) {
        let name = ident(rng);
        let body = (0..rng.gen_range(0..5)).map(|_| random_statement(rng)).collect();
        p.definitions.entry(name.name.clone()).or_insert(Definition { name, body });
    }
    p
}
