use std::collections::{BTreeMap, BTreeSet};

use super::log::{Detail, ExecutionLog, LogKind};
use super::trace::{TraceEvent, TraceEventKind};
use crate::bus::{
    command_topic, evaluate_safety, processed_topic, sensor_topic, Bus, Layer, Payload, PayloadValue, SafetyAlert,
    SafetyDecision, SubscriptionId,
};
use crate::config::{SystemConfig, OVERRIDE_CHECK};
use crate::dsl::{eval_condition, BoundProgram, Step};
use crate::sched::{
    adapt_priorities, assign_base_priorities, select_next, FrequencyCounter, ReadyQueue, TaskCategory, TaskDescriptor,
    TaskId,
};
use crate::sensorproc::{gate_significant, PluginInstance, Reading};

/// Override command that halts the run.
pub const STOP_COMMAND: &str = "STOP";

pub fn sensor_task(sensor: &str) -> TaskId {
    format!("sensor:{sensor}")
}

pub fn algorithm_task(algorithm: &str) -> TaskId {
    format!("proc:{algorithm}")
}

/// Task forwarding a sensor no algorithm consumes.
pub fn forward_task(sensor: &str) -> TaskId {
    format!("forward:{sensor}")
}

pub fn behavior_task(behavior: &str) -> TaskId {
    format!("behavior:{behavior}")
}

pub fn control_task(actuator: &str) -> TaskId {
    format!("control:{actuator}")
}

pub fn safety_task(check: &str) -> TaskId {
    format!("safety:{check}")
}

/// Replays `trace` through the configured pipeline and returns the log.
///
/// Within one virtual instant, work happens in this order: window
/// boundaries, completion of the running task, delayed statements coming
/// due, trace events in file order, then dispatch.
pub fn run(config: &SystemConfig, program: &BoundProgram, trace: &[TraceEvent]) -> ExecutionLog {
    Sim::new(config, program).run(trace)
}

/// Static task set with base priorities, as the engine would build it.
pub fn build_tasks(config: &SystemConfig, program: &BoundProgram) -> BTreeMap<TaskId, TaskDescriptor> {
    Sim::new(config, program).tasks
}

#[derive(Debug, Clone)]
enum Job {
    Sample { reading: Reading, event: u64 },
    Process { reading: Reading, message: u64 },
    Respond { behavior: String, fired: u64 },
    Actuate { step: Step, message: u64 },
}

#[derive(Debug, Clone)]
enum Consumer {
    Task(TaskId),
    Rules,
}

#[derive(Debug)]
struct Running {
    task: TaskId,
    job: u64,
    finish: u64,
    payload: Job,
}

#[derive(Debug)]
struct Deferred {
    step: Step,
    fired: u64,
}

struct Sim<'a> {
    config: &'a SystemConfig,
    program: &'a BoundProgram,
    log: ExecutionLog,
    bus: Bus,
    consumers: BTreeMap<SubscriptionId, Consumer>,
    tasks: BTreeMap<TaskId, TaskDescriptor>,
    queue: ReadyQueue<Job>,
    running: Option<Running>,
    counters: BTreeMap<String, FrequencyCounter>,
    plugins: BTreeMap<TaskId, PluginInstance>,
    last_emitted: BTreeMap<String, f64>,
    /// processed topic -> signals it carries
    topic_signals: BTreeMap<String, Vec<String>>,
    snapshot: BTreeMap<String, f64>,
    deferred: BTreeMap<(u64, u64), Deferred>,
    deferred_seq: u64,
    next_window: u64,
    halted: bool,
}

impl<'a> Sim<'a> {
    fn new(config: &'a SystemConfig, program: &'a BoundProgram) -> Self {
        let cost = config.scheduler.default_task_cost_us;
        let mut bus = Bus::new();
        let mut consumers = BTreeMap::new();
        let mut tasks = BTreeMap::new();
        let mut plugins = BTreeMap::new();
        // processed topic -> (producing task, sensors feeding it)
        let mut producers: BTreeMap<String, (TaskId, Vec<String>)> = BTreeMap::new();

        let add_task = |tasks: &mut BTreeMap<TaskId, TaskDescriptor>, id: TaskId, cat| {
            tasks.insert(id.clone(), TaskDescriptor::new(id, cat, cost));
        };

        for s in &config.sensors {
            bus.add_topic(sensor_topic(&s.name), Layer::Sensor).expect("sensor names are unique");
            add_task(&mut tasks, sensor_task(&s.name), TaskCategory::SensorInput);
        }
        for alg in &config.algorithms {
            let id = algorithm_task(&alg.name);
            let topic = processed_topic(&alg.output);
            bus.add_topic(&topic, Layer::Processing).expect("outputs are unique");
            for input in &alg.inputs {
                let sub = bus.subscribe(&sensor_topic(input), Layer::Processing).expect("inputs resolve");
                consumers.insert(sub, Consumer::Task(id.clone()));
            }
            let instance = PluginInstance::new(alg.plugin.key(), alg.params.clone(), &alg.output)
                .expect("plugin parameters are validated");
            plugins.insert(id.clone(), instance);
            producers.insert(topic, (id.clone(), alg.inputs.clone()));
            add_task(&mut tasks, id, TaskCategory::Algorithmic);
        }
        for s in &config.sensors {
            if config.algorithms.iter().any(|a| a.inputs.contains(&s.name)) {
                continue;
            }
            let id = forward_task(&s.name);
            let topic = processed_topic(&s.name);
            bus.add_topic(&topic, Layer::Processing).expect("outputs never shadow sensors");
            let sub = bus.subscribe(&sensor_topic(&s.name), Layer::Processing).expect("sensor topic exists");
            consumers.insert(sub, Consumer::Task(id.clone()));
            plugins.insert(
                id.clone(),
                PluginInstance::new("passthrough", BTreeMap::new(), &s.name).expect("passthrough takes no params"),
            );
            producers.insert(topic, (id.clone(), vec![s.name.clone()]));
            add_task(&mut tasks, id, TaskCategory::Algorithmic);
        }

        let mut topic_signals: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (signal, topic) in &program.signal_topics {
            topic_signals.entry(topic.clone()).or_default().push(signal.clone());
        }
        for topic in topic_signals.keys() {
            let sub = bus.subscribe(topic, Layer::Behavior).expect("signals resolve to processed topics");
            consumers.insert(sub, Consumer::Rules);
        }

        for a in &config.actuators {
            let topic = command_topic(&a.name);
            bus.add_topic(&topic, Layer::Behavior).expect("actuator names are unique");
            let sub = bus.subscribe(&topic, Layer::Control).expect("command topic exists");
            consumers.insert(sub, Consumer::Task(control_task(&a.name)));
            add_task(&mut tasks, control_task(&a.name), TaskCategory::Control);
        }
        for name in program.behaviors.keys() {
            add_task(&mut tasks, behavior_task(name), TaskCategory::Behavioral);
        }
        for check in &config.safety_checks {
            add_task(&mut tasks, safety_task(&check.name), TaskCategory::Safety);
        }

        // which behaviors each task serves
        let mut usage: BTreeMap<TaskId, BTreeSet<String>> = tasks.keys().map(|t| (t.clone(), BTreeSet::new())).collect();
        for (name, b) in &program.behaviors {
            usage.get_mut(&behavior_task(name)).expect("behavior task").insert(name.clone());
            for a in b.actuators() {
                usage.get_mut(&control_task(a)).expect("control task").insert(name.clone());
            }
        }
        for rule in &program.rules {
            for target in std::iter::once(&rule.then_behavior).chain(&rule.else_behavior) {
                for signal in &rule.signals {
                    let (producer, inputs) = &producers[&program.signal_topics[signal]];
                    usage.get_mut(producer).expect("producer task").insert(target.clone());
                    for s in inputs {
                        usage.get_mut(&sensor_task(s)).expect("sensor task").insert(target.clone());
                    }
                }
            }
        }
        let mut safety_tasks: BTreeSet<TaskId> = BTreeSet::new();
        for check in &config.safety_checks {
            safety_tasks.insert(safety_task(&check.name));
            safety_tasks.insert(sensor_task(&check.sensor));
        }
        let behavior_priorities: BTreeMap<String, f64> =
            program.behaviors.iter().map(|(n, b)| (n.clone(), b.priority)).collect();
        let base = assign_base_priorities(&behavior_priorities, &usage, &safety_tasks)
            .expect("usage only names bound behaviors");
        for (id, task) in tasks.iter_mut() {
            task.behaviors = usage.remove(id).unwrap_or_default();
            if task.category != TaskCategory::Safety {
                task.set_base(base[id]);
            }
        }

        let counters = program.behaviors.keys().map(|b| (b.clone(), FrequencyCounter::new(b.clone()))).collect();

        Self {
            config,
            program,
            log: ExecutionLog::default(),
            bus,
            consumers,
            tasks,
            queue: ReadyQueue::new(),
            running: None,
            counters,
            plugins,
            last_emitted: BTreeMap::new(),
            topic_signals,
            snapshot: BTreeMap::new(),
            deferred: BTreeMap::new(),
            deferred_seq: 0,
            next_window: config.scheduler.window_us,
            halted: false,
        }
    }

    fn run(mut self, trace: &[TraceEvent]) -> ExecutionLog {
        let mut next_event = 0;
        loop {
            let t = [
                trace.get(next_event).map(|e| e.t_us),
                self.running.as_ref().map(|r| r.finish),
                self.deferred.keys().next().map(|k| k.0),
            ]
            .into_iter()
            .flatten()
            .min();
            let Some(t) = t else { break };

            while !self.halted && self.next_window <= t {
                self.window_boundary(self.next_window);
                self.next_window += self.config.scheduler.window_us;
            }
            if self.running.as_ref().is_some_and(|r| r.finish == t) {
                self.finish(t);
            }
            while let Some(entry) = self.deferred.first_entry() {
                if entry.key().0 != t {
                    break;
                }
                let d = entry.remove();
                self.publish_step(&d.step, d.fired, t);
            }
            while let Some(ev) = trace.get(next_event).filter(|e| e.t_us == t) {
                self.trace_event(ev);
                next_event += 1;
            }
            self.dispatch(t);
        }
        self.log
    }

    fn window_boundary(&mut self, t: u64) {
        let updates = adapt_priorities(&mut self.tasks, &mut self.counters, &self.config.scheduler, t);
        for u in updates {
            self.log.push(
                t,
                LogKind::PriorityUpdate,
                Detail::new()
                    .with("task", u.task)
                    .with("base", u.base)
                    .with("old", u.old)
                    .with("new", u.new)
                    .with("frequency", u.frequency),
            );
        }
    }

    fn trace_event(&mut self, ev: &TraceEvent) {
        if self.halted {
            self.log.push(
                ev.t_us,
                LogKind::TraceDropped,
                Detail::new().with("line", ev.line).with("reason", "halted"),
            );
            return;
        }
        match &ev.kind {
            TraceEventKind::Reading { sensor, value } => {
                let event = self.log.push(
                    ev.t_us,
                    LogKind::SensorEvent,
                    Detail::new().with("line", ev.line).with("sensor", sensor.as_str()).with("value", *value),
                );
                let config = self.config;
                for check in config.safety_checks.iter().filter(|c| &c.sensor == sensor) {
                    let alert = evaluate_safety(*value, check, ev.t_us);
                    if alert.decision == SafetyDecision::AlertAndHalt {
                        let detail = Detail::new()
                            .with("check", check.name.as_str())
                            .with("sensor", sensor.as_str())
                            .with("reading", *value)
                            .with("threshold", check.threshold)
                            .with("event", event);
                        self.halt(ev.t_us, alert, detail);
                        return;
                    }
                }
                self.queue.push(
                    sensor_task(sensor),
                    ev.t_us,
                    Job::Sample {
                        reading: Reading::new(sensor.as_str(), ev.t_us, *value),
                        event,
                    },
                );
            }
            TraceEventKind::Override { command } if command.trim().eq_ignore_ascii_case(STOP_COMMAND) => {
                let alert = SafetyAlert {
                    check: OVERRIDE_CHECK.into(),
                    t_us: ev.t_us,
                    reading: f64::NAN,
                    decision: SafetyDecision::AlertAndHalt,
                };
                let detail = Detail::new()
                    .with("check", OVERRIDE_CHECK)
                    .with("command", command.as_str())
                    .with("line", ev.line);
                self.halt(ev.t_us, alert, detail);
            }
            TraceEventKind::Override { command } => {
                self.log.push(
                    ev.t_us,
                    LogKind::TraceDropped,
                    Detail::new()
                        .with("line", ev.line)
                        .with("reason", format!("unsupported override `{command}`")),
                );
            }
        }
    }

    fn halt(&mut self, t: u64, alert: SafetyAlert, detail: Detail) {
        self.bus.broadcast_alert(&alert);
        self.bus.purge_messages();
        let mut neutral = Detail::new();
        for a in &self.config.actuators {
            neutral.insert(&a.name, a.neutral());
        }
        self.log.push(t, LogKind::SafetyHalt, detail.with("neutral", neutral));
        if let Some(r) = self.running.take() {
            self.log.push(
                t,
                LogKind::TaskAbort,
                Detail::new().with("task", r.task).with("job", r.job).with("reason", "preempted"),
            );
        }
        for entry in self.queue.extract_unless(|_| false) {
            self.log.push(
                t,
                LogKind::TaskAbort,
                Detail::new()
                    .with("task", entry.task)
                    .with("job", entry.enqueue_seq)
                    .with("reason", "purged"),
            );
        }
        self.deferred.clear();
        self.halted = true;
    }

    fn dispatch(&mut self, t: u64) {
        if self.running.is_some() || self.halted {
            return;
        }
        let Some((task, job)) = select_next(&self.queue, &self.tasks) else {
            return;
        };
        let entry = self.queue.remove(job).expect("selected entry is queued");
        let desc = &self.tasks[&task];
        self.log.push(
            t,
            LogKind::TaskStart,
            Detail::new()
                .with("task", task.as_str())
                .with("category", desc.category.as_str())
                .with("job", job)
                .with("enqueued_t_us", entry.enqueued_t_us)
                .with("priority", desc.current_priority),
        );
        self.running = Some(Running {
            finish: t + desc.cost_us,
            task,
            job,
            payload: entry.payload,
        });
    }

    fn finish(&mut self, t: u64) {
        let r = self.running.take().expect("a task is running");
        self.log.push(t, LogKind::TaskFinish, Detail::new().with("task", r.task.as_str()).with("job", r.job));
        match r.payload {
            Job::Sample { reading, event } => {
                let delta = self.config.sensor(&reading.sensor).map_or(0.0, |s| s.delta);
                let prev = self.last_emitted.get(&reading.sensor).copied();
                if !gate_significant(prev, reading.value, delta) {
                    return;
                }
                self.last_emitted.insert(reading.sensor.clone(), reading.value);
                let (message, consumers) = self.publish(
                    &sensor_topic(&reading.sensor),
                    Layer::Sensor,
                    Payload::Scalar(reading.value),
                    t,
                    ("event", event),
                );
                for c in consumers {
                    if let Consumer::Task(task) = c {
                        self.queue.push(
                            task,
                            t,
                            Job::Process {
                                reading: reading.clone(),
                                message,
                            },
                        );
                    }
                }
            }
            Job::Process { reading, message } => {
                let plugin = self.plugins.get_mut(&r.task).expect("algorithmic tasks own a plugin");
                let Some(out) = plugin.run(&reading, message) else {
                    return;
                };
                let topic = processed_topic(&out.topic);
                let (seq, consumers) =
                    self.publish(&topic, Layer::Processing, Payload::Scalar(out.value), t, ("source_seq", message));
                if consumers.iter().any(|c| matches!(c, Consumer::Rules)) {
                    self.evaluate_rules(&topic, out.value, seq, t);
                }
            }
            Job::Respond { behavior, fired } => {
                let program = self.program;
                let mut offset = 0;
                for step in &program.behaviors[&behavior].steps {
                    match step {
                        Step::Wait { duration_us } => offset += duration_us,
                        _ if offset == 0 => self.publish_step(step, fired, t),
                        _ => {
                            self.deferred.insert(
                                (t + offset, self.deferred_seq),
                                Deferred {
                                    step: step.clone(),
                                    fired,
                                },
                            );
                            self.deferred_seq += 1;
                        }
                    }
                }
            }
            Job::Actuate { step, message } => match step {
                Step::Command { actuator, value } => {
                    self.log.push(
                        t,
                        LogKind::ActuatorCmd,
                        Detail::new().with("actuator", actuator).with("value", value).with("message", message),
                    );
                }
                Step::Play { actuator, file } => {
                    self.log.push(
                        t,
                        LogKind::PlayCmd,
                        Detail::new().with("actuator", actuator).with("file", file).with("message", message),
                    );
                }
                Step::Wait { .. } => unreachable!("waits are never published"),
            },
        }
    }

    fn publish_step(&mut self, step: &Step, fired: u64, t: u64) {
        let (actuator, payload) = match step {
            Step::Command { actuator, value } => (
                actuator,
                Payload::Fields(BTreeMap::from([("value".to_string(), PayloadValue::Number(*value))])),
            ),
            Step::Play { actuator, file } => (
                actuator,
                Payload::Fields(BTreeMap::from([("file".to_string(), PayloadValue::Text(file.clone()))])),
            ),
            Step::Wait { .. } => return,
        };
        let (message, consumers) = self.publish(&command_topic(actuator), Layer::Behavior, payload, t, ("fired", fired));
        for c in consumers {
            if let Consumer::Task(task) = c {
                self.queue.push(
                    task,
                    t,
                    Job::Actuate {
                        step: step.clone(),
                        message,
                    },
                );
            }
        }
    }

    /// Publishes, logs, and hands each delivery to its consumer.
    fn publish(
        &mut self,
        topic: &str,
        layer: Layer,
        payload: Payload,
        t: u64,
        cause: (&str, u64),
    ) -> (u64, Vec<Consumer>) {
        let message = self.bus.publish(topic, layer, payload, t).expect("topics are registered at setup");
        let delivered: Vec<&str> = self.bus.subscriber_layers(topic).into_iter().map(Layer::as_str).collect();
        let mut consumers = Vec::new();
        for sub in self.bus.subscribers(topic) {
            self.bus.poll(sub).expect("publish queued a delivery");
            consumers.push(self.consumers[&sub].clone());
        }
        self.log.push(
            t,
            LogKind::Message,
            Detail::new()
                .with("bus_seq", message.seq)
                .with("topic", topic)
                .with("layer", layer.as_str())
                .with("delivered", delivered)
                .with("payload", payload_value(&message.payload))
                .with(cause.0, cause.1),
        );
        (message.seq, consumers)
    }

    fn evaluate_rules(&mut self, topic: &str, value: f64, message: u64, t: u64) {
        let signals = self.topic_signals.get(topic).cloned().unwrap_or_default();
        for s in &signals {
            self.snapshot.insert(s.clone(), value);
        }
        // (behavior, rule index, branch)
        let program = self.program;
        let mut candidates: Vec<(&str, usize, &str)> = Vec::new();
        for rule in &program.rules {
            if !rule.signals.iter().any(|s| signals.contains(s)) {
                continue;
            }
            match eval_condition(&rule.condition, &self.snapshot) {
                Ok(true) => candidates.push((&rule.then_behavior, rule.index, "then")),
                Ok(false) => {
                    if let Some(e) = &rule.else_behavior {
                        candidates.push((e, rule.index, "else"));
                    }
                }
                Err(_) => {}
            }
        }
        let priority = |b: &str| program.behaviors[b].priority;
        let Some(winner) = candidates
            .iter()
            .enumerate()
            .fold(None::<usize>, |best, (i, c)| match best {
                Some(j) if priority(candidates[j].0) >= priority(c.0) => Some(j),
                _ => Some(i),
            })
        else {
            return;
        };
        let (behavior, rule, branch) = candidates[winner];
        let fired = self.log.push(
            t,
            LogKind::BehaviorFired,
            Detail::new()
                .with("behavior", behavior)
                .with("rule", rule)
                .with("branch", branch)
                .with("priority", priority(behavior))
                .with("message", message),
        );
        for (i, &(b, r, br)) in candidates.iter().enumerate() {
            if i != winner {
                self.log.push(
                    t,
                    LogKind::BehaviorSuppressed,
                    Detail::new()
                        .with("behavior", b)
                        .with("rule", r)
                        .with("branch", br)
                        .with("priority", priority(b))
                        .with("winner", behavior),
                );
            }
        }
        if let Some(c) = self.counters.get_mut(behavior) {
            c.record(t);
        }
        let behavior = behavior.to_string();
        self.queue.push(behavior_task(&behavior), t, Job::Respond { behavior, fired });
    }
}

fn payload_value(p: &Payload) -> super::log::LogValue {
    match p {
        Payload::Scalar(v) => (*v).into(),
        Payload::Fields(fields) => {
            let mut d = Detail::new();
            for (k, v) in fields {
                match v {
                    PayloadValue::Number(n) => d.insert(k, *n),
                    PayloadValue::Text(s) => d.insert(k, s.as_str()),
                }
            }
            d.into()
        }
    }
}

