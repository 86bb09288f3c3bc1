//! Task model and dispatch policy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::config::{SchedulerParams, P_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskCategory {
    SensorInput,
    Algorithmic,
    Behavioral,
    Control,
    Safety,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 5] = [
        TaskCategory::SensorInput,
        TaskCategory::Algorithmic,
        TaskCategory::Behavioral,
        TaskCategory::Control,
        TaskCategory::Safety,
    ];

    /// Tie-break rank among equal priorities; higher wins.
    pub fn rank(self) -> u8 {
        match self {
            TaskCategory::SensorInput => 0,
            TaskCategory::Algorithmic => 1,
            TaskCategory::Behavioral => 2,
            TaskCategory::Control => 3,
            TaskCategory::Safety => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskCategory::SensorInput => "sensor_input",
            TaskCategory::Algorithmic => "algorithmic",
            TaskCategory::Behavioral => "behavioral",
            TaskCategory::Control => "control",
            TaskCategory::Safety => "safety",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type TaskId = String;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDescriptor {
    pub id: TaskId,
    pub category: TaskCategory,
    /// Behaviors whose responses run through this task.
    pub behaviors: BTreeSet<String>,
    pub base_priority: f64,
    pub current_priority: f64,
    pub cost_us: u64,
}

impl TaskDescriptor {
    pub fn new(id: impl Into<TaskId>, category: TaskCategory, cost_us: u64) -> Self {
        let p = if category == TaskCategory::Safety { P_MAX } else { 0.0 };
        Self {
            id: id.into(),
            category,
            behaviors: BTreeSet::new(),
            base_priority: p,
            current_priority: p,
            cost_us,
        }
    }

    pub fn with_behaviors<I, S>(mut self, behaviors: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.behaviors.extend(behaviors.into_iter().map(Into::into));
        self
    }

    pub fn set_base(&mut self, p: f64) {
        self.base_priority = p;
        self.current_priority = p;
    }
}

/// Trigger timestamps of one behavior within the current tumbling window.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyCounter {
    pub behavior: String,
    pub window_start_us: u64,
    pub trigger_timestamps: Vec<u64>,
}

impl FrequencyCounter {
    pub fn new(behavior: impl Into<String>) -> Self {
        Self {
            behavior: behavior.into(),
            ..Self::default()
        }
    }

    pub fn record(&mut self, t_us: u64) {
        debug_assert!(t_us >= self.window_start_us, "trigger before the current window");
        self.trigger_timestamps.push(t_us);
    }

    pub fn frequency(&self) -> usize {
        self.trigger_timestamps.len()
    }

    pub fn reset(&mut self, window_start_us: u64) {
        self.window_start_us = window_start_us;
        self.trigger_timestamps.clear();
    }
}

pub fn record_trigger(mut counter: FrequencyCounter, t_us: u64) -> FrequencyCounter {
    counter.record(t_us);
    counter
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchedError {
    #[error("task `{task}` references unknown behavior `{behavior}`")]
    UnknownBehavior { task: TaskId, behavior: String },
}

/// Base priority of each task: the highest priority among the behaviors
/// using it, or [`P_MAX`] for tasks in `safety_tasks`.
///
/// A task no behavior uses gets half the lowest behavior priority, so it
/// ranks below every linked task and scales along with them.
pub fn assign_base_priorities(
    behavior_priorities: &BTreeMap<String, f64>,
    usage: &BTreeMap<TaskId, BTreeSet<String>>,
    safety_tasks: &BTreeSet<TaskId>,
) -> Result<BTreeMap<TaskId, f64>, SchedError> {
    let floor = behavior_priorities.values().copied().fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor / 2.0 } else { 0.5 };
    let mut out = BTreeMap::new();
    for (task, behaviors) in usage {
        let mut p: Option<f64> = None;
        for b in behaviors {
            let bp = *behavior_priorities.get(b).ok_or_else(|| SchedError::UnknownBehavior {
                task: task.clone(),
                behavior: b.clone(),
            })?;
            p = Some(p.map_or(bp, |cur| cur.max(bp)));
        }
        out.insert(task.clone(), p.unwrap_or(floor));
    }
    for task in safety_tasks {
        out.insert(task.clone(), P_MAX);
    }
    Ok(out)
}

/// One task's priority change at a window boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityUpdate {
    pub task: TaskId,
    pub base: f64,
    pub old: f64,
    pub new: f64,
    /// Trigger count of the linked behavior that drove the adjustment.
    pub frequency: usize,
}

/// Priority boost for a behavior triggered `frequency` times in a window.
pub fn priority_boost(alpha: f64, frequency: usize, window_us: u64) -> f64 {
    let w_seconds = window_us as f64 / 1e6;
    alpha * frequency as f64 / w_seconds
}

/// Recomputes every non-safety task's current priority from its base and
/// the busiest linked behavior of the closing window, then resets all
/// counters to start a window at `t_us`.
pub fn adapt_priorities(
    tasks: &mut BTreeMap<TaskId, TaskDescriptor>,
    counters: &mut BTreeMap<String, FrequencyCounter>,
    params: &SchedulerParams,
    t_us: u64,
) -> Vec<PriorityUpdate> {
    let mut updates = Vec::new();
    for task in tasks.values_mut() {
        if task.category == TaskCategory::Safety {
            continue;
        }
        let frequency = task
            .behaviors
            .iter()
            .filter_map(|b| counters.get(b))
            .map(FrequencyCounter::frequency)
            .max()
            .unwrap_or(0);
        let new = (task.base_priority + priority_boost(params.alpha, frequency, params.window_us)).min(params.p_max);
        updates.push(PriorityUpdate {
            task: task.id.clone(),
            base: task.base_priority,
            old: task.current_priority,
            new,
            frequency,
        });
        task.current_priority = new;
    }
    for c in counters.values_mut() {
        c.reset(t_us);
    }
    updates
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadyEntry<P> {
    pub task: TaskId,
    pub enqueue_seq: u64,
    pub enqueued_t_us: u64,
    pub payload: P,
}

/// Jobs waiting for dispatch.
#[derive(Debug, Clone)]
pub struct ReadyQueue<P> {
    entries: Vec<ReadyEntry<P>>,
    next_seq: u64,
}

impl<P> Default for ReadyQueue<P> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            next_seq: 0,
        }
    }
}

impl<P> ReadyQueue<P> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a job and returns its enqueue sequence number.
    pub fn push(&mut self, task: impl Into<TaskId>, t_us: u64, payload: P) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.entries.push(ReadyEntry {
            task: task.into(),
            enqueue_seq: seq,
            enqueued_t_us: t_us,
            payload,
        });
        seq
    }

    pub fn remove(&mut self, enqueue_seq: u64) -> Option<ReadyEntry<P>> {
        let i = self.entries.iter().position(|e| e.enqueue_seq == enqueue_seq)?;
        Some(self.entries.remove(i))
    }

    /// Removes and returns every entry failing `keep`, in enqueue order.
    pub fn extract_unless(&mut self, mut keep: impl FnMut(&ReadyEntry<P>) -> bool) -> Vec<ReadyEntry<P>> {
        let (kept, removed) = std::mem::take(&mut self.entries).into_iter().partition(|e| keep(e));
        self.entries = kept;
        removed
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReadyEntry<P>> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The entry to dispatch next: highest current priority, then category
/// rank, then earliest enqueue.
pub fn select_next<P>(queue: &ReadyQueue<P>, tasks: &BTreeMap<TaskId, TaskDescriptor>) -> Option<(TaskId, u64)> {
    queue
        .iter()
        .map(|e| {
            let t = &tasks[&e.task];
            (e, t.current_priority, t.category.rank())
        })
        .max_by(|(ea, pa, ra), (eb, pb, rb)| {
            pa.total_cmp(pb)
                .then(ra.cmp(rb))
                .then(eb.enqueue_seq.cmp(&ea.enqueue_seq))
        })
        .map(|(e, ..)| (e.task.clone(), e.enqueue_seq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(alpha: f64, window_us: u64) -> SchedulerParams {
        SchedulerParams {
            alpha,
            window_us,
            ..SchedulerParams::default()
        }
    }

    fn prio(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn uses(pairs: &[(&str, &[&str])]) -> BTreeMap<TaskId, BTreeSet<String>> {
        pairs
            .iter()
            .map(|(t, bs)| (t.to_string(), bs.iter().map(|b| b.to_string()).collect()))
            .collect()
    }

    #[test]
    fn inherits_the_highest_priority() {
        let p = prio(&[("a", 0.7), ("b", 0.3), ("c", 0.4), ("d", 0.9)]);
        let u = uses(&[("t1", &["a", "b"]), ("t2", &["c"]), ("t3", &["d"])]);
        let safety = BTreeSet::from(["t3".to_string()]);
        let base = assign_base_priorities(&p, &u, &safety).unwrap();
        assert_eq!(base["t1"], 0.7);
        assert_eq!(base["t2"], 0.4);
        assert_eq!(base["t3"], 1.0);
    }

    #[test]
    fn unknown_behavior() {
        let err = assign_base_priorities(&prio(&[]), &uses(&[("t", &["ghost"])]), &BTreeSet::new()).unwrap_err();
        assert_eq!(
            err,
            SchedError::UnknownBehavior {
                task: "t".into(),
                behavior: "ghost".into()
            }
        );
    }

    #[test]
    fn unlinked_tasks_rank_lowest() {
        let base = assign_base_priorities(&prio(&[("a", 0.4), ("b", 0.2)]), &uses(&[("idle", &[])]), &BTreeSet::new()).unwrap();
        assert_eq!(base["idle"], 0.1);
    }

    #[test]
    fn counter_counts_and_resets() {
        let c = record_trigger(FrequencyCounter::new("wave"), 10);
        assert_eq!(c.frequency(), 1);
        let mut c = (0..4).fold(c, |c, t| record_trigger(c, 20 + t));
        assert_eq!(c.frequency(), 5);
        c.reset(1_000_000);
        assert_eq!(c.frequency(), 0);
        assert_eq!(c.window_start_us, 1_000_000);
    }

    fn one_task(base: f64, category: TaskCategory, triggers: usize) -> (BTreeMap<TaskId, TaskDescriptor>, BTreeMap<String, FrequencyCounter>) {
        let mut t = TaskDescriptor::new("t", category, 100).with_behaviors(["b"]);
        if category != TaskCategory::Safety {
            t.set_base(base);
        }
        let mut c = FrequencyCounter::new("b");
        for i in 0..triggers {
            c.record(i as u64);
        }
        (BTreeMap::from([("t".to_string(), t)]), BTreeMap::from([("b".to_string(), c)]))
    }

    #[test]
    fn boost_arithmetic() {
        for (base, f, expected) in [(0.5, 0, 0.5), (0.5, 4, 0.7), (0.9, 10, 1.0)] {
            let (mut tasks, mut counters) = one_task(base, TaskCategory::Behavioral, f);
            let ups = adapt_priorities(&mut tasks, &mut counters, &params(0.05, 1_000_000), 1_000_000);
            assert!((tasks["t"].current_priority - expected).abs() < 1e-12, "{base} {f}");
            assert_eq!(ups.len(), 1);
            assert_eq!(ups[0].frequency, f);
            assert_eq!(counters["b"].frequency(), 0);
        }
    }

    #[test]
    fn boost_does_not_accumulate() {
        let (mut tasks, mut counters) = one_task(0.5, TaskCategory::Control, 4);
        adapt_priorities(&mut tasks, &mut counters, &params(0.05, 1_000_000), 1_000_000);
        let ups = adapt_priorities(&mut tasks, &mut counters, &params(0.05, 1_000_000), 2_000_000);
        assert!((ups[0].old - 0.7).abs() < 1e-12);
        assert_eq!(ups[0].new, 0.5);
    }

    #[test]
    fn safety_is_untouched() {
        let (mut tasks, mut counters) = one_task(1.0, TaskCategory::Safety, 9);
        let ups = adapt_priorities(&mut tasks, &mut counters, &params(0.5, 500_000), 500_000);
        assert!(ups.is_empty());
        assert_eq!(tasks["t"].current_priority, 1.0);
        assert_eq!(tasks["t"].base_priority, 1.0);
    }

    fn task_map(specs: &[(&str, TaskCategory, f64)]) -> BTreeMap<TaskId, TaskDescriptor> {
        specs
            .iter()
            .map(|(id, cat, p)| {
                let mut t = TaskDescriptor::new(*id, *cat, 1);
                t.set_base(*p);
                (id.to_string(), t)
            })
            .collect()
    }

    #[test]
    fn selection_order() {
        let tasks = task_map(&[
            ("a", TaskCategory::Behavioral, 0.7),
            ("b", TaskCategory::Behavioral, 0.3),
            ("s", TaskCategory::Safety, 1.0),
            ("c", TaskCategory::Control, 1.0),
        ]);
        let mut q = ReadyQueue::new();
        assert_eq!(select_next(&q, &tasks), None);
        q.push("b", 0, ());
        q.push("a", 0, ());
        assert_eq!(select_next(&q, &tasks), Some(("a".into(), 1)));
        q.push("c", 0, ());
        q.push("s", 0, ());
        assert_eq!(select_next(&q, &tasks), Some(("s".into(), 3)));
        let mut fifo = ReadyQueue::new();
        fifo.push("a", 0, ());
        fifo.push("a", 5, ());
        assert_eq!(select_next(&fifo, &tasks), Some(("a".into(), 0)));
    }

    #[test]
    fn queue_extract() {
        let mut q = ReadyQueue::new();
        for t in ["x", "y", "x"] {
            q.push(t, 0, t.len());
        }
        let gone = q.extract_unless(|e| e.task == "y");
        assert_eq!(gone.iter().map(|e| e.enqueue_seq).collect::<Vec<_>>(), [0, 2]);
        assert_eq!(q.len(), 1);
        assert_eq!(q.remove(1).map(|e| e.task), Some("y".into()));
        assert!(q.is_empty());
        assert_eq!(q.push("z", 0, 0), 3);
    }

    fn graph() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<bool>>, Vec<bool>)> {
        (1usize..=6, 1usize..=10).prop_flat_map(|(nb, nt)| {
            (
                proptest::collection::vec(0.001f64..0.999, nb),
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), nb), nt),
                proptest::collection::vec(any::<bool>(), nt),
            )
        })
    }

    fn build(prios: &[f64], edges: &[Vec<bool>], safety: &[bool]) -> (BTreeMap<String, f64>, BTreeMap<TaskId, BTreeSet<String>>, BTreeSet<TaskId>) {
        let p = prios.iter().enumerate().map(|(i, v)| (format!("b{i}"), *v)).collect();
        let u = edges
            .iter()
            .enumerate()
            .map(|(t, row)| {
                let set = row.iter().enumerate().filter(|(_, e)| **e).map(|(b, _)| format!("b{b}")).collect();
                (format!("t{t}"), set)
            })
            .collect();
        let s = safety.iter().enumerate().filter(|(_, s)| **s).map(|(t, _)| format!("t{t}")).collect();
        (p, u, s)
    }

    proptest! {
        #[test]
        fn matches_pairwise_loop((prios, edges, safety) in graph()) {
            let (p, u, s) = build(&prios, &edges, &safety);
            let got = assign_base_priorities(&p, &u, &s).unwrap();
            for (t, row) in edges.iter().enumerate() {
                let mut best = f64::NEG_INFINITY;
                for (b, used) in row.iter().enumerate() {
                    if *used && prios[b] > best {
                        best = prios[b];
                    }
                }
                let expected = if safety[t] {
                    1.0
                } else if best == f64::NEG_INFINITY {
                    prios.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0
                } else {
                    best
                };
                prop_assert_eq!(got[&format!("t{t}")], expected);
            }
        }

        #[test]
        fn ceiling_and_monotonicity(base in 0.001f64..1.0, f in 0usize..50, alpha in 0.0f64..2.0, w in 1u64..20_000_000) {
            let run = |f: usize| {
                let (mut tasks, mut counters) = one_task(base, TaskCategory::Algorithmic, f);
                adapt_priorities(&mut tasks, &mut counters, &params(alpha, w), w);
                tasks["t"].current_priority
            };
            let now = run(f);
            prop_assert!(now <= 1.0);
            prop_assert!(now >= base);
            prop_assert!(run(f + 1) >= now);
        }

        #[test]
        fn argmax_is_scale_invariant((prios, edges, _) in graph(), c in 0.01f64..=1.0, order in proptest::collection::vec(0usize..10, 1..12)) {
            let (p, u, _) = build(&prios, &edges, &[]);
            let scaled: BTreeMap<_, _> = p.iter().map(|(k, v)| (k.clone(), v * c)).collect();
            let pick = |prio: &BTreeMap<String, f64>| {
                let base = assign_base_priorities(prio, &u, &BTreeSet::new()).unwrap();
                let tasks: BTreeMap<TaskId, TaskDescriptor> = base
                    .iter()
                    .map(|(id, b)| {
                        let mut t = TaskDescriptor::new(id.clone(), TaskCategory::Behavioral, 1);
                        t.set_base(*b);
                        (id.clone(), t)
                    })
                    .collect();
                let mut q = ReadyQueue::new();
                for i in &order {
                    q.push(format!("t{}", i % edges.len()), 0, ());
                }
                select_next(&q, &tasks)
            };
            prop_assert_eq!(pick(&p), pick(&scaled));
        }
    }
}
