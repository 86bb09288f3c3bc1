use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use robosync_bench::{fixture, Workload};
use robosync_core::dsl::{bind_program, format_program, parse_program};
use robosync_core::engine::run;
use robosync_core::parse_config;
use robosync_core::sched::{select_next, ReadyQueue, TaskCategory, TaskDescriptor};

fn front_end(c: &mut Criterion) {
    let source = fixture("adaptive.rsb");
    let config = parse_config(&fixture("adaptive_config.json")).unwrap();
    let program = parse_program(&source).unwrap();
    c.bench_function("parse_program", |b| b.iter(|| parse_program(black_box(&source)).unwrap()));
    c.bench_function("format_program", |b| b.iter(|| format_program(black_box(&program))));
    c.bench_function("bind_program", |b| b.iter(|| bind_program(black_box(&program), &config).unwrap()));
    let config_text = fixture("listing1.json");
    c.bench_function("parse_config", |b| b.iter(|| parse_config(black_box(&config_text)).unwrap()));
}

fn replay(c: &mut Criterion) {
    let fixture_run = Workload::adaptive();
    c.bench_function("run/adaptive_fixture", |b| {
        b.iter(|| run(&fixture_run.config, &fixture_run.program, black_box(&fixture_run.trace)))
    });
    let mut group = c.benchmark_group("run/synthetic");
    for n in [1_000usize, 10_000] {
        let w = Workload::adaptive().with_synthetic_trace(n, 2_000);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| run(&w.config, &w.program, black_box(&w.trace)))
        });
    }
    group.finish();
}

fn dispatch(c: &mut Criterion) {
    let mut group = c.benchmark_group("select_next");
    for depth in [8usize, 64, 512] {
        let tasks: BTreeMap<String, TaskDescriptor> = (0..16)
            .map(|i| {
                let mut t = TaskDescriptor::new(format!("t{i}"), TaskCategory::ALL[i % 5], 100);
                t.set_base((i % 7) as f64 / 8.0);
                (t.id.clone(), t)
            })
            .collect();
        let mut queue = ReadyQueue::new();
        for j in 0..depth {
            queue.push(format!("t{}", j * 5 % 16), 0, ());
        }
        group.bench_with_input(BenchmarkId::from_parameter(depth), &queue, |b, q| {
            b.iter(|| select_next(black_box(q), &tasks))
        });
    }
    group.finish();
}

criterion_group!(benches, front_end, replay, dispatch);
criterion_main!(benches);
