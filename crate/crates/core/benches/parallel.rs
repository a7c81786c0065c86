use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kklab::iteration::run;
use kklab::par::{map_indexed, Execution};
use kklab::problem::{make_scalar_toy, BoundClass, ClassKind, IterationParams};
use kklab::verify::{random_trig_field, stock_evaluator, verify_remainder_class, AuditParams};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn audit(c: &mut Criterion) {
    let class = BoundClass::new(ClassKind::R3).unwrap();
    let params = AuditParams::default();
    let mut group = c.benchmark_group("remainder_audit");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| verify_remainder_class(stock_evaluator(class), class, &params, 32, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn batch_norms(c: &mut Criterion) {
    let fields: Vec<_> = (0..64).map(|i| random_trig_field(5, i, 64, 2048).unwrap()).collect();
    let mut group = c.benchmark_group("batch_ck_norm");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, fields.len()), &fields, |b, fields| {
            b.iter(|| map_indexed(exec, fields.len(), |i| black_box(&fields[i]).ck_norm(4).unwrap()))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let instances: Vec<_> = [16u32, 32, 64, 128]
        .iter()
        .map(|&lam| make_scalar_toy(IterationParams::new(lam, 1.0, 7, 2, 5), 0.1).unwrap())
        .collect();
    let mut group = c.benchmark_group("lambda_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| map_indexed(exec, instances.len(), |i| run(&instances[i], 5).unwrap().last_step()))
        });
    }
    group.finish();
}

criterion_group!(benches, audit, batch_norms, sweep);
criterion_main!(benches);
