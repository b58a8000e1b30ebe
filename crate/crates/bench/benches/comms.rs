use std::hint::black_box;
use std::time::Duration;

use cortexc_core::comms::{Blackboard, Envelope, MessageBus, MessageKind};
use cortexc_core::evaluation::regularized_cross_entropy;
use cortexc_core::model::LossInput;
use criterion::{criterion_group, criterion_main, Criterion};

fn bus_round_trip(c: &mut Criterion) {
    let bus = MessageBus::new();
    bus.register("a");
    bus.register("b");
    c.bench_function("bus/send_receive", |b| {
        b.iter(|| {
            bus.send(Envelope::new("a", "b", MessageKind::Assign, "t", "payload")).unwrap();
            black_box(bus.receive("b", Duration::ZERO).unwrap())
        })
    });
}

fn blackboard(c: &mut Criterion) {
    let board = Blackboard::new();
    let mut i = 0u64;
    c.bench_function("blackboard/write", |b| {
        b.iter(|| {
            i += 1;
            board.write(black_box("k"), "value", "w").unwrap()
        })
    });
    for k in 0..100 {
        board.write(&format!("t{k}/code"), "x", "w").unwrap();
    }
    let keys: Vec<String> = (0..10).map(|k| format!("t{k}/code")).collect();
    c.bench_function("blackboard/view_10", |b| b.iter(|| board.view(keys.iter().map(String::as_str))));
}

fn loss(c: &mut Criterion) {
    let m = 10;
    let probs = vec![vec![1.0 / m as f64; m]; 1000];
    let labels = (0..1000).map(|i| (0..m).map(|j| if j == i % m { 1.0 } else { 0.0 }).collect()).collect();
    let input = LossInput { probs, labels, lambda: 0.01, theta_sq_norm: 3.0 };
    c.bench_function("loss/1000x10", |b| b.iter(|| regularized_cross_entropy(black_box(&input)).unwrap()));
}

criterion_group!(benches, bus_round_trip, blackboard, loss);
criterion_main!(benches);
