use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use zkoracle_core::circuits::{
    build_aggregation_witness, build_slash_witness, check_aggregation, check_slash,
};
use zkoracle_core::crypto::keygen;
use zkoracle_core::simnet::{bundled, run_scenario};
use zkoracle_core::{Account, CircuitParams, FieldElement, KeyPair, StateTree, Vote};

fn committee(depth: u32, members: u64) -> (CircuitParams, StateTree, Vec<KeyPair>) {
    let params = CircuitParams::new(depth, 50, 10);
    let mut tree = StateTree::new(depth).unwrap();
    let keys: Vec<KeyPair> = (0..members)
        .map(|i| {
            let mut seed = [7u8; 32];
            seed[..8].copy_from_slice(&i.to_be_bytes());
            keygen(&seed)
        })
        .collect();
    for (i, k) in keys.iter().enumerate() {
        tree.set_account(i as u64, Account::new(i as u64, k.public, 1000))
            .unwrap();
    }
    (params, tree, keys)
}

fn circuits(c: &mut Criterion) {
    let hash = FieldElement::from_u64(0xb10c);
    let mut group = c.benchmark_group("check_aggregation");
    group.sample_size(10);
    for depth in [2u32, 4, 6] {
        let (params, tree, keys) = committee(depth, 1 << depth);
        let votes: Vec<Vote> = (0..params.threshold as u64)
            .map(|i| Vote::new(&keys[i as usize], i, 1, hash))
            .collect();
        let (public, witness) =
            build_aggregation_witness(&params, &tree, 0, &votes, 1, hash, None).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(1u64 << depth),
            &depth,
            |b, _| b.iter(|| check_aggregation(&params, black_box(&public), &witness)),
        );
    }
    group.finish();

    let mut group = c.benchmark_group("check_slash");
    for depth in [2u32, 8] {
        let (params, tree, keys) = committee(depth, 4);
        let dissent = Vote::new(&keys[1], 1, 1, FieldElement::zero());
        let (public, witness) = build_slash_witness(&params, &tree, 0, &dissent, 1, hash).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(depth), &depth, |b, _| {
            b.iter(|| check_slash(&params, black_box(&public), &witness))
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut cfg = bundled("honest_n4").unwrap();
    cfg.rounds = 3;
    let mut group = c.benchmark_group("simnet");
    group.sample_size(10);
    group.bench_function("honest_n4_3_rounds", |b| {
        b.iter(|| run_scenario(black_box(&cfg)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, circuits, simulation);
criterion_main!(benches);
