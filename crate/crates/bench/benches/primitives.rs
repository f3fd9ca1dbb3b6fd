use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use zkoracle_core::crypto::{keygen, mimc_hash_n, sign, verify, CurvePoint, FieldElement};
use zkoracle_core::tree::{Account, StateTree};

fn hashing(c: &mut Criterion) {
    let a = FieldElement::from_u64(1);
    let b = FieldElement::from_u64(2);
    c.bench_function("mimc_2", |bench| {
        bench.iter(|| mimc_hash_n([black_box(a), black_box(b)]))
    });
    c.bench_function("mimc_4", |bench| {
        bench.iter(|| mimc_hash_n([black_box(a), b, a, b]))
    });
}

fn curve(c: &mut Criterion) {
    let keys = keygen(&[3; 32]);
    let msg = FieldElement::from_u64(99);
    let sig = sign(&keys.secret, &msg).unwrap();
    c.bench_function("scalar_mul", |bench| {
        bench.iter(|| CurvePoint::generator().mul(black_box(&keys.secret)))
    });
    c.bench_function("eddsa_sign", |bench| {
        bench.iter(|| sign(&keys.secret, black_box(&msg)).unwrap())
    });
    c.bench_function("eddsa_verify", |bench| {
        bench.iter(|| verify(&keys.public, black_box(&msg), &sig).unwrap())
    });
}

fn tree(c: &mut Criterion) {
    let pk = keygen(&[4; 32]).public;
    let mut t = StateTree::new(8).unwrap();
    let mut bal = 0u128;
    c.bench_function("tree_update_d8", |bench| {
        bench.iter(|| {
            bal += 1;
            t.set_account(17, Account::new(17, pk, bal)).unwrap()
        })
    });
    c.bench_function("tree_prove_d8", |bench| {
        bench.iter(|| t.prove(black_box(17)).unwrap())
    });
}

criterion_group!(benches, hashing, curve, tree);
criterion_main!(benches);
