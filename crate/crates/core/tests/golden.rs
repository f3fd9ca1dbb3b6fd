//! Byte-for-byte regression against frozen instance records under
//! `tests/golden/`. Set `UPDATE_GOLDEN=1` to rewrite them after an
//! intentional format change.

use std::fs;
use std::path::PathBuf;

use zkoracle_core::circuits::{
    build_aggregation_witness, build_slash_witness, check_aggregation, check_slash,
    decode_instance, encode_instance, run_circuit, PublicInputs, Witness,
};
use zkoracle_core::crypto::keygen;
use zkoracle_core::{Account, CircuitParams, FieldElement, KeyPair, StateTree, Vote};

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check_golden(name: &str, actual: &str) {
    let p = path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(&p, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    assert!(expected == actual, "{name} differs from the frozen record");
}

fn setup() -> (CircuitParams, StateTree, Vec<KeyPair>) {
    let params = CircuitParams::new(2, 50, 10);
    let mut tree = StateTree::new(2).unwrap();
    let keys: Vec<KeyPair> = (0..4u8).map(|i| keygen(&[i + 1; 32])).collect();
    for (i, k) in keys.iter().enumerate() {
        tree.set_account(i as u64, Account::new(i as u64, k.public, 1000 + i as u128))
            .unwrap();
    }
    (params, tree, keys)
}

#[test]
fn aggregation_instance_record() {
    let (params, tree, keys) = setup();
    let hash = FieldElement::from_u64(0xfeed);
    let votes: Vec<Vote> = [0u64, 2, 3]
        .iter()
        .map(|&i| Vote::new(&keys[i as usize], i, 7, hash))
        .collect();
    let (public, witness) =
        build_aggregation_witness(&params, &tree, 1, &votes, 7, hash, None).unwrap();
    assert!(check_aggregation(&params, &public, &witness).ok);
    let record = encode_instance(
        &PublicInputs::Aggregation(public),
        &Witness::Aggregation(witness),
    );
    check_golden("aggregation_d2.txt", &record);

    let (p, w) = decode_instance(&record).unwrap();
    assert!(run_circuit(&params, &p, &w).unwrap().ok);
    assert_eq!(encode_instance(&p, &w), record);
}

#[test]
fn slash_instance_record() {
    let (params, tree, keys) = setup();
    let dissent = Vote::new(&keys[3], 3, 7, FieldElement::from_u64(0xbad));
    let (public, witness) = build_slash_witness(
        &params,
        &tree,
        1,
        &dissent,
        7,
        FieldElement::from_u64(0xfeed),
    )
    .unwrap();
    assert!(check_slash(&params, &public, &witness).ok);
    let record = encode_instance(&PublicInputs::Slash(public), &Witness::Slash(witness));
    check_golden("slash_d2.txt", &record);

    let (p, w) = decode_instance(&record).unwrap();
    assert!(run_circuit(&params, &p, &w).unwrap().ok);
}

#[test]
fn vote_wire_record() {
    let (_, _, keys) = setup();
    let vote = Vote::new(&keys[2], 2, 7, FieldElement::from_u64(0xfeed));
    let bytes = vote.to_bytes();
    assert_eq!(bytes.len(), 144);
    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    check_golden("vote.hex", &(hex + "\n"));
    assert_eq!(Vote::from_bytes(&bytes).unwrap(), vote);
}
