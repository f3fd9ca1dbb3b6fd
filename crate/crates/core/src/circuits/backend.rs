use std::fmt;
use std::str::FromStr;

use super::aggregation::{check_aggregation, AggregationPublic, AggregationWitness};
use super::encoding::{decode_witness, encode_witness};
use super::slash::{check_slash, SlashPublic, SlashWitness};
use super::{CircuitError, CircuitParams, ConstraintReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CircuitKind {
    Aggregation,
    Slash,
}

impl fmt::Display for CircuitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CircuitKind::Aggregation => "aggregation",
            CircuitKind::Slash => "slash",
        })
    }
}

impl FromStr for CircuitKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aggregation" => Ok(CircuitKind::Aggregation),
            "slash" => Ok(CircuitKind::Slash),
            other => Err(CircuitError::UnknownCircuit(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublicInputs {
    Aggregation(AggregationPublic),
    Slash(SlashPublic),
}

impl PublicInputs {
    pub fn kind(&self) -> CircuitKind {
        match self {
            PublicInputs::Aggregation(_) => CircuitKind::Aggregation,
            PublicInputs::Slash(_) => CircuitKind::Slash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Witness {
    Aggregation(AggregationWitness),
    Slash(SlashWitness),
}

impl Witness {
    pub fn kind(&self) -> CircuitKind {
        match self {
            Witness::Aggregation(_) => CircuitKind::Aggregation,
            Witness::Slash(_) => CircuitKind::Slash,
        }
    }
}

/// Runs whichever circuit the pair belongs to.
pub fn run_circuit(
    params: &CircuitParams,
    public: &PublicInputs,
    witness: &Witness,
) -> Result<ConstraintReport, CircuitError> {
    match (public, witness) {
        (PublicInputs::Aggregation(p), Witness::Aggregation(w)) => {
            Ok(check_aggregation(params, p, w))
        }
        (PublicInputs::Slash(p), Witness::Slash(w)) => Ok(check_slash(params, p, w)),
        _ => Err(CircuitError::KindMismatch),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub backend_id: String,
    pub payload: Vec<u8>,
}

impl Proof {
    pub fn size(&self) -> usize {
        self.payload.len()
    }
}

pub trait ProofBackend: Send + Sync {
    fn id(&self) -> &'static str;

    fn prove(
        &self,
        params: &CircuitParams,
        public: &PublicInputs,
        witness: &Witness,
    ) -> Result<Proof, CircuitError>;

    /// `Ok(false)` for a proof that does not establish the relation;
    /// `Err` only for proofs addressed to another backend.
    fn verify(
        &self,
        params: &CircuitParams,
        public: &PublicInputs,
        proof: &Proof,
    ) -> Result<bool, CircuitError>;
}

/// Proof = the witness itself; verification re-executes the circuit against
/// the verifier's public inputs. Complete and sound, but not zero-knowledge
/// and not succinct.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransparentBackend;

impl TransparentBackend {
    pub const ID: &'static str = "transparent";
}

impl ProofBackend for TransparentBackend {
    fn id(&self) -> &'static str {
        Self::ID
    }

    fn prove(
        &self,
        _params: &CircuitParams,
        public: &PublicInputs,
        witness: &Witness,
    ) -> Result<Proof, CircuitError> {
        if public.kind() != witness.kind() {
            return Err(CircuitError::KindMismatch);
        }
        Ok(Proof {
            backend_id: Self::ID.to_owned(),
            payload: encode_witness(witness).into_bytes(),
        })
    }

    fn verify(
        &self,
        params: &CircuitParams,
        public: &PublicInputs,
        proof: &Proof,
    ) -> Result<bool, CircuitError> {
        if proof.backend_id != Self::ID {
            return Err(CircuitError::UnknownBackend(proof.backend_id.clone()));
        }
        let Ok(text) = std::str::from_utf8(&proof.payload) else {
            return Ok(false);
        };
        let Ok(witness) = decode_witness(public.kind(), text) else {
            return Ok(false);
        };
        Ok(run_circuit(params, public, &witness)?.ok)
    }
}

pub fn backend_by_id(id: &str) -> Result<Box<dyn ProofBackend>, CircuitError> {
    match id {
        TransparentBackend::ID => Ok(Box::new(TransparentBackend)),
        other => Err(CircuitError::UnknownBackend(other.to_owned())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_aggregation_witness, build_slash_witness};
    use crate::crypto::{keygen, FieldElement, KeyPair};
    use crate::tree::{Account, StateTree};
    use crate::vote::Vote;

    fn setup() -> (CircuitParams, StateTree, Vec<KeyPair>) {
        let params = CircuitParams::new(2, 50, 10);
        let mut tree = StateTree::new(2).unwrap();
        let keys: Vec<KeyPair> = (0..4).map(|i| keygen(&[9 + i as u8; 32])).collect();
        for (i, k) in keys.iter().enumerate() {
            tree.set_account(i as u64, Account::new(i as u64, k.public, 100))
                .unwrap();
        }
        (params, tree, keys)
    }

    fn aggregation(req: u64) -> (CircuitParams, PublicInputs, Witness) {
        let (params, tree, keys) = setup();
        let hash = FieldElement::from_u64(77);
        let votes: Vec<Vote> = (0..3)
            .map(|i| Vote::new(&keys[i], i as u64, req, hash))
            .collect();
        let (p, w) = build_aggregation_witness(&params, &tree, 1, &votes, req, hash, None).unwrap();
        (
            params,
            PublicInputs::Aggregation(p),
            Witness::Aggregation(w),
        )
    }

    #[test]
    fn prove_then_verify() {
        let (params, public, witness) = aggregation(4);
        let b = TransparentBackend;
        let proof = b.prove(&params, &public, &witness).unwrap();
        assert!(b.verify(&params, &public, &proof).unwrap());
    }

    #[test]
    fn tampered_post_root_rejected() {
        let (params, public, witness) = aggregation(4);
        let b = TransparentBackend;
        let proof = b.prove(&params, &public, &witness).unwrap();
        let PublicInputs::Aggregation(mut p) = public else {
            unreachable!()
        };
        p.post_state_root += FieldElement::one();
        assert!(!b
            .verify(&params, &PublicInputs::Aggregation(p), &proof)
            .unwrap());
    }

    #[test]
    fn proof_bound_to_request_id() {
        let (params, public4, witness4) = aggregation(4);
        let (_, public5, _) = aggregation(5);
        let b = TransparentBackend;
        let proof = b.prove(&params, &public4, &witness4).unwrap();
        assert!(!b.verify(&params, &public5, &proof).unwrap());
    }

    #[test]
    fn garbage_payload_rejected() {
        let (params, public, _) = aggregation(4);
        let proof = Proof {
            backend_id: "transparent".into(),
            payload: b"1 2 3".to_vec(),
        };
        assert!(!TransparentBackend.verify(&params, &public, &proof).unwrap());
    }

    #[test]
    fn slash_proof_roundtrip() {
        let (params, tree, keys) = setup();
        let vote = Vote::new(&keys[3], 3, 2, FieldElement::zero());
        let (p, w) =
            build_slash_witness(&params, &tree, 0, &vote, 2, FieldElement::from_u64(5)).unwrap();
        let public = PublicInputs::Slash(p);
        let proof = TransparentBackend
            .prove(&params, &public, &Witness::Slash(w))
            .unwrap();
        assert!(TransparentBackend.verify(&params, &public, &proof).unwrap());
    }

    #[test]
    fn unknown_ids() {
        assert!(matches!(
            backend_by_id("groth16"),
            Err(CircuitError::UnknownBackend(_))
        ));
        assert!(backend_by_id("transparent").is_ok());
        assert!(matches!(
            "mint".parse::<CircuitKind>(),
            Err(CircuitError::UnknownCircuit(_))
        ));
        let (params, public, _) = aggregation(1);
        let proof = Proof {
            backend_id: "plonk".into(),
            payload: vec![],
        };
        assert!(TransparentBackend.verify(&params, &public, &proof).is_err());
    }
}
