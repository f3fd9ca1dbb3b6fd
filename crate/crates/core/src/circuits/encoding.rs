//! Decimal record encoding of circuit instances.
//!
//! Each record is a single line of whitespace-separated decimal integers
//! (field elements, indices, flags). A full instance file is
//!
//! ```text
//! circuit <aggregation|slash>
//! public <tokens>
//! witness <tokens>
//! ```

use std::str::{FromStr, SplitWhitespace};

use crate::crypto::{CurvePoint, FieldElement, Scalar, Signature};
use crate::tree::{Account, MerkleProof};

use super::aggregation::{
    AccountWitness, AggregationPublic, AggregationWitness, RotationPublic, VoteWitness,
};
use super::backend::{CircuitKind, PublicInputs, Witness};
use super::slash::{SlashPublic, SlashWitness};
use super::{CircuitError, ValidatorBits};

#[derive(Default)]
struct Writer(Vec<String>);

impl Writer {
    fn fe(&mut self, x: &FieldElement) {
        self.0.push(x.to_string());
    }
    fn int(&mut self, x: u64) {
        self.0.push(x.to_string());
    }
    fn flag(&mut self, b: bool) {
        self.int(u64::from(b));
    }
    fn point(&mut self, p: &CurvePoint) {
        self.fe(&p.x);
        self.fe(&p.y);
    }
    fn account(&mut self, a: &Account) {
        self.int(a.index);
        self.point(&a.pubkey);
        self.fe(&a.balance);
    }
    fn proof(&mut self, p: &MerkleProof) {
        self.fe(&p.leaf);
        p.path.iter().for_each(|s| self.fe(s));
        p.directions.iter().for_each(|&d| self.flag(d));
    }
    fn vote(&mut self, v: &VoteWitness) {
        self.account(&v.account);
        self.proof(&v.merkle_proof);
        self.point(&v.signature.r);
        self.0.push(v.signature.s.to_string());
        self.fe(&v.claimed_block_hash);
    }
    fn finish(self) -> String {
        self.0.join(" ")
    }
}

struct Reader<'a>(SplitWhitespace<'a>);

fn bad(msg: impl Into<String>) -> CircuitError {
    CircuitError::Encoding(msg.into())
}

impl<'a> Reader<'a> {
    fn new(s: &'a str) -> Self {
        Reader(s.split_whitespace())
    }
    fn token(&mut self) -> Result<&'a str, CircuitError> {
        self.0.next().ok_or_else(|| bad("record truncated"))
    }
    fn parse<T: FromStr>(&mut self, what: &str) -> Result<T, CircuitError> {
        let t = self.token()?;
        t.parse().map_err(|_| bad(format!("bad {what}: {t:?}")))
    }
    fn fe(&mut self) -> Result<FieldElement, CircuitError> {
        self.parse("field element")
    }
    fn int(&mut self) -> Result<u64, CircuitError> {
        self.parse("integer")
    }
    fn flag(&mut self) -> Result<bool, CircuitError> {
        match self.token()? {
            "0" => Ok(false),
            "1" => Ok(true),
            t => Err(bad(format!("bad flag {t:?}"))),
        }
    }
    fn point(&mut self) -> Result<CurvePoint, CircuitError> {
        Ok(CurvePoint {
            x: self.fe()?,
            y: self.fe()?,
        })
    }
    fn scalar(&mut self) -> Result<Scalar, CircuitError> {
        let t = self.token()?;
        let v = t.parse().map_err(|_| bad(format!("bad scalar {t:?}")))?;
        Scalar::new(v).map_err(|_| bad("scalar not reduced"))
    }
    fn account(&mut self) -> Result<Account, CircuitError> {
        Ok(Account {
            index: self.int()?,
            pubkey: self.point()?,
            balance: self.fe()?,
        })
    }
    fn proof(&mut self, depth: usize) -> Result<MerkleProof, CircuitError> {
        let leaf = self.fe()?;
        let path = (0..depth).map(|_| self.fe()).collect::<Result<_, _>>()?;
        let directions = (0..depth).map(|_| self.flag()).collect::<Result<_, _>>()?;
        Ok(MerkleProof {
            leaf,
            path,
            directions,
        })
    }
    fn vote(&mut self, depth: usize) -> Result<VoteWitness, CircuitError> {
        Ok(VoteWitness {
            account: self.account()?,
            merkle_proof: self.proof(depth)?,
            signature: Signature {
                r: self.point()?,
                s: self.scalar()?,
            },
            claimed_block_hash: self.fe()?,
        })
    }
    fn depth(&mut self) -> Result<usize, CircuitError> {
        let d = self.int()?;
        if d == 0 || d > u64::from(crate::tree::MAX_DEPTH) {
            return Err(bad(format!("depth {d} out of range")));
        }
        Ok(d as usize)
    }
    fn end(mut self) -> Result<(), CircuitError> {
        match self.0.next() {
            None => Ok(()),
            Some(t) => Err(bad(format!("trailing token {t:?}"))),
        }
    }
}

pub fn encode_public(public: &PublicInputs) -> String {
    let mut w = Writer::default();
    match public {
        PublicInputs::Aggregation(p) => {
            w.fe(&p.pre_state_root);
            w.fe(&p.post_state_root);
            w.fe(&p.block_hash);
            w.int(p.request_id);
            w.int(p.aggregator_index);
            w.0.push(p.validator_bits.to_string());
            w.flag(p.rotation.is_some());
            if let Some(r) = &p.rotation {
                w.point(&r.seed);
                w.point(&r.next_seed);
            }
        }
        PublicInputs::Slash(p) => {
            w.fe(&p.pre_state_root);
            w.fe(&p.post_state_root);
            w.fe(&p.block_hash);
            w.int(p.request_id);
            w.int(p.agg_index);
            w.int(p.val_index);
        }
    }
    w.finish()
}

pub fn decode_public(kind: CircuitKind, record: &str) -> Result<PublicInputs, CircuitError> {
    let mut r = Reader::new(record);
    let public = match kind {
        CircuitKind::Aggregation => {
            let pre_state_root = r.fe()?;
            let post_state_root = r.fe()?;
            let block_hash = r.fe()?;
            let request_id = r.int()?;
            let aggregator_index = r.int()?;
            let validator_bits: ValidatorBits = r.parse("validator bits")?;
            let rotation = if r.flag()? {
                Some(RotationPublic {
                    seed: r.point()?,
                    next_seed: r.point()?,
                })
            } else {
                None
            };
            PublicInputs::Aggregation(AggregationPublic {
                pre_state_root,
                post_state_root,
                block_hash,
                request_id,
                aggregator_index,
                validator_bits,
                rotation,
            })
        }
        CircuitKind::Slash => PublicInputs::Slash(SlashPublic {
            pre_state_root: r.fe()?,
            post_state_root: r.fe()?,
            block_hash: r.fe()?,
            request_id: r.int()?,
            agg_index: r.int()?,
            val_index: r.int()?,
        }),
    };
    r.end()?;
    Ok(public)
}

pub fn encode_witness(witness: &Witness) -> String {
    let mut w = Writer::default();
    match witness {
        Witness::Aggregation(a) => {
            w.int(a.aggregator.proof.depth() as u64);
            w.int(a.votes.len() as u64);
            w.flag(a.aggregator_secret.is_some());
            w.account(&a.aggregator.account);
            w.proof(&a.aggregator.proof);
            a.votes.iter().for_each(|v| w.vote(v));
            if let Some(s) = &a.aggregator_secret {
                w.0.push(s.to_string());
            }
        }
        Witness::Slash(s) => {
            w.int(s.aggregator.proof.depth() as u64);
            w.account(&s.aggregator.account);
            w.proof(&s.aggregator.proof);
            w.vote(&s.victim);
        }
    }
    w.finish()
}

pub fn decode_witness(kind: CircuitKind, record: &str) -> Result<Witness, CircuitError> {
    let mut r = Reader::new(record);
    let witness = match kind {
        CircuitKind::Aggregation => {
            let depth = r.depth()?;
            let count = r.int()?;
            if count > 1 << crate::tree::MAX_DEPTH {
                return Err(bad("vote count out of range"));
            }
            let has_secret = r.flag()?;
            let aggregator = AccountWitness {
                account: r.account()?,
                proof: r.proof(depth)?,
            };
            let votes = (0..count)
                .map(|_| r.vote(depth))
                .collect::<Result<_, _>>()?;
            let aggregator_secret = if has_secret { Some(r.scalar()?) } else { None };
            Witness::Aggregation(AggregationWitness {
                aggregator,
                votes,
                aggregator_secret,
            })
        }
        CircuitKind::Slash => {
            let depth = r.depth()?;
            let aggregator = AccountWitness {
                account: r.account()?,
                proof: r.proof(depth)?,
            };
            let victim = r.vote(depth)?;
            Witness::Slash(SlashWitness { aggregator, victim })
        }
    };
    r.end()?;
    Ok(witness)
}

/// Three-line instance file: circuit name, public record, witness record.
pub fn encode_instance(public: &PublicInputs, witness: &Witness) -> String {
    format!(
        "circuit {}\npublic {}\nwitness {}\n",
        public.kind(),
        encode_public(public),
        encode_witness(witness)
    )
}

pub fn decode_instance(text: &str) -> Result<(PublicInputs, Witness), CircuitError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut field = |name: &str| -> Result<String, CircuitError> {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("missing `{name}` line")))?;
        line.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_owned)
            .ok_or_else(|| bad(format!("expected `{name}` line")))
    };
    let kind: CircuitKind = field("circuit")?.trim().parse()?;
    let public = decode_public(kind, &field("public")?)?;
    let witness = decode_witness(kind, &field("witness")?)?;
    Ok((public, witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{
        build_aggregation_witness, build_slash_witness, CircuitParams, RotationInput,
    };
    use crate::crypto::{keygen, KeyPair};
    use crate::tree::StateTree;
    use crate::vote::Vote;

    fn setup(depth: u32) -> (StateTree, Vec<KeyPair>) {
        let mut tree = StateTree::new(depth).unwrap();
        let keys: Vec<KeyPair> = (0..tree.capacity())
            .map(|i| keygen(&[i as u8 + 3; 32]))
            .collect();
        for (i, k) in keys.iter().enumerate() {
            tree.set_account(i as u64, Account::new(i as u64, k.public, 100))
                .unwrap();
        }
        (tree, keys)
    }

    #[test]
    fn aggregation_round_trip() {
        let (tree, keys) = setup(2);
        let mut params = CircuitParams::new(2, 50, 10);
        params.rotation = true;
        let hash = FieldElement::from_u64(123);
        let votes: Vec<Vote> = [3u64, 1, 2]
            .iter()
            .map(|&i| Vote::new(&keys[i as usize], i, 9, hash))
            .collect();
        let rot = RotationInput {
            seed: CurvePoint::generator(),
            secret: keys[0].secret.clone(),
        };
        let (p, w) =
            build_aggregation_witness(&params, &tree, 0, &votes, 9, hash, Some(&rot)).unwrap();
        let (p, w) = (PublicInputs::Aggregation(p), Witness::Aggregation(w));
        let text = encode_instance(&p, &w);
        assert_eq!(decode_instance(&text).unwrap(), (p, w));
    }

    #[test]
    fn slash_round_trip() {
        let (tree, keys) = setup(3);
        let params = CircuitParams::new(3, 50, 10);
        let vote = Vote::new(&keys[5], 5, 1, FieldElement::zero());
        let (p, w) = build_slash_witness(&params, &tree, 2, &vote, 1, FieldElement::one()).unwrap();
        let (p, w) = (PublicInputs::Slash(p), Witness::Slash(w));
        assert_eq!(decode_instance(&encode_instance(&p, &w)).unwrap(), (p, w));
    }

    #[test]
    fn malformed_records() {
        assert!(decode_instance("").is_err());
        assert!(matches!(
            decode_instance("circuit mint\npublic 1\nwitness 1\n"),
            Err(CircuitError::UnknownCircuit(_))
        ));
        assert!(decode_public(CircuitKind::Slash, "1 2 3 4 5").is_err());
        assert!(decode_public(CircuitKind::Slash, "1 2 3 4 5 6 7").is_err());
        assert!(decode_public(CircuitKind::Slash, "1 2 3 4 5 x").is_err());
        assert!(decode_witness(CircuitKind::Slash, "0").is_err());
        assert!(decode_witness(CircuitKind::Slash, "17").is_err());
        // Non-canonical field element.
        let p = crate::crypto::MODULUS_DECIMAL;
        assert!(decode_public(CircuitKind::Slash, &format!("{p} 0 0 0 0 1")).is_err());
    }
}
