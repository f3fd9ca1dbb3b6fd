//! MiMC-x^7 over the BN254 scalar field.
//!
//! The permutation runs 91 rounds of `x <- (x + c_i)^7` with `c_0 = 0` and
//! `c_i` (for `i >= 1`) taken from an iterated SHA-256 chain seeded with the
//! ASCII string `"zkoracle.mimc"`, each digest reduced mod `p`. Inputs are
//! absorbed with a Miyaguchi-Preneel chain:
//!
//! ```text
//! h_0 = 0
//! h_{j+1} = f(x_j + h_j) + x_j + h_j
//! ```

use once_cell::sync::Lazy;
use sha2::{Digest, Sha256};

use super::{CryptoError, FieldElement};

pub const MIMC_ROUNDS: usize = 91;
pub const MIMC_SEED: &str = "zkoracle.mimc";

static ROUND_CONSTANTS: Lazy<[FieldElement; MIMC_ROUNDS]> = Lazy::new(|| {
    let mut constants = [FieldElement::zero(); MIMC_ROUNDS];
    let mut digest: Vec<u8> = MIMC_SEED.as_bytes().to_vec();
    for c in constants.iter_mut().skip(1) {
        digest = Sha256::digest(&digest).to_vec();
        *c = FieldElement::from_be_bytes_mod_order(&digest);
    }
    constants
});

/// The round constants `c_0..c_90`.
pub fn round_constants() -> &'static [FieldElement; MIMC_ROUNDS] {
    &ROUND_CONSTANTS
}

/// The MiMC-x^7 permutation `f`.
pub fn mimc_permute(mut x: FieldElement) -> FieldElement {
    for c in ROUND_CONSTANTS.iter() {
        let t = x + *c;
        let t2 = t.square();
        let t4 = t2.square();
        x = t4 * t2 * t;
    }
    x
}

fn absorb(inputs: &[FieldElement]) -> FieldElement {
    inputs.iter().fold(FieldElement::zero(), |h, x| {
        let t = *x + h;
        mimc_permute(t) + t
    })
}

/// Hashes a non-empty sequence of field elements.
pub fn mimc_hash(inputs: &[FieldElement]) -> Result<FieldElement, CryptoError> {
    if inputs.is_empty() {
        return Err(CryptoError::InvalidInput(
            "mimc_hash needs at least one input",
        ));
    }
    Ok(absorb(inputs))
}

/// Fixed-arity variant of [`mimc_hash`] for call sites whose input count is
/// known at compile time.
pub fn mimc_hash_n<const N: usize>(inputs: [FieldElement; N]) -> FieldElement {
    const { assert!(N > 0) };
    absorb(&inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn fe(s: &str) -> FieldElement {
        s.parse().unwrap()
    }

    // Expected values below come from an independent Python implementation
    // (plain integers, hashlib.sha256, pow(x, 7, p)).

    #[test]
    fn constants_match_reference() {
        let c = round_constants();
        assert!(c[0].is_zero());
        assert_eq!(
            c[1],
            fe("1598318209728753332494864443618289204876087151560757588675097223429470956222")
        );
        assert_eq!(
            c[90],
            fe("16499009121126736161222952558329600769557808258794740199861610978090418770561")
        );
    }

    #[test]
    fn single_zero_input() {
        let expected =
            fe("20480970831563890370416455357282984018960104999813493870732780816150879805105");
        assert_eq!(mimc_permute(FieldElement::zero()), expected);
        assert_eq!(mimc_hash(&[FieldElement::zero()]).unwrap(), expected);
    }

    #[test]
    fn chaining_is_order_sensitive() {
        let one = FieldElement::one();
        let two = FieldElement::from_u64(2);
        let h12 = mimc_hash(&[one, two]).unwrap();
        let h21 = mimc_hash(&[two, one]).unwrap();
        assert_eq!(
            h12,
            fe("20168442345138702190327693105842912756410612765480439814575112342233983791894")
        );
        assert_eq!(
            h21,
            fe("15848057676043047675388883381942006964666783628275178665998570919100962510942")
        );
        assert_ne!(h12, h21);
    }

    #[test]
    fn reference_vectors() {
        let v = |xs: &[u64]| {
            mimc_hash(
                &xs.iter()
                    .map(|&x| FieldElement::from_u64(x))
                    .collect::<Vec<_>>(),
            )
            .unwrap()
        };
        assert_eq!(
            v(&[0, 0, 0, 0]),
            fe("17683159034002903499172969622391991084470788025616159899169873672834613880211")
        );
        assert_eq!(
            v(&[1, 2, 3]),
            fe("20049939579973610000844510840820301221924588219868394284182944828874197553942")
        );
        assert_eq!(
            mimc_hash(&[-FieldElement::one()]).unwrap(),
            fe("7099953791750757162371485625997767426669113403519294794635894020218855249650")
        );
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(mimc_hash(&[]), Err(CryptoError::InvalidInput(_))));
    }

    #[test]
    fn fixed_arity_agrees() {
        let xs = [FieldElement::from_u64(9), FieldElement::from_u64(11)];
        assert_eq!(mimc_hash_n(xs), mimc_hash(&xs).unwrap());
    }

    #[test]
    fn deterministic() {
        let x = FieldElement::from_u64(0xdead_beef);
        assert_eq!(mimc_hash(&[x]).unwrap(), mimc_hash(&[x]).unwrap());
    }

    #[test]
    fn no_collisions_on_random_singletons() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut seen = HashSet::new();
        for _ in 0..100_000 {
            let bytes: [u8; 32] = rng.gen();
            let x = FieldElement::from_be_bytes_mod_order(&bytes);
            seen.insert(mimc_hash(&[x]).unwrap());
        }
        assert_eq!(seen.len(), 100_000);
    }
}
