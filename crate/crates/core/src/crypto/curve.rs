//! The twisted Edwards curve `a·x² + y² = 1 + d·x²·y²` with `a = 168700`,
//! `d = 168696` over the BN254 scalar field, and scalars modulo the order `l`
//! of its prime-order subgroup.
//!
//! `a` is a square and `d` a non-square in `F_p`, so the unified addition law
//! is complete: it needs no special cases for doubling or the identity.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use once_cell::sync::Lazy;

use super::{CryptoError, FieldElement};

pub const EDWARDS_A: u64 = 168700;
pub const EDWARDS_D: u64 = 168696;

const SUBGROUP_ORDER_DECIMAL: &str =
    "2736030358979909402780800718157159386076813972158567259200215660948447373041";
const GENERATOR_X: &str =
    "5299619240641551281634865583518297030282874472190772894086521144482721001553";
const GENERATOR_Y: &str =
    "16950150798460657717958625567821834550301663161624707787222815936182638968203";

/// Bit length of the subgroup order; every reduced scalar fits in this many bits.
pub const SCALAR_BITS: usize = 251;

static ORDER: Lazy<BigUint> = Lazy::new(|| SUBGROUP_ORDER_DECIMAL.parse().expect("order literal"));

static GENERATOR: Lazy<CurvePoint> = Lazy::new(|| {
    let g = CurvePoint {
        x: GENERATOR_X.parse().expect("generator x"),
        y: GENERATOR_Y.parse().expect("generator y"),
    };
    if let Err(e) = check_generator(&g) {
        panic!("curve parameters failed validation: {e}");
    }
    g
});

fn check_generator(g: &CurvePoint) -> Result<(), CryptoError> {
    if !g.is_on_curve() {
        return Err(CryptoError::InvalidPoint);
    }
    if !g.mul_biguint(&ORDER).is_identity() || g.double().is_identity() {
        return Err(CryptoError::InvalidPoint);
    }
    Ok(())
}

/// Validates the published generator and subgroup order.
pub fn self_check() -> Result<(), CryptoError> {
    check_generator(&CurvePoint {
        x: GENERATOR_X.parse()?,
        y: GENERATOR_Y.parse()?,
    })
}

static COEFF_A: Lazy<FieldElement> = Lazy::new(|| FieldElement::from_u64(EDWARDS_A));
static COEFF_D: Lazy<FieldElement> = Lazy::new(|| FieldElement::from_u64(EDWARDS_D));

fn coeff_a() -> FieldElement {
    *COEFF_A
}

fn coeff_d() -> FieldElement {
    *COEFF_D
}

/// An affine point. Constructors do not enforce the curve equation so that
/// untrusted encodings can be decoded and then rejected explicitly.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CurvePoint {
    pub x: FieldElement,
    pub y: FieldElement,
}

impl fmt::Debug for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl CurvePoint {
    pub const BYTES: usize = 64;

    pub fn identity() -> Self {
        CurvePoint {
            x: FieldElement::zero(),
            y: FieldElement::one(),
        }
    }

    /// The `(0, 0)` placeholder used for the public key of empty accounts.
    /// It is not a curve point.
    pub fn zero() -> Self {
        CurvePoint {
            x: FieldElement::zero(),
            y: FieldElement::zero(),
        }
    }

    /// Generator of the prime-order subgroup. Validated on first use.
    pub fn generator() -> Self {
        *GENERATOR
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn is_on_curve(&self) -> bool {
        let x2 = self.x.square();
        let y2 = self.y.square();
        coeff_a() * x2 + y2 == FieldElement::one() + coeff_d() * x2 * y2
    }

    pub fn is_in_prime_subgroup(&self) -> bool {
        self.is_on_curve() && self.mul_biguint(&ORDER).is_identity()
    }

    pub fn add(&self, other: &CurvePoint) -> CurvePoint {
        Projective::from(*self)
            .add(&Projective::from(*other))
            .to_affine()
    }

    pub fn double(&self) -> CurvePoint {
        Projective::from(*self).double().to_affine()
    }

    pub fn neg(&self) -> CurvePoint {
        CurvePoint {
            x: -self.x,
            y: self.y,
        }
    }

    pub fn mul(&self, k: &Scalar) -> CurvePoint {
        self.mul_biguint(&k.0)
    }

    /// Double-and-add over the bits of an arbitrary non-negative integer.
    pub fn mul_biguint(&self, k: &BigUint) -> CurvePoint {
        let base = Projective::from(*self);
        let mut acc = Projective::identity();
        for i in (0..k.bits()).rev() {
            acc = acc.double();
            if k.bit(i) {
                acc = acc.add(&base);
            }
        }
        acc.to_affine()
    }

    /// `a·self + b·other` with one shared doubling chain.
    pub fn mul_add(&self, a: &Scalar, other: &CurvePoint, b: &Scalar) -> CurvePoint {
        let p = Projective::from(*self);
        let q = Projective::from(*other);
        let pq = p.add(&q);
        let (a, b) = (&a.0, &b.0);
        let mut acc = Projective::identity();
        for i in (0..a.bits().max(b.bits())).rev() {
            acc = acc.double();
            match (a.bit(i), b.bit(i)) {
                (true, true) => acc = acc.add(&pq),
                (true, false) => acc = acc.add(&p),
                (false, true) => acc = acc.add(&q),
                (false, false) => {}
            }
        }
        acc.to_affine()
    }

    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&self.x.to_bytes());
        out[32..].copy_from_slice(&self.y.to_bytes());
        out
    }

    /// Decodes `x ‖ y`. Coordinates must be canonical; curve membership is
    /// left to the caller.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::BYTES {
            return Err(CryptoError::InvalidLength {
                expected: Self::BYTES,
                actual: bytes.len(),
            });
        }
        Ok(CurvePoint {
            x: FieldElement::from_bytes(&bytes[..32])?,
            y: FieldElement::from_bytes(&bytes[32..])?,
        })
    }
}

/// Projective `(X : Y : Z)` coordinates with `x = X/Z`, `y = Y/Z`.
#[derive(Clone, Copy)]
struct Projective {
    x: FieldElement,
    y: FieldElement,
    z: FieldElement,
}

impl Projective {
    fn identity() -> Self {
        Projective {
            x: FieldElement::zero(),
            y: FieldElement::one(),
            z: FieldElement::one(),
        }
    }

    // add-2008-bbjlp, complete for this curve.
    fn add(&self, o: &Projective) -> Projective {
        let a = self.z * o.z;
        let b = a.square();
        let c = self.x * o.x;
        let d = self.y * o.y;
        let e = coeff_d() * c * d;
        let f = b - e;
        let g = b + e;
        let x3 = a * f * ((self.x + self.y) * (o.x + o.y) - c - d);
        let y3 = a * g * (d - coeff_a() * c);
        let z3 = f * g;
        Projective {
            x: x3,
            y: y3,
            z: z3,
        }
    }

    // dbl-2008-bbjlp
    fn double(&self) -> Projective {
        let b = (self.x + self.y).square();
        let c = self.x.square();
        let d = self.y.square();
        let e = coeff_a() * c;
        let f = e + d;
        let h = self.z.square();
        let j = f - h - h;
        Projective {
            x: (b - c - d) * j,
            y: f * (e - d),
            z: f * j,
        }
    }

    fn to_affine(self) -> CurvePoint {
        let zinv = self
            .z
            .inverse()
            .expect("complete addition never yields Z = 0 for curve points");
        CurvePoint {
            x: self.x * zinv,
            y: self.y * zinv,
        }
    }
}

impl From<CurvePoint> for Projective {
    fn from(p: CurvePoint) -> Self {
        Projective {
            x: p.x,
            y: p.y,
            z: FieldElement::one(),
        }
    }
}

/// An integer modulo the subgroup order `l`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(BigUint);

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.0)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Scalar {
    pub const BYTES: usize = 32;

    /// The subgroup order `l`.
    pub fn order() -> &'static BigUint {
        &ORDER
    }

    pub fn zero() -> Self {
        Scalar(BigUint::zero())
    }

    pub fn one() -> Self {
        Scalar(BigUint::one())
    }

    /// Accepts only canonical values `< l`.
    pub fn new(v: BigUint) -> Result<Self, CryptoError> {
        if v >= *ORDER {
            return Err(CryptoError::NonCanonical);
        }
        Ok(Scalar(v))
    }

    pub fn reduce(v: &BigUint) -> Self {
        Scalar(v % &*ORDER)
    }

    /// Reduces a field element's integer value modulo `l`.
    pub fn from_field(x: &FieldElement) -> Self {
        Self::reduce(&x.to_biguint())
    }

    /// The scalar's integer value as a field element (`l < p`, so this is exact).
    pub fn to_field(&self) -> FieldElement {
        FieldElement::from_biguint(&self.0)
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn add(&self, o: &Scalar) -> Scalar {
        Scalar((&self.0 + &o.0) % &*ORDER)
    }

    pub fn mul(&self, o: &Scalar) -> Scalar {
        Scalar((&self.0 * &o.0) % &*ORDER)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let bytes = self.0.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - bytes.len()..].copy_from_slice(&bytes);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::BYTES {
            return Err(CryptoError::InvalidLength {
                expected: Self::BYTES,
                actual: bytes.len(),
            });
        }
        Self::new(BigUint::from_bytes_be(bytes))
    }
}
