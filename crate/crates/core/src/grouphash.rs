//! The order-p subgroup of Z_r^* and the homomorphic hash built on it.
//!
//! `h(y) = Π_l g_l^{y_l} mod r` over the basis coordinates of `y ∈ F_{p^t}`
//! satisfies `h(α·y1 + β·y2) = h(y1)^α · h(y2)^β`, which is what lets a
//! client check a hashed redundant answer against the reconstructed value.

use log::warn;
use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::RngCore;

use crate::codec::Cursor;
use crate::error::{Error, Result};
use crate::field::{byte_width, encode_fixed, ExtElem, FieldParams, FpElem};
use crate::primes::is_probable_prime;

/// Cap on the number of candidates tried by the parameter searches.
pub const SEARCH_CAP: u64 = 1_000_000;

/// A cyclic group of prime order p with exponents in F_p.
pub trait PrimeOrderGroup {
    type Elem: Clone + PartialEq;

    fn order(&self) -> &BigUint;
    fn generator(&self) -> &Self::Elem;
    fn identity(&self) -> Self::Elem;
    fn exp(&self, base: &Self::Elem, e: &FpElem) -> Self::Elem;
    fn op(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn contains(&self, a: &Self::Elem) -> bool;
}

/// Schnorr group parameters: prime `r` with `p | r - 1` and a generator `g`
/// of the order-p subgroup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupParams {
    r: BigUint,
    p: BigUint,
    g: BigUint,
}

impl GroupParams {
    pub fn new(r: BigUint, p: BigUint, g: BigUint) -> Result<Self> {
        if !is_probable_prime(&r) || !is_probable_prime(&p) {
            return Err(Error::InvalidParams("group moduli must be prime".into()));
        }
        if !((&r - 1u32) % &p).is_zero() {
            return Err(Error::InvalidParams("p does not divide r - 1".into()));
        }
        let params = GroupParams { r, p, g };
        if params.g <= BigUint::one() || params.g >= params.r || !params.in_subgroup(&params.g) {
            return Err(Error::InvalidParams("g does not generate the order-p subgroup".into()));
        }
        Ok(params)
    }

    pub fn r(&self) -> &BigUint {
        &self.r
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    /// Fixed byte width of group elements.
    pub fn byte_width(&self) -> usize {
        byte_width(&self.r)
    }

    pub fn r_bits(&self) -> u64 {
        self.r.bits()
    }

    pub fn in_subgroup(&self, a: &BigUint) -> bool {
        !a.is_zero() && *a < self.r && a.modpow(&self.p, &self.r).is_one()
    }

    /// Square-and-multiply `base^e mod r` with the canonical exponent.
    pub fn gexp(&self, base: &BigUint, e: &FpElem) -> BigUint {
        base.modpow(e.value(), &self.r)
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.r
    }

    /// Maps a candidate h into the subgroup as h^((r-1)/p).
    fn project(&self, h: &BigUint) -> BigUint {
        h.modpow(&((&self.r - 1u32) / &self.p), &self.r)
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        let w = self.byte_width();
        out.extend_from_slice(&(w as u16).to_be_bytes());
        for v in [&self.r, &self.p, &self.g] {
            encode_fixed(v, w, out);
        }
    }

    pub fn decode_from(cur: &mut Cursor<'_>) -> Result<Self> {
        let w = cur.u16()? as usize;
        let r = cur.uint(w)?;
        let p = cur.uint(w)?;
        let g = cur.uint(w)?;
        let params = GroupParams::new(r, p, g).map_err(|e| Error::Decode(e.to_string()))?;
        if params.byte_width() != w {
            return Err(Error::Decode("group width does not match r".into()));
        }
        Ok(params)
    }
}

impl PrimeOrderGroup for GroupParams {
    type Elem = BigUint;

    fn order(&self) -> &BigUint {
        &self.p
    }
    fn generator(&self) -> &BigUint {
        &self.g
    }
    fn identity(&self) -> BigUint {
        BigUint::one()
    }
    fn exp(&self, base: &BigUint, e: &FpElem) -> BigUint {
        self.gexp(base, e)
    }
    fn op(&self, a: &BigUint, b: &BigUint) -> BigUint {
        self.mul(a, b)
    }
    fn contains(&self, a: &BigUint) -> bool {
        self.in_subgroup(a)
    }
}

fn warn_if_small(p: &BigUint) {
    if p.bits() <= 128 {
        warn!(
            "subgroup order p has {} bits; discrete-log security needs p >= 2^128, use these parameters for testing only",
            p.bits()
        );
    }
}

fn smallest_r(p: &BigUint) -> Result<BigUint> {
    if *p == BigUint::from(2u32) || !is_probable_prime(p) {
        return Err(Error::UnsupportedParams("subgroup order must be an odd prime".into()));
    }
    for k in 2..SEARCH_CAP + 2 {
        let r = p * k + 1u32;
        if is_probable_prime(&r) {
            return Ok(r);
        }
    }
    Err(Error::ParamSearchExhausted(SEARCH_CAP))
}

/// Deterministic group for subgroup order `p`: the smallest prime
/// `r = k·p + 1` with `k >= 2`, and `g = h^((r-1)/p)` for the first
/// `h = 2, 3, ...` giving `g != 1`.
pub fn setup_group(p: &BigUint) -> Result<GroupParams> {
    warn_if_small(p);
    let r = smallest_r(p)?;
    let mut params = GroupParams { r, p: p.clone(), g: BigUint::one() };
    let mut h = BigUint::from(2u32);
    for _ in 0..SEARCH_CAP {
        let g = params.project(&h);
        if !g.is_one() {
            params.g = g;
            return Ok(params);
        }
        h += 1u32;
    }
    Err(Error::ParamSearchExhausted(SEARCH_CAP))
}

/// As [`setup_group`] but with the generator drawn from a random base.
pub fn setup_group_random<R: RngCore + ?Sized>(p: &BigUint, rng: &mut R) -> Result<GroupParams> {
    warn_if_small(p);
    let r = smallest_r(p)?;
    let mut params = GroupParams { r, p: p.clone(), g: BigUint::one() };
    params.g = random_subgroup_elem(&params, rng)?;
    Ok(params)
}

fn random_subgroup_elem<R: RngCore + ?Sized>(group: &GroupParams, rng: &mut R) -> Result<BigUint> {
    let two = BigUint::from(2u32);
    for _ in 0..SEARCH_CAP {
        let h = rng.gen_biguint_range(&two, &group.r);
        let g = group.project(&h);
        if !g.is_one() {
            return Ok(g);
        }
    }
    Err(Error::ParamSearchExhausted(SEARCH_CAP))
}

/// A homomorphic hash output, an element of the order-p subgroup.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Digest(BigUint);

impl Digest {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Wraps a raw value after checking subgroup membership.
    pub fn from_value(group: &GroupParams, v: BigUint) -> Result<Self> {
        if !group.in_subgroup(&v) {
            return Err(Error::InvalidParams("digest is not in the order-p subgroup".into()));
        }
        Ok(Digest(v))
    }

    /// Any residue mod r, membership unchecked. Adversaries may send these.
    pub fn raw(v: BigUint) -> Self {
        Digest(v)
    }
}

/// Group plus the t hash generators `g_1, ..., g_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashParams {
    group: GroupParams,
    generators: Vec<BigUint>,
}

impl HashParams {
    pub fn new(group: GroupParams, generators: Vec<BigUint>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidParams("at least one hash generator is required".into()));
        }
        if generators.iter().any(|g| g.is_one() || !group.in_subgroup(g)) {
            return Err(Error::InvalidParams("hash generator not of order p".into()));
        }
        Ok(HashParams { group, generators })
    }

    pub fn group(&self) -> &GroupParams {
        &self.group
    }

    pub fn generators(&self) -> &[BigUint] {
        &self.generators
    }

    /// `Π_l g_l^{y_l} mod r`.
    pub fn hhash(&self, field: &FieldParams, y: &ExtElem) -> Result<Digest> {
        self.check_field(field)?;
        field.check_ext(y)?;
        Ok(self.hash_unchecked(y))
    }

    pub(crate) fn hash_unchecked(&self, y: &ExtElem) -> Digest {
        let r = &self.group.r;
        let acc = self
            .generators
            .iter()
            .zip(y.coordinates())
            .filter(|(_, c)| !c.is_zero())
            .fold(BigUint::one(), |acc, (g, c)| (acc * g.modpow(c.value(), r)) % r);
        Digest(acc)
    }

    /// `d^c mod r`; `hscale(hhash(y), c) = hhash(c·y)`.
    pub fn hscale(&self, d: &Digest, c: &FpElem) -> Digest {
        Digest(self.group.gexp(&d.0, c))
    }

    pub fn combine(&self, a: &Digest, b: &Digest) -> Digest {
        Digest(self.group.mul(&a.0, &b.0))
    }

    pub fn check_field(&self, field: &FieldParams) -> Result<()> {
        if self.group.p != *field.p() || self.generators.len() != field.degree() {
            return Err(Error::ParamsMismatch("hash parameters do not match the field".into()));
        }
        Ok(())
    }

    pub fn encode_digest(&self, d: &Digest, out: &mut Vec<u8>) {
        encode_fixed(&d.0, self.group.byte_width(), out);
    }

    pub fn decode_digest(&self, bytes: &[u8]) -> Result<Digest> {
        if bytes.len() != self.group.byte_width() {
            return Err(Error::Decode("digest width mismatch".into()));
        }
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.group.r {
            return Err(Error::Decode("digest not reduced modulo r".into()));
        }
        Ok(Digest(v))
    }

    /// Group encoding, then `t:u16` and the generators at group width.
    pub fn encode(&self, out: &mut Vec<u8>) {
        self.group.encode(out);
        out.extend_from_slice(&(self.generators.len() as u16).to_be_bytes());
        for g in &self.generators {
            encode_fixed(g, self.group.byte_width(), out);
        }
    }

    pub fn decode_from(cur: &mut Cursor<'_>) -> Result<Self> {
        let group = GroupParams::decode_from(cur)?;
        let t = cur.u16()? as usize;
        let w = group.byte_width();
        let gens = (0..t).map(|_| cur.uint(w)).collect::<Result<Vec<_>>>()?;
        HashParams::new(group, gens).map_err(|e| Error::Decode(e.to_string()))
    }
}

/// Draws t independent order-p elements for the hash.
pub fn hash_setup<R: RngCore + ?Sized>(
    field: &FieldParams,
    group: &GroupParams,
    rng: &mut R,
) -> Result<HashParams> {
    if group.p != *field.p() {
        return Err(Error::ParamsMismatch("group order differs from field characteristic".into()));
    }
    let generators = (0..field.degree())
        .map(|_| random_subgroup_elem(group, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(HashParams { group: group.clone(), generators })
}
