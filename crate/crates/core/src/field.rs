//! Arithmetic over the prime field F_p and its degree-t extension F_{p^t}.
//!
//! Elements are plain canonical values; every operation goes through the
//! [`FieldParams`] that governs them. Extension elements use the polynomial
//! basis {1, α, ..., α^(t-1)} where α is a root of the parameter set's
//! irreducible polynomial, so basis coordinates are exactly the stored
//! coefficients.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::poly::{self, BigPrime, PrimeRing, SmallPrime};
use crate::primes::is_probable_prime;

/// An element of F_p, always reduced.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FpElem(BigUint);

impl FpElem {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }
}

impl fmt::Debug for FpElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FpElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An element of F_{p^t}: t coordinates over the polynomial basis, constant
/// term first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExtElem {
    coeffs: Vec<FpElem>,
}

impl ExtElem {
    pub fn coeffs(&self) -> &[FpElem] {
        &self.coeffs
    }

    /// Coordinates in the polynomial basis. For this basis decomposition is
    /// the identity on coefficients.
    pub fn coordinates(&self) -> &[FpElem] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(FpElem::is_zero)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }
}

impl fmt::Debug for ExtElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs.iter()).finish()
    }
}

impl fmt::Display for ExtElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Prime modulus, extension degree and the monic irreducible polynomial
/// defining F_{p^t}.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldParams {
    p: BigUint,
    t: usize,
    irreducible: Vec<FpElem>,
    width: usize,
}

impl fmt::Debug for FieldParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldParams")
            .field("p", &self.p)
            .field("t", &self.t)
            .field("irreducible", &self.irreducible)
            .finish()
    }
}

fn check_odd_prime(p: &BigUint) -> Result<()> {
    if *p == BigUint::from(2u32) {
        return Err(Error::UnsupportedParams(
            "p = 2 is not supported; an odd prime is required".into(),
        ));
    }
    if !is_probable_prime(p) {
        return Err(Error::InvalidParams(format!("{p} is not prime")));
    }
    Ok(())
}

/// The lexicographically smallest monic irreducible polynomial of degree `t`
/// over F_p, constant term first. Degree one yields `x`.
pub fn find_irreducible(p: &BigUint, t: usize) -> Result<Vec<BigUint>> {
    check_odd_prime(p)?;
    if t == 0 {
        return Err(Error::InvalidParams("extension degree must be at least 1".into()));
    }
    Ok(match p.to_u64() {
        Some(small) => poly::smallest_irreducible(&SmallPrime(small), t),
        None => poly::smallest_irreducible(&BigPrime(p.clone()), t),
    })
}

/// Irreducibility of a monic polynomial (constant term first) over F_p.
pub fn is_irreducible(p: &BigUint, poly_coeffs: &[BigUint]) -> bool {
    match p.to_u64() {
        Some(small) => {
            let ring = SmallPrime(small);
            let f: Vec<u64> = poly_coeffs.iter().map(|c| ring.from_big(c)).collect();
            poly::is_irreducible(&ring, &f)
        }
        None => {
            let ring = BigPrime(p.clone());
            let f: Vec<BigUint> = poly_coeffs.iter().map(|c| ring.from_big(c)).collect();
            poly::is_irreducible(&ring, &f)
        }
    }
}

impl FieldParams {
    /// Validates and builds a parameter set.
    pub fn new(p: BigUint, t: usize, irreducible: Vec<BigUint>) -> Result<Self> {
        check_odd_prime(&p)?;
        if t == 0 {
            return Err(Error::InvalidParams("extension degree must be at least 1".into()));
        }
        if irreducible.len() != t + 1 {
            return Err(Error::InvalidParams(format!(
                "irreducible polynomial needs {} coefficients, got {}",
                t + 1,
                irreducible.len()
            )));
        }
        if irreducible.iter().any(|c| *c >= p) {
            return Err(Error::InvalidParams("polynomial coefficient not below p".into()));
        }
        if !irreducible[t].is_one() {
            return Err(Error::InvalidParams("polynomial is not monic".into()));
        }
        if t == 1 && !(irreducible[0].is_zero()) {
            return Err(Error::InvalidParams("degree-one fields use the polynomial x".into()));
        }
        if t <= 3 && t > 1 && has_root(&p, &irreducible) {
            return Err(Error::InvalidParams("polynomial has a root in F_p".into()));
        }
        if !is_irreducible(&p, &irreducible) {
            return Err(Error::InvalidParams("polynomial is reducible".into()));
        }
        let width = byte_width(&p);
        Ok(FieldParams {
            p,
            t,
            irreducible: irreducible.into_iter().map(FpElem).collect(),
            width,
        })
    }

    /// Parameters with the deterministic default polynomial from
    /// [`find_irreducible`].
    pub fn generate(p: BigUint, t: usize) -> Result<Self> {
        let irr = find_irreducible(&p, t)?;
        Self::new(p, t, irr)
    }

    /// F_p viewed as a degree-one extension.
    pub fn prime(p: impl Into<BigUint>) -> Result<Self> {
        Self::generate(p.into(), 1)
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    /// Extension degree t.
    pub fn degree(&self) -> usize {
        self.t
    }

    pub fn irreducible(&self) -> &[FpElem] {
        &self.irreducible
    }

    /// Fixed byte width of one encoded F_p element.
    pub fn byte_width(&self) -> usize {
        self.width
    }

    pub fn p_bits(&self) -> u64 {
        self.p.bits()
    }

    // ---- F_p ----

    pub fn fp(&self, v: impl Into<BigUint>) -> FpElem {
        FpElem(v.into() % &self.p)
    }

    /// Accepts only canonical representatives.
    pub fn fp_canonical(&self, v: BigUint) -> Result<FpElem> {
        if v >= self.p {
            return Err(Error::ParamsMismatch(format!("{v} is not reduced modulo {}", self.p)));
        }
        Ok(FpElem(v))
    }

    pub fn fp_zero(&self) -> FpElem {
        FpElem(BigUint::zero())
    }

    pub fn fp_one(&self) -> FpElem {
        FpElem(BigUint::one())
    }

    pub fn fp_add(&self, a: &FpElem, b: &FpElem) -> FpElem {
        let s = &a.0 + &b.0;
        FpElem(if s >= self.p { s - &self.p } else { s })
    }

    pub fn fp_sub(&self, a: &FpElem, b: &FpElem) -> FpElem {
        FpElem(if a.0 >= b.0 { &a.0 - &b.0 } else { &self.p - &b.0 + &a.0 })
    }

    pub fn fp_neg(&self, a: &FpElem) -> FpElem {
        if a.0.is_zero() {
            a.clone()
        } else {
            FpElem(&self.p - &a.0)
        }
    }

    pub fn fp_mul(&self, a: &FpElem, b: &FpElem) -> FpElem {
        FpElem((&a.0 * &b.0) % &self.p)
    }

    pub fn fp_inv(&self, a: &FpElem) -> Result<FpElem> {
        if a.0.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(FpElem(a.0.modpow(&(&self.p - 2u32), &self.p)))
    }

    pub fn fp_div(&self, a: &FpElem, b: &FpElem) -> Result<FpElem> {
        Ok(self.fp_mul(a, &self.fp_inv(b)?))
    }

    pub fn fp_arith(&self, a: &FpElem, b: &FpElem, op: ArithOp) -> Result<FpElem> {
        self.check_fp(a)?;
        self.check_fp(b)?;
        match op {
            ArithOp::Add => Ok(self.fp_add(a, b)),
            ArithOp::Sub => Ok(self.fp_sub(a, b)),
            ArithOp::Mul => Ok(self.fp_mul(a, b)),
            ArithOp::Div => self.fp_div(a, b),
        }
    }

    pub fn random_fp<R: RngCore + ?Sized>(&self, rng: &mut R) -> FpElem {
        FpElem(rng.gen_biguint_below(&self.p))
    }

    /// Uniform on F_p \ {0}.
    pub fn random_nonzero_fp<R: RngCore + ?Sized>(&self, rng: &mut R) -> FpElem {
        FpElem(rng.gen_biguint_range(&BigUint::one(), &self.p))
    }

    fn check_fp(&self, a: &FpElem) -> Result<()> {
        if a.0 >= self.p {
            return Err(Error::ParamsMismatch(format!("{} is not reduced modulo {}", a.0, self.p)));
        }
        Ok(())
    }

    // ---- F_{p^t} ----

    pub fn ext_zero(&self) -> ExtElem {
        ExtElem { coeffs: vec![self.fp_zero(); self.t] }
    }

    pub fn ext_one(&self) -> ExtElem {
        self.embed(&self.fp_one())
    }

    /// The base-field element c as c·1 in F_{p^t}.
    pub fn embed(&self, c: &FpElem) -> ExtElem {
        let mut coeffs = vec![self.fp_zero(); self.t];
        coeffs[0] = c.clone();
        ExtElem { coeffs }
    }

    /// Builds an extension element from its basis coordinates.
    pub fn ext(&self, coeffs: Vec<FpElem>) -> Result<ExtElem> {
        let e = ExtElem { coeffs };
        self.check_ext(&e)?;
        Ok(e)
    }

    /// Convenience constructor reducing each coordinate mod p.
    pub fn ext_from_u64s(&self, coeffs: &[u64]) -> Result<ExtElem> {
        self.ext(coeffs.iter().map(|&c| self.fp(c)).collect())
    }

    pub fn check_ext(&self, a: &ExtElem) -> Result<()> {
        if a.coeffs.len() != self.t {
            return Err(Error::ParamsMismatch(format!(
                "extension element has {} coordinates, field degree is {}",
                a.coeffs.len(),
                self.t
            )));
        }
        a.coeffs.iter().try_for_each(|c| self.check_fp(c))
    }

    pub fn random_ext<R: RngCore + ?Sized>(&self, rng: &mut R) -> ExtElem {
        ExtElem { coeffs: (0..self.t).map(|_| self.random_fp(rng)).collect() }
    }

    pub fn ext_arith(&self, a: &ExtElem, b: &ExtElem, op: ArithOp) -> Result<ExtElem> {
        self.check_ext(a)?;
        self.check_ext(b)?;
        match op {
            ArithOp::Add => Ok(self.ext_add(a, b)),
            ArithOp::Sub => Ok(self.ext_sub(a, b)),
            ArithOp::Mul => Ok(self.ext_mul(a, b)),
            ArithOp::Div => {
                let inv = self.ext_inv(b)?;
                Ok(self.ext_mul(a, &inv))
            }
        }
    }

    // The unchecked forms below assume both operands belong to this field.

    pub(crate) fn ext_add(&self, a: &ExtElem, b: &ExtElem) -> ExtElem {
        ExtElem {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| self.fp_add(x, y)).collect(),
        }
    }

    pub(crate) fn ext_sub(&self, a: &ExtElem, b: &ExtElem) -> ExtElem {
        ExtElem {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| self.fp_sub(x, y)).collect(),
        }
    }

    pub(crate) fn ext_mul(&self, a: &ExtElem, b: &ExtElem) -> ExtElem {
        let ring = BigPrime(self.p.clone());
        let modulus = self.modulus_poly();
        let prod = poly::mulmod(&ring, &self.to_poly(a), &self.to_poly(b), &modulus);
        self.from_poly(prod)
    }

    pub fn ext_inv(&self, a: &ExtElem) -> Result<ExtElem> {
        self.check_ext(a)?;
        let ring = BigPrime(self.p.clone());
        poly::invmod(&ring, &self.to_poly(a), &self.modulus_poly())
            .map(|inv| self.from_poly(inv))
            .ok_or(Error::DivisionByZero)
    }

    /// c·a for c in F_p, coordinate-wise.
    pub fn scale_ext(&self, c: &FpElem, a: &ExtElem) -> Result<ExtElem> {
        self.check_fp(c)?;
        self.check_ext(a)?;
        Ok(self.scale(c, a))
    }

    pub(crate) fn scale(&self, c: &FpElem, a: &ExtElem) -> ExtElem {
        ExtElem { coeffs: a.coeffs.iter().map(|x| self.fp_mul(c, x)).collect() }
    }

    /// Σ_j q_j · x_j for a base-field query vector against the database.
    pub fn dot(&self, q: &[FpElem], db: &Database) -> Result<ExtElem> {
        if **db.params() != *self {
            return Err(Error::ParamsMismatch("database belongs to another field".into()));
        }
        if q.len() != db.len() {
            return Err(Error::LengthMismatch { expected: db.len(), got: q.len() });
        }
        q.iter().try_for_each(|c| self.check_fp(c))?;
        // Accumulate unreduced per coordinate, reduce once.
        let mut acc = vec![BigUint::zero(); self.t];
        for (qj, xj) in q.iter().zip(db.records()) {
            if qj.is_zero() {
                continue;
            }
            for (slot, coord) in acc.iter_mut().zip(&xj.coeffs) {
                *slot += &qj.0 * &coord.0;
            }
        }
        Ok(ExtElem { coeffs: acc.into_iter().map(|v| FpElem(v % &self.p)).collect() })
    }

    fn to_poly(&self, a: &ExtElem) -> Vec<BigUint> {
        poly::trim(&BigPrime(self.p.clone()), a.coeffs.iter().map(|c| c.0.clone()).collect())
    }

    fn from_poly(&self, mut v: Vec<BigUint>) -> ExtElem {
        v.resize(self.t, BigUint::zero());
        ExtElem { coeffs: v.into_iter().map(FpElem).collect() }
    }

    fn modulus_poly(&self) -> Vec<BigUint> {
        self.irreducible.iter().map(|c| c.0.clone()).collect()
    }

    // ---- canonical byte encoding ----

    pub fn encode_fp(&self, a: &FpElem, out: &mut Vec<u8>) {
        encode_fixed(&a.0, self.width, out);
    }

    pub fn decode_fp(&self, bytes: &[u8]) -> Result<FpElem> {
        if bytes.len() != self.width {
            return Err(Error::Decode(format!(
                "field element needs {} bytes, got {}",
                self.width,
                bytes.len()
            )));
        }
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.p {
            return Err(Error::Decode("field element not reduced".into()));
        }
        Ok(FpElem(v))
    }

    pub fn encode_ext(&self, a: &ExtElem, out: &mut Vec<u8>) {
        for c in &a.coeffs {
            self.encode_fp(c, out);
        }
    }

    pub fn ext_byte_len(&self) -> usize {
        self.width * self.t
    }

    pub fn decode_ext(&self, bytes: &[u8]) -> Result<ExtElem> {
        if bytes.len() != self.ext_byte_len() {
            return Err(Error::Decode(format!(
                "extension element needs {} bytes, got {}",
                self.ext_byte_len(),
                bytes.len()
            )));
        }
        let coeffs = bytes
            .chunks(self.width)
            .map(|chunk| self.decode_fp(chunk))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExtElem { coeffs })
    }

    /// `width:u16 | p | t:u16 | irreducible[0..=t]`, integers fixed-width
    /// big-endian.
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.width as u16).to_be_bytes());
        encode_fixed(&self.p, self.width, out);
        out.extend_from_slice(&(self.t as u16).to_be_bytes());
        for c in &self.irreducible {
            self.encode_fp(c, out);
        }
    }

    /// Parses an encoded parameter set, returning it and the bytes consumed.
    pub fn decode(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut cur = crate::codec::Cursor::new(bytes);
        let width = cur.u16()? as usize;
        if width == 0 {
            return Err(Error::Decode("zero field width".into()));
        }
        let p = BigUint::from_bytes_be(cur.take(width)?);
        let t = cur.u16()? as usize;
        let irr = (0..=t)
            .map(|_| cur.take(width).map(BigUint::from_bytes_be))
            .collect::<Result<Vec<_>>>()?;
        let params = FieldParams::new(p, t, irr).map_err(|e| Error::Decode(e.to_string()))?;
        if params.width != width {
            return Err(Error::Decode("field width does not match p".into()));
        }
        Ok((params, cur.position()))
    }
}

fn has_root(p: &BigUint, f: &[BigUint]) -> bool {
    let eval = |x: &BigUint| {
        f.iter().rev().fold(BigUint::zero(), |acc, c| (acc * x + c) % p)
    };
    match p.to_u64() {
        // Exhaustive search is cheap only for small p; larger p rely on the
        // gcd test alone.
        Some(small) if small <= 1 << 16 => (0..small).any(|x| eval(&BigUint::from(x)).is_zero()),
        _ => {
            let ring = BigPrime(p.clone());
            let x = vec![BigUint::zero(), BigUint::one()];
            let frob = poly::powmod(&ring, &x, p, f);
            poly::gcd(&ring, &poly::sub(&ring, &frob, &x), f).len() > 1
        }
    }
}

/// Number of bytes needed to hold any value below `modulus`.
pub fn byte_width(modulus: &BigUint) -> usize {
    (modulus.bits() as usize).div_ceil(8).max(1)
}

pub(crate) fn encode_fixed(v: &BigUint, width: usize, out: &mut Vec<u8>) {
    let bytes = v.to_bytes_be();
    let bytes: &[u8] = if v.is_zero() { &[] } else { &bytes };
    debug_assert!(bytes.len() <= width);
    out.extend(std::iter::repeat(0u8).take(width - bytes.len()));
    out.extend_from_slice(bytes);
}

/// The replicated data vector x = (x_1, ..., x_m).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    params: Arc<FieldParams>,
    records: Vec<ExtElem>,
}

impl Database {
    pub fn new(params: Arc<FieldParams>, records: Vec<ExtElem>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParams("database needs at least one record".into()));
        }
        records.iter().try_for_each(|r| params.check_ext(r))?;
        Ok(Database { params, records })
    }

    pub fn random<R: RngCore + ?Sized>(params: Arc<FieldParams>, m: usize, rng: &mut R) -> Result<Self> {
        let records = (0..m).map(|_| params.random_ext(rng)).collect();
        Self::new(params, records)
    }

    pub fn params(&self) -> &Arc<FieldParams> {
        &self.params
    }

    pub fn records(&self) -> &[ExtElem] {
        &self.records
    }

    /// Number of records m.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record x_i for a 1-based index.
    pub fn get(&self, i: usize) -> Result<&ExtElem> {
        if i == 0 || i > self.records.len() {
            return Err(Error::IndexOutOfRange { index: i, m: self.records.len() });
        }
        Ok(&self.records[i - 1])
    }
}
