//! Dense univariate polynomials over a prime field.
//!
//! Coefficients are stored constant term first with no trailing zeros (the
//! zero polynomial is the empty vector). Arithmetic is generic over a
//! [`PrimeRing`] so the irreducible-polynomial search can run on a `u64`
//! backend when the modulus allows it; results are identical either way.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt::Debug;

pub(crate) trait PrimeRing {
    type E: Clone + PartialEq + Debug;

    fn zero(&self) -> Self::E;
    fn one(&self) -> Self::E;
    fn is_zero(&self, a: &Self::E) -> bool;
    fn add(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn sub(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn mul(&self, a: &Self::E, b: &Self::E) -> Self::E;
    /// Inverse of a nonzero element.
    fn inv(&self, a: &Self::E) -> Self::E;
    fn from_big(&self, v: &BigUint) -> Self::E;
    fn to_big(&self, a: &Self::E) -> BigUint;
    fn modulus(&self) -> BigUint;
}

/// Word-sized modulus, p < 2^64.
pub(crate) struct SmallPrime(pub u64);

impl PrimeRing for SmallPrime {
    type E = u64;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        ((*a as u128 + *b as u128) % self.0 as u128) as u64
    }
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        if a >= b {
            a - b
        } else {
            ((*a as u128 + self.0 as u128) - *b as u128) as u64
        }
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        ((*a as u128 * *b as u128) % self.0 as u128) as u64
    }
    fn inv(&self, a: &u64) -> u64 {
        // Fermat: a^(p-2).
        let mut base = *a;
        let mut e = self.0 - 2;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }
    fn from_big(&self, v: &BigUint) -> u64 {
        (v % self.0).to_u64().expect("reduced below a u64 modulus")
    }
    fn to_big(&self, a: &u64) -> BigUint {
        BigUint::from(*a)
    }
    fn modulus(&self) -> BigUint {
        BigUint::from(self.0)
    }
}

/// Arbitrary-precision modulus.
pub(crate) struct BigPrime(pub BigUint);

impl PrimeRing for BigPrime {
    type E = BigUint;

    fn zero(&self) -> BigUint {
        BigUint::zero()
    }
    fn one(&self) -> BigUint {
        BigUint::one()
    }
    fn is_zero(&self, a: &BigUint) -> bool {
        a.is_zero()
    }
    fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if s >= self.0 {
            s - &self.0
        } else {
            s
        }
    }
    fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            &self.0 - b + a
        }
    }
    fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.0
    }
    fn inv(&self, a: &BigUint) -> BigUint {
        a.modpow(&(&self.0 - 2u32), &self.0)
    }
    fn from_big(&self, v: &BigUint) -> BigUint {
        v % &self.0
    }
    fn to_big(&self, a: &BigUint) -> BigUint {
        a.clone()
    }
    fn modulus(&self) -> BigUint {
        self.0.clone()
    }
}

pub(crate) fn trim<R: PrimeRing>(ring: &R, mut a: Vec<R::E>) -> Vec<R::E> {
    while let Some(last) = a.last() {
        if ring.is_zero(last) {
            a.pop();
        } else {
            break;
        }
    }
    a
}

pub(crate) fn sub<R: PrimeRing>(ring: &R, a: &[R::E], b: &[R::E]) -> Vec<R::E> {
    let n = a.len().max(b.len());
    let zero = ring.zero();
    let out = (0..n)
        .map(|k| ring.sub(a.get(k).unwrap_or(&zero), b.get(k).unwrap_or(&zero)))
        .collect();
    trim(ring, out)
}

pub(crate) fn mul<R: PrimeRing>(ring: &R, a: &[R::E], b: &[R::E]) -> Vec<R::E> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ring.zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ring.is_zero(ai) {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            let prod = ring.mul(ai, bj);
            out[i + j] = ring.add(&out[i + j], &prod);
        }
    }
    trim(ring, out)
}

/// Quotient and remainder of `a` by nonzero `b`.
pub(crate) fn divrem<R: PrimeRing>(
    ring: &R,
    a: &[R::E],
    b: &[R::E],
) -> (Vec<R::E>, Vec<R::E>) {
    assert!(!b.is_empty(), "polynomial division by zero");
    let mut rem = trim(ring, a.to_vec());
    if rem.len() < b.len() {
        return (Vec::new(), rem);
    }
    let lead_inv = ring.inv(b.last().expect("nonempty"));
    let mut quot = vec![ring.zero(); rem.len() - b.len() + 1];
    while rem.len() >= b.len() {
        let shift = rem.len() - b.len();
        let coef = ring.mul(rem.last().expect("nonempty"), &lead_inv);
        for (k, bk) in b.iter().enumerate() {
            let prod = ring.mul(&coef, bk);
            rem[shift + k] = ring.sub(&rem[shift + k], &prod);
        }
        quot[shift] = coef;
        rem = trim(ring, rem);
    }
    (trim(ring, quot), rem)
}

pub(crate) fn rem<R: PrimeRing>(ring: &R, a: &[R::E], b: &[R::E]) -> Vec<R::E> {
    divrem(ring, a, b).1
}

pub(crate) fn mulmod<R: PrimeRing>(
    ring: &R,
    a: &[R::E],
    b: &[R::E],
    modulus: &[R::E],
) -> Vec<R::E> {
    rem(ring, &mul(ring, a, b), modulus)
}

/// `base^exp mod modulus` by square-and-multiply.
pub(crate) fn powmod<R: PrimeRing>(
    ring: &R,
    base: &[R::E],
    exp: &BigUint,
    modulus: &[R::E],
) -> Vec<R::E> {
    let mut acc = rem(ring, &[ring.one()], modulus);
    let base = rem(ring, base, modulus);
    for bit in (0..exp.bits()).rev() {
        acc = mulmod(ring, &acc, &acc, modulus);
        if exp.bit(bit) {
            acc = mulmod(ring, &acc, &base, modulus);
        }
    }
    acc
}

/// Monic greatest common divisor.
pub(crate) fn gcd<R: PrimeRing>(ring: &R, a: &[R::E], b: &[R::E]) -> Vec<R::E> {
    let mut x = trim(ring, a.to_vec());
    let mut y = trim(ring, b.to_vec());
    while !y.is_empty() {
        let r = rem(ring, &x, &y);
        x = y;
        y = r;
    }
    monic(ring, x)
}

pub(crate) fn monic<R: PrimeRing>(ring: &R, a: Vec<R::E>) -> Vec<R::E> {
    match a.last() {
        None => a,
        Some(lead) => {
            let inv = ring.inv(lead);
            a.iter().map(|c| ring.mul(c, &inv)).collect()
        }
    }
}

/// Inverse of `a` modulo an irreducible `modulus`, via extended Euclid.
/// Returns `None` when `a` is zero modulo `modulus`.
pub(crate) fn invmod<R: PrimeRing>(ring: &R, a: &[R::E], modulus: &[R::E]) -> Option<Vec<R::E>> {
    let a = rem(ring, a, modulus);
    if a.is_empty() {
        return None;
    }
    // Invariant: old_s * a == old_r (mod modulus).
    let (mut old_r, mut r) = (modulus.to_vec(), a);
    let (mut old_s, mut s): (Vec<R::E>, Vec<R::E>) = (Vec::new(), vec![ring.one()]);
    while !r.is_empty() {
        let (q, new_r) = divrem(ring, &old_r, &r);
        let new_s = sub(ring, &old_s, &mul(ring, &q, &s));
        old_r = std::mem::replace(&mut r, new_r);
        old_s = std::mem::replace(&mut s, new_s);
    }
    if old_r.len() != 1 {
        return None;
    }
    let scale = ring.inv(&old_r[0]);
    let inv: Vec<R::E> = old_s.iter().map(|c| ring.mul(c, &scale)).collect();
    Some(rem(ring, &inv, modulus))
}

/// Ben-Or irreducibility test for a monic polynomial of degree >= 1: `f` is
/// irreducible iff `gcd(x^(p^k) - x, f) = 1` for every `k <= deg/2`.
pub(crate) fn is_irreducible<R: PrimeRing>(ring: &R, f: &[R::E]) -> bool {
    let f = trim(ring, f.to_vec());
    if f.len() < 2 {
        return false;
    }
    let degree = f.len() - 1;
    if degree == 1 {
        return true;
    }
    let p = ring.modulus();
    let x = vec![ring.zero(), ring.one()];
    let mut frob = x.clone();
    for _ in 0..degree / 2 {
        frob = powmod(ring, &frob, &p, &f);
        let g = gcd(ring, &sub(ring, &frob, &x), &f);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

/// Lexicographically smallest monic irreducible polynomial of the given
/// degree, ordering coefficient vectors with the constant term most
/// significant. Degree one is pinned to `x`.
pub(crate) fn smallest_irreducible<R: PrimeRing>(ring: &R, degree: usize) -> Vec<BigUint> {
    if degree == 1 {
        return vec![BigUint::zero(), BigUint::one()];
    }
    // Every candidate with zero constant term is divisible by x, so the
    // enumeration starts at constant term one.
    let mut digits: Vec<R::E> = vec![ring.zero(); degree];
    digits[0] = ring.one();
    loop {
        let mut f = digits.clone();
        f.push(ring.one());
        if is_irreducible(ring, &f) {
            return f.iter().map(|c| ring.to_big(c)).collect();
        }
        // Increment with the highest-degree digit least significant.
        let mut k = degree - 1;
        loop {
            let next = ring.add(&digits[k], &ring.one());
            let wrapped = ring.is_zero(&next);
            digits[k] = next;
            if !wrapped {
                break;
            }
            assert!(k > 0, "monic irreducible polynomials exist for every degree");
            k -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p: u64) -> SmallPrime {
        SmallPrime(p)
    }

    #[test]
    fn divrem_reconstructs() {
        let r = small(7);
        let a = vec![3, 0, 5, 1, 6];
        let b = vec![2, 1, 1];
        let (q, rm) = divrem(&r, &a, &b);
        let back = {
            let qb = mul(&r, &q, &b);
            let n = qb.len().max(rm.len());
            let out: Vec<u64> = (0..n)
                .map(|k| r.add(qb.get(k).unwrap_or(&0), rm.get(k).unwrap_or(&0)))
                .collect();
            trim(&r, out)
        };
        assert_eq!(back, a);
        assert!(rm.len() < b.len());
    }

    #[test]
    fn inverse_mod_irreducible() {
        let r = small(3);
        let f = vec![1, 0, 1]; // x^2 + 1
        for c0 in 0..3 {
            for c1 in 0..3 {
                let a = trim(&r, vec![c0, c1]);
                match invmod(&r, &a, &f) {
                    None => assert!(a.is_empty()),
                    Some(inv) => assert_eq!(mulmod(&r, &a, &inv, &f), vec![1]),
                }
            }
        }
    }

    #[test]
    fn smallest_quadratic_over_f3() {
        let got = smallest_irreducible(&small(3), 2);
        assert_eq!(got, vec![1u32.into(), 0u32.into(), 1u32.into()]);
    }

    #[test]
    fn backends_agree() {
        for &(p, d) in &[(5u64, 2usize), (7, 3), (97, 2), (13, 4)] {
            let a = smallest_irreducible(&SmallPrime(p), d);
            let b = smallest_irreducible(&BigPrime(BigUint::from(p)), d);
            assert_eq!(a, b, "p={p} d={d}");
        }
    }

    /// Gauss: (1/d) Σ_{k|d} μ(d/k) p^k monic irreducibles of degree d.
    fn necklace(p: u64, d: usize) -> u64 {
        let mobius = |n: usize| {
            let f = crate::primes::prime_factors(n);
            if f.iter().product::<usize>() == n {
                if f.len() % 2 == 0 { 1i64 } else { -1 }
            } else {
                0
            }
        };
        let total: i64 = (1..=d).filter(|k| d % k == 0).map(|k| mobius(d / k) * (p as i64).pow(k as u32)).sum();
        (total / d as i64) as u64
    }

    #[test]
    fn irreducible_counts_match_gauss() {
        for &(p, d) in &[(3u64, 2usize), (3, 3), (3, 4), (5, 2), (5, 3), (7, 2), (2, 6)] {
            let r = small(p);
            let mut count = 0;
            for n in 0..p.pow(d as u32) {
                let mut f: Vec<u64> = (0..d).map(|k| n / p.pow(k as u32) % p).collect();
                f.push(1);
                if is_irreducible(&r, &f) {
                    count += 1;
                }
            }
            assert_eq!(count, necklace(p, d), "p={p} d={d}");
        }
    }
}
