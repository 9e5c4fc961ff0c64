//! Probabilistic primality testing.
//!
//! Miller-Rabin with the first twelve prime bases (deterministic below
//! 3.3 * 10^24) followed by 64 rounds with pseudo-random bases derived from
//! the candidate itself, for a worst-case error below 2^-128.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

const FIXED_BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

const RANDOM_ROUNDS: usize = 64;

/// Returns true when `n` is prime, with error probability below 2^-128.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &sp in SMALL_PRIMES.iter() {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    // n > 97 and odd from here on.
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    let witness = |a: &BigUint| -> bool {
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            return false;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_one {
                return false;
            }
            if x.is_one() {
                return true;
            }
        }
        true
    };

    for &b in FIXED_BASES.iter() {
        if witness(&BigUint::from(b)) {
            return false;
        }
    }
    // The fixed bases are a proof below this bound.
    let det_bound = BigUint::parse_bytes(b"3317044064679887385961981", 10).expect("constant");
    if *n < det_bound {
        return true;
    }

    let seed: [u8; 32] = Sha256::digest(n.to_bytes_be()).into();
    let mut rng = ChaCha20Rng::from_seed(seed);
    let upper = &n_minus_one - 1u32;
    for _ in 0..RANDOM_ROUNDS {
        let a = rng.gen_biguint_range(&two, &upper);
        if witness(&a) {
            return false;
        }
    }
    true
}

/// Distinct prime factors of a machine-sized integer, by trial division.
#[cfg(test)]
pub(crate) fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut q = 2;
    while q * q <= n {
        if n % q == 0 {
            out.push(q);
            while n % q == 0 {
                n /= q;
            }
        }
        q += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn agrees_with_trial_division() {
        for n in 0u64..5000 {
            assert_eq!(is_probable_prime(&BigUint::from(n)), naive(n), "n = {n}");
        }
    }

    #[test]
    fn known_large_values() {
        let m61 = BigUint::from((1u64 << 61) - 1);
        assert!(is_probable_prime(&m61));
        assert!(!is_probable_prime(&(BigUint::from((1u64 << 62) - 1))));
        // Carmichael numbers.
        for c in [561u64, 1105, 1729, 2465, 2821, 6601, 8911] {
            assert!(!is_probable_prime(&BigUint::from(c)));
        }
        // 2^127 - 1 is prime, 2^128 + 1 is not.
        let m127 = (BigUint::one() << 127u32) - 1u32;
        assert!(is_probable_prime(&m127));
        let f7 = (BigUint::one() << 128u32) + 1u32;
        assert!(!is_probable_prime(&f7));
        // Product of two 64-bit primes, past the deterministic bound.
        let a = BigUint::from(18446744073709551557u64);
        let b = BigUint::from(18446744073709551533u64);
        assert!(is_probable_prime(&a));
        assert!(!is_probable_prime(&(a * b)));
    }

    #[test]
    fn factors() {
        assert_eq!(prime_factors(64), vec![2]);
        assert_eq!(prime_factors(12), vec![2, 3]);
        assert_eq!(prime_factors(1), Vec::<usize>::new());
        assert_eq!(prime_factors(97), vec![97]);
    }
}
