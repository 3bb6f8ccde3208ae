//! Binary field arithmetic GF(2^k), k ≤ 32.
//!
//! The reduction polynomial is found at construction time: the
//! lexicographically smallest monic irreducible of degree k (certified by
//! Rabin's irreducibility test), so field elements and everything built
//! from them are canonical without any table baked into the source.

use crate::error::{Error, Result};

use super::primes::is_prime_u64;

#[derive(Debug, Clone, Copy)]
pub struct Gf2k {
    k: u32,
    /// reduction polynomial, bit i = coefficient of x^i (bit k set)
    poly: u64,
}

impl Gf2k {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 || k > 32 {
            return Err(Error::domain(format!("field degree k = {k} outside 1..=32")));
        }
        // candidates need the constant term; otherwise x divides them
        let mut c = (1u64 << k) | 1;
        loop {
            if is_irreducible(c, k) {
                return Ok(Self { k, poly: c });
            }
            c += 2;
            if c >= (1u64 << (k + 1)) {
                unreachable!("an irreducible of degree {k} exists below 2^{}", k + 1);
            }
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn modulus(&self) -> u64 {
        self.poly
    }

    /// Number of field elements, 2^k.
    pub fn size(&self) -> u64 {
        1u64 << self.k
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        poly_rem(clmul(a, b), self.poly)
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        if a == 0 {
            return Err(Error::domain("zero has no field inverse".to_string()));
        }
        Ok(self.pow(a, self.size() - 2))
    }
}

/// Carry-less product of two polynomials of degree ≤ 31.
fn clmul(a: u64, b: u64) -> u64 {
    debug_assert!(a < (1 << 32) && b < (1 << 32));
    let mut acc = 0u64;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    acc
}

fn degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn poly_rem(mut x: u64, m: u64) -> u64 {
    let dm = degree(m);
    while x != 0 && degree(x) >= dm {
        x ^= m << (degree(x) - dm);
    }
    x
}

fn poly_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = poly_rem(a, b);
        a = b;
        b = r;
    }
    a
}

/// Rabin's test: f of degree k is irreducible iff x^(2^k) ≡ x (mod f) and
/// gcd(x^(2^(k/q)) − x, f) = 1 for every prime q dividing k.
fn is_irreducible(f: u64, k: u32) -> bool {
    // x^(2^j) mod f by j squarings
    let frob = |j: u32| -> u64 {
        let mut t = 0b10u64;
        for _ in 0..j {
            t = poly_rem(clmul(t, t), f);
        }
        t
    };
    // compare against x reduced mod f (differs from x itself only at k = 1)
    if frob(k) != poly_rem(0b10, f) {
        return false;
    }
    for q in (2..=k).filter(|&q| k % q == 0 && is_prime_u64(q as u64)) {
        if poly_gcd(frob(k / q) ^ 0b10, f) != 1 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_irreducibles() {
        // classical values, including the degree-8 polynomial 0x11B
        for (k, poly) in [(1u32, 0b11u64), (2, 0b111), (3, 0b1011), (4, 0b10011), (8, 0x11B)] {
            assert_eq!(Gf2k::new(k).unwrap().modulus(), poly, "k = {k}");
        }
    }

    #[test]
    fn reduction_polys_are_certified_irreducible() {
        for k in 1..=16 {
            let f = Gf2k::new(k).unwrap();
            assert!(is_irreducible(f.modulus(), k));
            // x^(2^k) = x in the field (x reduced mod f when k = 1)
            let x = poly_rem(0b10, f.modulus());
            assert_eq!(f.pow(x, f.size()), x);
        }
    }

    #[test]
    fn field_axioms_sample() {
        let f = Gf2k::new(6).unwrap();
        for a in 1..f.size() {
            let inv = f.inv(a).unwrap();
            assert_eq!(f.mul(a, inv), 1, "a = {a}");
        }
        // associativity and commutativity on a grid
        for a in (0..64).step_by(7) {
            for b in (0..64).step_by(5) {
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for c in (0..64).step_by(11) {
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c), "distributivity");
                }
            }
        }
    }

    #[test]
    fn gcd_and_rem() {
        // (x²+1) = (x+1)² over F₂
        assert_eq!(poly_gcd(0b101, 0b11), 0b11);
        assert_eq!(poly_rem(0b101, 0b11), 0);
    }
}
