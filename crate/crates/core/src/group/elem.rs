use std::collections::HashMap;
use std::fmt;

use crate::budget::GROUP_ENUM_CAP;
use crate::error::{Error, Result};
use crate::zoo::primes::is_prime_u64;

/// Which group family a descriptor denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    /// ℤ₂^m under XOR.
    XorBits,
    /// SL₂(p), p prime.
    Sl2,
    /// Sym(n), permutations of {1,…,n}.
    Symmetric,
}

/// A concrete finite group: the family plus its size parameter
/// (m bits, the prime p, or the degree n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupDescriptor {
    kind: GroupKind,
    param: u32,
}

/// One group element. The variant must match the descriptor's family;
/// elements do not carry their descriptor, multisets do.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroupElem {
    /// Bit vector, coordinate i stored in bit i.
    Bits(u64),
    /// Row-major 2×2 matrix [a, b, c, d] with ad − bc ≡ 1 (mod p).
    Sl2([u32; 4]),
    /// Permutation as 0-based image list: `images[i]` is the image of i.
    Perm(Vec<u8>),
}

impl GroupDescriptor {
    pub fn xor_bits(m: u32) -> Result<Self> {
        if m == 0 || m > 63 {
            return Err(Error::domain(format!("xor-bits m={m} outside 1..=63")));
        }
        Ok(Self { kind: GroupKind::XorBits, param: m })
    }

    pub fn sl2(p: u32) -> Result<Self> {
        if p < 3 || !is_prime_u64(p as u64) {
            return Err(Error::domain(format!("sl2 modulus {p} is not an odd prime")));
        }
        if p > 46_337 {
            // p² must fit in u32 products done in u64; this cap is far above
            // anything enumerable anyway.
            return Err(Error::domain(format!("sl2 modulus {p} too large")));
        }
        Ok(Self { kind: GroupKind::Sl2, param: p })
    }

    pub fn symmetric(n: u32) -> Result<Self> {
        if n < 1 || n > 64 {
            return Err(Error::domain(format!("symmetric degree {n} outside 1..=64")));
        }
        Ok(Self { kind: GroupKind::Symmetric, param: n })
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// The family parameter: m, p or n.
    pub fn param(&self) -> u32 {
        self.param
    }

    /// Group order, if it fits in u128.
    pub fn order(&self) -> Option<u128> {
        match self.kind {
            GroupKind::XorBits => Some(1u128 << self.param),
            GroupKind::Sl2 => {
                let p = self.param as u128;
                Some((p * p - 1) * p)
            }
            GroupKind::Symmetric => {
                let mut f: u128 = 1;
                for k in 2..=self.param as u128 {
                    f = f.checked_mul(k)?;
                }
                Some(f)
            }
        }
    }

    pub fn identity(&self) -> GroupElem {
        match self.kind {
            GroupKind::XorBits => GroupElem::Bits(0),
            GroupKind::Sl2 => GroupElem::Sl2([1, 0, 0, 1]),
            GroupKind::Symmetric => GroupElem::Perm((0..self.param as u8).collect()),
        }
    }

    /// Check that an element belongs to this group.
    pub fn validate(&self, e: &GroupElem) -> Result<()> {
        match (self.kind, e) {
            (GroupKind::XorBits, GroupElem::Bits(b)) => {
                if self.param < 64 && *b >> self.param != 0 {
                    return Err(Error::domain(format!(
                        "bit vector {b:#x} has bits above coordinate {}",
                        self.param
                    )));
                }
                Ok(())
            }
            (GroupKind::Sl2, GroupElem::Sl2(m)) => {
                let p = self.param as u64;
                if m.iter().any(|&x| x as u64 >= p) {
                    return Err(Error::domain("sl2 entry not reduced mod p".to_string()));
                }
                let det = ((m[0] as u64 * m[3] as u64) % p + p
                    - (m[1] as u64 * m[2] as u64) % p)
                    % p;
                if det != 1 {
                    return Err(Error::domain(format!("sl2 determinant {det} ≠ 1 mod {p}")));
                }
                Ok(())
            }
            (GroupKind::Symmetric, GroupElem::Perm(img)) => {
                let n = self.param as usize;
                if img.len() != n {
                    return Err(Error::domain(format!(
                        "permutation has {} images, group degree is {n}",
                        img.len()
                    )));
                }
                let mut seen = vec![false; n];
                for &x in img {
                    let x = x as usize;
                    if x >= n || seen[x] {
                        return Err(Error::domain("image list is not a permutation".to_string()));
                    }
                    seen[x] = true;
                }
                Ok(())
            }
            _ => Err(Error::domain("element kind does not match group kind".to_string())),
        }
    }

    /// Group product `a · b`. For permutations this composes `b` first:
    /// (a·b)(i) = a(b(i)), matching the Cayley convention where the
    /// neighbour of g through generator s is s·g.
    pub fn mul(&self, a: &GroupElem, b: &GroupElem) -> GroupElem {
        match (self.kind, a, b) {
            (GroupKind::XorBits, GroupElem::Bits(x), GroupElem::Bits(y)) => {
                GroupElem::Bits(x ^ y)
            }
            (GroupKind::Sl2, GroupElem::Sl2(x), GroupElem::Sl2(y)) => {
                let p = self.param as u64;
                let m = |i: usize, j: usize| -> u32 {
                    let v = (x[2 * i] as u64 * y[j] as u64
                        + x[2 * i + 1] as u64 * y[2 + j] as u64)
                        % p;
                    v as u32
                };
                GroupElem::Sl2([m(0, 0), m(0, 1), m(1, 0), m(1, 1)])
            }
            (GroupKind::Symmetric, GroupElem::Perm(x), GroupElem::Perm(y)) => {
                GroupElem::Perm(y.iter().map(|&i| x[i as usize]).collect())
            }
            _ => panic!("group element kind mismatch in mul"),
        }
    }

    pub fn inv(&self, a: &GroupElem) -> GroupElem {
        match (self.kind, a) {
            (GroupKind::XorBits, GroupElem::Bits(x)) => GroupElem::Bits(*x),
            (GroupKind::Sl2, GroupElem::Sl2(m)) => {
                // [[a,b],[c,d]]⁻¹ = [[d,−b],[−c,a]] since det = 1.
                let p = self.param;
                let neg = |x: u32| if x == 0 { 0 } else { p - x };
                GroupElem::Sl2([m[3], neg(m[1]), neg(m[2]), m[0]])
            }
            (GroupKind::Symmetric, GroupElem::Perm(img)) => {
                let mut inv = vec![0u8; img.len()];
                for (i, &x) in img.iter().enumerate() {
                    inv[x as usize] = i as u8;
                }
                GroupElem::Perm(inv)
            }
            _ => panic!("group element kind mismatch in inv"),
        }
    }

    /// Left fold s_{k-1} ⋯ s_1 s_0 of a word; the empty word is the identity.
    pub fn product(&self, word: &[GroupElem]) -> GroupElem {
        let mut acc = self.identity();
        for s in word {
            acc = self.mul(s, &acc);
        }
        acc
    }

    pub fn is_identity(&self, e: &GroupElem) -> bool {
        *e == self.identity()
    }

    /// Enumerate the whole group in canonical order. Guarded by the
    /// enumeration cap; the order is part of the crate's determinism
    /// contract (Cayley vertex numbering relies on it).
    pub fn enumerate(&self) -> Result<Vec<GroupElem>> {
        let order = self.order().ok_or_else(|| {
            Error::capacity(format!("group order overflows u128 for {self}"))
        })?;
        if order > GROUP_ENUM_CAP as u128 {
            return Err(Error::capacity(format!(
                "group order {order} exceeds enumeration cap {GROUP_ENUM_CAP}"
            )));
        }
        let mut out = Vec::with_capacity(order as usize);
        match self.kind {
            GroupKind::XorBits => {
                for b in 0..(1u64 << self.param) {
                    out.push(GroupElem::Bits(b));
                }
            }
            GroupKind::Sl2 => {
                let p = self.param as u64;
                // Lexicographic (a,b,c,d) over solutions of ad − bc = 1.
                for a in 0..p {
                    for b in 0..p {
                        for c in 0..p {
                            if a == 0 {
                                // need −bc ≡ 1, i.e. bc ≡ −1; d is free.
                                if (b * c) % p == p - 1 {
                                    for d in 0..p {
                                        out.push(GroupElem::Sl2([
                                            a as u32, b as u32, c as u32, d as u32,
                                        ]));
                                    }
                                }
                            } else {
                                let d = ((1 + b * c) % p * mod_inverse(a, p)) % p;
                                out.push(GroupElem::Sl2([
                                    a as u32, b as u32, c as u32, d as u32,
                                ]));
                            }
                        }
                    }
                }
            }
            GroupKind::Symmetric => {
                let n = self.param as usize;
                let mut cur: Vec<u8> = (0..n as u8).collect();
                loop {
                    out.push(GroupElem::Perm(cur.clone()));
                    if !next_permutation(&mut cur) {
                        break;
                    }
                }
            }
        }
        debug_assert_eq!(out.len() as u128, order);
        Ok(out)
    }

    /// An index structure for O(1) element→vertex lookups.
    pub fn index(&self) -> Result<GroupIndex> {
        GroupIndex::new(self)
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GroupKind::XorBits => write!(f, "xor-bits {}", self.param),
            GroupKind::Sl2 => write!(f, "sl2 {}", self.param),
            GroupKind::Symmetric => write!(f, "symmetric {}", self.param),
        }
    }
}

/// Bijection between group elements and 0..|G|, in canonical enumeration
/// order. Bit-vector groups index directly by value and skip the table.
pub struct GroupIndex {
    desc: GroupDescriptor,
    elems: Vec<GroupElem>,
    map: HashMap<GroupElem, u32>,
}

impl GroupIndex {
    fn new(desc: &GroupDescriptor) -> Result<Self> {
        let elems = desc.enumerate()?;
        let mut map = HashMap::with_capacity(elems.len());
        for (i, e) in elems.iter().enumerate() {
            map.insert(e.clone(), i as u32);
        }
        Ok(Self { desc: *desc, elems, map })
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elem(&self, i: usize) -> &GroupElem {
        &self.elems[i]
    }

    pub fn position(&self, e: &GroupElem) -> usize {
        if let (GroupKind::XorBits, GroupElem::Bits(b)) = (self.desc.kind(), e) {
            return *b as usize;
        }
        self.map[e] as usize
    }

    pub fn elems(&self) -> &[GroupElem] {
        &self.elems
    }
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // p prime, a ≠ 0 mod p: a^(p−2) by square-and-multiply.
    let mut base = a % p;
    let mut exp = p - 2;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

fn next_permutation(a: &mut [u8]) -> bool {
    let n = a.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_product_and_inverse() {
        let g = GroupDescriptor::xor_bits(2).unwrap();
        // 01 is coordinate 0 set when written leftmost-first; stored as bit 0.
        let a = GroupElem::Bits(0b10); // "01"
        let b = GroupElem::Bits(0b11); // "11"
        assert_eq!(g.mul(&a, &b), GroupElem::Bits(0b01));
        assert_eq!(g.inv(&a), a, "xor elements are self-inverse");
        let g3 = GroupDescriptor::xor_bits(3).unwrap();
        let c = GroupElem::Bits(0b101);
        assert_eq!(g3.inv(&c), c);
    }

    #[test]
    fn empty_product_is_identity() {
        for g in [
            GroupDescriptor::xor_bits(4).unwrap(),
            GroupDescriptor::sl2(5).unwrap(),
            GroupDescriptor::symmetric(4).unwrap(),
        ] {
            assert!(g.is_identity(&g.product(&[])));
        }
    }

    #[test]
    fn sl2_inverse_example() {
        let g = GroupDescriptor::sl2(5).unwrap();
        let m = GroupElem::Sl2([1, 1, 0, 1]);
        assert_eq!(g.inv(&m), GroupElem::Sl2([1, 4, 0, 1]));
        assert!(g.is_identity(&g.mul(&m, &g.inv(&m))));
    }

    #[test]
    fn perm_inverse_example() {
        let g = GroupDescriptor::symmetric(3).unwrap();
        // one-line (2 3 1) in 1-based images is [1,2,0] 0-based.
        let s = GroupElem::Perm(vec![1, 2, 0]);
        assert_eq!(g.inv(&s), GroupElem::Perm(vec![2, 0, 1]));
    }

    #[test]
    fn product_folds_newest_first() {
        let g = GroupDescriptor::symmetric(3).unwrap();
        let a = GroupElem::Perm(vec![1, 0, 2]); // (1 2)
        let b = GroupElem::Perm(vec![0, 2, 1]); // (2 3)
        // product([a, b]) must be b·a (a applied first).
        let ba = g.mul(&b, &a);
        assert_eq!(g.product(&[a.clone(), b.clone()]), ba);
    }

    #[test]
    fn enumeration_sizes() {
        assert_eq!(GroupDescriptor::xor_bits(5).unwrap().enumerate().unwrap().len(), 32);
        assert_eq!(
            GroupDescriptor::sl2(5).unwrap().enumerate().unwrap().len(),
            (25 - 1) * 5
        );
        assert_eq!(GroupDescriptor::symmetric(4).unwrap().enumerate().unwrap().len(), 24);
        // Orders that exceed the cap refuse to enumerate.
        assert!(matches!(
            GroupDescriptor::symmetric(12).unwrap().enumerate(),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn group_axioms_spot_check() {
        for g in [
            GroupDescriptor::xor_bits(3).unwrap(),
            GroupDescriptor::sl2(7).unwrap(),
            GroupDescriptor::symmetric(4).unwrap(),
        ] {
            let elems = g.enumerate().unwrap();
            let stride = (elems.len() / 17).max(1);
            for (i, a) in elems.iter().step_by(stride).enumerate() {
                g.validate(a).unwrap();
                assert!(g.is_identity(&g.mul(a, &g.inv(a))));
                let b = &elems[(i * 31 + 7) % elems.len()];
                g.validate(&g.mul(a, b)).unwrap();
            }
        }
    }

    #[test]
    fn index_roundtrip() {
        let g = GroupDescriptor::sl2(5).unwrap();
        let idx = g.index().unwrap();
        for i in (0..idx.len()).step_by(13) {
            assert_eq!(idx.position(idx.elem(i)), i);
        }
    }
}
