use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::budget::{CONV_TABLE_CAP, GROUP_ENUM_CAP, XOR_WALSH_BITS_CAP};
use crate::error::{Error, Result};
use crate::graph::spectral::{self, SpectralReport};

use super::elem::{GroupDescriptor, GroupElem, GroupKind};

/// Backing storage for a generator multiset.
///
/// Dense variants hold every element explicitly in port order. The
/// `Weights` variant represents a multiset too large to materialize:
/// `weights[i]` is the relative frequency of the group element at
/// canonical index i (summing to 1) and `total` is the exact cardinality.
/// Port order is lost in that form.
#[derive(Debug, Clone)]
pub enum MultisetStore {
    Bits(Vec<u64>),
    Sl2(Vec<[u32; 4]>),
    Perm { n: u8, flat: Vec<u8> },
    Weights { weights: Vec<f64>, total: BigUint },
}

/// A finite multiset of group elements with a fixed port order.
///
/// Ports are 0-based positions in the stored sequence; walk machinery
/// addresses generators by port, so the order is part of the value.
#[derive(Debug, Clone)]
pub struct GeneratorMultiset {
    desc: GroupDescriptor,
    store: MultisetStore,
}

impl GeneratorMultiset {
    pub fn from_elems(desc: GroupDescriptor, elems: Vec<GroupElem>) -> Result<Self> {
        if elems.is_empty() {
            return Err(Error::domain("generator multiset is empty".to_string()));
        }
        for e in &elems {
            desc.validate(e)?;
        }
        let store = match desc.kind() {
            GroupKind::XorBits => MultisetStore::Bits(
                elems
                    .iter()
                    .map(|e| match e {
                        GroupElem::Bits(b) => *b,
                        _ => unreachable!(),
                    })
                    .collect(),
            ),
            GroupKind::Sl2 => MultisetStore::Sl2(
                elems
                    .iter()
                    .map(|e| match e {
                        GroupElem::Sl2(m) => *m,
                        _ => unreachable!(),
                    })
                    .collect(),
            ),
            GroupKind::Symmetric => {
                let n = desc.param() as u8;
                let mut flat = Vec::with_capacity(elems.len() * n as usize);
                for e in &elems {
                    match e {
                        GroupElem::Perm(img) => flat.extend_from_slice(img),
                        _ => unreachable!(),
                    }
                }
                MultisetStore::Perm { n, flat }
            }
        };
        Ok(Self { desc, store })
    }

    /// Wrap an exact frequency table (weights sum to 1, indexed by the
    /// canonical element order) whose underlying multiset has `total`
    /// elements.
    pub fn from_weights(desc: GroupDescriptor, weights: Vec<f64>, total: BigUint) -> Result<Self> {
        let order = weight_table_len(&desc)?;
        if weights.len() != order {
            return Err(Error::domain(format!(
                "weight table has {} entries, group has {order}",
                weights.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < -1e-12) {
            return Err(Error::domain(format!(
                "weight table is not a distribution (sum = {sum})"
            )));
        }
        if total.is_zero() {
            return Err(Error::domain("weight table with zero total".to_string()));
        }
        Ok(Self { desc, store: MultisetStore::Weights { weights, total } })
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.desc
    }

    pub fn store(&self) -> &MultisetStore {
        &self.store
    }

    /// Number of ports for dense stores; `None` for weight tables.
    pub fn len(&self) -> Option<usize> {
        match &self.store {
            MultisetStore::Bits(v) => Some(v.len()),
            MultisetStore::Sl2(v) => Some(v.len()),
            MultisetStore::Perm { n, flat } => Some(flat.len() / *n as usize),
            MultisetStore::Weights { .. } => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self.store, MultisetStore::Weights { .. })
    }

    /// Exact cardinality, including virtual stores.
    pub fn count_exact(&self) -> BigUint {
        match &self.store {
            MultisetStore::Weights { total, .. } => total.clone(),
            _ => BigUint::from(self.len().unwrap()),
        }
    }

    pub fn elem(&self, port: usize) -> GroupElem {
        match &self.store {
            MultisetStore::Bits(v) => GroupElem::Bits(v[port]),
            MultisetStore::Sl2(v) => GroupElem::Sl2(v[port]),
            MultisetStore::Perm { n, flat } => {
                let n = *n as usize;
                GroupElem::Perm(flat[port * n..(port + 1) * n].to_vec())
            }
            MultisetStore::Weights { .. } => {
                panic!("weight-table store has no port order")
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = GroupElem> + '_ {
        let len = self.len().expect("weight-table store has no port order");
        (0..len).map(move |i| self.elem(i))
    }

    /// Direct bit-vector view for ℤ₂^m dense stores (hot walk loops).
    pub fn bits(&self) -> Option<&[u64]> {
        match &self.store {
            MultisetStore::Bits(v) => Some(v),
            _ => None,
        }
    }

    /// Product of the generators at the given ports, newest applied last:
    /// `ports = [j₀, j₁, …, j_t]` yields s_{j_t} ⋯ s_{j₁} s_{j₀}.
    pub fn product_at(&self, ports: &[u32]) -> GroupElem {
        let mut acc = self.desc.identity();
        for &j in ports {
            acc = self.desc.mul(&self.elem(j as usize), &acc);
        }
        acc
    }

    /// True when every element's inverse occurs with the same multiplicity.
    pub fn is_symmetric(&self) -> bool {
        match &self.store {
            // Every element of ℤ₂^m is an involution.
            MultisetStore::Bits(_) => true,
            MultisetStore::Weights { weights, .. } => {
                if self.desc.kind() == GroupKind::XorBits {
                    return true;
                }
                let Ok(idx) = self.desc.index() else { return false };
                weights.iter().enumerate().all(|(i, &w)| {
                    let j = idx.position(&self.desc.inv(idx.elem(i)));
                    (w - weights[j]).abs() <= 1e-12
                })
            }
            _ => {
                let mut counts: HashMap<GroupElem, i64> = HashMap::new();
                for e in self.iter() {
                    *counts.entry(e).or_insert(0) += 1;
                }
                counts
                    .iter()
                    .all(|(e, c)| counts.get(&self.desc.inv(e)).copied().unwrap_or(0) == *c)
            }
        }
    }

    pub fn count_identity(&self) -> Option<usize> {
        let id = self.desc.identity();
        self.len().map(|_| self.iter().filter(|e| *e == id).count())
    }

    /// Append `k` copies of the identity (dense stores only).
    pub fn pad_with_identity(&mut self, k: usize) -> Result<()> {
        let id = self.desc.identity();
        match &mut self.store {
            MultisetStore::Bits(v) => v.extend(std::iter::repeat(0u64).take(k)),
            MultisetStore::Sl2(v) => v.extend(std::iter::repeat([1, 0, 0, 1]).take(k)),
            MultisetStore::Perm { flat, .. } => {
                let GroupElem::Perm(img) = id else { unreachable!() };
                for _ in 0..k {
                    flat.extend_from_slice(&img);
                }
            }
            MultisetStore::Weights { .. } => {
                return Err(Error::capacity(
                    "cannot pad a weight-table multiset in place".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Multiset union with all inverses: the result has twice the ports
    /// and is always symmetric.
    pub fn symmetrized(&self) -> Result<Self> {
        if let MultisetStore::Weights { weights, total } = &self.store {
            if self.desc.kind() == GroupKind::XorBits {
                return Ok(self.clone());
            }
            let idx = self.desc.index()?;
            let mut w = weights.clone();
            for (i, &wi) in weights.iter().enumerate() {
                let j = idx.position(&self.desc.inv(idx.elem(i)));
                w[i] = 0.5 * (wi + weights[j]);
            }
            return Self::from_weights(self.desc, w, total * 2u32);
        }
        let mut elems: Vec<GroupElem> = self.iter().collect();
        let inverses: Vec<GroupElem> = elems.iter().map(|e| self.desc.inv(e)).collect();
        elems.extend(inverses);
        Self::from_elems(self.desc, elems)
    }

    /// Relative frequency table indexed by canonical element order.
    pub fn weights_table(&self) -> Result<Vec<f64>> {
        match &self.store {
            MultisetStore::Weights { weights, .. } => Ok(weights.clone()),
            MultisetStore::Bits(v) => {
                let m = self.desc.param();
                if m > XOR_WALSH_BITS_CAP {
                    return Err(Error::capacity(format!(
                        "frequency table over 2^{m} entries exceeds the \
                         {XOR_WALSH_BITS_CAP}-bit cap"
                    )));
                }
                let mut w = vec![0.0f64; 1usize << m];
                let inc = 1.0 / v.len() as f64;
                for &b in v {
                    w[b as usize] += inc;
                }
                Ok(w)
            }
            _ => {
                let idx = self.desc.index()?;
                let mut w = vec![0.0f64; idx.len()];
                let inc = 1.0 / self.len().unwrap() as f64;
                for e in self.iter() {
                    w[idx.position(&e)] += inc;
                }
                Ok(w)
            }
        }
    }

    /// Convert to the weight-table form (same distribution, same exact
    /// count). Useful before operations that compose distributions.
    pub fn to_weights(&self) -> Result<Self> {
        match &self.store {
            MultisetStore::Weights { .. } => Ok(self.clone()),
            _ => Self::from_weights(self.desc, self.weights_table()?, self.count_exact()),
        }
    }

    /// Spectral bias of the multiset: the largest non-principal singular
    /// value of the averaged translation operator. Over ℤ₂^m this is the
    /// largest |Fourier coefficient| at a nonzero frequency, computed
    /// exactly by a fast transform; other families go through the Cayley
    /// walk operator (dense eigensolve или power iteration by size).
    pub fn bias(&self) -> Result<f64> {
        Ok(self.bias_report()?.value)
    }

    pub fn bias_report(&self) -> Result<SpectralReport> {
        match self.desc.kind() {
            GroupKind::XorBits => {
                let mut w = self.weights_table()?;
                walsh_inplace(&mut w);
                let bias = w[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
                Ok(SpectralReport::exact(bias.min(1.0)))
            }
            _ => self.cayley_bias_report(),
        }
    }

    /// Bias through the Cayley walk operator on the full group: power
    /// iteration on the mean-deflated averaged operator (symmetric case)
    /// or on its Gram square (general case).
    fn cayley_bias_report(&self) -> Result<SpectralReport> {
        let idx = self.desc.index()?;
        let n = idx.len();
        // (element index, weight) per distinct support element — duplicate
        // ports collapse into one weighted entry
        let support: Vec<(u32, f64)> = match &self.store {
            MultisetStore::Weights { weights, .. } => weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, &w)| (i as u32, w))
                .collect(),
            _ => {
                let d = self.len().unwrap();
                let w = 1.0 / d as f64;
                let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
                for j in 0..d {
                    *acc.entry(idx.position(&self.elem(j)) as u32).or_insert(0.0) += w;
                }
                acc.into_iter().collect()
            }
        };
        if support
            .len()
            .checked_mul(n)
            .filter(|&x| x <= CONV_TABLE_CAP)
            .is_none()
        {
            return Err(Error::capacity(format!(
                "translation table {}×{n} exceeds the table cap",
                support.len()
            )));
        }
        // table[g*|support| + j] = index of s_j · g
        let mut table = vec![0u32; n * support.len()];
        for g in 0..n {
            for (j, (si, _)) in support.iter().enumerate() {
                let h = self.desc.mul(idx.elem(*si as usize), idx.elem(g));
                table[g * support.len() + j] = idx.position(&h) as u32;
            }
        }
        let forward = |input: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|x| *x = 0.0);
            for g in 0..n {
                let x = input[g];
                if x == 0.0 {
                    continue;
                }
                for (j, (_, w)) in support.iter().enumerate() {
                    out[table[g * support.len() + j] as usize] += x * w;
                }
            }
        };
        if self.is_symmetric() {
            spectral::deflated_symmetric_norm(n, forward)
        } else {
            let reverse = |input: &[f64], out: &mut [f64]| {
                for g in 0..n {
                    let mut acc = 0.0;
                    for (j, (_, w)) in support.iter().enumerate() {
                        acc += input[table[g * support.len() + j] as usize] * w;
                    }
                    out[g] = acc;
                }
            };
            spectral::deflated_operator_norm(n, forward, reverse)
        }
    }
}

fn weight_table_len(desc: &GroupDescriptor) -> Result<usize> {
    match desc.kind() {
        GroupKind::XorBits => {
            let m = desc.param();
            if m > XOR_WALSH_BITS_CAP {
                return Err(Error::capacity(format!(
                    "weight table over 2^{m} entries exceeds the {XOR_WALSH_BITS_CAP}-bit cap"
                )));
            }
            Ok(1usize << m)
        }
        _ => {
            let order = desc
                .order()
                .ok_or_else(|| Error::capacity(format!("group order overflows for {desc}")))?;
            if order > GROUP_ENUM_CAP as u128 {
                return Err(Error::capacity(format!(
                    "weight table over {order} entries exceeds the enumeration cap"
                )));
            }
            Ok(order as usize)
        }
    }
}

impl fmt::Display for GeneratorMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.len() {
            Some(k) => write!(f, "{} with {k} generators", self.desc),
            None => {
                write!(f, "{} with {} generators (weight table)", self.desc, self.count_exact())
            }
        }
    }
}

/// In-place unnormalized Walsh–Hadamard transform. Applied to a frequency
/// table it yields, at index μ, the signed average Σ_x w_x (−1)^{⟨μ,x⟩};
/// applying it twice multiplies by the length.
pub fn walsh_inplace(v: &mut [f64]) {
    let n = v.len();
    assert!(n.is_power_of_two(), "transform length must be a power of two");
    let mut h = 1;
    while h < n {
        for chunk in v.chunks_mut(2 * h) {
            let (a, b) = chunk.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (s, t) = (*x + *y, *x - *y);
                *x = s;
                *y = t;
            }
        }
        h *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_set(desc: GroupDescriptor, vals: &[u64]) -> GeneratorMultiset {
        GeneratorMultiset::from_elems(desc, vals.iter().map(|&b| GroupElem::Bits(b)).collect())
            .unwrap()
    }

    #[test]
    fn walsh_involution() {
        let mut v = vec![1.0, 2.0, -3.0, 0.5, 0.0, 4.0, 1.5, -2.0];
        let orig = v.clone();
        walsh_inplace(&mut v);
        walsh_inplace(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a / 8.0 - b).abs() < 1e-12);
        }
    }

    #[test]
    fn walsh_matches_direct_sum() {
        // Oracle: evaluate Σ_x w_x (−1)^{popcount(x & μ)} directly.
        let w = [0.05, 0.2, 0.1, 0.15, 0.0, 0.25, 0.05, 0.2];
        let mut t = w.to_vec();
        walsh_inplace(&mut t);
        for mu in 0..8usize {
            let direct: f64 = w
                .iter()
                .enumerate()
                .map(|(x, wx)| {
                    let sign = if (x & mu).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    sign * wx
                })
                .sum();
            assert!((t[mu] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_of_three_element_set() {
        let g = GroupDescriptor::xor_bits(2).unwrap();
        // {01, 10, 11} written leftmost-coordinate-first.
        let s = bits_set(g, &[0b10, 0b01, 0b11]);
        let bias = s.bias().unwrap();
        assert!((bias - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bias_of_whole_group_is_zero() {
        let g = GroupDescriptor::xor_bits(3).unwrap();
        let s = bits_set(g, &(0..8).collect::<Vec<_>>());
        assert!(s.bias().unwrap() < 1e-14);
    }

    #[test]
    fn bias_of_singleton_is_one() {
        let g = GroupDescriptor::xor_bits(3).unwrap();
        let s = bits_set(g, &[0b101]);
        assert!((s.bias().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetry_detection() {
        let g = GroupDescriptor::sl2(5).unwrap();
        let asymmetric =
            GeneratorMultiset::from_elems(g, vec![GroupElem::Sl2([1, 1, 0, 1])]).unwrap();
        assert!(!asymmetric.is_symmetric());
        let symmetric = GeneratorMultiset::from_elems(
            g,
            vec![GroupElem::Sl2([1, 1, 0, 1]), GroupElem::Sl2([1, 4, 0, 1])],
        )
        .unwrap();
        assert!(symmetric.is_symmetric());
        // xor multisets are always symmetric.
        assert!(bits_set(GroupDescriptor::xor_bits(2).unwrap(), &[0b01]).is_symmetric());
    }

    #[test]
    fn product_at_applies_newest_last() {
        let g = GroupDescriptor::symmetric(3).unwrap();
        let a = GroupElem::Perm(vec![1, 0, 2]);
        let b = GroupElem::Perm(vec![0, 2, 1]);
        let s = GeneratorMultiset::from_elems(g, vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(s.product_at(&[0, 1]), g.mul(&b, &a));
        assert_eq!(s.product_at(&[]), g.identity());
    }

    #[test]
    fn padding_and_counts() {
        let g = GroupDescriptor::xor_bits(4).unwrap();
        let mut s = bits_set(g, &[1, 2, 3]);
        s.pad_with_identity(5).unwrap();
        assert_eq!(s.len(), Some(8));
        assert_eq!(s.count_identity(), Some(5));
        assert_eq!(s.count_exact(), BigUint::from(8u32));
    }

    #[test]
    fn weight_table_roundtrip_and_bias() {
        let g = GroupDescriptor::xor_bits(2).unwrap();
        let dense = bits_set(g, &[0b10, 0b01, 0b11]);
        let w = dense.weights_table().unwrap();
        let virt = GeneratorMultiset::from_weights(g, w, BigUint::from(3u32) << 100).unwrap();
        assert!(virt.is_virtual());
        assert!((virt.bias().unwrap() - dense.bias().unwrap()).abs() < 1e-15);
        assert!(virt.is_symmetric());
    }

    #[test]
    fn weight_table_bias_matches_dense_for_sl2() {
        let g = GroupDescriptor::sl2(5).unwrap();
        let dense = GeneratorMultiset::from_elems(
            g,
            vec![
                GroupElem::Sl2([1, 1, 0, 1]),
                GroupElem::Sl2([1, 4, 0, 1]),
                GroupElem::Sl2([1, 0, 1, 1]),
                GroupElem::Sl2([1, 0, 4, 1]),
            ],
        )
        .unwrap();
        let virt = dense.to_weights().unwrap();
        assert!(virt.is_symmetric());
        let a = dense.bias().unwrap();
        let b = virt.bias().unwrap();
        assert!((a - b).abs() < 1e-9, "dense {a} vs weights {b}");
    }

    #[test]
    fn symmetrized_doubles_ports() {
        let g = GroupDescriptor::symmetric(4).unwrap();
        let s = GeneratorMultiset::from_elems(
            g,
            vec![GroupElem::Perm(vec![1, 2, 3, 0]), GroupElem::Perm(vec![1, 0, 2, 3])],
        )
        .unwrap();
        assert!(!s.is_symmetric());
        let sym = s.symmetrized().unwrap();
        assert_eq!(sym.len(), Some(4));
        assert!(sym.is_symmetric());
    }

    #[test]
    fn symmetrized_weight_table() {
        let g = GroupDescriptor::symmetric(3).unwrap();
        let s =
            GeneratorMultiset::from_elems(g, vec![GroupElem::Perm(vec![1, 2, 0])]).unwrap();
        let sym = s.to_weights().unwrap().symmetrized().unwrap();
        assert!(sym.is_symmetric());
        assert_eq!(sym.count_exact(), BigUint::from(2u32));
    }
}
