//! Irreducible-representation oracles.
//!
//! The bias of a generating multiset equals the largest averaged-operator
//! norm over the nontrivial irreducible representations of the group.
//! This module evaluates that maximum directly — complete character sums
//! for bit-vector groups and Young's orthogonal form for small symmetric
//! groups — as an independent cross-check of the spectral measurements.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::budget::XOR_WALSH_BITS_CAP;
use crate::error::{Error, Result};

use super::elem::{GroupElem, GroupKind};
use super::multiset::GeneratorMultiset;

/// Degree beyond which symmetric-group irreps are not enumerated.
pub const SYM_IRREP_DEGREE_CAP: u32 = 5;

/// One irreducible representation of Sym_n in Young's orthogonal form:
/// real orthogonal matrices indexed by standard tableaux of a partition.
#[derive(Debug, Clone)]
pub struct SymIrrep {
    n: u32,
    partition: Vec<u32>,
    dim: usize,
    /// ρ(s_k) for the adjacent transpositions s_k = (k, k+1), 0-based k
    adjacent: Vec<DMatrix<f64>>,
}

impl SymIrrep {
    pub fn partition(&self) -> &[u32] {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The one-dimensional trivial representation has partition [n].
    pub fn is_trivial(&self) -> bool {
        self.partition.len() == 1
    }

    /// ρ(σ) for a 0-based image list, via an adjacent-transposition word.
    pub fn image(&self, images: &[u8]) -> DMatrix<f64> {
        assert_eq!(images.len(), self.n as usize);
        let mut w = images.to_vec();
        let mut swaps = Vec::new();
        // bubble-sort w to the identity; swapping positions j, j+1 is
        // right-multiplication by s_j, so σ = s_{j_m} ⋯ s_{j_1}
        loop {
            let mut moved = false;
            for j in 0..w.len().saturating_sub(1) {
                if w[j] > w[j + 1] {
                    w.swap(j, j + 1);
                    swaps.push(j);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        let mut acc = DMatrix::<f64>::identity(self.dim, self.dim);
        for &j in swaps.iter().rev() {
            acc *= &self.adjacent[j];
        }
        acc
    }
}

/// All irreducible representations of Sym_n, n ≤ [`SYM_IRREP_DEGREE_CAP`].
pub fn sym_irreps(n: u32) -> Result<Vec<SymIrrep>> {
    if n == 0 || n > SYM_IRREP_DEGREE_CAP {
        return Err(Error::capacity(format!(
            "symmetric-group irreps are enumerated for degree 1..={SYM_IRREP_DEGREE_CAP}, got {n}"
        )));
    }
    Ok(partitions(n).into_iter().map(|p| build_irrep(n, p)).collect())
}

/// Partitions of n in descending lexicographic order, each part list
/// non-increasing.
fn partitions(n: u32) -> Vec<Vec<u32>> {
    fn rec(remaining: u32, max_part: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if remaining == 0 {
            out.push(prefix.clone());
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            prefix.push(part);
            rec(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Standard Young tableaux of a partition: for each, the (row, col) of
/// every value 0..n−1, filled so rows and columns increase.
fn standard_tableaux(partition: &[u32]) -> Vec<Vec<(u8, u8)>> {
    let n: u32 = partition.iter().sum();
    let rows = partition.len();
    let mut fill = vec![0u32; rows];
    let mut pos = Vec::with_capacity(n as usize);
    let mut out = Vec::new();
    fn rec(
        k: u32,
        n: u32,
        partition: &[u32],
        fill: &mut [u32],
        pos: &mut Vec<(u8, u8)>,
        out: &mut Vec<Vec<(u8, u8)>>,
    ) {
        if k == n {
            out.push(pos.clone());
            return;
        }
        for r in 0..partition.len() {
            let c = fill[r];
            if c >= partition[r] {
                continue;
            }
            if r > 0 && fill[r - 1] <= c {
                continue;
            }
            fill[r] += 1;
            pos.push((r as u8, c as u8));
            rec(k + 1, n, partition, fill, pos, out);
            pos.pop();
            fill[r] -= 1;
        }
    }
    rec(0, n, partition, &mut fill, &mut pos, &mut out);
    out
}

fn build_irrep(n: u32, partition: Vec<u32>) -> SymIrrep {
    let tableaux = standard_tableaux(&partition);
    let dim = tableaux.len();
    let index: HashMap<&Vec<(u8, u8)>, usize> =
        tableaux.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut adjacent = Vec::with_capacity(n.saturating_sub(1) as usize);
    for k in 0..n.saturating_sub(1) as usize {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for (i, t) in tableaux.iter().enumerate() {
            let (r1, c1) = t[k];
            let (r2, c2) = t[k + 1];
            // axial distance between consecutive values: content difference
            let d = (c2 as i32 - r2 as i32) - (c1 as i32 - r1 as i32);
            m[(i, i)] = 1.0 / d as f64;
            if d.abs() >= 2 {
                let mut swapped = t.clone();
                swapped.swap(k, k + 1);
                let j = index[&swapped];
                m[(j, i)] = (1.0 - 1.0 / (d * d) as f64).sqrt();
            }
        }
        adjacent.push(m);
    }
    SymIrrep { n, partition, dim, adjacent }
}

/// max over nontrivial irreducible representations ρ of ∥E_{s∼S} ρ(s)∥ —
/// the representation-theoretic side of the bias identity.
pub fn bias_via_irreps(s: &GeneratorMultiset) -> Result<f64> {
    let desc = s.descriptor();
    match desc.kind() {
        GroupKind::XorBits => {
            let m = desc.param();
            if m > XOR_WALSH_BITS_CAP {
                return Err(Error::capacity(format!(
                    "enumerating 2^{m} characters exceeds the {XOR_WALSH_BITS_CAP}-bit cap"
                )));
            }
            let mut best = 0.0f64;
            match s.len() {
                Some(d) => {
                    let entries: Vec<u64> = s
                        .iter()
                        .map(|e| {
                            let GroupElem::Bits(b) = e else { unreachable!() };
                            b
                        })
                        .collect();
                    for a in 1..(1u64 << m) {
                        let sum: f64 = entries
                            .iter()
                            .map(|&b| if (a & b).count_ones() & 1 == 0 { 1.0 } else { -1.0 })
                            .sum();
                        best = best.max((sum / d as f64).abs());
                    }
                }
                None => {
                    let w = s.weights_table()?;
                    for a in 1..(1u64 << m) {
                        let sum: f64 = w
                            .iter()
                            .enumerate()
                            .map(|(g, &wg)| {
                                if (a & g as u64).count_ones() & 1 == 0 {
                                    wg
                                } else {
                                    -wg
                                }
                            })
                            .sum();
                        best = best.max(sum.abs());
                    }
                }
            }
            Ok(best.min(1.0))
        }
        GroupKind::Symmetric => {
            let Some(d) = s.len() else {
                return Err(Error::precondition(
                    "irrep averaging over permutations needs a dense multiset".to_string(),
                ));
            };
            let irreps = sym_irreps(desc.param())?;
            let mut best = 0.0f64;
            for rho in irreps.iter().filter(|r| !r.is_trivial()) {
                let mut acc = DMatrix::<f64>::zeros(rho.dim(), rho.dim());
                for e in s.iter() {
                    let GroupElem::Perm(img) = e else { unreachable!() };
                    acc += rho.image(&img);
                }
                acc.unscale_mut(d as f64);
                best = best.max(real_mat_norm(&acc));
            }
            Ok(best.min(1.0))
        }
        GroupKind::Sl2 => Err(Error::domain(
            "irreducible representations are enumerated only for bit-vector \
             and small permutation groups"
                .to_string(),
        )),
    }
}

fn real_mat_norm(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
        .max(0.0)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use crate::rng;
    use rand::Rng as _;

    fn random_perm(n: usize, rng: &mut rng::Rng) -> Vec<u8> {
        let mut p: Vec<u8> = (0..n as u8).collect();
        for i in (1..n).rev() {
            let j = (rng.gen::<u64>() % (i as u64 + 1)) as usize;
            p.swap(i, j);
        }
        p
    }

    #[test]
    fn dimension_squares_sum_to_group_order() {
        for (n, order) in [(1u32, 1usize), (2, 2), (3, 6), (4, 24), (5, 120)] {
            let irreps = sym_irreps(n).unwrap();
            let total: usize = irreps.iter().map(|r| r.dim() * r.dim()).sum();
            assert_eq!(total, order, "n = {n}");
        }
        assert!(sym_irreps(6).is_err());
    }

    #[test]
    fn images_are_orthogonal_homomorphisms() {
        let g = GroupDescriptor::symmetric(4).unwrap();
        let mut rng = rng::seeded(7);
        for rho in sym_irreps(4).unwrap() {
            for _ in 0..10 {
                let a = random_perm(4, &mut rng);
                let b = random_perm(4, &mut rng);
                let ma = rho.image(&a);
                let mb = rho.image(&b);
                // orthogonality
                let dev = (ma.transpose() * &ma - DMatrix::<f64>::identity(rho.dim(), rho.dim()))
                    .norm();
                assert!(dev < 1e-12, "orthogonality {dev}");
                // homomorphism under (a·b)(i) = a(b(i))
                let ab = g.mul(&GroupElem::Perm(a.clone()), &GroupElem::Perm(b.clone()));
                let GroupElem::Perm(ab) = ab else { unreachable!() };
                let diff = (rho.image(&ab) - &ma * &mb).norm();
                assert!(diff < 1e-12, "homomorphism {diff}");
            }
        }
    }

    #[test]
    fn sym3_character_values() {
        let irreps = sym_irreps(3).unwrap();
        // partitions in order: [3] (trivial), [2,1] (standard), [1,1,1] (sign)
        assert_eq!(irreps[0].partition(), &[3]);
        assert_eq!(irreps[1].partition(), &[2, 1]);
        assert_eq!(irreps[2].partition(), &[1, 1, 1]);
        let transposition = [1u8, 0, 2];
        let three_cycle = [1u8, 2, 0];
        assert!((irreps[1].image(&transposition).trace() - 0.0).abs() < 1e-12);
        assert!((irreps[1].image(&three_cycle).trace() - (-1.0)).abs() < 1e-12);
        assert!((irreps[2].image(&transposition)[(0, 0)] - (-1.0)).abs() < 1e-12);
        assert!((irreps[2].image(&three_cycle)[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn xor_bias_matches_spectral() {
        let g = GroupDescriptor::xor_bits(2).unwrap();
        let s = GeneratorMultiset::from_elems(
            g,
            vec![GroupElem::Bits(0b01), GroupElem::Bits(0b10), GroupElem::Bits(0b11)],
        )
        .unwrap();
        let via_irreps = bias_via_irreps(&s).unwrap();
        assert!((via_irreps - 1.0 / 3.0).abs() < 1e-12);
        assert!((via_irreps - s.bias().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn random_multiset_bias_cross_check() {
        let mut rng = rng::seeded(99);
        for trial in 0..10 {
            // symmetric group
            let g = GroupDescriptor::symmetric(4).unwrap();
            let d = 3 + (trial % 3) as usize;
            let elems: Vec<GroupElem> =
                (0..d).map(|_| GroupElem::Perm(random_perm(4, &mut rng))).collect();
            let s = GeneratorMultiset::from_elems(g, elems).unwrap();
            let spectral = s.bias().unwrap();
            let through_irreps = bias_via_irreps(&s).unwrap();
            assert!(
                (spectral - through_irreps).abs() < 1e-9,
                "sym trial {trial}: {spectral} vs {through_irreps}"
            );
            // bit vectors
            let gx = GroupDescriptor::xor_bits(4).unwrap();
            let ex: Vec<GroupElem> =
                (0..d + 2).map(|_| GroupElem::Bits(rng.gen::<u64>() & 0xF)).collect();
            let sx = GeneratorMultiset::from_elems(gx, ex).unwrap();
            let spectral_x = sx.bias().unwrap();
            let irreps_x = bias_via_irreps(&sx).unwrap();
            assert!(
                (spectral_x - irreps_x).abs() < 1e-9,
                "xor trial {trial}: {spectral_x} vs {irreps_x}"
            );
        }
    }

    #[test]
    fn sym5_bias_cross_check() {
        let mut rng = rng::seeded(123);
        let g = GroupDescriptor::symmetric(5).unwrap();
        let elems: Vec<GroupElem> =
            (0..4).map(|_| GroupElem::Perm(random_perm(5, &mut rng))).collect();
        let s = GeneratorMultiset::from_elems(g, elems).unwrap();
        let spectral = s.bias().unwrap();
        let through_irreps = bias_via_irreps(&s).unwrap();
        assert!((spectral - through_irreps).abs() < 1e-9, "{spectral} vs {through_irreps}");
    }

    #[test]
    fn sl2_is_out_of_scope() {
        let s = crate::zoo::sl2_generators(19).unwrap();
        assert!(bias_via_irreps(&s).is_err());
    }
}
