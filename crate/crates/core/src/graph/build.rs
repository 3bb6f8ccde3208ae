//! Canonical graph constructors.
//!
//! Every builder fixes a deterministic slot order, so two runs (or two
//! machines) produce byte-identical rotation tables.

use std::collections::HashMap;
use std::collections::VecDeque;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::group::GeneratorMultiset;
use crate::rng;

use super::RotationGraph;

/// Cycle Cₙ; slot 0 steps forward, slot 1 backward.
pub fn cycle(n: usize) -> Result<RotationGraph> {
    if n < 3 {
        return Err(Error::domain("cycle needs n ≥ 3".to_string()));
    }
    let mut rot = Vec::with_capacity(n * 2);
    for v in 0..n {
        rot.push((((v + 1) % n) as u32, 1));
        rot.push((((v + n - 1) % n) as u32, 0));
    }
    RotationGraph::new(n, 2, false, rot)
}

/// Complete graph Kₙ without self-loops; slot i of v leads to the i-th
/// vertex different from v, in increasing order.
pub fn complete(n: usize) -> Result<RotationGraph> {
    if n < 2 {
        return Err(Error::domain("complete graph needs n ≥ 2".to_string()));
    }
    let d = n - 1;
    let mut rot = Vec::with_capacity(n * d);
    for v in 0..n {
        for i in 0..d {
            let u = if i < v { i } else { i + 1 };
            let j = if v < u { v } else { v - 1 };
            rot.push((u as u32, j as u32));
        }
    }
    RotationGraph::new(n, d, false, rot)
}

/// Complete graph with self-loops: slot i of v leads straight to vertex i,
/// returning on slot v. Its averaged operator is exactly J/n, so λ = 0: a
/// one-step walk on it is an independent uniform sample.
pub fn complete_with_loops(n: usize) -> Result<RotationGraph> {
    if n == 0 {
        return Err(Error::domain("graph needs n ≥ 1".to_string()));
    }
    let mut rot = Vec::with_capacity(n * n);
    for v in 0..n {
        for i in 0..n {
            rot.push((i as u32, v as u32));
        }
    }
    RotationGraph::new(n, n, false, rot)
}

/// Boolean hypercube on 2^m vertices; slot i flips bit i.
pub fn hypercube(m: u32) -> Result<RotationGraph> {
    if m == 0 || m > 24 {
        return Err(Error::domain("hypercube needs 1 ≤ m ≤ 24".to_string()));
    }
    let n = 1usize << m;
    let mut rot = Vec::with_capacity(n * m as usize);
    for v in 0..n {
        for i in 0..m {
            rot.push(((v ^ (1 << i)) as u32, i));
        }
    }
    RotationGraph::new(n, m as usize, false, rot)
}

/// The Petersen graph (3-regular, 10 vertices, λ = 2/3) — a handy fixed
/// test instance with a closed-form spectrum.
pub fn petersen() -> Result<RotationGraph> {
    // vertices = 2-subsets of {0..4}, adjacent iff disjoint
    let mut sets = Vec::new();
    for a in 0..5u8 {
        for b in (a + 1)..5 {
            sets.push((a, b));
        }
    }
    let lists: Vec<Vec<usize>> = sets
        .iter()
        .map(|&(a, b)| {
            sets.iter()
                .enumerate()
                .filter(|(_, &(c, d))| c != a && c != b && d != a && d != b)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    from_adjacency_lists(&lists)
}

/// Simple undirected graph from sorted adjacency lists (no loops, no
/// multi-edges); the return slot of an edge is the index of the source in
/// the target's list.
pub fn from_adjacency_lists(lists: &[Vec<usize>]) -> Result<RotationGraph> {
    let n = lists.len();
    if n == 0 {
        return Err(Error::domain("graph needs n ≥ 1".to_string()));
    }
    let d = lists[0].len();
    let mut rot = Vec::with_capacity(n * d);
    for (v, nbrs) in lists.iter().enumerate() {
        if nbrs.len() != d {
            return Err(Error::domain(format!("vertex {v} has degree {} ≠ {d}", nbrs.len())));
        }
        for &u in nbrs {
            if u >= n || u == v {
                return Err(Error::domain(format!("bad neighbor {u} of {v}")));
            }
            let j = lists[u]
                .iter()
                .position(|&w| w == v)
                .ok_or_else(|| Error::domain(format!("edge {v}→{u} has no reverse")))?;
            rot.push((u as u32, j as u32));
        }
    }
    RotationGraph::new(n, d, false, rot)
}

/// Random d-regular multigraph on n vertices: a union of ⌊d/2⌋ seeded
/// random permutations (each used forward on one slot and backward on the
/// next) plus, for odd d, a random perfect matching (n must then be even).
/// Self-loops and parallel edges may occur; the result is a multigraph.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<RotationGraph> {
    if n < 2 || d == 0 {
        return Err(Error::domain("random regular graph needs n ≥ 2, d ≥ 1".to_string()));
    }
    if d % 2 == 1 && n % 2 == 1 {
        return Err(Error::domain(
            "odd degree needs an even vertex count for the matching slot".to_string(),
        ));
    }
    let mut rng = rng::seeded(seed);
    let shuffled = |rng: &mut crate::rng::Rng| -> Vec<u32> {
        let mut p: Vec<u32> = (0..n as u32).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            p.swap(i, j);
        }
        p
    };
    let mut rot = vec![(0u32, 0u32); n * d];
    for k in 0..d / 2 {
        let p = shuffled(&mut rng);
        let mut pinv = vec![0u32; n];
        for (v, &u) in p.iter().enumerate() {
            pinv[u as usize] = v as u32;
        }
        for v in 0..n {
            rot[v * d + 2 * k] = (p[v], (2 * k + 1) as u32);
            rot[v * d + 2 * k + 1] = (pinv[v], (2 * k) as u32);
        }
    }
    if d % 2 == 1 {
        let order = shuffled(&mut rng);
        for pair in order.chunks(2) {
            let (a, b) = (pair[0] as usize, pair[1] as usize);
            rot[a * d + d - 1] = (b as u32, (d - 1) as u32);
            rot[b * d + d - 1] = (a as u32, (d - 1) as u32);
        }
    }
    RotationGraph::new(n, d, false, rot)
}

/// Cayley graph of a generating multiset. Vertices are group elements in
/// canonical enumeration order; slot j of g leads to s_j·g. For symmetric
/// multisets the slots are paired canonically (k-th occurrence of s with
/// the k-th occurrence of s⁻¹), giving an undirected rotation map whose
/// slot inversion is vertex-independent; otherwise the graph is directed.
pub fn cayley(s: &GeneratorMultiset) -> Result<RotationGraph> {
    let desc = s.descriptor();
    let idx = desc.index()?;
    let n = idx.len();
    let d = s
        .len()
        .ok_or_else(|| Error::capacity("cannot build a Cayley graph from a weight table".to_string()))?;
    if s.is_symmetric() {
        let phi = pair_inverse_slots(s)?;
        let mut rot = Vec::with_capacity(n * d);
        for g in 0..n {
            for j in 0..d {
                let h = desc.mul(&s.elem(j), idx.elem(g));
                rot.push((idx.position(&h) as u32, phi[j]));
            }
        }
        RotationGraph::new(n, d, false, rot)
    } else {
        let mut nbrs = Vec::with_capacity(n * d);
        for g in 0..n {
            for j in 0..d {
                let h = desc.mul(&s.elem(j), idx.elem(g));
                nbrs.push(idx.position(&h) as u32);
            }
        }
        RotationGraph::directed_from_neighbors(n, d, nbrs)
    }
}

/// Canonical involution pairing slots of each generator with slots of its
/// inverse (requires a symmetric multiset).
pub fn pair_inverse_slots(s: &GeneratorMultiset) -> Result<Vec<u32>> {
    let desc = s.descriptor();
    let d = s
        .len()
        .ok_or_else(|| Error::capacity("cannot pair slots of a weight table".to_string()))?;
    let mut queues: HashMap<crate::group::GroupElem, VecDeque<u32>> = HashMap::new();
    for j in 0..d {
        queues.entry(s.elem(j)).or_default().push_back(j as u32);
    }
    let mut phi = vec![u32::MAX; d];
    for j in 0..d {
        if phi[j] != u32::MAX {
            continue;
        }
        let e = s.elem(j);
        let inv = desc.inv(&e);
        if inv == e {
            queues.get_mut(&e).unwrap().pop_front();
            phi[j] = j as u32;
        } else {
            queues.get_mut(&e).unwrap().pop_front();
            let q = queues
                .get_mut(&inv)
                .and_then(|q| q.pop_front())
                .ok_or_else(|| {
                    Error::precondition(
                        "multiset is not closed under inverses; cannot pair slots".to_string(),
                    )
                })?;
            phi[j] = q;
            phi[q as usize] = j as u32;
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupDescriptor, GroupElem};

    #[test]
    fn petersen_lambda() {
        let g = petersen().unwrap();
        assert_eq!(g.n(), 10);
        assert_eq!(g.degree(), 3);
        assert!((g.lambda().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hypercube_lambda() {
        // eigenvalues (m − 2k)/m include −1 at k = m: bipartite
        let g = hypercube(4).unwrap();
        assert!((g.lambda().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_regular_shape() {
        for (n, d, seed) in [(10, 4, 1u64), (17, 6, 2), (12, 3, 3)] {
            let g = random_regular(n, d, seed).unwrap();
            g.check_involution().unwrap();
            assert_eq!((g.n(), g.degree()), (n, d));
        }
        // determinism
        let a = random_regular(20, 4, 7).unwrap();
        let b = random_regular(20, 4, 7).unwrap();
        assert_eq!(a.entries(), b.entries());
        assert!(random_regular(9, 3, 0).is_err(), "odd degree, odd n");
    }

    #[test]
    fn cayley_of_three_bit_vectors_is_k4() {
        let desc = GroupDescriptor::xor_bits(2).unwrap();
        let s = GeneratorMultiset::from_elems(
            desc,
            vec![GroupElem::Bits(0b10), GroupElem::Bits(0b01), GroupElem::Bits(0b11)],
        )
        .unwrap();
        let g = cayley(&s).unwrap();
        assert!(!g.is_directed());
        g.check_involution().unwrap();
        // K₄: λ = 1/3, matching the multiset bias exactly
        assert!((g.lambda().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((g.lambda().unwrap() - s.bias().unwrap()).abs() < 1e-12);
        // xor generators are involutions: slot inversion is the identity
        let phi = g.local_inversion().unwrap();
        for j in 0..3 {
            assert_eq!(phi.apply(j), j);
        }
    }

    #[test]
    fn cayley_slot_pairing_with_repeats() {
        let desc = GroupDescriptor::symmetric(3).unwrap();
        let a = GroupElem::Perm(vec![1, 2, 0]); // 3-cycle
        let ainv = desc.inv(&a);
        let s = GeneratorMultiset::from_elems(
            desc,
            vec![a.clone(), a.clone(), ainv.clone(), ainv.clone()],
        )
        .unwrap();
        let phi = pair_inverse_slots(&s).unwrap();
        assert_eq!(phi, vec![2, 3, 0, 1]);
        let g = cayley(&s).unwrap();
        g.check_involution().unwrap();
        let li = g.local_inversion().unwrap();
        assert_eq!(li.as_slice(), &[2, 3, 0, 1]);
    }

    #[test]
    fn directed_cayley_from_asymmetric_set() {
        let desc = GroupDescriptor::symmetric(3).unwrap();
        let s = GeneratorMultiset::from_elems(desc, vec![GroupElem::Perm(vec![1, 2, 0])])
            .unwrap();
        let g = cayley(&s).unwrap();
        assert!(g.is_directed());
        // single 3-cycle shift: nontrivial singular values are 1
        assert!((g.lambda().unwrap() - 1.0).abs() < 1e-10);
    }
}
