//! Regular multigraphs in rotation-map form.
//!
//! A d-regular multigraph on n vertices is stored as its rotation map:
//! `rot(v, i) = (u, j)` means the i-th edge slot of v leads to u and
//! arrives in u's j-th slot. For undirected graphs the map is an
//! involution; directed graphs drop that requirement and the return slot
//! is formal. All walk machinery addresses edges by (vertex, slot), so
//! slot order is part of the value.

pub mod build;
pub mod io;
pub mod spectral;

use crate::budget::PORT_CAP;
use crate::error::{Error, Result};

pub use spectral::{SpectralMethod, SpectralReport};

/// A map φ on edge slots with the property that walking out of slot j
/// always arrives in slot φ(j), independent of the vertex. Graphs with
/// this structure (Cayley graphs, slot-aligned products) support
/// derandomized walk constructions that must undo a step locally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalInversion(Vec<u32>);

impl LocalInversion {
    pub fn new(phi: Vec<u32>) -> Result<Self> {
        let d = phi.len();
        for (j, &k) in phi.iter().enumerate() {
            if k as usize >= d || phi[k as usize] as usize != j {
                return Err(Error::domain(format!(
                    "slot inversion is not an involution at slot {j}"
                )));
            }
        }
        Ok(Self(phi))
    }

    pub fn identity(d: usize) -> Self {
        Self((0..d as u32).collect())
    }

    pub fn apply(&self, j: usize) -> usize {
        self.0[j] as usize
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// d-regular multigraph with explicit rotation map.
#[derive(Debug, Clone)]
pub struct RotationGraph {
    n: usize,
    d: usize,
    directed: bool,
    /// `rot[v*d + i] = (u, j)`.
    rot: Vec<(u32, u32)>,
}

impl RotationGraph {
    pub fn new(n: usize, d: usize, directed: bool, rot: Vec<(u32, u32)>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::domain("graph needs n ≥ 1 and d ≥ 1".to_string()));
        }
        if n.checked_mul(d).is_none() || n * d > PORT_CAP {
            return Err(Error::capacity(format!(
                "rotation table n·d = {n}·{d} exceeds the slot cap {PORT_CAP}"
            )));
        }
        if rot.len() != n * d {
            return Err(Error::domain(format!(
                "rotation table has {} entries, expected n·d = {}",
                rot.len(),
                n * d
            )));
        }
        for (idx, &(u, j)) in rot.iter().enumerate() {
            if u as usize >= n || j as usize >= d {
                return Err(Error::domain(format!(
                    "rotation entry {idx} points to ({u},{j}) outside {n}×{d}"
                )));
            }
        }
        let g = Self { n, d, directed, rot };
        if !directed {
            g.check_involution()?;
        }
        Ok(g)
    }

    /// Directed graph from plain neighbor lists; return slots are formal
    /// (the walk never uses them to step backwards).
    pub fn directed_from_neighbors(n: usize, d: usize, nbrs: Vec<u32>) -> Result<Self> {
        if nbrs.len() != n * d {
            return Err(Error::domain("neighbor list length is not n·d".to_string()));
        }
        let rot = nbrs
            .iter()
            .enumerate()
            .map(|(idx, &u)| (u, (idx % d) as u32))
            .collect();
        Self::new(n, d, true, rot)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    #[inline]
    pub fn rot(&self, v: usize, i: usize) -> (usize, usize) {
        let (u, j) = self.rot[v * self.d + i];
        (u as usize, j as usize)
    }

    #[inline]
    pub fn neighbor(&self, v: usize, i: usize) -> usize {
        self.rot[v * self.d + i].0 as usize
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.rot
    }

    /// Verify Rot∘Rot = id (undirected structural invariant).
    pub fn check_involution(&self) -> Result<()> {
        for v in 0..self.n {
            for i in 0..self.d {
                let (u, j) = self.rot(v, i);
                if self.rot(u, j) != (v, i) {
                    return Err(Error::domain(format!(
                        "rotation map is not an involution at ({v},{i})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The slot inversion φ with rot(v, j).1 = φ(j) for every v, if the
    /// graph has one.
    pub fn local_inversion(&self) -> Option<LocalInversion> {
        if self.directed {
            return None;
        }
        let phi: Vec<u32> = (0..self.d).map(|j| self.rot[j].1).collect();
        for v in 0..self.n {
            for j in 0..self.d {
                if self.rot[v * self.d + j].1 != phi[j] {
                    return None;
                }
            }
        }
        LocalInversion::new(phi).ok()
    }

    /// Averaged walk operator as a dense row-stochastic matrix.
    pub fn dense_operator(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::<f64>::zeros(self.n, self.n);
        let w = 1.0 / self.d as f64;
        for v in 0..self.n {
            for i in 0..self.d {
                m[(v, self.neighbor(v, i))] += w;
            }
        }
        m
    }

    /// Expansion parameter λ: largest non-principal singular value of the
    /// averaged walk operator.
    pub fn lambda(&self) -> Result<f64> {
        Ok(self.lambda_report()?.value)
    }

    pub fn lambda_report(&self) -> Result<SpectralReport> {
        spectral::lambda_report(self)
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for i in 0..self.d {
                let u = self.neighbor(v, i);
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    /// Longest shortest-path distance; `None` when disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = std::collections::VecDeque::new();
        for s in 0..self.n {
            dist.iter_mut().for_each(|x| *x = usize::MAX);
            dist[s] = 0;
            queue.clear();
            queue.push_back(s);
            let mut reached = 1;
            while let Some(v) = queue.pop_front() {
                for i in 0..self.d {
                    let u = self.neighbor(v, i);
                    if dist[u] == usize::MAX {
                        dist[u] = dist[v] + 1;
                        best = best.max(dist[u]);
                        reached += 1;
                        queue.push_back(u);
                    }
                }
            }
            if reached != self.n {
                return None;
            }
        }
        Some(best)
    }

    /// t-step walk graph: same vertices, degree d^t. A slot encodes the
    /// step sequence (j₁,…,j_t) with j₁ in the most significant digit;
    /// the return slot carries the reversed arrival slots, which keeps
    /// the rotation an involution.
    pub fn power(&self, t: u32) -> Result<RotationGraph> {
        if t == 0 {
            return Err(Error::domain("walk power t must be ≥ 1".to_string()));
        }
        let dt = (self.d as u128).checked_pow(t).ok_or_else(|| {
            Error::capacity(format!("degree {}^{t} overflows", self.d))
        })?;
        let total = dt.checked_mul(self.n as u128).filter(|&x| x <= PORT_CAP as u128);
        let Some(_) = total else {
            return Err(Error::capacity(format!(
                "walk power table n·d^t = {}·{}^{t} exceeds the slot cap {PORT_CAP}",
                self.n, self.d
            )));
        };
        let dt = dt as usize;
        let mut rot = Vec::with_capacity(self.n * dt);
        let mut digits = vec![0usize; t as usize];
        let mut returns = vec![0usize; t as usize];
        for v in 0..self.n {
            for p in 0..dt {
                // big-endian digit split of the slot index
                let mut rem = p;
                for k in (0..t as usize).rev() {
                    digits[k] = rem % self.d;
                    rem /= self.d;
                }
                let mut cur = v;
                for k in 0..t as usize {
                    let (u, r) = self.rot(cur, digits[k]);
                    cur = u;
                    returns[k] = r;
                }
                let mut q = 0usize;
                for k in (0..t as usize).rev() {
                    q = q * self.d + returns[k];
                }
                rot.push((cur as u32, q as u32));
            }
        }
        RotationGraph::new(self.n, dt, self.directed, rot)
    }
}

#[cfg(test)]
mod tests {
    use super::build;
    use super::*;

    #[test]
    fn involution_rejects_broken_maps() {
        // two vertices, one edge each — but mismatched return slot
        let bad = RotationGraph::new(2, 1, false, vec![(1, 0), (0, 0)]);
        assert!(bad.is_ok());
        let broken = RotationGraph::new(2, 1, false, vec![(1, 0), (1, 0)]);
        assert!(broken.is_err());
    }

    #[test]
    fn cycle_local_inversion() {
        let c = build::cycle(7).unwrap();
        let phi = c.local_inversion().unwrap();
        assert_eq!(phi.apply(0), 1);
        assert_eq!(phi.apply(1), 0);
    }

    #[test]
    fn complete_with_loops_has_no_local_inversion() {
        let g = build::complete_with_loops(4).unwrap();
        g.check_involution().unwrap();
        assert!(g.local_inversion().is_none());
    }

    #[test]
    fn power_is_involutive_and_counts_walks() {
        let c = build::cycle(5).unwrap();
        let p = c.power(3).unwrap();
        assert_eq!(p.degree(), 8);
        p.check_involution().unwrap();
        // endpoint of slot (j1 j2 j3) must equal stepping one at a time
        for v in 0..5 {
            for slot in 0..8 {
                let (j1, j2, j3) = (slot / 4, (slot / 2) % 2, slot % 2);
                let mut cur = v;
                for j in [j1, j2, j3] {
                    cur = c.neighbor(cur, j);
                }
                assert_eq!(p.neighbor(v, slot), cur);
            }
        }
    }

    #[test]
    fn diameter_of_cycle() {
        assert_eq!(build::cycle(8).unwrap().diameter(), Some(4));
        assert_eq!(build::cycle(9).unwrap().diameter(), Some(4));
    }
}
