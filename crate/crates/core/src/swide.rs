//! Derandomized walk products that interleave an inner auxiliary graph
//! with the outer graph.
//!
//! A wide product couples a d₁-regular outer graph `X` (d₁ a power of
//! two, with a slot-aligned inversion) to an inner Cayley graph `Y` on
//! the bit-vector group of width `s·log₂ d₁`. An inner vertex is read
//! as `s` blocks of `log₂ d₁` bits; block `i` names the outer slot used
//! by the i-th step of each length-s window. Walking alternates one
//! inner step with one slot-driven outer step, so a t-step walk spends
//! only `log₂ d₂` fresh random bits per step instead of `log₂ d₁`,
//! while the block structure keeps consecutive outer steps close to
//! independent.

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::budget::WALK_BUDGET;
use crate::error::{Error, Result};
use crate::graph::{LocalInversion, RotationGraph};
use crate::group::{GeneratorMultiset, GroupKind};
use crate::operator::OperatorFunction;

/// Largest inner vertex count the exact distribution oracles will sweep.
pub const INNER_ENUM_CAP: u64 = 1 << 24;

/// Largest state vector (complex entries) the operator oracle assembles.
pub const SIM_STATE_CAP: usize = 2_000_000;

/// Largest total number of trajectory entries `vertex_tracks` collects.
pub const TRACK_ENTRY_CAP: u64 = 40_000_000;

/// Outer graph × inner Cayley graph, coupled through a block codec.
#[derive(Debug, Clone)]
pub struct SWideProduct {
    x: RotationGraph,
    phi: LocalInversion,
    y_gens: GeneratorMultiset,
    y_bits: Vec<u64>,
    s: u32,
    block_bits: u32,
}

impl SWideProduct {
    /// Couple outer graph `x` with the inner Cayley graph generated by
    /// `y_gens` over `s` coordinate blocks.
    ///
    /// Requirements: `x` undirected with degree a power of two and a
    /// slot-aligned inversion; `y_gens` a dense bit-vector multiset on
    /// exactly `s·log₂(deg x)` bits.
    pub fn new(x: RotationGraph, y_gens: GeneratorMultiset, s: u32) -> Result<Self> {
        if s == 0 {
            return Err(Error::domain("block count s must be ≥ 1".to_string()));
        }
        if x.is_directed() {
            return Err(Error::precondition(
                "outer graph must be undirected".to_string(),
            ));
        }
        let d1 = x.degree();
        if !d1.is_power_of_two() || d1 < 2 {
            return Err(Error::precondition(format!(
                "outer degree {d1} must be a power of two ≥ 2"
            )));
        }
        let block_bits = d1.trailing_zeros();
        let phi = x.local_inversion().ok_or_else(|| {
            Error::precondition(
                "outer graph must route each slot to a fixed return slot".to_string(),
            )
        })?;
        let want_bits = s as u64 * block_bits as u64;
        let desc = y_gens.descriptor();
        match desc.kind() {
            GroupKind::XorBits if desc.param() as u64 == want_bits => {}
            _ => {
                return Err(Error::domain(format!(
                    "inner generators must live on the {want_bits}-bit xor group \
                     (s·log₂ d₁ = {s}·{block_bits})"
                )));
            }
        }
        if y_gens.is_virtual() {
            return Err(Error::precondition(
                "inner generators must be an explicit list".to_string(),
            ));
        }
        let y_bits = y_gens
            .bits()
            .ok_or_else(|| Error::domain("inner generators must be bit vectors".to_string()))?
            .to_vec();
        if y_bits.is_empty() {
            return Err(Error::domain("inner generator list is empty".to_string()));
        }
        Ok(Self {
            x,
            phi,
            y_gens,
            y_bits,
            s,
            block_bits,
        })
    }

    pub fn outer(&self) -> &RotationGraph {
        &self.x
    }

    pub fn inner_gens(&self) -> &GeneratorMultiset {
        &self.y_gens
    }

    /// Materialize the inner Cayley graph (for spectral measurement).
    pub fn inner_graph(&self) -> Result<RotationGraph> {
        crate::graph::build::cayley(&self.y_gens)
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn block_bits(&self) -> u32 {
        self.block_bits
    }

    pub fn outer_degree(&self) -> usize {
        self.x.degree()
    }

    pub fn inner_degree(&self) -> usize {
        self.y_bits.len()
    }

    /// Number of inner vertices, d₁^s.
    pub fn inner_order(&self) -> u64 {
        1u64 << (self.s * self.block_bits)
    }

    /// Block `i` of inner vertex `y` (an outer slot in [d₁]).
    #[inline]
    pub fn block(&self, y: u64, i: u32) -> usize {
        ((y >> (i * self.block_bits)) & ((1u64 << self.block_bits) - 1)) as usize
    }

    #[inline]
    fn set_block(&self, y: u64, i: u32, a: usize) -> u64 {
        let mask = ((1u64 << self.block_bits) - 1) << (i * self.block_bits);
        (y & !mask) | ((a as u64) << (i * self.block_bits))
    }

    /// One coupled outer step: read slot `a` from block `i` of `y`, move
    /// `x` along slot `a`, and overwrite block `i` with the return slot.
    /// Applying the same step index twice returns to the start.
    pub fn rotate(&self, x: usize, y: u64, i: u32) -> Result<(usize, u64)> {
        if x >= self.x.n() || y >= self.inner_order() || i >= self.s {
            return Err(Error::domain(format!(
                "rotation argument ({x},{y},{i}) out of range"
            )));
        }
        let a = self.block(y, i);
        let (x2, back) = self.x.rot(x, a);
        debug_assert_eq!(back, self.phi.apply(a));
        Ok((x2, self.set_block(y, i, back)))
    }

    /// One inner step along generator slot `j`.
    #[inline]
    pub fn inner_step(&self, y: u64, j: u32) -> u64 {
        y ^ self.y_bits[j as usize]
    }

    /// The walk family of `t` coupled steps; step `k` moves the inner
    /// vertex along generator `j_k`, then takes the outer step driven by
    /// block `k mod s`.
    pub fn walks(&self, t: u32) -> Result<SWideWalks<'_>> {
        if t == 0 {
            return Err(Error::domain("walk length t must be ≥ 1".to_string()));
        }
        Ok(SWideWalks { p: self, t })
    }

    /// Outer-vertex trajectory (t+1 entries) of one walk.
    pub fn trajectory(&self, w: &SWideWalk) -> Result<Vec<u32>> {
        let mut x = w.x0 as usize;
        let mut y = w.y0;
        if x >= self.x.n() || y >= self.inner_order() {
            return Err(Error::domain("walk start out of range".to_string()));
        }
        let mut track = Vec::with_capacity(w.steps.len() + 1);
        track.push(x as u32);
        for (k, &j) in w.steps.iter().enumerate() {
            if j as usize >= self.y_bits.len() {
                return Err(Error::domain(format!("inner slot {j} out of range")));
            }
            y = self.inner_step(y, j);
            let (x2, y2) = self.rotate(x, y, (k as u32) % self.s)?;
            x = x2;
            y = y2;
            track.push(x as u32);
        }
        Ok(track)
    }
}

/// One walk: a start pair and the inner generator slots used per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SWideWalk {
    pub x0: u32,
    pub y0: u64,
    pub steps: Vec<u32>,
}

/// Streaming enumeration of every walk of a fixed length, in canonical
/// order (outer start, inner start, then step slots as a big-endian
/// odometer).
pub struct SWideWalks<'p> {
    p: &'p SWideProduct,
    t: u32,
}

impl SWideWalks<'_> {
    pub fn steps(&self) -> u32 {
        self.t
    }

    /// |X| · d₁^s · d₂^t, exactly.
    pub fn count(&self) -> BigUint {
        BigUint::from(self.p.x.n())
            * BigUint::from(self.p.inner_order())
            * BigUint::from(self.p.inner_degree()).pow(self.t)
    }

    /// Visit every walk with its outer trajectory (t+1 vertices).
    pub fn for_each<F>(&self, mut f: F) -> Result<()>
    where
        F: FnMut(&SWideWalk, &[u32]) -> Result<()>,
    {
        let n = self.p.x.n();
        let ny = self.p.inner_order();
        let d2 = self.p.inner_degree() as u32;
        let t = self.t as usize;
        let mut walk = SWideWalk {
            x0: 0,
            y0: 0,
            steps: vec![0u32; t],
        };
        let mut track = vec![0u32; t + 1];
        for x0 in 0..n {
            walk.x0 = x0 as u32;
            for y0 in 0..ny {
                walk.y0 = y0;
                walk.steps.iter_mut().for_each(|j| *j = 0);
                loop {
                    let mut x = x0;
                    let mut y = y0;
                    track[0] = x as u32;
                    for (k, &j) in walk.steps.iter().enumerate() {
                        y = self.p.inner_step(y, j);
                        let (x2, y2) = self.p.rotate(x, y, (k as u32) % self.p.s)?;
                        x = x2;
                        y = y2;
                        track[k + 1] = x as u32;
                    }
                    f(&walk, &track)?;
                    // Big-endian odometer over the step slots.
                    let mut pos = t;
                    loop {
                        if pos == 0 {
                            break;
                        }
                        pos -= 1;
                        walk.steps[pos] += 1;
                        if walk.steps[pos] < d2 {
                            break;
                        }
                        walk.steps[pos] = 0;
                    }
                    if pos == 0 && walk.steps[0] == 0 {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Multiply generator-multiset entries along every walk of the product:
/// entry `S[x]` is read at each outer vertex of the trajectory and the
/// products are taken newest-first. Output size is |X|·d₁^s·d₂^t.
pub fn derandomized_product(
    s_set: &GeneratorMultiset,
    p: &SWideProduct,
    t: u32,
) -> Result<GeneratorMultiset> {
    let n = p.outer().n();
    match s_set.len() {
        Some(len) if len == n => {}
        Some(len) => {
            return Err(Error::domain(format!(
                "multiset size {len} must match outer vertex count {n}"
            )));
        }
        None => {
            return Err(Error::precondition(
                "walk products need an explicit generator list".to_string(),
            ));
        }
    }
    let walks = p.walks(t)?;
    let count = walks.count();
    let budget = BigUint::from(WALK_BUDGET);
    if count > budget {
        return Err(Error::capacity(format!(
            "walk family of size {count} exceeds the walk budget {WALK_BUDGET}"
        )));
    }
    let count = count.to_usize().expect("count fits after budget check");
    let desc = s_set.descriptor();
    let elems: Vec<_> = s_set.iter().collect();
    let mut out = Vec::with_capacity(count);
    walks.for_each(|_, track| {
        let mut acc = elems[track[0] as usize].clone();
        for &v in &track[1..] {
            acc = desc.mul(&elems[v as usize], &acc);
        }
        out.push(acc);
        Ok(())
    })?;
    GeneratorMultiset::from_elems(desc, out)
}

/// Collect every outer trajectory as an index track (for composing
/// permutations or other indexed objects along the walk family).
pub fn vertex_tracks(p: &SWideProduct, t: u32) -> Result<Vec<Vec<u32>>> {
    let walks = p.walks(t)?;
    let count = walks.count();
    let entries = &count * BigUint::from(t as u64 + 1);
    if entries > BigUint::from(TRACK_ENTRY_CAP) {
        return Err(Error::capacity(format!(
            "trajectory table of {entries} entries exceeds the cap {TRACK_ENTRY_CAP}"
        )));
    }
    let mut out = Vec::with_capacity(count.to_usize().unwrap_or(0));
    walks.for_each(|_, track| {
        out.push(track.to_vec());
        Ok(())
    })?;
    Ok(out)
}

/// Closed-form bias bound for the derandomized product:
/// (λY^s + s·λY^{s−1} + s²·λY^{s−3})^⌊t/s⌋, clamped into [0,1].
///
/// Valid when the input bias satisfies λ₀ ≤ λY² − 2λX (caller-checked).
/// At desk scales the s²·λY^{s−3} term usually clamps the bound to 1;
/// it becomes meaningful only when λY ≪ 1 while s stays large.
pub fn swide_bias_bound(lambda_y: f64, s: u32, t: u32) -> f64 {
    let ly = lambda_y.max(0.0);
    let base = ly.powi(s as i32)
        + s as f64 * ly.powi(s as i32 - 1)
        + (s as f64) * (s as f64) * ly.powi(s as i32 - 3);
    let reps = (t / s) as i32;
    base.powi(reps).clamp(0.0, 1.0)
}

/// Exact outer-endpoint distribution test. Starting at `x0` with the
/// inner vertex uniform, run steps `a..=b` (one inner move along
/// `j_steps[k-a]`, then the coupled outer step at block index `k`), and
/// compare the outer endpoint distribution to `b−a+1` steps of the
/// plain averaged walk on the outer graph. Returns the total-variation
/// distance — exactly 0 when the inner graph is a Cayley graph read
/// through the block codec.
pub fn compatibility_check(
    p: &SWideProduct,
    a: u32,
    b: u32,
    j_steps: &[u32],
    x0: usize,
) -> Result<f64> {
    let inner = p.inner_graph()?;
    compatibility_check_inner(p.outer(), &p.phi, p.s, &inner, a, b, j_steps, x0)
}

/// Generalized endpoint oracle taking the inner graph as an arbitrary
/// rotation graph on d₁^s vertices. Vertices are still read through the
/// block codec, so inner graphs whose labels do not respect the block
/// structure report a positive distance; the value is an observation,
/// not an assertion.
#[allow(clippy::too_many_arguments)]
pub fn compatibility_check_inner(
    x: &RotationGraph,
    phi: &LocalInversion,
    s: u32,
    inner: &RotationGraph,
    a: u32,
    b: u32,
    j_steps: &[u32],
    x0: usize,
) -> Result<f64> {
    let d1 = x.degree();
    if !d1.is_power_of_two() {
        return Err(Error::precondition(
            "outer degree must be a power of two".to_string(),
        ));
    }
    let block_bits = d1.trailing_zeros();
    if a > b || b >= s {
        return Err(Error::domain(format!(
            "window {a}..={b} must satisfy a ≤ b ≤ s−1 = {}",
            s - 1
        )));
    }
    let m = (b - a + 1) as usize;
    if j_steps.len() != m {
        return Err(Error::domain(format!(
            "expected {m} inner slots, got {}",
            j_steps.len()
        )));
    }
    let ny = 1u64 << (s * block_bits);
    if ny > INNER_ENUM_CAP {
        return Err(Error::capacity(format!(
            "inner vertex count {ny} exceeds the enumeration cap {INNER_ENUM_CAP}"
        )));
    }
    if inner.n() as u64 != ny {
        return Err(Error::domain(format!(
            "inner graph has {} vertices, expected d₁^s = {ny}",
            inner.n()
        )));
    }
    let d2 = inner.degree() as u32;
    if let Some(&bad) = j_steps.iter().find(|&&j| j >= d2) {
        return Err(Error::domain(format!("inner slot {bad} out of range")));
    }
    if x0 >= x.n() {
        return Err(Error::domain(format!("start vertex {x0} out of range")));
    }
    let n = x.n();
    let mask = (1u64 << block_bits) - 1;
    let mut endpoint = vec![0.0f64; n];
    let w = 1.0 / ny as f64;
    for y0 in 0..ny {
        let mut xv = x0;
        let mut y = y0;
        for (k, &j) in (a..=b).zip(j_steps.iter()) {
            y = inner.neighbor(y as usize, j as usize) as u64;
            let slot = ((y >> (k * block_bits)) & mask) as usize;
            let (x2, back) = x.rot(xv, slot);
            debug_assert_eq!(back, phi.apply(slot));
            let shift = k * block_bits;
            y = (y & !(mask << shift)) | ((back as u64) << shift);
            xv = x2;
        }
        endpoint[xv] += w;
    }
    // Reference: m steps of the plain averaged walk from x0.
    let mut reference = vec![0.0f64; n];
    reference[x0] = 1.0;
    let dw = 1.0 / d1 as f64;
    for _ in 0..m {
        let mut next = vec![0.0f64; n];
        for v in 0..n {
            if reference[v] == 0.0 {
                continue;
            }
            let mass = reference[v] * dw;
            for i in 0..d1 {
                next[x.neighbor(v, i)] += mass;
            }
        }
        reference = next;
    }
    let tv = 0.5
        * endpoint
            .iter()
            .zip(reference.iter())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>();
    Ok(tv)
}

/// Operator-level window identity. For random unit vectors z, z′ on the
/// block space over the outer graph, compare
/// ⟨∏_{i=s₁..s₂}(rotateᵢ ∘ innerAvg ∘ blockMul)(z ⊗ u), z′ ⊗ u⟩ against
/// ⟨(outerAvg ∘ blockMul)^{s₂−s₁+1} z, z′⟩, where u is the uniform unit
/// vector over inner vertices. Returns the largest deviation over all
/// trials and fails certification if it exceeds 1e−9.
pub fn simulation_check(
    p: &SWideProduct,
    f: &OperatorFunction,
    s1: u32,
    s2: u32,
    trials: u32,
    seed: u64,
) -> Result<f64> {
    let n = p.outer().n();
    if f.n() != n {
        return Err(Error::domain(format!(
            "operator function covers {} vertices, outer graph has {n}",
            f.n()
        )));
    }
    if s1 > s2 || s2 >= p.s {
        return Err(Error::domain(format!(
            "window {s1}..={s2} must satisfy s₁ ≤ s₂ ≤ s−1 = {}",
            p.s - 1
        )));
    }
    if trials == 0 {
        return Err(Error::domain("need at least one trial".to_string()));
    }
    let ny = p.inner_order() as usize;
    let ell = f.ell();
    let dim = n
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(ell))
        .ok_or_else(|| Error::capacity("state dimension overflows".to_string()))?;
    if dim > SIM_STATE_CAP {
        return Err(Error::capacity(format!(
            "state dimension {dim} exceeds the cap {SIM_STATE_CAP}"
        )));
    }
    let d1 = p.outer_degree();
    let d2 = p.inner_degree();
    let inv_sqrt_ny = 1.0 / (ny as f64).sqrt();
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let z = random_unit(n * ell, seed, 2 * trial as u64);
        let zp = random_unit(n * ell, seed, 2 * trial as u64 + 1);

        // Wide side: state indexed by ((x·ny + y)·ℓ + c).
        let mut state = vec![Complex64::new(0.0, 0.0); dim];
        for x in 0..n {
            for y in 0..ny {
                for c in 0..ell {
                    state[(x * ny + y) * ell + c] = z[x * ell + c] * inv_sqrt_ny;
                }
            }
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
        for k in s1..=s2 {
            // Block multiplication by f(x) on each (x, y) cell.
            for x in 0..n {
                let m = f.mat(x);
                for y in 0..ny {
                    let base = (x * ny + y) * ell;
                    for r in 0..ell {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for c in 0..ell {
                            acc += m[(r, c)] * state[base + c];
                        }
                        scratch[base + r] = acc;
                    }
                }
            }
            // Inner averaging: xor-convolve over the generator list.
            let wy = 1.0 / d2 as f64;
            state.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for x in 0..n {
                for y in 0..ny {
                    let src = (x * ny + y) * ell;
                    for j in 0..d2 {
                        let y2 = p.inner_step(y as u64, j as u32) as usize;
                        let dst = (x * ny + y2) * ell;
                        for c in 0..ell {
                            state[dst + c] += scratch[src + c] * wy;
                        }
                    }
                }
            }
            // Coupled outer step at block index k (a permutation of cells).
            scratch.copy_from_slice(&state);
            for x in 0..n {
                for y in 0..ny {
                    let (x2, y2) = p.rotate(x, y as u64, k)?;
                    let src = (x * ny + y) * ell;
                    let dst = (x2 * ny + y2 as usize) * ell;
                    state[dst..dst + ell].copy_from_slice(&scratch[src..src + ell]);
                }
            }
        }
        let mut wide = Complex64::new(0.0, 0.0);
        for x in 0..n {
            for y in 0..ny {
                for c in 0..ell {
                    wide += state[(x * ny + y) * ell + c] * (zp[x * ell + c] * inv_sqrt_ny).conj();
                }
            }
        }

        // Plain side: (outerAvg ∘ blockMul)^m on the block space.
        let mut v = z.clone();
        for _ in 0..(s2 - s1 + 1) {
            f.apply_blocks(&mut v);
            let mut next = vec![Complex64::new(0.0, 0.0); n * ell];
            let wx = 1.0 / d1 as f64;
            for u in 0..n {
                for i in 0..d1 {
                    let nb = p.outer().neighbor(u, i);
                    for c in 0..ell {
                        next[nb * ell + c] += v[u * ell + c] * wx;
                    }
                }
            }
            v = next;
        }
        let mut plain = Complex64::new(0.0, 0.0);
        for idx in 0..n * ell {
            plain += v[idx] * zp[idx].conj();
        }

        worst = worst.max((wide - plain).norm());
    }
    if worst > 1e-9 {
        return Err(Error::certification(format!(
            "window identity deviation {worst:.3e} exceeds 1e-9"
        )));
    }
    Ok(worst)
}

fn random_unit(dim: usize, seed: u64, stream: u64) -> Vec<Complex64> {
    use rand::Rng as _;
    let mut rng = crate::rng::seeded_stream(seed, stream);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let r = (-2.0 * u1.ln()).sqrt();
            Complex64::new(
                r * (std::f64::consts::TAU * u2).cos(),
                r * (std::f64::consts::TAU * u2).sin(),
            )
        })
        .collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|c| *c /= norm);
    }
    v
}

/// Convenience: the vacuity-free part of the theorem precondition,
/// λ₀ ≤ λY² − 2λX, evaluated on measured quantities.
pub fn precondition_holds(lambda0: f64, lambda_y: f64, lambda_x: f64) -> bool {
    lambda0 <= lambda_y * lambda_y - 2.0 * lambda_x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build;
    use crate::group::{GeneratorMultiset, GroupDescriptor, GroupElem};
    use crate::walks::amplify_via_walks;

    fn xor_set(m: u32, bits: &[u64]) -> GeneratorMultiset {
        let desc = GroupDescriptor::xor_bits(m).unwrap();
        GeneratorMultiset::from_elems(desc, bits.iter().map(|&b| GroupElem::Bits(b)).collect())
            .unwrap()
    }

    /// Full-group xor Cayley graph: complete-with-loops layout whose
    /// averaged operator has λ = 0 and slot inversion = identity.
    fn full_xor_graph(m: u32) -> RotationGraph {
        let all: Vec<u64> = (0..(1u64 << m)).collect();
        build::cayley(&xor_set(m, &all)).unwrap()
    }

    fn small_product() -> SWideProduct {
        // Outer: 4 vertices, d₁ = 4 (full xor group on 2 bits).
        // Inner: 4-bit xor group, s = 2 blocks of 2 bits.
        let x = full_xor_graph(2);
        let y = xor_set(4, &[0b0001, 0b0111, 0b1000, 0b1110]);
        SWideProduct::new(x, y, 2).unwrap()
    }

    #[test]
    fn rotate_matches_hand_table_and_is_involution() {
        let p = small_product();
        // Slot inversion of a self-inverse xor Cayley graph is the
        // identity, so a coupled step moves x along slot block(y,i) and
        // leaves y unchanged.
        let y = 0b0110; // blocks (a₀, a₁) = (2, 1)
        let (x2, y2) = p.rotate(0b01, y, 0).unwrap();
        assert_eq!(x2, 0b01 ^ 0b10); // slot 2 of the outer graph applies 10
        assert_eq!(y2, y);
        let (x3, y3) = p.rotate(0b01, y, 1).unwrap();
        assert_eq!(x3, 0b01 ^ 0b01); // slot 1 applies 01
        assert_eq!(y3, y);
        // Involution at every (x, y, i).
        for x in 0..4usize {
            for y in 0..16u64 {
                for i in 0..2u32 {
                    let (xa, ya) = p.rotate(x, y, i).unwrap();
                    let (xb, yb) = p.rotate(xa, ya, i).unwrap();
                    assert_eq!((xb, yb), (x, y));
                }
            }
        }
        assert!(p.rotate(0, 0, 2).is_err());
    }

    #[test]
    fn single_block_reduces_to_replacement_rotation() {
        // s = 1: the inner vertex *is* an outer slot, and a coupled step
        // is exactly the outer rotation map.
        let x = build::cycle(6).unwrap();
        let y = xor_set(1, &[1]);
        let p = SWideProduct::new(x.clone(), y, 1).unwrap();
        for v in 0..6usize {
            for a in 0..2u64 {
                let (v2, y2) = p.rotate(v, a, 0).unwrap();
                let (want_v, want_slot) = x.rot(v, a as usize);
                assert_eq!(v2, want_v);
                assert_eq!(y2, want_slot as u64);
            }
        }
    }

    #[test]
    fn walk_counts_match_formula() {
        let x = full_xor_graph(2);
        let y = xor_set(4, &[0b0001, 0b0111]);
        let p = SWideProduct::new(x, y, 2).unwrap();
        assert_eq!(p.walks(4).unwrap().count(), BigUint::from(1024u32));
        assert_eq!(p.walks(1).unwrap().count(), BigUint::from(128u32));
        assert!(p.walks(0).is_err());
    }

    #[test]
    fn trajectories_replay_against_rotate() {
        let p = small_product();
        let walks = p.walks(3).unwrap();
        let total = walks.count().to_usize().unwrap();
        let stride = (total / 1000).max(1);
        let mut idx = 0usize;
        let mut checked = 0usize;
        walks
            .for_each(|w, track| {
                if idx % stride == 0 {
                    assert_eq!(track.len(), 4);
                    let replay = p.trajectory(w).unwrap();
                    assert_eq!(replay, track);
                    // Manual replay with explicit state.
                    let mut x = w.x0 as usize;
                    let mut y = w.y0;
                    for (k, &j) in w.steps.iter().enumerate() {
                        y = p.inner_step(y, j);
                        let (x2, y2) = p.rotate(x, y, (k as u32) % p.s()).unwrap();
                        x = x2;
                        y = y2;
                        assert_eq!(track[k + 1], x as u32);
                    }
                    checked += 1;
                }
                idx += 1;
                Ok(())
            })
            .unwrap();
        assert!(checked >= 1000);
    }

    #[test]
    fn complete_inner_single_block_matches_plain_walks() {
        // s = 1 with the inner graph on the full slot group: every slot
        // sequence appears with multiplicity d₁, so the product multiset
        // equals the plain walk amplification repeated d₁ times.
        let x = full_xor_graph(2);
        let y = xor_set(2, &[0b00, 0b01, 0b10, 0b11]);
        let p = SWideProduct::new(x.clone(), y, 1).unwrap();
        let s = xor_set(3, &[0b001, 0b010, 0b100, 0b111]);
        let t = 2;
        let wide = derandomized_product(&s, &p, t).unwrap();
        let plain = amplify_via_walks(&s, &x, t).unwrap();
        let mut wide_bits: Vec<u64> = wide.bits().unwrap().to_vec();
        let mut plain_bits: Vec<u64> = plain
            .bits()
            .unwrap()
            .iter()
            .flat_map(|&b| std::iter::repeat(b).take(4))
            .collect();
        wide_bits.sort_unstable();
        plain_bits.sort_unstable();
        assert_eq!(wide_bits, plain_bits);
    }

    #[test]
    fn products_have_two_factors_at_t1() {
        // t = 1 products are pairs S[x₁]·S[x₀]; on an xor group every
        // output must be a xor of two input entries.
        let p = small_product();
        let s = xor_set(4, &[0b0001, 0b0010, 0b0100, 0b1000]);
        let out = derandomized_product(&s, &p, 1).unwrap();
        assert_eq!(out.len().unwrap(), 4 * 16 * 4);
        let inputs = s.bits().unwrap();
        for &b in out.bits().unwrap() {
            let ok = inputs
                .iter()
                .any(|&u| inputs.iter().any(|&v| (u ^ v) == b));
            assert!(ok, "product {b:04b} is not a two-element xor");
        }
    }

    #[test]
    fn bound_formula_examples() {
        // Small s: the s²λ^{s−3} term dominates and clamps to 1.
        assert_eq!(swide_bias_bound(0.1, 4, 8), 1.0);
        // Larger s with tiny λ: meaningful bound.
        let b = swide_bias_bound(0.01, 8, 16);
        let base = 0.01f64.powi(8) + 8.0 * 0.01f64.powi(7) + 64.0 * 0.01f64.powi(5);
        assert!((b - base * base).abs() < 1e-24);
        assert!(b > 4.09e-17 && b < 4.11e-17);
        // Shorter walk than one block window: exponent 0.
        assert_eq!(swide_bias_bound(0.5, 4, 3), 1.0);
        // Degenerate inner spectra keep the formula finite.
        assert_eq!(swide_bias_bound(0.0, 2, 4), 1.0); // 0⁻¹ term clamps
        assert_eq!(swide_bias_bound(0.0, 4, 4), 0.0); // exact zero at s ≥ 4
    }

    #[test]
    fn compatibility_zero_for_cayley_inner() {
        let p = small_product();
        let d2 = p.inner_degree() as u32;
        for a in 0..2u32 {
            for b in a..2u32 {
                let m = (b - a + 1) as usize;
                let mut j = vec![0u32; m];
                loop {
                    for x0 in 0..4usize {
                        let tv = compatibility_check(&p, a, b, &j, x0).unwrap();
                        assert!(tv <= 1e-12, "tv = {tv} at a={a} b={b} j={j:?} x0={x0}");
                    }
                    let mut pos = m;
                    loop {
                        if pos == 0 {
                            break;
                        }
                        pos -= 1;
                        j[pos] += 1;
                        if j[pos] < d2 {
                            break;
                        }
                        j[pos] = 0;
                    }
                    if pos == 0 && j[0] == 0 {
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn compatibility_three_blocks_on_cycle() {
        // d₁ = 2 outer cycle, s = 3 blocks of one bit each.
        let x = build::cycle(16).unwrap();
        let y = xor_set(3, &[0b001, 0b010, 0b100, 0b111]);
        let p = SWideProduct::new(x, y, 3).unwrap();
        for a in 0..3u32 {
            for b in a..3u32 {
                let m = (b - a + 1) as usize;
                for combo in 0..4usize.pow(m as u32) {
                    let j: Vec<u32> = (0..m)
                        .map(|k| ((combo / 4usize.pow(k as u32)) % 4) as u32)
                        .collect();
                    for x0 in [0usize, 5, 11] {
                        let tv = compatibility_check(&p, a, b, &j, x0).unwrap();
                        assert!(tv <= 1e-12, "tv = {tv}");
                    }
                }
            }
        }
    }

    #[test]
    fn scrambled_inner_labels_break_compatibility() {
        use rand::seq::SliceRandom as _;
        let p = small_product();
        let inner = p.inner_graph().unwrap();
        let ny = inner.n();
        // Relabel inner vertices by a seeded random permutation; the
        // graph is unchanged as a graph, but the block codec now reads
        // meaningless slots.
        let mut perm: Vec<usize> = (0..ny).collect();
        let mut rng = crate::rng::seeded(11);
        perm.shuffle(&mut rng);
        let mut rot = vec![(0u32, 0u32); ny * inner.degree()];
        for v in 0..ny {
            for i in 0..inner.degree() {
                let (u, j) = inner.rot(v, i);
                rot[perm[v] * inner.degree() + i] = (perm[u] as u32, j as u32);
            }
        }
        let scrambled = RotationGraph::new(ny, inner.degree(), false, rot).unwrap();
        let phi = p.outer().local_inversion().unwrap();
        let mut max_tv = 0.0f64;
        for a in 0..2u32 {
            for b in a..2u32 {
                let m = (b - a + 1) as usize;
                for combo in 0..4usize.pow(m as u32) {
                    let j: Vec<u32> = (0..m)
                        .map(|k| ((combo / 4usize.pow(k as u32)) % 4) as u32)
                        .collect();
                    for x0 in 0..4usize {
                        let tv = compatibility_check_inner(
                            p.outer(),
                            &phi,
                            p.s(),
                            &scrambled,
                            a,
                            b,
                            &j,
                            x0,
                        )
                        .unwrap();
                        assert!((0.0..=1.0 + 1e-12).contains(&tv));
                        max_tv = max_tv.max(tv);
                    }
                }
            }
        }
        assert!(
            max_tv > 1e-9,
            "scrambled labels should be detectable, max tv = {max_tv}"
        );
    }

    #[test]
    fn window_identity_constant_function() {
        let p = small_product();
        let id2 = nalgebra::DMatrix::<Complex64>::identity(2, 2);
        let f = OperatorFunction::new(vec![id2; 4]).unwrap();
        let dev = simulation_check(&p, &f, 0, 1, 5, 3).unwrap();
        assert!(dev <= 1e-12, "dev = {dev}");
    }

    #[test]
    fn window_identity_random_unitaries() {
        let p = small_product();
        let f = crate::operator::random_unitary_function(4, 2, 77).unwrap();
        let dev = simulation_check(&p, &f, 0, 1, 10, 5).unwrap();
        assert!(dev <= 1e-10, "dev = {dev}");
    }

    #[test]
    fn window_identity_single_step() {
        let p = small_product();
        let f = crate::operator::random_unitary_function(4, 2, 78).unwrap();
        for s1 in 0..2u32 {
            let dev = simulation_check(&p, &f, s1, s1, 4, 9).unwrap();
            assert!(dev <= 1e-12, "dev = {dev}");
        }
    }

    /// Hypercube generators: the standard basis of the width-w xor group.
    fn basis_gens(w: u32) -> Vec<u64> {
        (0..w).map(|i| 1u64 << i).collect()
    }

    enum BaseSet {
        /// The full m-bit group (exact bias 0).
        Full(u32),
        /// A 4-entry list on m bits, squared once by a walk product on
        /// the complete 4-vertex outer graph (16 entries, bias²).
        Boosted(u32, [u64; 4]),
    }

    impl BaseSet {
        fn build(&self) -> GeneratorMultiset {
            match self {
                BaseSet::Full(m) => {
                    let all: Vec<u64> = (0..(1u64 << m)).collect();
                    xor_set(*m, &all)
                }
                BaseSet::Boosted(m, bits) => {
                    let s0 = xor_set(*m, bits);
                    amplify_via_walks(&s0, &full_xor_graph(2), 1).unwrap()
                }
            }
        }
    }

    #[test]
    fn end_to_end_bias_respects_bound() {
        // Ten instances engineered so the measured quantities satisfy
        // λ₀ ≤ λY² − 2λX (outer graphs here have λX = 0 exactly). The
        // closed-form bound is usually clamped to 1 at enumerable sizes
        // — its meaningful regime needs inner degrees far beyond
        // exhaustive walk budgets — so the substance checked here is the
        // precondition engineering, the exact walk count, and the exact
        // bias falling under the bound.
        let q8_plus: Vec<u64> = {
            let mut v = basis_gens(8);
            v.push(0b1111_1111);
            v.push(0b1010_1010);
            v
        };
        let instances: Vec<(BaseSet, u32, u32, Vec<u64>)> = vec![
            // (base set, s, t, inner generators); |V_X| = |S|.
            (BaseSet::Full(2), 2, 2, basis_gens(4)),
            (BaseSet::Full(2), 2, 4, basis_gens(4)),
            (BaseSet::Full(2), 2, 5, basis_gens(4)),
            (BaseSet::Full(2), 3, 3, basis_gens(6)),
            (BaseSet::Full(3), 3, 3, {
                let mut v = basis_gens(9);
                v.push(0b111_111_111);
                v
            }),
            (BaseSet::Boosted(3, [0b001, 0b010, 0b100, 0b110]), 2, 2, basis_gens(8)),
            (BaseSet::Boosted(3, [0b001, 0b010, 0b100, 0b110]), 2, 3, basis_gens(8)),
            (BaseSet::Full(4), 2, 2, basis_gens(8)),
            (BaseSet::Boosted(3, [0b001, 0b010, 0b101, 0b111]), 2, 2, basis_gens(8)),
            (BaseSet::Full(4), 2, 3, q8_plus),
        ];
        for (idx, (base, s, t, y_bits)) in instances.into_iter().enumerate() {
            let s_set = base.build();
            let n = s_set.len().unwrap();
            assert!(n.is_power_of_two());
            let b = n.trailing_zeros();
            let x = full_xor_graph(b);
            let lambda_x = x.lambda().unwrap();
            assert!(lambda_x < 1e-12);
            let y = xor_set(b * s, &y_bits);
            let p = SWideProduct::new(x, y, s).unwrap();
            let lambda_y = p.inner_graph().unwrap().lambda().unwrap();
            let lambda0 = s_set.bias().unwrap();
            assert!(
                precondition_holds(lambda0, lambda_y, lambda_x),
                "instance {idx}: λ₀={lambda0} λY={lambda_y} λX={lambda_x}"
            );
            let out = derandomized_product(&s_set, &p, t).unwrap();
            let expected = BigUint::from(n)
                * BigUint::from(p.inner_order())
                * BigUint::from(p.inner_degree()).pow(t);
            assert_eq!(BigUint::from(out.len().unwrap()), expected);
            let bias = out.bias().unwrap();
            let bound = swide_bias_bound(lambda_y, s, t);
            assert!(
                bias <= bound + 1e-9,
                "instance {idx}: bias {bias} exceeds bound {bound} (λY={lambda_y}, s={s}, t={t})"
            );
        }
    }

    #[test]
    fn rejects_bad_configurations() {
        let x = build::petersen().unwrap(); // degree 3: not a power of two
        let y = xor_set(2, &[0b01]);
        assert!(SWideProduct::new(x, y, 1).is_err());
        let x = full_xor_graph(2);
        let y = xor_set(3, &[0b001]); // wrong width for s=2 (needs 4 bits)
        assert!(SWideProduct::new(x, y, 2).is_err());
        let p = small_product();
        let s_small = xor_set(4, &[0b0001, 0b0010]);
        assert!(derandomized_product(&s_small, &p, 1).is_err());
    }
}
