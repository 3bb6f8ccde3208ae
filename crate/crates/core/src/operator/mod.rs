//! Operator-valued functions on graph vertices and the machinery that
//! certifies their norm claims.
//!
//! A function f assigns to each vertex x a complex ℓ×ℓ contraction
//! f(x). Three operators built from f drive everything here:
//!
//! * the block-diagonal bias operator Π_f on ℂ^ℓ ⊗ ℂ^n (block x is f(x)),
//! * the vertex-mixing step Å_X = (A_X/d) ⊗ I_ℓ of a rotation graph X,
//! * the lift/project pair L, P between ℂ^ℓ and ℂ^ℓ ⊗ ℂ^n.
//!
//! The composition P ∘ Π_f ∘ (Å_X Π_f)^t ∘ L equals the average of the
//! ordered products f(s_t)⋯f(s₀) over all t-step walks, which is why
//! two-step norm bounds on Å_X Π_f translate into bias bounds for
//! walk-amplified generator multisets.

pub mod io;

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;

use crate::budget::dense_cap;
use crate::error::{Error, Result};
use crate::graph::RotationGraph;
use crate::group::{GeneratorMultiset, GroupElem, GroupKind};
use crate::rng;
use crate::walks::{walk_bias_bound, BoundMode, WalkCollection};

/// Operation budget for brute-force walk-product averaging.
const WALK_PRODUCT_OP_BUDGET: u64 = 2_000_000_000;
/// Matrices up to this dimension take the dense-eigensolver path.
const DENSE_ELL_CAP: usize = 256;
/// Norm slack accepted on the contraction invariant.
const CONTRACTION_TOL: f64 = 1e-9;

const PI_SEED: u64 = 0x5EED_C0C0;
const PI_TOL: f64 = 1e-11;
const PI_MIN_ITERS: u64 = 32;
const PI_MAX_ITERS: u64 = 20_000;
const PI_RESTARTS: u64 = 3;

/// A map from the n vertices of a graph to complex ℓ×ℓ matrices of
/// operator norm at most 1 (within [`CONTRACTION_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFunction {
    n: usize,
    ell: usize,
    mats: Vec<DMatrix<Complex64>>,
}

impl OperatorFunction {
    pub fn new(mats: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::domain("an operator function needs at least one vertex".to_string()));
        }
        let ell = mats[0].nrows();
        if ell == 0 {
            return Err(Error::domain("matrix dimension must be positive".to_string()));
        }
        for (x, m) in mats.iter().enumerate() {
            if m.nrows() != ell || m.ncols() != ell {
                return Err(Error::domain(format!(
                    "matrix at vertex {x} is {}×{}, expected {ell}×{ell}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let norm = complex_mat_norm(m)?;
            if norm > 1.0 + CONTRACTION_TOL {
                return Err(Error::precondition(format!(
                    "matrix at vertex {x} has operator norm {norm} > 1"
                )));
            }
        }
        Ok(Self { n: mats.len(), ell, mats })
    }

    /// Scalar-valued function (ℓ = 1).
    pub fn from_scalars(vals: Vec<Complex64>) -> Result<Self> {
        Self::new(vals.into_iter().map(|v| DMatrix::from_element(1, 1, v)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn mat(&self, x: usize) -> &DMatrix<Complex64> {
        &self.mats[x]
    }

    pub fn mats(&self) -> &[DMatrix<Complex64>] {
        &self.mats
    }

    /// max_x ∥f(x)∥ — equals ∥Π_f∥ by block-diagonality.
    pub fn max_norm(&self) -> Result<f64> {
        let mut best = 0.0f64;
        for m in &self.mats {
            best = best.max(complex_mat_norm(m)?);
        }
        Ok(best)
    }

    /// (1/n) Σ_x f(x).
    pub fn bias_matrix(&self) -> DMatrix<Complex64> {
        let mut acc = DMatrix::<Complex64>::zeros(self.ell, self.ell);
        for m in &self.mats {
            acc += m;
        }
        acc.unscale(self.n as f64)
    }

    /// Apply the block-diagonal bias operator Π_f in place:
    /// block x (entries x·ℓ .. x·ℓ+ℓ) becomes f(x)·block.
    pub fn apply_blocks(&self, z: &mut [Complex64]) {
        assert_eq!(z.len(), self.n * self.ell);
        let ell = self.ell;
        let mut tmp = vec![Complex64::default(); ell];
        for x in 0..self.n {
            let block = &mut z[x * ell..(x + 1) * ell];
            let m = &self.mats[x];
            for (r, t) in tmp.iter_mut().enumerate() {
                let mut acc = Complex64::default();
                for c in 0..ell {
                    acc += m[(r, c)] * block[c];
                }
                *t = acc;
            }
            block.copy_from_slice(&tmp);
        }
    }

    /// Adjoint blocks: block x becomes f(x)†·block.
    pub fn apply_blocks_adjoint(&self, z: &mut [Complex64]) {
        assert_eq!(z.len(), self.n * self.ell);
        let ell = self.ell;
        let mut tmp = vec![Complex64::default(); ell];
        for x in 0..self.n {
            let block = &mut z[x * ell..(x + 1) * ell];
            let m = &self.mats[x];
            for (r, t) in tmp.iter_mut().enumerate() {
                let mut acc = Complex64::default();
                for c in 0..ell {
                    acc += m[(c, r)].conj() * block[c];
                }
                *t = acc;
            }
            block.copy_from_slice(&tmp);
        }
    }

    /// Materialize Π_f as a dense (ℓn)×(ℓn) matrix (tests and small n).
    pub fn dense_bias_operator(&self) -> Result<DMatrix<Complex64>> {
        let dim = self.n * self.ell;
        if dim > dense_cap() {
            return Err(Error::capacity(format!(
                "dense block operator of dimension {dim} exceeds the dense cap"
            )));
        }
        let mut out = DMatrix::<Complex64>::zeros(dim, dim);
        for x in 0..self.n {
            let m = &self.mats[x];
            for r in 0..self.ell {
                for c in 0..self.ell {
                    out[(x * self.ell + r, x * self.ell + c)] = m[(r, c)];
                }
            }
        }
        Ok(out)
    }
}

/// The lift/project pair between ℂ^ℓ and ℂ^ℓ ⊗ ℂ^n: lifting averages a
/// vector over all vertex slots (norm 1/√n), projecting sums the slots
/// (norm √n); project ∘ lift = identity, and lift ∘ project is the
/// orthogonal projector onto the vertex-constant subspace.
#[derive(Debug, Clone, Copy)]
pub struct LiftProject {
    pub n: usize,
    pub ell: usize,
}

impl LiftProject {
    pub fn new(n: usize, ell: usize) -> Self {
        Self { n, ell }
    }

    /// L v = (1/n) · (v, v, …, v).
    pub fn lift(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.ell);
        let scale = 1.0 / self.n as f64;
        let mut out = vec![Complex64::default(); self.n * self.ell];
        for x in 0..self.n {
            for (i, &vi) in v.iter().enumerate() {
                out[x * self.ell + i] = vi * scale;
            }
        }
        out
    }

    /// P z = Σ_x z_x.
    pub fn project(&self, z: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(z.len(), self.n * self.ell);
        let mut out = vec![Complex64::default(); self.ell];
        for x in 0..self.n {
            for (i, o) in out.iter_mut().enumerate() {
                *o += z[x * self.ell + i];
            }
        }
        out
    }

    /// L ∘ P — the orthogonal projector onto span{v ⊗ 1}.
    pub fn parallel_project(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.lift(&self.project(z))
    }

    /// Dense ℓn×ℓ matrix of L (for norm checks).
    pub fn lift_matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(self.n * self.ell, self.ell);
        let scale = Complex64::new(1.0 / self.n as f64, 0.0);
        for x in 0..self.n {
            for i in 0..self.ell {
                m[(x * self.ell + i, i)] = scale;
            }
        }
        m
    }

    /// Dense ℓ×ℓn matrix of P.
    pub fn project_matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(self.ell, self.n * self.ell);
        for x in 0..self.n {
            for i in 0..self.ell {
                m[(i, x * self.ell + i)] = Complex64::new(1.0, 0.0);
            }
        }
        m
    }
}

/// ∥(1/n) Σ_x f(x)∥ — dense Hermitian eigensolver for ℓ ≤ 256, power
/// iteration on the Gram operator above that.
pub fn operator_bias(f: &OperatorFunction, tol: f64) -> Result<f64> {
    complex_mat_norm_tol(&f.bias_matrix(), tol)
}

/// Brute-force ∥E_{w∈W} f(s_t)⋯f(s₀)∥ by enumerating every walk.
pub fn walk_product_bias(f: &OperatorFunction, walks: &WalkCollection, tol: f64) -> Result<f64> {
    if f.n() != walks.base().n() {
        return Err(Error::precondition(format!(
            "operator function covers {} vertices, walks run on {}",
            f.n(),
            walks.base().n()
        )));
    }
    let ell = f.ell() as u64;
    let count = walks.count();
    let ops = count
        .to_u64_digits()
        .first()
        .copied()
        .filter(|_| count.bits() <= 64)
        .and_then(|c| c.checked_mul((walks.steps() as u64 + 1) * ell * ell * ell));
    match ops {
        Some(ops) if ops <= WALK_PRODUCT_OP_BUDGET => {}
        _ => {
            return Err(Error::capacity(format!(
                "averaging {count} walk products of {ell}×{ell} matrices \
                 exceeds the operation budget"
            )));
        }
    }
    let elln = f.ell();
    let mut acc = DMatrix::<Complex64>::zeros(elln, elln);
    let mut prod = DMatrix::<Complex64>::zeros(elln, elln);
    walks.for_each(|w| {
        prod.copy_from(f.mat(w[0] as usize));
        for &v in &w[1..] {
            prod = f.mat(v as usize) * &prod;
        }
        acc += &prod;
    });
    let denom = count
        .to_u64_digits()
        .first()
        .copied()
        .unwrap_or(1) as f64;
    acc.unscale_mut(denom);
    complex_mat_norm_tol(&acc, tol)
}

/// Apply one vertex-mixing step Å_X = (A_X/d) ⊗ I_ℓ.
fn apply_mixing(x: &RotationGraph, ell: usize, z: &[Complex64], out: &mut [Complex64]) {
    let n = x.n();
    let d = x.degree();
    let inv_d = 1.0 / d as f64;
    out.iter_mut().for_each(|o| *o = Complex64::default());
    for v in 0..n {
        let dst = v * ell;
        for j in 0..d {
            let u = x.neighbor(v, j) * ell;
            for i in 0..ell {
                out[dst + i] += z[u + i];
            }
        }
        for i in 0..ell {
            out[dst + i] *= inv_d;
        }
    }
}

/// P ∘ Π_f ∘ (Å_X Π_f)^t ∘ L applied to v — the operator whose image is
/// the brute-force walk average.
pub fn walk_operator_image(
    f: &OperatorFunction,
    x: &RotationGraph,
    t: u32,
    v: &[Complex64],
) -> Result<Vec<Complex64>> {
    if f.n() != x.n() {
        return Err(Error::precondition(format!(
            "operator function covers {} vertices, graph has {}",
            f.n(),
            x.n()
        )));
    }
    let lp = LiftProject::new(f.n(), f.ell());
    let mut z = lp.lift(v);
    let mut buf = vec![Complex64::default(); z.len()];
    for _ in 0..t {
        f.apply_blocks(&mut z);
        apply_mixing(x, f.ell(), &z, &mut buf);
        std::mem::swap(&mut z, &mut buf);
    }
    f.apply_blocks(&mut z);
    Ok(lp.project(&z))
}

/// Measure ∥(Å_X Π_f)²∥ and compare with the two theorem bounds
/// (2λ(X) + λ₀ and 1 − (1−λ(X))²(1−λ₀)). The measurement must not exceed
/// the smaller applicable bound.
pub fn two_step_norm_check(f: &OperatorFunction, x: &RotationGraph) -> Result<(f64, f64, f64)> {
    if f.n() != x.n() {
        return Err(Error::precondition(format!(
            "operator function covers {} vertices, graph has {}",
            f.n(),
            x.n()
        )));
    }
    let ell = f.ell();
    let dim = f.n() * ell;
    let forward = |z: &[Complex64], out: &mut [Complex64]| {
        let mut w = z.to_vec();
        let mut buf = vec![Complex64::default(); dim];
        for _ in 0..2 {
            f.apply_blocks(&mut w);
            apply_mixing(x, ell, &w, &mut buf);
            std::mem::swap(&mut w, &mut buf);
        }
        out.copy_from_slice(&w);
    };
    let adjoint = |z: &[Complex64], out: &mut [Complex64]| {
        // (Å Π)²† = (Π† Å)² since Å is self-adjoint for undirected X
        let mut w = z.to_vec();
        let mut buf = vec![Complex64::default(); dim];
        for _ in 0..2 {
            apply_mixing(x, ell, &w, &mut buf);
            std::mem::swap(&mut w, &mut buf);
            f.apply_blocks_adjoint(&mut w);
        }
        out.copy_from_slice(&w);
    };
    let measured = complex_closure_norm(dim, &forward, &adjoint)?;
    let lam_x = x.lambda()?;
    let lam0 = operator_bias(f, PI_TOL)?;
    let bound_const = walk_bias_bound(lam_x, lam0, 2, BoundMode::Constant);
    let bound_any = walk_bias_bound(lam_x, lam0, 2, BoundMode::AnyBias);
    let applicable = bound_const.min(bound_any);
    if measured > applicable + 1e-9 {
        return Err(Error::certification(format!(
            "two-step norm {measured} exceeds the bound {applicable}"
        )));
    }
    Ok((measured, bound_const, bound_any))
}

/// The representation families an operator function can be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepKind {
    /// Permutation matrices e_i ↦ e_{σ(i)} (symmetric groups).
    Defining,
    /// Defining with the all-ones direction projected out, realized on an
    /// explicit orthonormal basis of dimension n−1.
    Standard,
    /// ±1 parity scalar (symmetric groups).
    Sign,
    /// Scalar character x ↦ (−1)^{⟨a,x⟩} (bit-vector groups).
    Character(u64),
    /// Independent Haar-like unitaries per vertex, seeded; ignores the
    /// group structure (plumbing for norm experiments).
    RandomUnitary { ell: usize, seed: u64 },
}

/// f(x) = ρ(S[x]) with vertices identified with multiset entries in order.
pub fn build_representation(kind: RepKind, s: &GeneratorMultiset) -> Result<OperatorFunction> {
    let Some(n) = s.len() else {
        return Err(Error::precondition(
            "representations need a dense multiset with one entry per vertex".to_string(),
        ));
    };
    let desc = s.descriptor();
    match kind {
        RepKind::Defining => {
            if desc.kind() != GroupKind::Symmetric {
                return Err(Error::domain(
                    "the defining representation needs a permutation group".to_string(),
                ));
            }
            let pts = desc.param() as usize;
            let mats = s
                .iter()
                .map(|e| {
                    let GroupElem::Perm(images) = e else { unreachable!() };
                    let mut m = DMatrix::<Complex64>::zeros(pts, pts);
                    for (i, &im) in images.iter().enumerate() {
                        m[(im as usize, i)] = Complex64::new(1.0, 0.0);
                    }
                    m
                })
                .collect();
            OperatorFunction::new(mats)
        }
        RepKind::Standard => {
            if desc.kind() != GroupKind::Symmetric {
                return Err(Error::domain(
                    "the standard representation needs a permutation group".to_string(),
                ));
            }
            let pts = desc.param() as usize;
            if pts < 2 {
                return Err(Error::domain(
                    "the standard representation needs at least two points".to_string(),
                ));
            }
            let basis = ones_complement_basis(pts);
            let defining = build_representation(RepKind::Defining, s)?;
            let mats = defining
                .mats()
                .iter()
                .map(|m| {
                    let b = &basis;
                    b.adjoint() * m * b
                })
                .collect();
            OperatorFunction::new(mats)
        }
        RepKind::Sign => {
            if desc.kind() != GroupKind::Symmetric {
                return Err(Error::domain(
                    "the sign representation needs a permutation group".to_string(),
                ));
            }
            let vals = s
                .iter()
                .map(|e| {
                    let GroupElem::Perm(images) = e else { unreachable!() };
                    Complex64::new(perm_sign(&images), 0.0)
                })
                .collect();
            OperatorFunction::from_scalars(vals)
        }
        RepKind::Character(a) => {
            if desc.kind() != GroupKind::XorBits {
                return Err(Error::domain(
                    "scalar characters of this form need a bit-vector group".to_string(),
                ));
            }
            if desc.param() < 64 && a >= (1u64 << desc.param()) {
                return Err(Error::domain(format!(
                    "character index {a} outside the 2^{} frequencies",
                    desc.param()
                )));
            }
            let vals = s
                .iter()
                .map(|e| {
                    let GroupElem::Bits(b) = e else { unreachable!() };
                    let par = (a & b).count_ones() & 1;
                    Complex64::new(if par == 0 { 1.0 } else { -1.0 }, 0.0)
                })
                .collect();
            OperatorFunction::from_scalars(vals)
        }
        RepKind::RandomUnitary { ell, seed } => random_unitary_function(n, ell, seed),
    }
}

/// Orthonormal basis of the hyperplane ⟂ (1,…,1) in ℂ^n: column j is
/// (e₀ + … + e_j − (j+1)·e_{j+1}) / √((j+1)(j+2)).
fn ones_complement_basis(n: usize) -> DMatrix<Complex64> {
    let mut b = DMatrix::<Complex64>::zeros(n, n - 1);
    for j in 0..n - 1 {
        let scale = 1.0 / (((j + 1) * (j + 2)) as f64).sqrt();
        for i in 0..=j {
            b[(i, j)] = Complex64::new(scale, 0.0);
        }
        b[(j + 1, j)] = Complex64::new(-((j + 1) as f64) * scale, 0.0);
    }
    b
}

fn perm_sign(images: &[u8]) -> f64 {
    let mut seen = vec![false; images.len()];
    let mut sign = 1.0;
    for start in 0..images.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0usize;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = images[i] as usize;
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// One independent near-Haar unitary per vertex: orthonormalize a seeded
/// complex Gaussian matrix. Deterministic per (seed, vertex).
pub fn random_unitary_function(n: usize, ell: usize, seed: u64) -> Result<OperatorFunction> {
    if n == 0 || ell == 0 {
        return Err(Error::domain("need n ≥ 1 vertices and ℓ ≥ 1".to_string()));
    }
    let mats = (0..n)
        .map(|x| {
            let mut rng = rng::seeded_stream(seed, x as u64);
            let g = DMatrix::<Complex64>::from_fn(ell, ell, |_, _| {
                Complex64::new(gaussian(&mut rng), gaussian(&mut rng))
            });
            let qr = g.qr();
            qr.q()
        })
        .collect();
    OperatorFunction::new(mats)
}

fn gaussian(rng: &mut rng::Rng) -> f64 {
    use rand::Rng as _;
    // Box–Muller from two uniforms; u1 bounded away from 0
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Average Kazhdan constant 2(1 − ∥E_{g∼S} ρ(g)∥) for a unitary ρ given
/// on the entries of S.
pub fn kazhdan_avg(s: &GeneratorMultiset, rho: &OperatorFunction) -> Result<f64> {
    let Some(n) = s.len() else {
        return Err(Error::precondition("the multiset must be dense".to_string()));
    };
    if rho.n() != n {
        return Err(Error::precondition(format!(
            "ρ covers {} entries, the multiset has {n}",
            rho.n()
        )));
    }
    let ell = rho.ell();
    for (x, m) in rho.mats().iter().enumerate() {
        let gram = m.adjoint() * m;
        let dev = (0..ell)
            .flat_map(|r| (0..ell).map(move |c| (r, c)))
            .map(|(r, c)| {
                let target = if r == c { 1.0 } else { 0.0 };
                (gram[(r, c)] - Complex64::new(target, 0.0)).norm()
            })
            .fold(0.0f64, f64::max);
        if dev > 1e-6 {
            return Err(Error::precondition(format!(
                "ρ is not unitary at entry {x}: ∥ρ†ρ − I∥_max = {dev:.3e}"
            )));
        }
    }
    Ok(2.0 * (1.0 - operator_bias(rho, PI_TOL)?))
}

/// Max over random vertex-constant unit vectors z = u⊗1 of
/// ∥(Π_f z)^∥∥ / (λ₀ ∥z∥); certifies the ratio stays ≤ 1.
pub fn parallel_claim_check(f: &OperatorFunction, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::domain("need at least one trial".to_string()));
    }
    let lam0 = operator_bias(f, PI_TOL)?;
    let lp = LiftProject::new(f.n(), f.ell());
    let mut rng = rng::seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut u: Vec<Complex64> =
            (0..f.ell()).map(|_| Complex64::new(gaussian(&mut rng), gaussian(&mut rng))).collect();
        let norm = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= norm);
        // z = u ⊗ 1 (one copy of u per vertex slot), ∥z∥ = √n
        let mut z = vec![Complex64::default(); f.n() * f.ell()];
        for x in 0..f.n() {
            z[x * f.ell()..(x + 1) * f.ell()].copy_from_slice(&u);
        }
        f.apply_blocks(&mut z);
        let par = lp.parallel_project(&z);
        let num = par.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let denom = lam0 * (f.n() as f64).sqrt();
        let ratio = if denom <= 1e-300 {
            if num <= 1e-12 {
                0.0
            } else {
                return Err(Error::certification(format!(
                    "parallel component {num} nonzero while the bias vanishes"
                )));
            }
        } else {
            num / denom
        };
        worst = worst.max(ratio);
    }
    if worst > 1.0 + 1e-9 {
        return Err(Error::certification(format!(
            "parallel-component ratio {worst} exceeds 1"
        )));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// complex operator norms

/// Largest eigenvalue of a Hermitian PSD matrix (dense).
fn hermitian_top_eig(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// Operator norm of a dense complex matrix.
pub fn complex_mat_norm(m: &DMatrix<Complex64>) -> Result<f64> {
    complex_mat_norm_tol(m, PI_TOL)
}

fn complex_mat_norm_tol(m: &DMatrix<Complex64>, tol: f64) -> Result<f64> {
    if m.nrows() <= DENSE_ELL_CAP {
        return Ok(hermitian_top_eig(&(m.adjoint() * m)).max(0.0).sqrt());
    }
    let forward = |z: &[Complex64], out: &mut [Complex64]| {
        let v = DVector::from_column_slice(z);
        let w = m * v;
        out.copy_from_slice(w.as_slice());
    };
    let adjoint = |z: &[Complex64], out: &mut [Complex64]| {
        let v = DVector::from_column_slice(z);
        let w = m.adjoint() * v;
        out.copy_from_slice(w.as_slice());
    };
    complex_closure_norm_tol(m.nrows(), &forward, &adjoint, tol)
}

/// Operator norm of an implicitly-given complex operator: dense assembly
/// below the dense cap, otherwise power iteration on the Gram operator.
pub fn complex_closure_norm(
    dim: usize,
    forward: &dyn Fn(&[Complex64], &mut [Complex64]),
    adjoint: &dyn Fn(&[Complex64], &mut [Complex64]),
) -> Result<f64> {
    complex_closure_norm_tol(dim, forward, adjoint, PI_TOL)
}

fn complex_closure_norm_tol(
    dim: usize,
    forward: &dyn Fn(&[Complex64], &mut [Complex64]),
    adjoint: &dyn Fn(&[Complex64], &mut [Complex64]),
    tol: f64,
) -> Result<f64> {
    if dim <= dense_cap().min(DENSE_ELL_CAP * 4) {
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        let mut basis = vec![Complex64::default(); dim];
        let mut col = vec![Complex64::default(); dim];
        for j in 0..dim {
            basis[j] = Complex64::new(1.0, 0.0);
            forward(&basis, &mut col);
            basis[j] = Complex64::default();
            for i in 0..dim {
                m[(i, j)] = col[i];
            }
        }
        return Ok(hermitian_top_eig(&(m.adjoint() * &m)).max(0.0).sqrt());
    }
    let mut best: Option<(f64, f64)> = None;
    let mut best_bad = (0.0f64, f64::INFINITY);
    for stream in 0..PI_RESTARTS {
        let (theta, residual, converged) = complex_gram_power(dim, forward, adjoint, stream, tol);
        if converged {
            best = Some(match best {
                Some(prev) if prev.0 >= theta => prev,
                _ => (theta, residual),
            });
        } else if residual < best_bad.1 {
            best_bad = (theta, residual);
        }
    }
    match best {
        Some((theta, _)) => Ok(theta.max(0.0).sqrt()),
        None => Err(Error::Convergence {
            msg: format!("complex power iteration stalled at dimension {dim}"),
            best: best_bad.0.max(0.0).sqrt(),
            residual: best_bad.1,
        }),
    }
}

fn complex_gram_power(
    dim: usize,
    forward: &dyn Fn(&[Complex64], &mut [Complex64]),
    adjoint: &dyn Fn(&[Complex64], &mut [Complex64]),
    stream: u64,
    tol: f64,
) -> (f64, f64, bool) {
    use rand::Rng as _;
    let mut rng = rng::seeded_stream(PI_SEED, stream);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
        .collect();
    cnormalize(&mut v);
    let mut mid = vec![Complex64::default(); dim];
    let mut w = vec![Complex64::default(); dim];
    let mut best = (0.0f64, f64::INFINITY);
    for it in 1..=PI_MAX_ITERS {
        forward(&v, &mut mid);
        adjoint(&mid, &mut w);
        let theta: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        let residual: f64 = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (b - a * Complex::from(theta)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual < best.1 {
            best = (theta, residual);
        }
        if residual <= tol && it >= PI_MIN_ITERS {
            return (theta, residual, true);
        }
        std::mem::swap(&mut v, &mut w);
        if cnormalize(&mut v) == 0.0 {
            v = (0..dim)
                .map(|_| {
                    Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
                })
                .collect();
            cnormalize(&mut v);
        }
    }
    (best.0, best.1, false)
}

fn cnormalize(v: &mut [Complex64]) -> f64 {
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build;
    use crate::group::GroupDescriptor;
    use crate::walks::enumerate_walks;

    fn sym3_transpositions() -> GeneratorMultiset {
        let g = GroupDescriptor::symmetric(3).unwrap();
        GeneratorMultiset::from_elems(
            g,
            vec![
                GroupElem::Perm(vec![1, 0, 2]),
                GroupElem::Perm(vec![0, 2, 1]),
                GroupElem::Perm(vec![2, 1, 0]),
            ],
        )
        .unwrap()
    }

    fn z2sq_entries() -> GeneratorMultiset {
        let g = GroupDescriptor::xor_bits(2).unwrap();
        GeneratorMultiset::from_elems(
            g,
            vec![GroupElem::Bits(0b01), GroupElem::Bits(0b10), GroupElem::Bits(0b11)],
        )
        .unwrap()
    }

    #[test]
    fn defining_rep_bias_is_one_standard_is_zero() {
        let s = sym3_transpositions();
        let defining = build_representation(RepKind::Defining, &s).unwrap();
        // E f = J/3: permutation matrices of the three transpositions
        // average to the all-ones matrix over 3
        let avg = defining.bias_matrix();
        for r in 0..3 {
            for c in 0..3 {
                assert!((avg[(r, c)] - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
            }
        }
        assert!((operator_bias(&defining, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        let standard = build_representation(RepKind::Standard, &s).unwrap();
        assert_eq!(standard.ell(), 2);
        assert!(operator_bias(&standard, 1e-12).unwrap() < 1e-12);
    }

    #[test]
    fn character_rep_values_and_bias() {
        let s = z2sq_entries();
        let f = build_representation(RepKind::Character(0b11), &s).unwrap();
        let want = [-1.0, -1.0, 1.0];
        for (x, w) in want.iter().enumerate() {
            assert!((f.mat(x)[(0, 0)] - Complex64::new(*w, 0.0)).norm() < 1e-15);
        }
        assert!((operator_bias(&f, 1e-12).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_identity_bias_is_one() {
        let mats = vec![DMatrix::<Complex64>::identity(3, 3); 4];
        let f = OperatorFunction::new(mats).unwrap();
        assert!((operator_bias(&f, 1e-12).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contraction_invariant_enforced() {
        let m = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(1.5, 0.0);
        assert!(OperatorFunction::new(vec![m]).is_err());
    }

    #[test]
    fn block_operator_norm_is_max_norm() {
        let f = random_unitary_function(4, 3, 7).unwrap();
        let dense = f.dense_bias_operator().unwrap();
        let block_norm = complex_mat_norm(&dense).unwrap();
        let max_norm = f.max_norm().unwrap();
        assert!((block_norm - max_norm).abs() < 1e-9, "{block_norm} vs {max_norm}");
        // scale one block down; the norm should follow the max
        let mut mats: Vec<_> = f.mats().to_vec();
        for m in mats.iter_mut() {
            *m *= Complex64::new(0.5, 0.0);
        }
        mats[2] *= Complex64::new(1.6, 0.0); // 0.8 total
        let g = OperatorFunction::new(mats).unwrap();
        let gd = g.dense_bias_operator().unwrap();
        assert!((complex_mat_norm(&gd).unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn lift_project_norms() {
        for (n, ell) in [(3usize, 2usize), (5, 1), (4, 3)] {
            let lp = LiftProject::new(n, ell);
            let ln = complex_mat_norm(&lp.lift_matrix()).unwrap();
            let pn = complex_mat_norm(&lp.project_matrix()).unwrap();
            assert!((ln - 1.0 / (n as f64).sqrt()).abs() < 1e-9);
            assert!((pn - (n as f64).sqrt()).abs() < 1e-9);
            assert!((ln * pn - 1.0).abs() < 1e-9);
            // P ∘ L = identity
            let pl = lp.project_matrix() * lp.lift_matrix();
            assert!((pl - DMatrix::<Complex64>::identity(ell, ell)).norm() < 1e-12);
            // L ∘ P is an orthogonal projector: idempotent and Hermitian
            let lpm = lp.lift_matrix() * lp.project_matrix();
            assert!(((&lpm * &lpm) - &lpm).norm() < 1e-12);
            assert!((lpm.adjoint() - lpm).norm() < 1e-12);
        }
    }

    #[test]
    fn walk_product_bias_on_complete_graph_is_cubed() {
        let s = z2sq_entries();
        let f = build_representation(RepKind::Character(0b11), &s).unwrap();
        let x = build::complete_with_loops(3).unwrap();
        let walks = enumerate_walks(&x, 2);
        let got = walk_product_bias(&f, &walks, 1e-12).unwrap();
        assert!((got - 1.0 / 27.0).abs() < 1e-12, "{got}");
        // t = 0 reduces to the plain bias
        let w0 = enumerate_walks(&x, 0);
        let got0 = walk_product_bias(&f, &w0, 1e-12).unwrap();
        assert!((got0 - operator_bias(&f, 1e-12).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn walk_operator_identity_matches_brute_force() {
        use rand::Rng as _;
        let graphs = [
            build::cycle(5).unwrap(),
            build::petersen().unwrap(),
            build::complete_with_loops(4).unwrap(),
        ];
        let mut rng = rng::seeded(42);
        let mut instances = 0;
        for (gi, x) in graphs.iter().enumerate() {
            for t in 0..=4u32 {
                for ell in [1usize, 2, 3] {
                    let f =
                        random_unitary_function(x.n(), ell, 1000 + 100 * gi as u64 + t as u64)
                            .unwrap();
                    // brute-force average of walk products
                    let mut acc = DMatrix::<Complex64>::zeros(ell, ell);
                    let walks = enumerate_walks(x, t);
                    walks.for_each(|w| {
                        let mut prod = f.mat(w[0] as usize).clone();
                        for &v in &w[1..] {
                            prod = f.mat(v as usize) * prod;
                        }
                        acc += prod;
                    });
                    let cnt: f64 = (x.n() * x.degree().pow(t)) as f64;
                    acc.unscale_mut(cnt);
                    for _ in 0..3 {
                        let v: Vec<Complex64> = (0..ell)
                            .map(|_| {
                                Complex64::new(
                                    rng.gen::<f64>() * 2.0 - 1.0,
                                    rng.gen::<f64>() * 2.0 - 1.0,
                                )
                            })
                            .collect();
                        let lhs = walk_operator_image(&f, x, t, &v).unwrap();
                        let rhs = &acc * DVector::from_column_slice(&v);
                        let diff: f64 = lhs
                            .iter()
                            .zip(rhs.iter())
                            .map(|(a, b)| (a - b).norm_sqr())
                            .sum::<f64>()
                            .sqrt();
                        assert!(diff < 1e-9, "graph {gi}, t {t}, ℓ {ell}: diff {diff}");
                    }
                    instances += 1;
                }
            }
        }
        assert!(instances >= 20);
    }

    #[test]
    fn two_step_bound_on_perfect_mixer() {
        // λ(X) = 0 and λ₀ = 0.5: both bounds collapse to 0.5
        let x = build::complete_with_loops(4).unwrap();
        let f = OperatorFunction::from_scalars(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ])
        .unwrap();
        assert!((operator_bias(&f, 1e-12).unwrap() - 0.5).abs() < 1e-12);
        let (measured, bc, ba) = two_step_norm_check(&f, &x).unwrap();
        assert!((bc - 0.5).abs() < 1e-12);
        assert!((ba - 0.5).abs() < 1e-12);
        assert!(measured <= 0.5 + 1e-9, "{measured}");
    }

    #[test]
    fn two_step_bound_identity_function() {
        let x = build::complete_with_loops(3).unwrap();
        let mats = vec![DMatrix::<Complex64>::identity(2, 2); 3];
        let f = OperatorFunction::new(mats).unwrap();
        let (measured, _bc, ba) = two_step_norm_check(&f, &x).unwrap();
        assert!((ba - 1.0).abs() < 1e-12);
        assert!((measured - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_step_bound_on_cycle() {
        let x = build::cycle(5).unwrap();
        let f = random_unitary_function(5, 2, 99).unwrap();
        let lam_x = x.lambda().unwrap();
        let lam0 = operator_bias(&f, 1e-12).unwrap();
        let (measured, bc, ba) = two_step_norm_check(&f, &x).unwrap();
        assert!((bc - (2.0 * lam_x + lam0).min(1.0)).abs() < 1e-12);
        let want_any = 1.0 - (1.0 - lam_x) * (1.0 - lam_x) * (1.0 - lam0);
        assert!((ba - want_any).abs() < 1e-12);
        assert!(measured <= ba + 1e-9);
    }

    #[test]
    fn walk_product_bias_respects_bounds() {
        use rand::Rng as _;
        let mut rng = rng::seeded(2024);
        let mut tested = 0;
        while tested < 50 {
            let n = 3 + (rng.gen::<u64>() % 4) as usize; // 3..=6
            let x = match tested % 3 {
                0 => build::complete_with_loops(n).unwrap(),
                1 => build::cycle(n).unwrap(),
                _ => build::complete(n).unwrap(),
            };
            let ell = 1 + (rng.gen::<u64>() % 3) as usize;
            let t = 1 + (rng.gen::<u64>() % 4) as u32;
            let f = random_unitary_function(x.n(), ell, 3000 + tested).unwrap();
            let lam_x = x.lambda().unwrap();
            let lam0 = operator_bias(&f, 1e-12).unwrap();
            let walks = enumerate_walks(&x, t);
            let got = walk_product_bias(&f, &walks, 1e-12).unwrap();
            let bc = walk_bias_bound(lam_x, lam0, t, BoundMode::Constant);
            let ba = walk_bias_bound(lam_x, lam0, t, BoundMode::AnyBias);
            if bc < 1.0 {
                assert!(got <= bc + 1e-9, "constant bound: {got} > {bc}");
            }
            assert!(got <= ba + 1e-9, "any-bias bound: {got} > {ba}");
            tested += 1;
        }
    }

    #[test]
    fn kazhdan_examples() {
        let s = z2sq_entries();
        let f = build_representation(RepKind::Character(0b11), &s).unwrap();
        let k = kazhdan_avg(&s, &f).unwrap();
        assert!((k - 4.0 / 3.0).abs() < 1e-12);
        let sym = sym3_transpositions();
        let std_rep = build_representation(RepKind::Standard, &sym).unwrap();
        let k2 = kazhdan_avg(&sym, &std_rep).unwrap();
        assert!((k2 - 2.0).abs() < 1e-9);
        // non-unitary input is rejected
        let shrunk = OperatorFunction::new(vec![
            DMatrix::<Complex64>::identity(2, 2) * Complex64::new(0.5, 0.0);
            3
        ])
        .unwrap();
        assert!(kazhdan_avg(&sym, &shrunk).is_err());
    }

    #[test]
    fn parallel_claim_examples() {
        // constant identity: Π z = z, parallel part is z itself, λ₀ = 1
        let mats = vec![DMatrix::<Complex64>::identity(2, 2); 5];
        let f = OperatorFunction::new(mats).unwrap();
        let r = parallel_claim_check(&f, 20, 11).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        // character function with λ₀ = 1/3
        let s = z2sq_entries();
        let g = build_representation(RepKind::Character(0b11), &s).unwrap();
        let r2 = parallel_claim_check(&g, 100, 12).unwrap();
        assert!(r2 <= 1.0 + 1e-9);
        // standard rep has bias exactly 0: the degenerate branch
        let sym = sym3_transpositions();
        let std_rep = build_representation(RepKind::Standard, &sym).unwrap();
        let r3 = parallel_claim_check(&std_rep, 10, 13).unwrap();
        assert_eq!(r3, 0.0);
    }

    #[test]
    fn random_unitaries_are_unitary_and_deterministic() {
        let f = random_unitary_function(3, 4, 555).unwrap();
        for m in f.mats() {
            let dev = (m.adjoint() * m - DMatrix::<Complex64>::identity(4, 4)).norm();
            assert!(dev < 1e-9, "unitarity deviation {dev}");
        }
        let g = random_unitary_function(3, 4, 555).unwrap();
        assert_eq!(f, g);
        let h = random_unitary_function(3, 4, 556).unwrap();
        assert_ne!(f, h);
    }

    #[test]
    fn sign_rep_multiplicativity() {
        let g = GroupDescriptor::symmetric(4).unwrap();
        let a = GroupElem::Perm(vec![1, 0, 2, 3]);
        let b = GroupElem::Perm(vec![0, 2, 1, 3]);
        let ab = g.mul(&a, &b);
        let s = GeneratorMultiset::from_elems(g, vec![a, b, ab]).unwrap();
        let f = build_representation(RepKind::Sign, &s).unwrap();
        let sa = f.mat(0)[(0, 0)].re;
        let sb = f.mat(1)[(0, 0)].re;
        let sab = f.mat(2)[(0, 0)].re;
        assert_eq!(sa, -1.0);
        assert_eq!(sb, -1.0);
        assert_eq!(sab, sa * sb);
    }
}
