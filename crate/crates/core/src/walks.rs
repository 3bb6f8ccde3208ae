//! Walks on rotation graphs and bias amplification along walks.
//!
//! A walk of t steps visits t+1 vertices. When the vertices of an
//! auxiliary graph X are identified with the entries of a generator
//! multiset S (|V_X| = |S|), every walk (v₀, …, v_t) yields the product
//! S[v_t] ⋯ S[v₀], and the multiset of all such products has bias bounded
//! by explicit functions of λ(X) and bias(S). Iterating this is the
//! degree-efficient route from any expanding generating set to an
//! almost-optimally expanding one.
//!
//! Amplified multisets whose walk count exceeds the materialization
//! budget are returned in exact weight-table form; their distributions
//! are computed by transfer-operator passes (per character over ℤ₂^m,
//! per (group element, vertex) pair otherwise) rather than enumeration.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use std::collections::HashMap;

use crate::budget::{CONV_TABLE_CAP, PORT_CAP, WALK_BUDGET, XOR_WALSH_BITS_CAP};
use crate::error::{Error, Result};
use crate::graph::{build, RotationGraph};
use crate::group::{walsh_inplace, GeneratorMultiset, GroupElem, GroupKind};
use crate::zoo::{AuxExpander, AuxGraph, ExpanderProvider};

/// Operation budget for transfer-operator passes (inner-loop steps).
const TRANSFER_OP_BUDGET: u64 = 4_000_000_000;
/// Largest (group order)·(vertex count) state for distribution transfer.
const STATE_CAP: usize = 8_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkMode {
    /// All walks fit the materialization budget.
    Explicit,
    /// Walks are only reachable through the fold interface.
    Streaming,
}

/// All walks of a fixed length on a rotation graph, in a canonical order:
/// start vertices ascending, then the port sequence as a big-endian
/// d-ary counter (first step most significant).
#[derive(Debug, Clone)]
pub struct WalkCollection<'g> {
    base: &'g RotationGraph,
    t: u32,
    mode: WalkMode,
}

/// n·d^t as an exact integer.
pub fn walk_count(n: usize, d: usize, t: u32) -> BigUint {
    BigUint::from(n) * BigUint::from(d).pow(t)
}

pub fn enumerate_walks(x: &RotationGraph, t: u32) -> WalkCollection<'_> {
    let mode = if walk_count(x.n(), x.degree(), t).to_u64().is_some_and(|c| c <= WALK_BUDGET) {
        WalkMode::Explicit
    } else {
        WalkMode::Streaming
    };
    WalkCollection { base: x, t, mode }
}

impl<'g> WalkCollection<'g> {
    pub fn base(&self) -> &'g RotationGraph {
        self.base
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn mode(&self) -> WalkMode {
        self.mode
    }

    pub fn count(&self) -> BigUint {
        walk_count(self.base.n(), self.base.degree(), self.t)
    }

    /// Visit every walk in canonical order as a slice of t+1 vertices.
    pub fn for_each<F: FnMut(&[u32])>(&self, mut f: F) {
        let n = self.base.n();
        let d = self.base.degree();
        let t = self.t as usize;
        let mut walk = vec![0u32; t + 1];
        let mut ports = vec![0usize; t];
        for v in 0..n {
            walk[0] = v as u32;
            ports.iter_mut().for_each(|p| *p = 0);
            for k in 0..t {
                walk[k + 1] = self.base.neighbor(walk[k] as usize, ports[k]) as u32;
            }
            loop {
                f(&walk);
                // advance the big-endian port counter (last step fastest)
                let mut k = t;
                loop {
                    if k == 0 {
                        break;
                    }
                    if ports[k - 1] + 1 < d {
                        ports[k - 1] += 1;
                        for i in (k - 1)..t {
                            walk[i + 1] = self.base.neighbor(walk[i] as usize, ports[i]) as u32;
                        }
                        break;
                    }
                    ports[k - 1] = 0;
                    k -= 1;
                }
                if k == 0 {
                    break;
                }
            }
        }
    }

    /// Materialize every walk (explicit mode only).
    pub fn walks(&self) -> Result<Vec<Vec<u32>>> {
        if self.mode != WalkMode::Explicit {
            return Err(Error::capacity(format!(
                "{} walks exceed the {WALK_BUDGET}-walk materialization budget",
                self.count()
            )));
        }
        let mut out = Vec::with_capacity(self.count().to_u64().unwrap() as usize);
        self.for_each(|w| out.push(w.to_vec()));
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// (2λ(X) + λ₀)^⌊t/2⌋ — meaningful when 2λ(X) + λ₀ < 1.
    Constant,
    /// [1 − (1−λ(X))²(1−λ₀)]^⌊t/2⌋ — decays whenever both λ(X), λ₀ < 1.
    AnyBias,
}

/// Closed-form bias bound for walk products, clamped to [0, 1].
pub fn walk_bias_bound(lambda_x: f64, lambda0: f64, t: u32, mode: BoundMode) -> f64 {
    let lx = lambda_x.clamp(0.0, 1.0);
    let l0 = lambda0.clamp(0.0, 1.0);
    let base = match mode {
        BoundMode::Constant => 2.0 * lx + l0,
        BoundMode::AnyBias => 1.0 - (1.0 - lx) * (1.0 - lx) * (1.0 - l0),
    };
    base.clamp(0.0, 1.0).powi((t / 2) as i32)
}

/// Steps required by the single-stage amplification recipe:
/// t = ⌈2(1 + log_{λ₁} λ)⌉, where λ₁ is the per-two-step decay factor.
pub fn inner_step_count(lambda1: f64, lambda: f64) -> Result<u32> {
    if !(lambda1 > 0.0 && lambda1 < 1.0) {
        return Err(Error::domain(format!("decay factor λ₁ = {lambda1} outside (0,1)")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!("target λ = {lambda} outside (0,1)")));
    }
    let raw = 2.0 * (1.0 + lambda.ln() / lambda1.ln());
    Ok((raw - 1e-9).ceil().max(2.0) as u32)
}

/// Replace S with the multiset of walk products over X. Vertices of X are
/// identified with the entries of S in port order, so |V_X| = |S| is
/// required. Results beyond the materialization budget come back in exact
/// weight-table form.
pub fn amplify_via_walks(
    s: &GeneratorMultiset,
    x: &RotationGraph,
    t: u32,
) -> Result<GeneratorMultiset> {
    let Some(n) = s.len() else {
        return Err(Error::precondition(
            "walk amplification needs a dense multiset; a weight table has no vertex assignment"
                .to_string(),
        ));
    };
    if x.n() != n {
        return Err(Error::precondition(format!(
            "auxiliary graph has {} vertices but the multiset has {n} generators",
            x.n()
        )));
    }
    if t == 0 {
        return Ok(s.clone());
    }
    let count = walk_count(n, x.degree(), t);
    if count.to_u64().is_some_and(|c| c <= WALK_BUDGET) {
        let mut elems = Vec::with_capacity(count.to_u64().unwrap() as usize);
        enumerate_walks(x, t).for_each(|w| elems.push(s.product_at(w)));
        return GeneratorMultiset::from_elems(s.descriptor(), elems);
    }
    let weights = match s.descriptor().kind() {
        GroupKind::XorBits => xor_walk_weights(s, x, t)?,
        _ => group_walk_weights(s, x, t)?,
    };
    GeneratorMultiset::from_weights(s.descriptor(), weights, count)
}

/// If `x` is the Cayley graph of ℤ₂^log₂(n) written with identity return
/// ports — rot(v, j) = (v ⊕ aⱼ, j) — return the generators aⱼ.
fn xor_cayley_structure(x: &RotationGraph) -> Option<Vec<u64>> {
    let n = x.n();
    if !n.is_power_of_two() || x.is_directed() {
        return None;
    }
    let d = x.degree();
    let gens: Vec<u64> = (0..d).map(|j| x.rot(0, j).0 as u64).collect();
    for v in 0..n {
        for j in 0..d {
            let (u, back) = x.rot(v, j);
            if back != j || (u as u64) != (v as u64 ^ gens[j]) {
                return None;
            }
        }
    }
    Some(gens)
}

/// Exact product distribution of walk products over ℤ₂^m via one
/// transfer-operator pass per character: the Fourier coefficient of the
/// amplified multiset at μ is ⟨1, (Π_μ A_X)^t Π_μ 1⟩/n with Π_μ the
/// diagonal of character values along the vertex assignment.
fn xor_walk_weights(s: &GeneratorMultiset, x: &RotationGraph, t: u32) -> Result<Vec<f64>> {
    let m = s.descriptor().param();
    if m > XOR_WALSH_BITS_CAP {
        return Err(Error::capacity(format!(
            "character transfer over 2^{m} frequencies exceeds the {XOR_WALSH_BITS_CAP}-bit cap"
        )));
    }
    let n = x.n();
    let d = x.degree();
    let chars = 1usize << m;
    let bits = s.bits().expect("xor multiset is dense here");
    let xor_gens = xor_cayley_structure(x);
    let step_cost = match &xor_gens {
        Some(_) => 2 * n as u64 * (n.trailing_zeros() as u64 + 1),
        None => (n * d) as u64,
    };
    let ops = (chars as u64)
        .checked_mul(t as u64)
        .and_then(|v| v.checked_mul(step_cost))
        .ok_or_else(|| Error::capacity("transfer cost overflows".to_string()))?;
    if ops > TRANSFER_OP_BUDGET {
        return Err(Error::capacity(format!(
            "character transfer needs ~{ops} operations (budget {TRANSFER_OP_BUDGET})"
        )));
    }
    // spectrum of the auxiliary graph's own transition operator, when it
    // is a ℤ₂-Cayley graph (walk steps become pointwise products)
    let xspec: Option<Vec<f64>> = xor_gens.map(|gens| {
        let mut h = vec![0.0f64; n];
        for a in &gens {
            h[*a as usize] += 1.0 / d as f64;
        }
        walsh_inplace(&mut h);
        h
    });
    let mut what = vec![0.0f64; chars];
    what[0] = 1.0;
    let mut phase = vec![1.0f64; n];
    let mut state = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    let inv_n = 1.0 / n as f64;
    let inv_d = 1.0 / d as f64;
    for (mu, out) in what.iter_mut().enumerate().skip(1) {
        for v in 0..n {
            let par = (bits[v] & mu as u64).count_ones() & 1;
            phase[v] = if par == 0 { 1.0 } else { -1.0 };
        }
        for v in 0..n {
            state[v] = phase[v] * inv_n;
        }
        for _ in 0..t {
            match &xspec {
                Some(spec) => {
                    walsh_inplace(&mut state);
                    for (sv, sp) in state.iter_mut().zip(spec.iter()) {
                        *sv *= sp * inv_n;
                    }
                    walsh_inplace(&mut state);
                }
                None => {
                    next.iter_mut().for_each(|v| *v = 0.0);
                    for (e, &(u, _)) in x.entries().iter().enumerate() {
                        next[e / d] += state[u as usize];
                    }
                    for (sv, nv) in state.iter_mut().zip(next.iter()) {
                        *sv = nv * inv_d;
                    }
                }
            }
            for (sv, ph) in state.iter_mut().zip(phase.iter()) {
                *sv *= ph;
            }
        }
        *out = state.iter().sum();
    }
    walsh_inplace(&mut what);
    let scale = 1.0 / chars as f64;
    let mut w: Vec<f64> = what.iter().map(|v| (v * scale).max(0.0)).collect();
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::certification(format!(
            "transfer distribution sums to {sum}, expected 1"
        )));
    }
    w.iter_mut().for_each(|v| *v /= sum);
    Ok(w)
}

/// Exact product distribution for any enumerable group: evolve the joint
/// distribution over (partial product, current vertex) one walk step at a
/// time, then marginalize the vertex.
fn group_walk_weights(s: &GeneratorMultiset, x: &RotationGraph, t: u32) -> Result<Vec<f64>> {
    let desc = s.descriptor();
    let idx = desc.index()?;
    let gn = idx.len();
    let n = x.n();
    let d = x.degree();
    if gn.checked_mul(n).filter(|&v| v <= STATE_CAP).is_none() {
        return Err(Error::capacity(format!(
            "joint state {gn}×{n} exceeds the transfer state cap"
        )));
    }
    let ops = (t as u64)
        .checked_mul((gn * n) as u64)
        .and_then(|v| v.checked_mul(d as u64))
        .ok_or_else(|| Error::capacity("transfer cost overflows".to_string()))?;
    if ops > TRANSFER_OP_BUDGET {
        return Err(Error::capacity(format!(
            "distribution transfer needs ~{ops} operations (budget {TRANSFER_OP_BUDGET})"
        )));
    }
    // one gather table per distinct generator: tab[g] = index of s⁻¹·g
    let mut tab_of: HashMap<GroupElem, usize> = HashMap::new();
    let mut tabs: Vec<Vec<u32>> = Vec::new();
    let mut vertex_tab = vec![0usize; n];
    let mut vertex_elem = vec![0usize; n];
    for v in 0..n {
        let e = s.elem(v);
        vertex_elem[v] = idx.position(&e);
        let tid = *tab_of.entry(e.clone()).or_insert_with(|| {
            let inv = desc.inv(&e);
            let tab: Vec<u32> =
                (0..gn).map(|g| idx.position(&desc.mul(&inv, idx.elem(g))) as u32).collect();
            tabs.push(tab);
            tabs.len() - 1
        });
        vertex_tab[v] = tid;
    }
    // state[v*gn + g] = P(walk so far ends at v with product g)
    let mut state = vec![0.0f64; gn * n];
    let inv_n = 1.0 / n as f64;
    for v in 0..n {
        state[v * gn + vertex_elem[v]] = inv_n;
    }
    let mut next = vec![0.0f64; gn * n];
    let inv_d = 1.0 / d as f64;
    for _ in 0..t {
        next.iter_mut().for_each(|v| *v = 0.0);
        for v in 0..n {
            let tab = &tabs[vertex_tab[v]];
            let out = &mut next[v * gn..(v + 1) * gn];
            for j in 0..d {
                let y = x.neighbor(v, j);
                let src = &state[y * gn..(y + 1) * gn];
                for (o, tg) in out.iter_mut().zip(tab.iter()) {
                    *o += src[*tg as usize];
                }
            }
            out.iter_mut().for_each(|o| *o *= inv_d);
        }
        std::mem::swap(&mut state, &mut next);
    }
    let mut w = vec![0.0f64; gn];
    for v in 0..n {
        for g in 0..gn {
            w[g] += state[v * gn + g];
        }
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::certification(format!(
            "transfer distribution sums to {sum}, expected 1"
        )));
    }
    w.iter_mut().for_each(|v| *v /= sum);
    Ok(w)
}

/// Lay a multiset onto an auxiliary expander's vertex set: `replication`
/// consecutive copies of S (vertex v ↦ S[v mod n]) followed by `pad`
/// identity elements.
pub fn align_with_expander(
    s: &GeneratorMultiset,
    aux: &AuxExpander,
) -> Result<GeneratorMultiset> {
    let n = s.len().ok_or_else(|| {
        Error::precondition("alignment needs a dense multiset".to_string())
    })? as u64;
    let expect = aux
        .replication
        .checked_mul(n)
        .and_then(|v| v.checked_add(aux.pad))
        .ok_or_else(|| Error::capacity("aligned size overflows".to_string()))?;
    if expect != aux.graph.n() {
        return Err(Error::provider(format!(
            "auxiliary graph on {} vertices cannot align {n} generators with \
             replication {} and pad {}",
            aux.graph.n(),
            aux.replication,
            aux.pad
        )));
    }
    if aux.replication == 1 && aux.pad == 0 {
        return Ok(s.clone());
    }
    if expect > PORT_CAP as u64 {
        return Err(Error::capacity(format!(
            "aligned multiset of {expect} generators exceeds the slot cap"
        )));
    }
    let mut elems = Vec::with_capacity(expect as usize);
    for v in 0..aux.replication * n {
        elems.push(s.elem((v % n) as usize));
    }
    let id = s.descriptor().identity();
    for _ in 0..aux.pad {
        elems.push(id.clone());
    }
    GeneratorMultiset::from_elems(s.descriptor(), elems)
}

/// Signed power for Fourier coefficients: v^e with |v| ≤ 1 and an exact
/// integer exponent too large for f64.
fn pow_signed(v: f64, e: &BigUint) -> f64 {
    let odd = e.bit(0);
    let sign = if v < 0.0 && odd { -1.0 } else { 1.0 };
    let mag = v.abs();
    if mag >= 1.0 - 1e-15 {
        return sign * 1.0_f64.min(mag);
    }
    if mag == 0.0 {
        return 0.0;
    }
    let exp = e.to_f64().unwrap_or(f64::INFINITY);
    sign * (exp * mag.ln()).exp()
}

/// (t+1)-fold self-convolution of a distribution over ℤ₂^m: pointwise
/// (t+1)-th powers in the Fourier domain.
pub(crate) fn xor_conv_power(w: &[f64], reps: &BigUint) -> Vec<f64> {
    let len = w.len();
    let mut what = w.to_vec();
    walsh_inplace(&mut what);
    for v in what.iter_mut() {
        *v = pow_signed(*v, reps);
    }
    walsh_inplace(&mut what);
    let scale = 1.0 / len as f64;
    let mut out: Vec<f64> = what.iter().map(|v| (v * scale).max(0.0)).collect();
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        out.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// reps-fold self-convolution over an enumerable group by square-and-
/// multiply on the full multiplication table.
pub(crate) fn group_conv_power(
    desc: crate::group::GroupDescriptor,
    w: &[f64],
    reps: u64,
) -> Result<Vec<f64>> {
    assert!(reps >= 1);
    let idx = desc.index()?;
    let gn = idx.len();
    if gn.checked_mul(gn).filter(|&v| v <= CONV_TABLE_CAP).is_none() {
        return Err(Error::capacity(format!(
            "multiplication table {gn}² exceeds the table cap"
        )));
    }
    let mut table = vec![0u32; gn * gn];
    for a in 0..gn {
        for b in 0..gn {
            table[a * gn + b] = idx.position(&desc.mul(idx.elem(a), idx.elem(b))) as u32;
        }
    }
    let conv = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0f64; gn];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let row = &table[i * gn..(i + 1) * gn];
            for (j, &bj) in b.iter().enumerate() {
                if bj != 0.0 {
                    out[row[j] as usize] += ai * bj;
                }
            }
        }
        out
    };
    // square-and-multiply
    let mut result: Option<Vec<f64>> = None;
    let mut base = w.to_vec();
    let mut e = reps;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => conv(&r, &base),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = conv(&base, &base);
    }
    let mut out = result.unwrap();
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        out.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

/// One amplification stage of the pipeline.
#[derive(Debug, Clone)]
pub struct StageReport {
    /// auxiliary expander description
    pub label: String,
    pub target: f64,
    /// requested λ(X) / bias ratio
    pub epsilon0: f64,
    /// realized per-two-step decay factor λ₀ + 2λ(X)
    pub lambda1: f64,
    pub steps: u32,
    pub aux_n: u64,
    pub aux_degree: u64,
    pub aux_lambda: f64,
    pub replication: u64,
    pub pad: u64,
    pub theta: f64,
    pub bias_in: f64,
    /// bias after replication + identity padding
    pub bias_aligned: f64,
    pub bound_constant: f64,
    pub bound_any_bias: f64,
    pub bias_out: f64,
    pub count_log2: f64,
}

/// Result of the two-stage amplification pipeline.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub multiset: GeneratorMultiset,
    pub target: f64,
    pub beta: f64,
    pub initial_bias: f64,
    pub final_bias: f64,
    pub count: BigUint,
    pub stages: Vec<StageReport>,
}

/// log₂ of an exact positive integer, to f64 precision.
pub fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap().log2();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().unwrap();
    top.log2() + shift as f64
}

/// Degree-efficient bias amplification: stage 1 brings the bias below the
/// constant 1/4 (if needed), stage 2 walks to the target with ε₀ = 1/2.
/// The step count per stage is t = ⌈2(1 + log_{λ₁} target)⌉ with
/// λ₁ = bias + 2λ(X). The returned multiset has certified bias ≤ λ;
/// results beyond the materialization budget are exact weight tables.
pub fn exp_walk_pipeline(
    s: &GeneratorMultiset,
    lambda: f64,
    beta: f64,
    provider: &dyn ExpanderProvider,
) -> Result<PipelineRun> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!("target λ = {lambda} outside (0,1)")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("size exponent β = {beta} outside (0,1)")));
    }
    let initial_bias = s.bias()?;
    if initial_bias > 1.0 - 1e-12 {
        return Err(Error::precondition(format!(
            "initial bias {initial_bias} is not bounded away from 1"
        )));
    }
    // Any constant < min(1/2, (3/4)^{4β}) works as the stage-1 landing
    // point; 1/4 is below that minimum for every β in (0,1) and makes the
    // stage-2 decay factor λ₁ = (1+2·½)·¼ = ½.
    const STAGE_ONE_TARGET: f64 = 0.25;
    let mut cur = s.clone();
    let mut cur_bias = initial_bias;
    let mut stages = Vec::new();
    if lambda < STAGE_ONE_TARGET && cur_bias > STAGE_ONE_TARGET {
        run_stage(&mut cur, &mut cur_bias, STAGE_ONE_TARGET, None, provider, &mut stages)?;
    }
    let eps = if cur_bias < 0.5 { Some(0.5) } else { None };
    run_stage(&mut cur, &mut cur_bias, lambda, eps, provider, &mut stages)?;
    if cur_bias > lambda + 1e-9 {
        return Err(Error::certification(format!(
            "amplified bias {cur_bias} exceeds the target {lambda}"
        )));
    }
    let count = cur.count_exact();
    Ok(PipelineRun {
        multiset: cur,
        target: lambda,
        beta,
        initial_bias,
        final_bias: cur_bias,
        count,
        stages,
    })
}

/// Largest λ(X)/bias ratio that keeps λ₁ = (1+2ε₀)·bias strictly below 1.
fn free_eps(bias: f64) -> f64 {
    if bias <= 0.0 {
        0.5
    } else {
        (0.49 * (1.0 - bias) / bias).min(0.5)
    }
}

fn run_stage(
    cur: &mut GeneratorMultiset,
    cur_bias: &mut f64,
    target: f64,
    eps_fixed: Option<f64>,
    provider: &dyn ExpanderProvider,
    stages: &mut Vec<StageReport>,
) -> Result<()> {
    let bias_in = *cur_bias;
    let (aux, aligned) = match cur.len() {
        Some(n) => {
            let eps_pref = eps_fixed.unwrap_or_else(|| free_eps(bias_in));
            let mut requests = vec![eps_pref * bias_in];
            let relaxed = 0.49 * (1.0 - bias_in);
            if relaxed > requests[0] * 1.0001 {
                requests.push(relaxed);
            }
            let mut found = None;
            let mut last_err = None;
            for r in requests {
                match provider.provide(n as u64, r) {
                    Ok(a) => {
                        found = Some(a);
                        break;
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            let aux = match found {
                Some(a) => a,
                None => return Err(last_err.unwrap()),
            };
            let s_pad = align_with_expander(cur, &aux)?;
            (aux, s_pad)
        }
        None => {
            if !provider.supports_virtual() {
                return Err(Error::capacity(format!(
                    "stage input has {} elements, beyond materialization, and \
                     provider '{}' cannot serve weight-table multisets; use the \
                     complete-graph auxiliary",
                    cur.count_exact(),
                    provider.name()
                )));
            }
            let aux = AuxExpander {
                graph: AuxGraph::Complete { n: 0 },
                replication: 1,
                pad: 0,
                theta: 0.0,
                lambda: 0.0,
                label: "complete (weight-table input)".to_string(),
            };
            (aux, cur.clone())
        }
    };
    let bias_aligned = if aux.replication == 1 && aux.pad == 0 {
        bias_in
    } else {
        aligned.bias()?
    };
    let lambda1 = bias_aligned + 2.0 * aux.lambda;
    let steps = if lambda1 <= f64::MIN_POSITIVE {
        // bias is already exactly zero; a single step keeps it there
        1
    } else if lambda1 >= 1.0 - 1e-9 {
        return Err(Error::provider(format!(
            "auxiliary expander too weak: λ₀ + 2λ(X) = {lambda1} does not decay"
        )));
    } else {
        inner_step_count(lambda1, target)?
    };
    let next = stage_amplify(&aligned, &aux, steps)?;
    let bias_out = next.bias()?;
    let count_log2 = log2_biguint(&next.count_exact());
    stages.push(StageReport {
        label: aux.label.clone(),
        target,
        epsilon0: if bias_aligned > 0.0 { aux.lambda / bias_aligned } else { 0.0 },
        lambda1,
        steps,
        aux_n: if matches!(aux.graph, AuxGraph::Complete { n: 0 }) {
            0
        } else {
            aux.graph.n()
        },
        aux_degree: if matches!(aux.graph, AuxGraph::Complete { n: 0 }) {
            0
        } else {
            aux.graph.degree()
        },
        aux_lambda: aux.lambda,
        replication: aux.replication,
        pad: aux.pad,
        theta: aux.theta,
        bias_in,
        bias_aligned,
        bound_constant: walk_bias_bound(aux.lambda, bias_aligned, steps, BoundMode::Constant),
        bound_any_bias: walk_bias_bound(aux.lambda, bias_aligned, steps, BoundMode::AnyBias),
        bias_out,
        count_log2,
    });
    *cur = next;
    *cur_bias = bias_out;
    Ok(())
}

/// Amplify one stage: real auxiliary graphs walk (explicitly or by
/// transfer); the implicit complete graph uses independence — the product
/// distribution is the (t+1)-fold self-convolution.
fn stage_amplify(
    s: &GeneratorMultiset,
    aux: &AuxExpander,
    t: u32,
) -> Result<GeneratorMultiset> {
    match (&aux.graph, s.len()) {
        (AuxGraph::Rot(x), Some(_)) => amplify_via_walks(s, x, t),
        (AuxGraph::Rot(_), None) => Err(Error::precondition(
            "weight-table multisets cannot walk a materialized graph".to_string(),
        )),
        (AuxGraph::Complete { .. }, Some(n)) => {
            let count = walk_count(n, n, t);
            if count.to_u64().is_some_and(|c| c <= WALK_BUDGET)
                && n.checked_mul(n).filter(|&v| v <= PORT_CAP).is_some()
            {
                let g = build::complete_with_loops(n)?;
                return amplify_via_walks(s, &g, t);
            }
            let w = s.weights_table()?;
            let reps = BigUint::from(t as u64 + 1);
            let powered = match s.descriptor().kind() {
                GroupKind::XorBits => xor_conv_power(&w, &reps),
                _ => group_conv_power(s.descriptor(), &w, t as u64 + 1)?,
            };
            GeneratorMultiset::from_weights(s.descriptor(), powered, count)
        }
        (AuxGraph::Complete { .. }, None) => {
            let w = s.weights_table()?;
            let reps = BigUint::from(t as u64 + 1);
            let powered = match s.descriptor().kind() {
                GroupKind::XorBits => xor_conv_power(&w, &reps),
                _ => group_conv_power(s.descriptor(), &w, t as u64 + 1)?,
            };
            let count = s.count_exact().pow(t + 1);
            GeneratorMultiset::from_weights(s.descriptor(), powered, count)
        }
    }
}
