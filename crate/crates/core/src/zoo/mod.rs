//! Explicit auxiliary expanders.
//!
//! Walk amplification consumes expanders as black boxes: anything with the
//! right vertex count and a certified λ works, and better constructions only
//! improve constants. This module supplies three deterministic families —
//!
//! * AGHP small-bias Cayley graphs on ℤ₂^m (λ ≤ m/√d, checked exactly),
//! * SL₂(p) elementary-generator Cayley graphs, amplified on demand,
//! * the complete graph with self-loops (λ = 0, one-step walks are
//!   independent samples) for exact degenerate instances,
//!
//! plus the provider interface that hands them to the pipelines.

pub mod gf2k;
pub mod primes;

use crate::budget::{GROUP_ENUM_CAP, PORT_CAP, WALK_BUDGET};
use crate::error::{Error, Result};
use crate::graph::{build, RotationGraph, SpectralReport};
use crate::group::{GeneratorMultiset, GroupDescriptor, GroupElem};

use gf2k::Gf2k;

/// The small-bias generator set over ℤ₂^m with 2^{2k} elements, indexed by
/// pairs (x, y) of GF(2^k) elements: bit i of the element at (x, y) is the
/// F₂ inner product ⟨x^i·y⟩ (parity of the product's coordinate vector).
#[derive(Debug, Clone, Copy)]
pub struct AghpSet {
    m: u32,
    k: u32,
    field: Gf2k,
}

impl AghpSet {
    pub fn new(m: u32, k: u32) -> Result<Self> {
        if m == 0 || m > 63 {
            return Err(Error::domain(format!("bit width m = {m} outside 1..=63")));
        }
        if k == 0 || 2 * k > m {
            return Err(Error::domain(format!(
                "field parameter k = {k} needs 1 ≤ k and 2k ≤ m = {m}"
            )));
        }
        Ok(Self { m, k, field: Gf2k::new(k)? })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// d = 2^{2k}.
    pub fn len(&self) -> u64 {
        1u64 << (2 * self.k)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bias guarantee m/√d, clamped to 1.
    pub fn bias_bound(&self) -> f64 {
        (self.m as f64 / (1u64 << self.k) as f64).min(1.0)
    }

    /// Element at index x·2^k + y.
    pub fn element(&self, idx: u64) -> u64 {
        debug_assert!(idx < self.len());
        let x = idx >> self.k;
        let y = idx & ((1u64 << self.k) - 1);
        let mut power = 1u64; // x^0 = 1, also for x = 0
        let mut out = 0u64;
        for i in 0..self.m {
            let bit = (self.field.mul(power, y).count_ones() & 1) as u64;
            out |= bit << i;
            power = self.field.mul(power, x);
        }
        out
    }

    pub fn multiset(&self) -> Result<GeneratorMultiset> {
        if self.len() > WALK_BUDGET {
            return Err(Error::capacity(format!(
                "materializing 2^{} generators exceeds the element budget",
                2 * self.k
            )));
        }
        let desc = GroupDescriptor::xor_bits(self.m)?;
        let elems = (0..self.len()).map(|i| GroupElem::Bits(self.element(i))).collect();
        GeneratorMultiset::from_elems(desc, elems)
    }
}

/// Small-bias set and its Cayley graph on 2^m vertices, with the bias
/// measured exactly by character sums.
pub fn aghp_cayley_graph(m: u32, k: u32) -> Result<(AghpSet, RotationGraph, SpectralReport)> {
    let set = AghpSet::new(m, k)?;
    let s = set.multiset()?;
    let report = s.bias_report()?;
    if report.value > set.bias_bound() + 1e-9 {
        return Err(Error::certification(format!(
            "small-bias set m={m} k={k}: measured bias {} exceeds bound {}",
            report.value,
            set.bias_bound()
        )));
    }
    let graph = build::cayley(&s)?;
    Ok((set, graph, report))
}

/// Smallest prime ≥ n. At 64-bit scale the result always satisfies
/// Bertrand's interval p ≤ 2n, which is asserted.
pub fn find_prime_in_range(n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::domain("prime search needs n ≥ 2".to_string()));
    }
    let p = primes::next_prime_at_least(n)
        .ok_or_else(|| Error::capacity("prime search overflowed u64".to_string()))?;
    debug_assert!(p / 2 < n, "Bertrand interval violated — impossible");
    Ok(p)
}

/// The four elementary generators [[1,±1],[0,1]], [[1,0],[±1,1]] of SL₂(p).
pub fn sl2_generators(p: u32) -> Result<GeneratorMultiset> {
    if p <= 17 {
        return Err(Error::domain(format!("sl2 generator family needs p > 17, got {p}")));
    }
    let desc = GroupDescriptor::sl2(p)?;
    let elems = vec![
        GroupElem::Sl2([1, 1, 0, 1]),
        GroupElem::Sl2([1, p - 1, 0, 1]),
        GroupElem::Sl2([1, 0, 1, 1]),
        GroupElem::Sl2([1, 0, p - 1, 1]),
    ];
    GeneratorMultiset::from_elems(desc, elems)
}

/// An expander on n′ = (p²−1)·p ≥ n vertices with certified λ: SL₂(p)
/// elementary generators, walk-amplified to the target, then symmetrized
/// so the Cayley graph is undirected.
pub fn small_cayley_expander(
    n: u64,
    lambda: f64,
) -> Result<(RotationGraph, GeneratorMultiset, u64)> {
    let (graph, sym, order, _) = small_cayley_expander_full(n, lambda)?;
    Ok((graph, sym, order))
}

/// As [`small_cayley_expander`], also returning the measured λ.
pub fn small_cayley_expander_full(
    n: u64,
    lambda: f64,
) -> Result<(RotationGraph, GeneratorMultiset, u64, f64)> {
    if !(0.0..1.0).contains(&lambda) || lambda == 0.0 {
        return Err(Error::domain(format!("target λ = {lambda} outside (0,1)")));
    }
    if n < 2 {
        return Err(Error::domain("vertex count must be ≥ 2".to_string()));
    }
    // smallest c with c³ ≥ n, then the first prime ≥ c+1 (and > 17)
    let c = (1..).find(|&c: &u64| c.saturating_mul(c).saturating_mul(c) >= n).unwrap();
    let p = find_prime_in_range((c + 1).max(19))?;
    let order = (p * p - 1) * p;
    if order > GROUP_ENUM_CAP as u64 {
        return Err(Error::capacity(format!(
            "certified mode needs group order {order} ≤ {GROUP_ENUM_CAP}"
        )));
    }
    let s0 = sl2_generators(p as u32)?;
    // The complete-graph provider keeps degrees minimal (λ(X) = 0 makes
    // every walk step an independent sample); an AGHP auxiliary would need
    // λ(X) below what the slot caps allow for biases this close to 1.
    let amplified = crate::walks::exp_walk_pipeline(&s0, lambda, 0.5, &CompleteProvider)?;
    if amplified.multiset.is_virtual() {
        return Err(Error::capacity(format!(
            "amplified multiset has {} elements; a rotation graph on {order} \
             vertices cannot carry that degree — raise the target λ",
            amplified.multiset.count_exact()
        )));
    }
    let sym = amplified.multiset.symmetrized()?;
    let measured = sym.bias()?;
    if measured > lambda + 1e-9 {
        return Err(Error::certification(format!(
            "amplified SL₂({p}) bias {measured} exceeds target {lambda}"
        )));
    }
    let graph = build::cayley(&sym)?;
    Ok((graph, sym, order, measured))
}

/// Auxiliary expander handle: a graph to walk on, plus the replication
/// and identity padding that align a generator multiset with its vertex
/// set (|V| = replication·|S| + pad).
#[derive(Debug, Clone)]
pub struct AuxExpander {
    pub graph: AuxGraph,
    pub replication: u64,
    pub pad: u64,
    /// pad / |V| — the bias penalty of the identity padding
    pub theta: f64,
    /// certified λ of the graph
    pub lambda: f64,
    pub label: String,
}

/// The graph inside a provider result. The complete graph with loops is
/// kept implicit so that λ = 0 instances scale to any vertex count.
#[derive(Debug, Clone)]
pub enum AuxGraph {
    Rot(RotationGraph),
    Complete { n: u64 },
}

impl AuxGraph {
    pub fn n(&self) -> u64 {
        match self {
            AuxGraph::Rot(g) => g.n() as u64,
            AuxGraph::Complete { n } => *n,
        }
    }

    pub fn degree(&self) -> u64 {
        match self {
            AuxGraph::Rot(g) => g.degree() as u64,
            AuxGraph::Complete { n } => *n,
        }
    }

    /// Materialize as a rotation graph (capacity permitting).
    pub fn to_rotation(&self) -> Result<RotationGraph> {
        match self {
            AuxGraph::Rot(g) => Ok(g.clone()),
            AuxGraph::Complete { n } => {
                if n.checked_mul(*n).filter(|&x| x <= PORT_CAP as u64).is_none() {
                    return Err(Error::capacity(format!(
                        "complete graph on {n} vertices exceeds the slot cap"
                    )));
                }
                build::complete_with_loops(*n as usize)
            }
        }
    }
}

/// Source of auxiliary expanders for the amplification pipelines.
pub trait ExpanderProvider {
    fn name(&self) -> &'static str;
    /// An expander aligned with a multiset of n generators, with λ at most
    /// `lambda_max`.
    fn provide(&self, n: u64, lambda_max: f64) -> Result<AuxExpander>;
    /// Whether this provider can serve multisets too large to count in
    /// u64 (walks then become independent samples, so only the complete
    /// graph qualifies).
    fn supports_virtual(&self) -> bool {
        false
    }
}

/// Strategy selector mirroring the CLI surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxStrategy {
    AghpPad,
    Sl2,
    Complete,
}

/// One-call form of the provider interface.
pub fn auxiliary_expander(n: u64, lambda: f64, strategy: AuxStrategy) -> Result<AuxExpander> {
    match strategy {
        AuxStrategy::AghpPad => AghpPadProvider::default().provide(n, lambda),
        AuxStrategy::Sl2 => Sl2Provider.provide(n, lambda),
        AuxStrategy::Complete => CompleteProvider.provide(n, lambda),
    }
}

/// Replicate-then-pad AGHP provider: pick the smallest m′ with
/// 2^{m′} ≥ ⌈1/θ_max⌉·n (so padding is at most a θ_max fraction), then the
/// smallest k with m′/2^k ≤ λ. The caller's multiset is replicated
/// r = ⌊2^{m′}/n⌋ times and padded with 2^{m′} mod n identities.
#[derive(Debug, Clone, Copy)]
pub struct AghpPadProvider {
    pub theta_max: f64,
}

impl Default for AghpPadProvider {
    fn default() -> Self {
        Self { theta_max: 0.01 }
    }
}

impl ExpanderProvider for AghpPadProvider {
    fn name(&self) -> &'static str {
        "aghp-pad"
    }

    fn provide(&self, n: u64, lambda_max: f64) -> Result<AuxExpander> {
        if !(0.0..1.0).contains(&lambda_max) || lambda_max == 0.0 {
            return Err(Error::provider(format!("λ = {lambda_max} outside (0,1)")));
        }
        if n == 0 {
            return Err(Error::provider("empty multiset".to_string()));
        }
        if !(0.0..1.0).contains(&self.theta_max) || self.theta_max == 0.0 {
            return Err(Error::provider("θ_max outside (0,1)".to_string()));
        }
        let r_min = (1.0 / self.theta_max).ceil() as u64;
        let min_vertices = r_min
            .checked_mul(n)
            .ok_or_else(|| Error::provider("replication overflow".to_string()))?;
        let mut m_prime = 64 - (min_vertices - 1).leading_zeros().max(0);
        if (1u64 << m_prime) < min_vertices {
            m_prime += 1;
        }
        loop {
            if m_prime > 40 {
                return Err(Error::provider(format!(
                    "no small-bias parameterization reaches λ = {lambda_max} for n = {n}"
                )));
            }
            // smallest k with m′/2^k ≤ λ, subject to 2k ≤ m′
            let k = (1..=m_prime / 2).find(|&k| {
                m_prime as f64 / (1u64 << k) as f64 <= lambda_max
            });
            if let Some(k) = k {
                let vertices = 1u64 << m_prime;
                let degree = 1u64 << (2 * k);
                if vertices.saturating_mul(degree) > PORT_CAP as u64 {
                    return Err(Error::provider(format!(
                        "small-bias graph 2^{m_prime} × 2^{} exceeds the slot cap",
                        2 * k
                    )));
                }
                let (set, graph, report) = aghp_cayley_graph(m_prime, k)?;
                let replication = vertices / n;
                let pad = vertices % n;
                return Ok(AuxExpander {
                    graph: AuxGraph::Rot(graph),
                    replication,
                    pad,
                    theta: pad as f64 / vertices as f64,
                    lambda: report.value.min(set.bias_bound()),
                    label: format!("aghp m={m_prime} k={k}"),
                });
            }
            m_prime += 1;
        }
    }
}

/// SL₂ provider: a small Cayley expander on n′ ≥ n vertices, aligned by
/// padding the multiset with n′ − n identities (no replication).
#[derive(Debug, Clone, Copy)]
pub struct Sl2Provider;

impl ExpanderProvider for Sl2Provider {
    fn name(&self) -> &'static str {
        "sl2"
    }

    fn provide(&self, n: u64, lambda_max: f64) -> Result<AuxExpander> {
        let (graph, _s, order, lambda) = small_cayley_expander_full(n, lambda_max)?;
        Ok(AuxExpander {
            graph: AuxGraph::Rot(graph),
            replication: 1,
            pad: order - n,
            theta: (order - n) as f64 / order as f64,
            lambda,
            label: format!("sl2 order {order}"),
        })
    }
}

/// Complete-graph provider: λ = 0 exactly, every walk step an independent
/// sample. The graph is implicit, so it scales to any n.
#[derive(Debug, Clone, Copy)]
pub struct CompleteProvider;

impl ExpanderProvider for CompleteProvider {
    fn name(&self) -> &'static str {
        "complete"
    }

    fn provide(&self, n: u64, _lambda_max: f64) -> Result<AuxExpander> {
        if n == 0 {
            return Err(Error::provider("empty multiset".to_string()));
        }
        Ok(AuxExpander {
            graph: AuxGraph::Complete { n },
            replication: 1,
            pad: 0,
            theta: 0.0,
            lambda: 0.0,
            label: format!("complete n={n}"),
        })
    }

    fn supports_virtual(&self) -> bool {
        true
    }
}
