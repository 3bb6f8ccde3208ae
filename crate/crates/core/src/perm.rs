//! Permutation lists, exact decomposition of regular graphs into
//! permutations, expansion amplification for permutation sets, and the
//! whole-graph transformation built on top of them.
//!
//! A d-regular undirected multigraph's averaged walk operator is doubly
//! stochastic, so it splits exactly into d permutation matrices. The
//! amplifiers compose those permutations along derandomized walk
//! families; the composed list's average is certified directly on the
//! n×n matrix (its non-principal spectrum is what amplification drives
//! down, and n! is unreachable by any global method).

use nalgebra::DMatrix;
use num_traits::ToPrimitive;

use crate::budget::WALK_BUDGET;
use crate::error::{Error, Result};
use crate::graph::{spectral, RotationGraph, SpectralReport};
use crate::walks::{enumerate_walks, inner_step_count};
use crate::zoo::{AuxExpander, ExpanderProvider};

/// Largest total image-table size (entries) an amplified list may hold.
pub const PERM_TABLE_CAP: u64 = 40_000_000;

/// A list of bijections on [n]; the average of their matrices is doubly
/// stochastic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationList {
    n: usize,
    perms: Vec<Vec<u32>>,
}

impl PermutationList {
    pub fn new(n: usize, perms: Vec<Vec<u32>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("permutations need n ≥ 1".to_string()));
        }
        if perms.is_empty() {
            return Err(Error::domain("permutation list is empty".to_string()));
        }
        let mut seen = vec![false; n];
        for (j, p) in perms.iter().enumerate() {
            if p.len() != n {
                return Err(Error::domain(format!(
                    "permutation {j} has {} images, expected {n}",
                    p.len()
                )));
            }
            seen.iter_mut().for_each(|s| *s = false);
            for &img in p {
                if img as usize >= n || seen[img as usize] {
                    return Err(Error::domain(format!(
                        "permutation {j} is not a bijection on [{n}]"
                    )));
                }
                seen[img as usize] = true;
            }
        }
        Ok(Self { n, perms })
    }

    pub fn identity(n: usize) -> Vec<u32> {
        (0..n as u32).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn perm(&self, j: usize) -> &[u32] {
        &self.perms[j]
    }

    pub fn perms(&self) -> &[Vec<u32>] {
        &self.perms
    }

    /// (1/d) Σ_j P_j as a dense matrix (entry [σ(i), i] += 1/d).
    pub fn average(&self) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(self.n, self.n);
        let w = 1.0 / self.perms.len() as f64;
        for p in &self.perms {
            for (i, &img) in p.iter().enumerate() {
                m[(img as usize, i)] += w;
            }
        }
        m
    }

    /// Exact integer edge-count matrix Σ_j P_j (entry [σ(i), i]).
    pub fn count_matrix(&self) -> DMatrix<u64> {
        let mut m = DMatrix::<u64>::zeros(self.n, self.n);
        for p in &self.perms {
            for (i, &img) in p.iter().enumerate() {
                m[(img as usize, i)] += 1;
            }
        }
        m
    }

    /// Largest non-principal singular value of the average — the
    /// expansion certificate for the list.
    pub fn deflated_lambda(&self) -> Result<SpectralReport> {
        let d = self.perms.len() as f64;
        let forward = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for p in &self.perms {
                for (i, &img) in p.iter().enumerate() {
                    y[img as usize] += x[i];
                }
            }
            y.iter_mut().for_each(|v| *v /= d);
        };
        let reverse = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for p in &self.perms {
                for (i, &img) in p.iter().enumerate() {
                    y[i] += x[img as usize];
                }
            }
            y.iter_mut().for_each(|v| *v /= d);
        };
        spectral::deflated_operator_norm(self.n, forward, reverse)
    }

    /// Compose entries along an index track, applying `track[0]` first.
    /// Sentinel `u32::MAX` entries are skipped (identity padding).
    pub fn compose_track(&self, track: &[u32]) -> Vec<u32> {
        let mut out = Self::identity(self.n);
        for &j in track {
            if j == u32::MAX {
                continue;
            }
            let p = &self.perms[j as usize];
            out.iter_mut().for_each(|v| *v = p[*v as usize]);
        }
        out
    }
}

fn invert_perm(p: &[u32]) -> Vec<u32> {
    let mut inv = vec![0u32; p.len()];
    for (i, &img) in p.iter().enumerate() {
        inv[img as usize] = i as u32;
    }
    inv
}

// ---------------------------------------------------------------------
// Exact decomposition of a regular multigraph into permutations.
// ---------------------------------------------------------------------

/// Split a d-regular undirected multigraph into exactly d permutations
/// with (1/d)·Σ P_j equal to the averaged walk operator, edge
/// multiplicities preserved. Each round extracts a perfect matching of
/// the bipartite out/in double cover (deterministic augmenting order),
/// which exists at every round because the remaining multigraph stays
/// regular.
pub fn konig_decompose(g: &RotationGraph) -> Result<PermutationList> {
    if g.is_directed() {
        return Err(Error::precondition(
            "decomposition needs an undirected regular multigraph".to_string(),
        ));
    }
    let n = g.n();
    let d = g.degree();
    // remaining[v] = sorted (target, multiplicity) pairs of unused edges.
    let mut remaining: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
    for v in 0..n {
        let mut targets: Vec<u32> = (0..d).map(|i| g.neighbor(v, i) as u32).collect();
        targets.sort_unstable();
        let mut packed: Vec<(u32, u32)> = Vec::new();
        for t in targets {
            match packed.last_mut() {
                Some((u, c)) if *u == t => *c += 1,
                _ => packed.push((t, 1)),
            }
        }
        remaining[v] = packed;
    }
    let mut perms = Vec::with_capacity(d);
    for round in 0..d {
        let matching = hopcroft_karp(n, &remaining).ok_or_else(|| {
            Error::certification(format!(
                "no perfect matching at round {round}; input cannot be regular"
            ))
        })?;
        for (v, &u) in matching.iter().enumerate() {
            let row = &mut remaining[v];
            let pos = row
                .binary_search_by_key(&u, |&(t, _)| t)
                .expect("matched edge must remain");
            if row[pos].1 == 1 {
                row.remove(pos);
            } else {
                row[pos].1 -= 1;
            }
        }
        perms.push(matching);
    }
    debug_assert!(remaining.iter().all(|r| r.is_empty()));
    PermutationList::new(n, perms)
}

/// Maximum bipartite matching between [n] rows and [n] cols, where row v
/// may match any col in `adj[v]`; returns the full matching if perfect.
fn hopcroft_karp(n: usize, adj: &[Vec<(u32, u32)>]) -> Option<Vec<u32>> {
    const NIL: u32 = u32::MAX;
    let mut match_row = vec![NIL; n]; // row -> col
    let mut match_col = vec![NIL; n]; // col -> row
    let mut dist = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    loop {
        // BFS layering from free rows.
        queue.clear();
        for v in 0..n {
            if match_row[v] == NIL {
                dist[v] = 0;
                queue.push_back(v);
            } else {
                dist[v] = u32::MAX;
            }
        }
        let mut found_free_col = false;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &adj[v] {
                let owner = match_col[u as usize];
                if owner == NIL {
                    found_free_col = true;
                } else if dist[owner as usize] == u32::MAX {
                    dist[owner as usize] = dist[v] + 1;
                    queue.push_back(owner as usize);
                }
            }
        }
        if !found_free_col {
            break;
        }
        // DFS augmentation along the layering.
        fn try_augment(
            v: usize,
            adj: &[Vec<(u32, u32)>],
            dist: &mut [u32],
            match_row: &mut [u32],
            match_col: &mut [u32],
        ) -> bool {
            for idx in 0..adj[v].len() {
                let u = adj[v][idx].0 as usize;
                let owner = match_col[u];
                let ok = if owner == u32::MAX {
                    true
                } else if dist[owner as usize] == dist[v] + 1 {
                    try_augment(owner as usize, adj, dist, match_row, match_col)
                } else {
                    false
                };
                if ok {
                    match_row[v] = u as u32;
                    match_col[u] = v as u32;
                    return true;
                }
            }
            dist[v] = u32::MAX;
            false
        }
        for v in 0..n {
            if match_row[v] == NIL {
                try_augment(v, adj, &mut dist, &mut match_row, &mut match_col);
            }
        }
    }
    if match_row.iter().any(|&u| u == NIL) {
        return None;
    }
    Some(match_row)
}

// ---------------------------------------------------------------------
// Amplification engines.
// ---------------------------------------------------------------------

/// Which derandomized walk family drives the composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplifyEngine {
    /// Plain expander walks on an auxiliary graph over the list indices.
    Walks,
    /// Interleaved inner-graph walks (fewer random bits per step).
    Swide,
    /// Iterated edge-pair squaring rounds.
    Eml,
}

impl AmplifyEngine {
    pub fn name(&self) -> &'static str {
        match self {
            AmplifyEngine::Walks => "walks",
            AmplifyEngine::Swide => "swide",
            AmplifyEngine::Eml => "eml",
        }
    }
}

/// Result of amplifying a permutation list.
#[derive(Debug, Clone)]
pub struct PermAmplification {
    pub list: PermutationList,
    /// For each output entry, the input indices composed (applied in
    /// order; identity padding omitted). Entry j of the unamplified
    /// shortcut is `[j]`.
    pub words: Vec<Vec<u32>>,
    pub engine: AmplifyEngine,
    pub target: f64,
    pub lambda0: f64,
    /// Certified deflated λ of the output average.
    pub achieved: f64,
    /// Longest composition (in input permutations) over all entries.
    pub walk_length: u32,
    pub label: String,
}

/// Compose the input permutations along the chosen engine's walk family
/// until the deflated λ of the average is certified ≤ `lambda`.
pub fn amplify_permutations(
    p: &PermutationList,
    lambda: f64,
    engine: AmplifyEngine,
    provider: &dyn ExpanderProvider,
) -> Result<PermAmplification> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!(
            "target λ = {lambda} must lie in (0,1)"
        )));
    }
    let lambda0 = p.deflated_lambda()?.value;
    if lambda0 >= 1.0 - 1e-12 {
        return Err(Error::precondition(format!(
            "input average is not expanding (deflated λ = {lambda0:.6})"
        )));
    }
    if lambda >= lambda0 - 1e-9 {
        // Identity amplification: targets at (or within measurement
        // noise of) the input's expansion return the list unchanged.
        return Ok(PermAmplification {
            list: p.clone(),
            words: (0..p.len() as u32).map(|j| vec![j]).collect(),
            engine,
            target: lambda,
            lambda0,
            achieved: lambda0,
            walk_length: 1,
            label: format!("unamplified ({})", engine.name()),
        });
    }
    match engine {
        AmplifyEngine::Walks => amplify_walks(p, lambda, lambda0, provider),
        AmplifyEngine::Eml => amplify_eml(p, lambda, lambda0, provider),
        AmplifyEngine::Swide => amplify_swide(p, lambda, lambda0),
    }
}

/// Index layout shared with the multiset aligner: auxiliary vertex v
/// stands for input entry v mod d while v < replication·d, and for the
/// identity afterwards (returned as the sentinel).
fn layout_index(v: u32, d: usize, replication: u64) -> u32 {
    if (v as u64) < replication * d as u64 {
        v % d as u32
    } else {
        u32::MAX
    }
}

/// Deflated λ of the identity-padded average without materializing the
/// padded list: avg_pad = (r·d·A + pad·I) / (r·d + pad).
fn padded_lambda(p: &PermutationList, aux: &AuxExpander) -> Result<f64> {
    let d = p.len() as f64;
    let live = (aux.replication * p.len() as u64) as f64;
    let pad = aux.pad as f64;
    let total = live + pad;
    let forward = |x: &[f64], y: &mut [f64]| {
        y.iter_mut().for_each(|v| *v = 0.0);
        for q in p.perms() {
            for (i, &img) in q.iter().enumerate() {
                y[img as usize] += x[i];
            }
        }
        for (yi, xi) in y.iter_mut().zip(x.iter()) {
            *yi = (*yi / d * live + pad * xi) / total;
        }
    };
    let reverse = |x: &[f64], y: &mut [f64]| {
        y.iter_mut().for_each(|v| *v = 0.0);
        for q in p.perms() {
            for (i, &img) in q.iter().enumerate() {
                y[i] += x[img as usize];
            }
        }
        for (yi, xi) in y.iter_mut().zip(x.iter()) {
            *yi = (*yi / d * live + pad * xi) / total;
        }
    };
    Ok(spectral::deflated_operator_norm(p.n(), forward, reverse)?.value)
}

fn check_output_budget(count: u64, n: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::domain("empty walk family".to_string()));
    }
    if count > WALK_BUDGET || count.saturating_mul(n as u64) > PERM_TABLE_CAP {
        return Err(Error::capacity(format!(
            "amplified list of {count} permutations on {n} points exceeds the table cap"
        )));
    }
    Ok(())
}

fn certify(
    list: PermutationList,
    words: Vec<Vec<u32>>,
    engine: AmplifyEngine,
    target: f64,
    lambda0: f64,
    label: String,
) -> Result<PermAmplification> {
    let achieved = list.deflated_lambda()?.value;
    if achieved > target + 1e-9 {
        return Err(Error::certification(format!(
            "amplified deflated λ = {achieved:.6} misses the target {target}"
        )));
    }
    let walk_length = words.iter().map(|w| w.len() as u32).max().unwrap_or(0);
    Ok(PermAmplification {
        list,
        words,
        engine,
        target,
        lambda0,
        achieved,
        walk_length,
        label,
    })
}

fn amplify_walks(
    p: &PermutationList,
    lambda: f64,
    lambda0: f64,
    provider: &dyn ExpanderProvider,
) -> Result<PermAmplification> {
    let d = p.len();
    let aux = provider.provide(d as u64, 0.49 * (1.0 - lambda0))?;
    let lambda_pad = padded_lambda(p, &aux)?;
    let lambda1 = lambda_pad + 2.0 * aux.lambda;
    if lambda1 >= 1.0 - 1e-9 {
        return Err(Error::provider(format!(
            "auxiliary graph from {} leaves λ₁ = {lambda1:.4} ≥ 1",
            aux.label
        )));
    }
    let t = inner_step_count(lambda1, lambda)?;
    let x = aux.graph.to_rotation()?;
    let count = crate::walks::walk_count(x.n(), x.degree(), t)
        .to_u64()
        .ok_or_else(|| Error::capacity("walk count overflows u64".to_string()))?;
    check_output_budget(count, p.n())?;
    let mut perms = Vec::with_capacity(count as usize);
    let mut words = Vec::with_capacity(count as usize);
    enumerate_walks(&x, t).for_each(|track| {
        let word: Vec<u32> = track
            .iter()
            .map(|&v| layout_index(v, d, aux.replication))
            .filter(|&j| j != u32::MAX)
            .collect();
        let mut composed = PermutationList::identity(p.n());
        for &j in &word {
            let q = p.perm(j as usize);
            composed.iter_mut().for_each(|v| *v = q[*v as usize]);
        }
        perms.push(composed);
        words.push(word);
    });
    let list = PermutationList::new(p.n(), perms)?;
    let label = format!(
        "walks t={t} over {} (λ₁={lambda1:.4}, pad λ={lambda_pad:.4})",
        aux.label
    );
    certify(list, words, AmplifyEngine::Walks, lambda, lambda0, label)
}

fn amplify_eml(
    p: &PermutationList,
    lambda: f64,
    lambda0: f64,
    provider: &dyn ExpanderProvider,
) -> Result<PermAmplification> {
    // Squaring rounds: each round pairs entries along the edges of an
    // auxiliary graph over the current indices, so λ → λ² + λ(aux).
    let mut cur: Vec<Vec<u32>> = p.perms().to_vec();
    let mut cur_words: Vec<Vec<u32>> = (0..p.len() as u32).map(|j| vec![j]).collect();
    let mut cur_lambda = lambda0;
    let mut rounds = 0u32;
    let mut labels: Vec<String> = Vec::new();
    while cur_lambda > lambda {
        rounds += 1;
        if rounds > 16 {
            return Err(Error::Convergence {
                msg: "squaring rounds did not reach the target".to_string(),
                best: cur_lambda,
                residual: cur_lambda - lambda,
            });
        }
        // Need λ² + λ_aux ≤ target eventually; ask for slack below the
        // squared value's distance to the target.
        let want = (0.49 * (lambda - cur_lambda * cur_lambda))
            .max(0.05 * (1.0 - cur_lambda))
            .max(1e-6);
        let aux = provider.provide(cur.len() as u64, want)?;
        let x = aux.graph.to_rotation()?;
        let count = (x.n() as u64).saturating_mul(x.degree() as u64);
        check_output_budget(count, p.n())?;
        let mut next = Vec::with_capacity(count as usize);
        let mut next_words = Vec::with_capacity(count as usize);
        for v in 0..x.n() {
            let iv = layout_index(v as u32, cur.len(), aux.replication);
            for slot in 0..x.degree() {
                let u = x.neighbor(v, slot) as u32;
                let iu = layout_index(u, cur.len(), aux.replication);
                // Edge (v → u) composes entry(v) then entry(u).
                let mut composed = match iv {
                    u32::MAX => PermutationList::identity(p.n()),
                    j => cur[j as usize].clone(),
                };
                if iu != u32::MAX {
                    let q = &cur[iu as usize];
                    composed.iter_mut().for_each(|w| *w = q[*w as usize]);
                }
                let mut word = match iv {
                    u32::MAX => Vec::new(),
                    j => cur_words[j as usize].clone(),
                };
                if iu != u32::MAX {
                    word.extend_from_slice(&cur_words[iu as usize]);
                }
                next.push(composed);
                next_words.push(word);
            }
        }
        cur = next;
        cur_words = next_words;
        let list = PermutationList::new(p.n(), cur.clone())?;
        cur_lambda = list.deflated_lambda()?.value;
        labels.push(format!(
            "round {rounds}: aux {} → λ={cur_lambda:.5}",
            aux.label
        ));
    }
    let list = PermutationList::new(p.n(), cur)?;
    let label = format!("squaring ×{rounds} [{}]", labels.join("; "));
    certify(list, cur_words, AmplifyEngine::Eml, lambda, lambda0, label)
}

fn amplify_swide(p: &PermutationList, lambda: f64, lambda0: f64) -> Result<PermAmplification> {
    use crate::group::{GeneratorMultiset, GroupDescriptor, GroupElem};
    // Pad the index set to a power of two and couple the complete xor
    // graph over it (λ = 0, slot inversion = identity) with a *dense*
    // inner xor group: every interleaved step then draws a fresh
    // uniform index, so the composed list's average is the (t+1)-th
    // power of the padded average and its deflated λ is at most
    // λ_pad^{t+1}.
    let d = p.len();
    let d_pad = d.next_power_of_two().max(2);
    let b = d_pad.trailing_zeros();
    let s = 2u32;
    let desc = GroupDescriptor::xor_bits(b).unwrap();
    let outer_set = GeneratorMultiset::from_elems(
        desc,
        (0..d_pad as u64).map(GroupElem::Bits).collect(),
    )?;
    let outer = crate::graph::build::cayley(&outer_set)?;
    let inner_desc = GroupDescriptor::xor_bits(s * b)?;
    let inner_set = GeneratorMultiset::from_elems(
        inner_desc,
        (0..(1u64 << (s * b))).map(GroupElem::Bits).collect(),
    )?;
    let product = crate::swide::SWideProduct::new(outer, inner_set, s)?;
    let lambda_pad = if d_pad == d {
        lambda0
    } else {
        // Identity padding: (d·A + pad·I)/d_pad.
        let live = d as f64;
        let pad = (d_pad - d) as f64;
        let dd = d as f64;
        let forward = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for q in p.perms() {
                for (i, &img) in q.iter().enumerate() {
                    y[img as usize] += x[i];
                }
            }
            for (yi, xi) in y.iter_mut().zip(x.iter()) {
                *yi = (*yi / dd * live + pad * xi) / d_pad as f64;
            }
        };
        let reverse = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for q in p.perms() {
                for (i, &img) in q.iter().enumerate() {
                    y[i] += x[img as usize];
                }
            }
            for (yi, xi) in y.iter_mut().zip(x.iter()) {
                *yi = (*yi / dd * live + pad * xi) / d_pad as f64;
            }
        };
        spectral::deflated_operator_norm(p.n(), forward, reverse)?.value
    };
    let mut t = if lambda_pad <= 0.0 {
        s
    } else {
        // λ_pad^{t+1} ≤ λ with at least s steps.
        let needed = (lambda.ln() / lambda_pad.ln() - 1.0 - 1e-12).ceil().max(0.0) as u32;
        needed.max(s)
    };
    loop {
        let count = product
            .walks(t)?
            .count()
            .to_u64()
            .ok_or_else(|| Error::capacity("walk count overflows u64".to_string()))?;
        check_output_budget(count, p.n())?;
        let tracks = crate::swide::vertex_tracks(&product, t)?;
        let mut perms = Vec::with_capacity(tracks.len());
        let mut words = Vec::with_capacity(tracks.len());
        for track in &tracks {
            let word: Vec<u32> = track
                .iter()
                .filter_map(|&v| if (v as usize) < d { Some(v) } else { None })
                .collect();
            let mut composed = PermutationList::identity(p.n());
            for &j in &word {
                let q = p.perm(j as usize);
                composed.iter_mut().for_each(|w| *w = q[*w as usize]);
            }
            perms.push(composed);
            words.push(word);
        }
        let list = PermutationList::new(p.n(), perms)?;
        let achieved = list.deflated_lambda()?.value;
        if achieved <= lambda + 1e-9 {
            let label = format!(
                "interleaved walks t={t} (blocks={s}, pad λ={lambda_pad:.4}, inner 2^{})",
                s * b
            );
            return certify(list, words, AmplifyEngine::Swide, lambda, lambda0, label);
        }
        // Numerical shortfall only: one extra step tightens the power.
        t += 1;
        if t > 64 {
            return Err(Error::Convergence {
                msg: "interleaved walk length exceeded 64 without certifying".to_string(),
                best: achieved,
                residual: achieved - lambda,
            });
        }
    }
}

// ---------------------------------------------------------------------
// Whole-graph transformation.
// ---------------------------------------------------------------------

/// A transformed graph along with everything needed to audit it.
#[derive(Debug, Clone)]
pub struct GraphTransform {
    pub graph: RotationGraph,
    /// The exact permutation split of the input.
    pub base: PermutationList,
    pub amp: PermAmplification,
    /// Port j < amp.list.len() walks forward along words[j]; higher
    /// ports walk the same word backwards (inverse entries).
    pub doubled: bool,
}

/// Rewire a regular multigraph to expansion ≤ `lambda` on the same
/// vertex set: split into permutations, amplify, and rebuild. Every
/// output edge is the endpoint of a short walk in the input graph.
pub fn transform_graph(
    g: &RotationGraph,
    lambda: f64,
    engine: AmplifyEngine,
    provider: &dyn ExpanderProvider,
) -> Result<GraphTransform> {
    let base = konig_decompose(g)?;
    let amp = amplify_permutations(&base, lambda, engine, provider)?;
    let (graph, doubled) = graph_from_permutations(&amp.list)?;
    Ok(GraphTransform {
        graph,
        base,
        amp,
        doubled,
    })
}

/// Build an undirected rotation graph whose averaged operator is the
/// average of the given permutations. If the directed edge multiset is
/// already symmetric the ports pair up exactly (degree = list size);
/// otherwise each entry contributes a forward and a backward port
/// (degree doubled), which symmetrizes without changing the deflated λ
/// beyond averaging with the adjoint.
pub fn graph_from_permutations(p: &PermutationList) -> Result<(RotationGraph, bool)> {
    let n = p.n();
    let d = p.len();
    let counts = p.count_matrix();
    let symmetric = (0..n).all(|v| (0..n).all(|u| counts[(v, u)] == counts[(u, v)]));
    if symmetric {
        // Pair each directed edge (v → u at port j) with an unused
        // reverse edge (u → v at port j′), deterministically.
        let mut rot = vec![(u32::MAX, u32::MAX); n * d];
        // open[u] = ports of u not yet paired, grouped later by target.
        let mut paired = vec![false; n * d];
        for v in 0..n {
            for j in 0..d {
                if paired[v * d + j] {
                    continue;
                }
                let u = p.perm(j)[v] as usize;
                // Find the smallest unpaired reverse port at u.
                let mut found = None;
                for j2 in 0..d {
                    if !paired[u * d + j2] && p.perm(j2)[u] as usize == v {
                        // A loop edge must not pair a port with itself
                        // unless it is genuinely the same slot.
                        if u == v && j2 == j {
                            // Self-paired loop slot: rot maps to itself.
                            found = Some(j2);
                            break;
                        }
                        if u != v || j2 != j {
                            found = Some(j2);
                            break;
                        }
                    }
                }
                let j2 = found.ok_or_else(|| {
                    Error::certification(
                        "edge counts symmetric but ports failed to pair".to_string(),
                    )
                })?;
                rot[v * d + j] = (u as u32, j2 as u32);
                rot[u * d + j2] = (v as u32, j as u32);
                paired[v * d + j] = true;
                paired[u * d + j2] = true;
            }
        }
        let rot: Vec<(u32, u32)> = rot.into_iter().collect();
        Ok((RotationGraph::new(n, d, false, rot)?, false))
    } else {
        // Forward ports [0, d), backward ports [d, 2d).
        let mut rot = vec![(0u32, 0u32); n * 2 * d];
        for (j, q) in p.perms().iter().enumerate() {
            let inv = invert_perm(q);
            for v in 0..n {
                let u = q[v] as usize;
                rot[v * 2 * d + j] = (u as u32, (d + j) as u32);
                let w = inv[v] as usize;
                rot[v * 2 * d + d + j] = (w as u32, j as u32);
            }
        }
        Ok((RotationGraph::new(n, 2 * d, false, rot)?, true))
    }
}

/// Replay one output edge as the walk in the base graph that realizes
/// it: returns the vertex path. Fails if any step is not a base edge or
/// the endpoint disagrees with the output graph.
pub fn replay_edge(tr: &GraphTransform, g: &RotationGraph, v: usize, port: usize) -> Result<Vec<usize>> {
    let d_amp = tr.amp.list.len();
    let (word, backwards) = if tr.doubled {
        if port < d_amp {
            (&tr.amp.words[port], false)
        } else {
            (&tr.amp.words[port - d_amp], true)
        }
    } else {
        (&tr.amp.words[port], false)
    };
    let mut path = vec![v];
    let mut cur = v;
    let steps: Vec<(u32, bool)> = if backwards {
        word.iter().rev().map(|&j| (j, true)).collect()
    } else {
        word.iter().map(|&j| (j, false)).collect()
    };
    for (j, inverted) in steps {
        let q = tr.base.perm(j as usize);
        let next = if inverted {
            invert_perm(q)[cur] as usize
        } else {
            q[cur] as usize
        };
        // Each base permutation edge must exist in the input graph.
        let ok = (0..g.degree()).any(|slot| g.neighbor(cur, slot) == next);
        if !ok {
            return Err(Error::certification(format!(
                "step {cur} → {next} is not an edge of the base graph"
            )));
        }
        cur = next;
        path.push(cur);
    }
    let (want, _) = tr.graph.rot(v, port);
    if cur != want {
        return Err(Error::certification(format!(
            "replayed endpoint {cur} disagrees with the output edge {want}"
        )));
    }
    Ok(path)
}

// ---------------------------------------------------------------------
// Partial monotone maps.
// ---------------------------------------------------------------------

/// A strictly increasing partial injection on [n]: sorted domain, with
/// images strictly increasing along it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialMonotoneMap {
    n: usize,
    domain: Vec<u32>,
    images: Vec<u32>,
}

impl PartialMonotoneMap {
    pub fn new(n: usize, domain: Vec<u32>, images: Vec<u32>) -> Result<Self> {
        if domain.len() != images.len() {
            return Err(Error::domain(
                "domain and image lists differ in length".to_string(),
            ));
        }
        for w in domain.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::domain("domain must be sorted strictly".to_string()));
            }
        }
        for w in images.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::domain(
                    "images must be strictly increasing".to_string(),
                ));
            }
        }
        if let Some(&last) = domain.last() {
            if last as usize >= n {
                return Err(Error::domain("domain exceeds [n]".to_string()));
            }
        }
        if let Some(&last) = images.last() {
            if last as usize >= n {
                return Err(Error::domain("images exceed [n]".to_string()));
            }
        }
        Ok(Self { n, domain, images })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn domain(&self) -> &[u32] {
        &self.domain
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    pub fn apply(&self, x: u32) -> Option<u32> {
        self.domain
            .binary_search(&x)
            .ok()
            .map(|pos| self.images[pos])
    }

    /// 0/1 matrix with M[f(x), x] = 1 on the domain.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(self.n, self.n);
        for (&x, &y) in self.domain.iter().zip(self.images.iter()) {
            m[(y as usize, x as usize)] = 1.0;
        }
        m
    }

    /// The complementary map: complement of the domain paired in order
    /// with the complement of the images. The union of a map and its
    /// complement is a bijection on [n].
    pub fn complement(&self) -> PartialMonotoneMap {
        let in_domain: Vec<bool> = mark(self.n, &self.domain);
        let in_image: Vec<bool> = mark(self.n, &self.images);
        let domain: Vec<u32> = (0..self.n as u32).filter(|&x| !in_domain[x as usize]).collect();
        let images: Vec<u32> = (0..self.n as u32).filter(|&y| !in_image[y as usize]).collect();
        PartialMonotoneMap {
            n: self.n,
            domain,
            images,
        }
    }
}

fn mark(n: usize, idx: &[u32]) -> Vec<bool> {
    let mut v = vec![false; n];
    for &i in idx {
        v[i as usize] = true;
    }
    v
}

/// Check that (f, f̄) tile a bijection on [n]: domains partition [n] and
/// images partition [n].
fn check_pair(f: &PartialMonotoneMap, fbar: &PartialMonotoneMap) -> Result<()> {
    if f.n != fbar.n {
        return Err(Error::domain("pair sizes disagree".to_string()));
    }
    let n = f.n;
    let mut dom = vec![false; n];
    let mut img = vec![false; n];
    for m in [f, fbar] {
        for (&x, &y) in m.domain.iter().zip(m.images.iter()) {
            if dom[x as usize] || img[y as usize] {
                return Err(Error::domain(
                    "pair union is not a bijection (overlap)".to_string(),
                ));
            }
            dom[x as usize] = true;
            img[y as usize] = true;
        }
    }
    if dom.iter().any(|&b| !b) || img.iter().any(|&b| !b) {
        return Err(Error::domain(
            "pair union is not a bijection (gap)".to_string(),
        ));
    }
    Ok(())
}

/// Expand a product of permutations, each given as a monotone pair
/// (f, f̄), into at most 2^k partial monotone maps whose matrix sum is
/// exactly the product P_{word[0]}·P_{word[1]}·… (rightmost applied
/// first). Every point follows exactly one sign pattern, so the
/// surviving maps partition [n].
pub fn monotone_product_decompose(
    pairs: &[(PartialMonotoneMap, PartialMonotoneMap)],
    word: &[u32],
) -> Result<Vec<PartialMonotoneMap>> {
    if pairs.is_empty() || word.is_empty() {
        return Err(Error::domain("need at least one map and one index".to_string()));
    }
    if word.len() > 24 {
        return Err(Error::capacity(format!(
            "word of length {} would enumerate 2^{} sign patterns",
            word.len(),
            word.len()
        )));
    }
    let n = pairs[0].0.n;
    for (f, fbar) in pairs {
        check_pair(f, fbar)?;
    }
    if let Some(&bad) = word.iter().find(|&&i| i as usize >= pairs.len()) {
        return Err(Error::domain(format!("word index {bad} out of range")));
    }
    let k = word.len();
    let mut out = Vec::new();
    for pattern in 0..(1u32 << k) {
        // The product applies the rightmost factor first; bit b of the
        // pattern picks f (0) or f̄ (1) for word position b.
        let mut domain = Vec::new();
        let mut images = Vec::new();
        'points: for x in 0..n as u32 {
            let mut cur = x;
            for b in (0..k).rev() {
                let (f, fbar) = &pairs[word[b] as usize];
                let pick = if (pattern >> b) & 1 == 0 { f } else { fbar };
                match pick.apply(cur) {
                    Some(y) => cur = y,
                    None => continue 'points,
                }
            }
            domain.push(x);
            images.push(cur);
        }
        if domain.is_empty() {
            continue;
        }
        out.push(PartialMonotoneMap::new(n, domain, images)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// File formats.
// ---------------------------------------------------------------------

/// Parse `perms <n> <count>` followed by one whitespace-separated image
/// list per line (1-based entries).
pub fn parse_permutation_file(text: &str) -> Result<PermutationList> {
    let mut lines = content_lines(text);
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| Error::domain("empty permutation file".to_string()))?;
    let mut it = header.split_whitespace();
    if it.next() != Some("perms") {
        return Err(Error::domain(format!(
            "line {lineno}: expected header 'perms <n> <count>'"
        )));
    }
    let n: usize = parse_field(it.next(), lineno, "n")?;
    let count: usize = parse_field(it.next(), lineno, "count")?;
    let mut perms = Vec::with_capacity(count);
    for _ in 0..count {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::domain("permutation file ends early".to_string()))?;
        let mut p = Vec::with_capacity(n);
        for tok in line.split_whitespace() {
            let img: u32 = tok.parse().map_err(|_| {
                Error::domain(format!("line {lineno}: bad image '{tok}'"))
            })?;
            if img == 0 {
                return Err(Error::domain(format!(
                    "line {lineno}: images are 1-based"
                )));
            }
            p.push(img - 1);
        }
        if p.len() != n {
            return Err(Error::domain(format!(
                "line {lineno}: expected {n} images, got {}",
                p.len()
            )));
        }
        perms.push(p);
    }
    PermutationList::new(n, perms)
}

pub fn write_permutation_file(p: &PermutationList) -> String {
    let mut out = format!("perms {} {}\n", p.n(), p.len());
    for q in p.perms() {
        let line: Vec<String> = q.iter().map(|&v| (v + 1).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parse `monotone <n> <count>` followed by `dom ... -> img ...` lines
/// (1-based entries; `dom ->` with empty lists is a valid empty map).
pub fn parse_monotone_file(text: &str) -> Result<Vec<PartialMonotoneMap>> {
    let mut lines = content_lines(text);
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| Error::domain("empty monotone file".to_string()))?;
    let mut it = header.split_whitespace();
    if it.next() != Some("monotone") {
        return Err(Error::domain(format!(
            "line {lineno}: expected header 'monotone <n> <count>'"
        )));
    }
    let n: usize = parse_field(it.next(), lineno, "n")?;
    let count: usize = parse_field(it.next(), lineno, "count")?;
    let mut maps = Vec::with_capacity(count);
    for _ in 0..count {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::domain("monotone file ends early".to_string()))?;
        let (dom_part, img_part) = line.split_once("->").ok_or_else(|| {
            Error::domain(format!("line {lineno}: expected 'dom ... -> img ...'"))
        })?;
        let parse_list = |part: &str| -> Result<Vec<u32>> {
            part.split_whitespace()
                .filter(|t| *t != "dom" && *t != "img")
                .map(|tok| {
                    let v: u32 = tok.parse().map_err(|_| {
                        Error::domain(format!("line {lineno}: bad entry '{tok}'"))
                    })?;
                    if v == 0 {
                        return Err(Error::domain(format!(
                            "line {lineno}: entries are 1-based"
                        )));
                    }
                    Ok(v - 1)
                })
                .collect()
        };
        let domain = parse_list(dom_part)?;
        let images = parse_list(img_part)?;
        maps.push(PartialMonotoneMap::new(n, domain, images)?);
    }
    Ok(maps)
}

pub fn write_monotone_file(maps: &[PartialMonotoneMap]) -> Result<String> {
    let n = maps.first().map(|m| m.n()).unwrap_or(0);
    if maps.iter().any(|m| m.n() != n) {
        return Err(Error::domain("maps live on different [n]".to_string()));
    }
    let mut out = format!("monotone {} {}\n", n, maps.len());
    for m in maps {
        let dom: Vec<String> = m.domain().iter().map(|&v| (v + 1).to_string()).collect();
        let img: Vec<String> = m.images().iter().map(|&v| (v + 1).to_string()).collect();
        out.push_str(&format!("dom {} -> img {}\n", dom.join(" "), img.join(" ")));
    }
    Ok(out)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, lineno: usize, name: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::domain(format!("line {lineno}: bad or missing {name}")))
}
