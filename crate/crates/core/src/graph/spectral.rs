//! Spectral measurement: expansion parameters with certified accuracy.
//!
//! Every λ reported by this crate comes with its measurement method and a
//! residual bound. Small operators are measured densely (eigendecomposition
//! for symmetric operators, singular values otherwise); large ones fall back
//! to deterministic seeded power iteration whose Rayleigh residual certifies
//! the distance to a true eigenvalue. Bit-vector Cayley operators never get
//! here — their character sums are exact.

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::budget::dense_cap;
use crate::error::{Error, Result};
use crate::rng;

use super::RotationGraph;

/// How a spectral value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    /// Closed form or full character transform; error at machine precision.
    ExactTransform,
    /// Dense symmetric eigendecomposition.
    DenseEig,
    /// Dense singular value decomposition.
    DenseSvd,
    /// Seeded power iteration with Rayleigh-residual certification.
    PowerIteration,
}

impl SpectralMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SpectralMethod::ExactTransform => "exact-transform",
            SpectralMethod::DenseEig => "dense-eig",
            SpectralMethod::DenseSvd => "dense-svd",
            SpectralMethod::PowerIteration => "power-iteration",
        }
    }
}

/// A measured spectral value. `residual` bounds the distance from `value`
/// to an exact eigenvalue / singular value of the measured operator
/// (zero for dense and exact methods, which are accurate to machine
/// precision).
#[derive(Debug, Clone, Copy)]
pub struct SpectralReport {
    pub value: f64,
    pub method: SpectralMethod,
    pub residual: f64,
    pub iterations: u64,
}

impl SpectralReport {
    pub fn exact(value: f64) -> Self {
        Self { value, method: SpectralMethod::ExactTransform, residual: 0.0, iterations: 0 }
    }

    fn dense(value: f64, method: SpectralMethod) -> Self {
        Self { value, method, residual: 0.0, iterations: 0 }
    }
}

/// Fixed seed for all internal power iterations; restarts move to
/// independent cipher streams, so runs are reproducible bit-for-bit.
const PI_SEED: u64 = 0x5EED_CAFE;
const PI_TOL: f64 = 1e-11;
const PI_MIN_ITERS: u64 = 64;
const PI_MAX_ITERS: u64 = 100_000;
const PI_RESTARTS: u64 = 3;

/// λ of a rotation graph: the largest non-principal singular value of its
/// averaged walk operator.
pub fn lambda_report(g: &RotationGraph) -> Result<SpectralReport> {
    if g.n() == 1 {
        return Ok(SpectralReport::exact(0.0));
    }
    if !g.is_directed() && !g.is_connected() {
        // an indicator difference of two components is a nontrivial
        // eigenvector with eigenvalue exactly 1
        return Ok(SpectralReport::exact(1.0));
    }
    if g.n() <= dense_cap() {
        let m = g.dense_operator();
        return if g.is_directed() {
            Ok(SpectralReport::dense(dense_deflated_sigma(&m), SpectralMethod::DenseSvd))
        } else {
            Ok(SpectralReport::dense(dense_deflated_lambda(&m), SpectralMethod::DenseEig))
        };
    }
    lambda_via_power(g)
}

/// λ via power iteration regardless of size (used to cross-validate the
/// dense path on sizes where both apply).
pub fn lambda_via_power(g: &RotationGraph) -> Result<SpectralReport> {
    let n = g.n();
    let scale = 1.0 / g.degree() as f64;
    let forward = |input: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for v in 0..n {
            let w = input[v] * scale;
            for i in 0..g.degree() {
                out[g.neighbor(v, i)] += w;
            }
        }
    };
    if g.is_directed() {
        let reverse = |input: &[f64], out: &mut [f64]| {
            for v in 0..n {
                let mut acc = 0.0;
                for i in 0..g.degree() {
                    acc += input[g.neighbor(v, i)];
                }
                out[v] = acc * scale;
            }
        };
        power_operator_norm(n, forward, reverse)
    } else {
        power_symmetric_norm(n, forward)
    }
}

/// Largest |eigenvalue| of a symmetric doubly-stochastic operator after
/// removing the all-ones direction. `forward` must write A·input into its
/// second argument.
pub fn deflated_symmetric_norm(
    n: usize,
    forward: impl Fn(&[f64], &mut [f64]),
) -> Result<SpectralReport> {
    if n <= dense_cap() {
        let m = assemble_dense(n, &forward);
        return Ok(SpectralReport::dense(dense_deflated_lambda(&m), SpectralMethod::DenseEig));
    }
    power_symmetric_norm(n, forward)
}

/// Largest non-principal singular value of a doubly-stochastic operator.
/// `forward` applies A, `reverse` applies Aᵀ.
pub fn deflated_operator_norm(
    n: usize,
    forward: impl Fn(&[f64], &mut [f64]),
    reverse: impl Fn(&[f64], &mut [f64]),
) -> Result<SpectralReport> {
    if n <= dense_cap() {
        let m = assemble_dense(n, &forward);
        return Ok(SpectralReport::dense(dense_deflated_sigma(&m), SpectralMethod::DenseSvd));
    }
    power_operator_norm(n, forward, reverse)
}

/// Full sorted spectrum of the averaged walk operator (dense only); the
/// oracle used by tests with closed-form spectra.
pub fn dense_spectrum(g: &RotationGraph) -> Result<Vec<f64>> {
    if g.is_directed() {
        return Err(Error::domain("spectrum oracle needs an undirected graph".to_string()));
    }
    if g.n() > dense_cap() {
        return Err(Error::capacity(format!(
            "dense spectrum of n = {} exceeds cap {}",
            g.n(),
            dense_cap()
        )));
    }
    let m = symmetrize(&g.dense_operator());
    let mut eigs: Vec<f64> =
        nalgebra::linalg::SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eigs)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn assemble_dense(n: usize, forward: &impl Fn(&[f64], &mut [f64])) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut basis = vec![0.0f64; n];
    let mut col = vec![0.0f64; n];
    for j in 0..n {
        basis[j] = 1.0;
        forward(&basis, &mut col);
        basis[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}

/// max |eig| of M − J/n for symmetric doubly stochastic M (dense).
fn dense_deflated_lambda(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut d = symmetrize(m);
    let shift = 1.0 / n as f64;
    d.iter_mut().for_each(|x| *x -= shift);
    nalgebra::linalg::SymmetricEigen::new(d)
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &e| acc.max(e.abs()))
}

/// σ_max of M − J/n (dense).
fn dense_deflated_sigma(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut d = m.clone();
    let shift = 1.0 / n as f64;
    d.iter_mut().for_each(|x| *x -= shift);
    d.singular_values().iter().fold(0.0f64, |acc, &s| acc.max(s))
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

struct PowerOutcome {
    theta: f64,
    residual: f64,
    iterations: u64,
    converged: bool,
}

/// Power iteration on a symmetric positive-semidefinite-shifted operator.
/// Iterates v ← op(v) with the all-ones direction projected out; returns
/// the Rayleigh quotient θ and the residual ‖op(v) − θv‖, which bounds the
/// distance from θ to a true eigenvalue of op.
fn power_iteration(
    n: usize,
    op: &impl Fn(&[f64], &mut [f64]),
    stream: u64,
) -> PowerOutcome {
    let mut rng = rng::seeded_stream(PI_SEED, stream);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    subtract_mean(&mut v);
    normalize(&mut v);
    let mut w = vec![0.0f64; n];
    let mut best = PowerOutcome { theta: 0.0, residual: f64::INFINITY, iterations: 0, converged: false };
    for it in 1..=PI_MAX_ITERS {
        op(&v, &mut w);
        subtract_mean(&mut w);
        let theta: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let residual: f64 =
            v.iter().zip(&w).map(|(a, b)| (b - theta * a).powi(2)).sum::<f64>().sqrt();
        if residual < best.residual {
            best = PowerOutcome { theta, residual, iterations: it, converged: false };
        }
        if residual <= PI_TOL && it >= PI_MIN_ITERS {
            return PowerOutcome { theta, residual, iterations: it, converged: true };
        }
        std::mem::swap(&mut v, &mut w);
        if normalize(&mut v) == 0.0 {
            // op annihilated the iterate: restart from a fresh vector
            v = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            subtract_mean(&mut v);
            normalize(&mut v);
        }
    }
    best
}

fn best_of_restarts(
    n: usize,
    op: &impl Fn(&[f64], &mut [f64]),
) -> std::result::Result<(f64, f64, u64), PowerOutcome> {
    let mut best_converged: Option<(f64, f64, u64)> = None;
    let mut best_any = PowerOutcome { theta: 0.0, residual: f64::INFINITY, iterations: 0, converged: false };
    for stream in 0..PI_RESTARTS {
        let out = power_iteration(n, op, stream);
        if out.converged {
            let cand = (out.theta, out.residual, out.iterations);
            best_converged = Some(match best_converged {
                Some(prev) if prev.0 >= cand.0 => prev,
                _ => cand,
            });
        } else if out.residual < best_any.residual {
            best_any = out;
        }
    }
    best_converged.ok_or(best_any)
}

/// Symmetric case: shift to (I ± B)/2 so power iteration sees nonnegative
/// spectra, recover the extreme eigenvalues of B, take the larger modulus.
fn power_symmetric_norm(
    n: usize,
    forward: impl Fn(&[f64], &mut [f64]),
) -> Result<SpectralReport> {
    let apply_b = |input: &[f64], out: &mut [f64]| {
        forward(input, out);
        subtract_mean(out);
    };
    let plus = |input: &[f64], out: &mut [f64]| {
        apply_b(input, out);
        out.iter_mut().zip(input).for_each(|(o, i)| *o = 0.5 * (*o + i));
    };
    let minus = |input: &[f64], out: &mut [f64]| {
        apply_b(input, out);
        out.iter_mut().zip(input).for_each(|(o, i)| *o = 0.5 * (i - *o));
    };
    let hi = best_of_restarts(n, &plus);
    let lo = best_of_restarts(n, &minus);
    match (hi, lo) {
        (Ok((th, rh, ih)), Ok((tl, rl, il))) => {
            let lam_max = 2.0 * th - 1.0; // top of B
            let lam_min = 1.0 - 2.0 * tl; // bottom of B
            Ok(SpectralReport {
                value: lam_max.abs().max(lam_min.abs()).min(1.0),
                method: SpectralMethod::PowerIteration,
                residual: 2.0 * rh.max(rl),
                iterations: ih + il,
            })
        }
        (Err(bad), _) | (_, Err(bad)) => Err(Error::Convergence {
            msg: format!("power iteration did not reach residual {PI_TOL:.0e} on n = {n}"),
            best: (2.0 * bad.theta - 1.0).abs(),
            residual: 2.0 * bad.residual,
        }),
    }
}

/// General case: power iteration on the Gram operator BᵀB whose top
/// eigenvalue is σ_max².
fn power_operator_norm(
    n: usize,
    forward: impl Fn(&[f64], &mut [f64]),
    reverse: impl Fn(&[f64], &mut [f64]),
) -> Result<SpectralReport> {
    let mid = std::cell::RefCell::new(vec![0.0f64; n]);
    let gram = |input: &[f64], out: &mut [f64]| {
        let mut mid = mid.borrow_mut();
        forward(input, &mut mid);
        subtract_mean(&mut mid);
        reverse(&mid, out);
        subtract_mean(out);
    };
    match best_of_restarts(n, &gram) {
        Ok((theta, residual, iterations)) => {
            let sigma = theta.max(0.0).sqrt();
            let denom = (2.0 * sigma).max(1e-8);
            Ok(SpectralReport {
                value: sigma.min(1.0),
                method: SpectralMethod::PowerIteration,
                residual: residual / denom,
                iterations,
            })
        }
        Err(bad) => Err(Error::Convergence {
            msg: format!("power iteration (Gram) did not reach residual {PI_TOL:.0e} on n = {n}"),
            best: bad.theta.max(0.0).sqrt(),
            residual: bad.residual,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::super::build;
    use super::*;

    #[test]
    fn complete_graph_lambda() {
        let g = build::complete(5).unwrap();
        let r = g.lambda_report().unwrap();
        assert_eq!(r.method, SpectralMethod::DenseEig);
        assert!((r.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn odd_cycle_lambda_is_cosine() {
        // walk spectrum of C₅ is cos(2πk/5); the largest magnitude among
        // the nontrivial ones is |cos(4π/5)| = cos(π/5)
        let g = build::cycle(5).unwrap();
        let lam = g.lambda().unwrap();
        assert!((lam - (std::f64::consts::PI / 5.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn even_cycle_is_bipartite() {
        let g = build::cycle(6).unwrap();
        assert!((g.lambda().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_graph_has_lambda_one() {
        // two disjoint triangles
        let mut rot = Vec::new();
        for base in [0u32, 3u32] {
            for v in 0..3u32 {
                rot.push((base + (v + 1) % 3, 1));
                rot.push((base + (v + 2) % 3, 0));
            }
        }
        let g = RotationGraph::new(6, 2, false, rot).unwrap();
        assert_eq!(g.lambda().unwrap(), 1.0);
    }

    #[test]
    fn power_iteration_matches_dense_on_cycles() {
        for n in [5usize, 12, 31] {
            let g = build::cycle(n).unwrap();
            let dense = g.lambda().unwrap();
            let pi = lambda_via_power(&g).unwrap();
            assert_eq!(pi.method, SpectralMethod::PowerIteration);
            assert!(
                (dense - pi.value).abs() < 1e-8,
                "n = {n}: dense {dense} vs power {} (residual {})",
                pi.value,
                pi.residual
            );
        }
    }

    #[test]
    fn directed_operator_norm_on_shift() {
        // directed n-cycle: every nontrivial singular value of the shift
        // permutation is exactly 1
        let nbrs: Vec<u32> = (0..7u32).map(|v| (v + 1) % 7).collect();
        let g = RotationGraph::directed_from_neighbors(7, 1, nbrs).unwrap();
        let r = g.lambda_report().unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spectrum_oracle_cycle() {
        let g = build::cycle(5).unwrap();
        let spec = dense_spectrum(&g).unwrap();
        // eigenvalues cos(2πk/5), k = 0..4, sorted
        let mut expect: Vec<f64> =
            (0..5).map(|k| (2.0 * std::f64::consts::PI * k as f64 / 5.0).cos()).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in spec.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_with_loops_is_perfectly_mixing() {
        let g = build::complete_with_loops(8).unwrap();
        assert!(g.lambda().unwrap() < 1e-14);
    }
}
