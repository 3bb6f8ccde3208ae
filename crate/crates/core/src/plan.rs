//! Log-space parameter selection for the interleaved-walk construction,
//! rigorous verification of the selection arithmetic, and the end-to-end
//! orchestration that takes an arbitrary generating multiset to a
//! near-optimal-degree expander.
//!
//! Two planning modes exist. *Regime* plans follow the asymptotic
//! schedule, where the interleaving width s is at least 2¹⁰ and every
//! derived quantity (degrees like s^{4s}) exists only as an exact
//! logarithm; the planner's job there is to certify the selection
//! inequalities with rigorous rational enclosures, never to build
//! anything. *Small-s* plans drive actual desk-scale builds, where the
//! certificates come from measured spectra instead of the asymptotic
//! window.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::group::{GeneratorMultiset, GroupKind};
use crate::walks::{
    align_with_expander, amplify_via_walks, group_conv_power, inner_step_count, log2_biguint,
    walk_bias_bound, xor_conv_power, BoundMode,
};
use crate::zoo::{AuxGraph, ExpanderProvider};

/// Fractional bits carried by every logarithm enclosure.
pub const LOG_PRECISION_BITS: u32 = 128;

/// Additive log₂ slack allowed by the size audit:
/// log₂|W| ≤ log₂|S| + (2+β)·log₂(1/λ) + SIZE_SLACK_LOG2.
pub const SIZE_SLACK_LOG2: u32 = 2;

/// Largest materialized set the desk boost stage may hand to the
/// alignment step (auxiliary providers stop serving far beyond this).
pub const BOOST_ALIGN_CAP: u64 = 4096;

/// A closed rational interval certified to contain a real value.
#[derive(Clone, Debug, PartialEq)]
pub struct Enclosure {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Enclosure {
    pub fn exact(v: BigRational) -> Self {
        Enclosure { lo: v.clone(), hi: v }
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64().unwrap_or(f64::NAN)
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64().unwrap_or(f64::NAN)
    }
}

/// One mantissa-digit extraction pass at fixed precision. Directed
/// rounding keeps the result on the chosen side of the true value: all
/// products round down for a lower bound, up for an upper bound, and
/// monotonicity of every step preserves the side even as error grows.
fn mantissa_digits(mut m: BigUint, prec: u64, frac_bits: u32, round_up: bool) -> BigUint {
    let one = BigUint::one() << prec;
    let two = &one << 1u32;
    let mask = &one - 1u32;
    let mut digits = BigUint::zero();
    for _ in 0..frac_bits {
        let sq = &m * &m;
        m = if round_up { (sq + &mask) >> prec } else { sq >> prec };
        digits <<= 1;
        if m >= two {
            digits += 1u32;
            m = if round_up { (&m + 1u32) >> 1 } else { m >> 1 };
        }
    }
    digits
}

/// Rigorous enclosure of log₂(x) for rational x > 0: the returned
/// interval always contains the true logarithm, with width about
/// 2^{1−frac_bits}. Exact powers of two come back as width-zero
/// intervals.
pub fn log2_enclosure(x: &BigRational, frac_bits: u32) -> Result<Enclosure> {
    if !x.is_positive() {
        return Err(Error::domain(format!("log₂ needs a positive argument, got {x}")));
    }
    let p = x.numer().magnitude().clone();
    let q = x.denom().magnitude().clone();
    // ⌊log₂(p/q)⌋ via bit lengths, corrected by direct comparison.
    let mut e: i64 = p.bits() as i64 - q.bits() as i64;
    let ge = |e: i64| -> bool {
        if e >= 0 {
            p >= (&q << e as u64)
        } else {
            (&p << (-e) as u64) >= q
        }
    };
    if !ge(e) {
        e -= 1;
    }
    while ge(e + 1) {
        e += 1;
    }
    let exact_pow = if e >= 0 { p == (&q << e as u64) } else { (&p << (-e) as u64) == q };
    if exact_pow {
        return Ok(Enclosure::exact(BigRational::from_integer(BigInt::from(e))));
    }
    // Fixed-point mantissa m = x/2^e ∈ (1,2) at ample working precision:
    // each of the frac_bits squarings can double the accumulated error,
    // so carry twice the requested bits plus guard digits.
    let prec = 2 * frac_bits as u64 + 16;
    let shift = prec as i64 - e;
    let (num, den) = if shift >= 0 {
        (&p << shift as u64, q.clone())
    } else {
        (p.clone(), &q << (-shift) as u64)
    };
    let m_lo = &num / &den;
    let m_hi = (&num + &den - 1u32) / &den;
    let d_lo = mantissa_digits(m_lo, prec, frac_bits, false);
    let d_hi = mantissa_digits(m_hi, prec, frac_bits, true);
    let scale = BigInt::one() << frac_bits;
    let base = BigRational::from_integer(BigInt::from(e));
    let lo = &base + BigRational::new(BigInt::from(d_lo), scale.clone());
    let hi = &base + BigRational::new(BigInt::from(d_hi) + 1, scale);
    Ok(Enclosure { lo, hi })
}

/// The target expansion, either directly or as an exact log. In the
/// regime the target is far below any floating-point range, so only the
/// logarithmic form is usable there.
#[derive(Clone, Debug)]
pub enum TargetSpec {
    /// A desk-scale target in (0,1), carried exactly as the dyadic
    /// rational the float denotes.
    Lambda(f64),
    /// log₂(1/λ) given exactly.
    Log2Inv(BigRational),
}

impl TargetSpec {
    fn log2_inv(&self) -> Result<Enclosure> {
        match self {
            TargetSpec::Lambda(l) => {
                if !(*l > 0.0 && *l < 1.0) {
                    return Err(Error::domain(format!("target λ = {l} outside (0,1)")));
                }
                let r = BigRational::from_float(*l)
                    .ok_or_else(|| Error::domain(format!("target λ = {l} is not finite")))?;
                log2_enclosure(&r.recip(), LOG_PRECISION_BITS)
            }
            TargetSpec::Log2Inv(v) => {
                if !v.is_positive() {
                    return Err(Error::domain(format!(
                        "log₂(1/λ) must be positive (λ < 1), got {v}"
                    )));
                }
                Ok(Enclosure::exact(v.clone()))
            }
        }
    }
}

/// Planning mode.
#[derive(Clone, Debug)]
pub enum PlanMode {
    /// Symbolic asymptotic schedule: s is the smallest power of two with
    /// 32/β ≤ s, 2¹⁰ ≤ s, and 4s³·log₂log₂(1/λ) ≤ log₂(1/λ).
    Regime,
    /// Desk schedule: the interleaving width and the inner expansion are
    /// given, and the walk length comes from the same closed formula
    /// evaluated on them. Requires s a power of two, s ≥ 8 (below that
    /// the walk-length exponent (1−5/s)(1−1/s) is nonpositive or
    /// useless).
    SmallS { s: u32, lambda2: f64 },
}

/// Symbolic quantities that only exist in regime mode.
#[derive(Clone, Debug)]
pub struct RegimeSymbols {
    /// log₂d₂ = 4s·log₂s, exact
    pub log2_d2: BigUint,
    /// log₂d₁ = 5·log₂d₂, exact
    pub log2_d1: BigUint,
    /// log₂n₂ = 5s·log₂d₂, exact (the inner graph's vertex count)
    pub log2_n2: BigUint,
    /// b₂ = 5s·log₂d₂ (the inner expansion's numerator), exact
    pub b2: BigUint,
    pub log2_b2: Enclosure,
    /// log₂(1/λ₁) where λ₁ = λ₂²/10
    pub log2_inv_lambda1: Enclosure,
    /// largest power-of-two exponent admitted by the width window
    pub log2_window_max: u32,
}

/// A parameter plan: the interleaving width, the pessimistic inner
/// expansion, and the walk length t (the smallest integer with
/// λ₂^{(1−5α)(1−α)(t−1)} ≤ λ, α = 1/s).
#[derive(Clone, Debug)]
pub struct Plan {
    pub s: u64,
    pub log2_s: u32,
    /// α = 1/s
    pub alpha: BigRational,
    pub beta: BigRational,
    /// |S|, the input multiset size the plan budgets for
    pub size_s: BigUint,
    pub log2_size: Enclosure,
    /// L = log₂(1/λ)
    pub log2_inv_lambda: Enclosure,
    /// L₂ = log₂(1/λ₂); in regime mode λ₂ = b₂/√d₂ (the worst case the
    /// inner construction guarantees), in desk mode the given value
    pub log2_inv_lambda2: Enclosure,
    /// walk length (number of vertices visited per product)
    pub t: BigUint,
    /// present iff the plan is a regime plan
    pub symbols: Option<RegimeSymbols>,
}

impl Plan {
    pub fn is_regime(&self) -> bool {
        self.symbols.is_some()
    }

    /// (1−5α)(1−α) — the effective per-step exponent of the walk bound.
    pub fn walk_exponent(&self) -> BigRational {
        let one = BigRational::one();
        (&one - BigRational::new(BigInt::from(5), BigInt::from(self.s)))
            * (&one - &self.alpha)
    }
}

fn rational_from_u64(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn rational_from_biguint(v: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(v.clone()))
}

fn ceil_to_biguint(r: &BigRational) -> BigUint {
    if !r.is_positive() {
        return BigUint::zero();
    }
    r.ceil().to_integer().to_biguint().unwrap_or_default()
}

/// Smallest integer t such that (t−1)·(1−5α)(1−α)·L₂ ≥ L, computed from
/// the safe sides of both enclosures so the walk certificate survives
/// the worst values they admit.
fn formula_walk_length(s: u64, l: &Enclosure, l2: &Enclosure) -> Result<BigUint> {
    if s < 8 {
        return Err(Error::domain(format!(
            "interleaving width s = {s} rejected: the walk-length exponent \
             (1−5/s)(1−1/s) is {} there, so the length formula certifies \
             nothing; use s ≥ 8",
            (1.0 - 5.0 / s as f64) * (1.0 - 1.0 / s as f64)
        )));
    }
    let c = BigRational::new(
        BigInt::from(s - 5) * BigInt::from(s - 1),
        BigInt::from(s) * BigInt::from(s),
    );
    let denom = &c * &l2.lo;
    if !denom.is_positive() {
        return Err(Error::domain(
            "inner expansion bound is not below 1; walks cannot amplify".to_string(),
        ));
    }
    let ratio = &l.hi / denom;
    let t_minus_1 = ceil_to_biguint(&ratio).max(BigUint::one());
    Ok(t_minus_1 + 1u32)
}

/// Produce a parameter plan for the requested target, size-growth
/// exponent β, and input size.
pub fn make_plan(
    target: &TargetSpec,
    beta: &BigRational,
    size_s: &BigUint,
    mode: &PlanMode,
) -> Result<Plan> {
    if !beta.is_positive() {
        return Err(Error::domain(format!("size exponent β = {beta} must be positive")));
    }
    if size_s.is_zero() {
        return Err(Error::domain("empty generating multiset".to_string()));
    }
    let l = target.log2_inv()?;
    let log2_size = log2_enclosure(&rational_from_biguint(size_s), LOG_PRECISION_BITS)?;
    match mode {
        PlanMode::Regime => {
            // Smallest power of two ≥ max(2¹⁰, 32/β) …
            let need = BigRational::from_integer(BigInt::from(32)) / beta;
            let mut k: u32 = 10;
            while BigRational::from_integer(BigInt::one() << k) < need {
                k += 1;
                if k > 200 {
                    return Err(Error::domain(format!(
                        "β = {beta} demands an interleaving width beyond 2²⁰⁰"
                    )));
                }
            }
            // … that also fits the width window 4s³·log₂log₂(1/λ) ≤ log₂(1/λ),
            // certified from the safe sides of both enclosures.
            let loglog = log2_enclosure(&l.hi, LOG_PRECISION_BITS)?;
            let fits = |k: u32| -> bool {
                let lhs = BigRational::from_integer(BigInt::one() << (3 * k + 2)) * &loglog.hi;
                lhs <= l.lo
            };
            if !fits(k) {
                return Err(Error::precondition(format!(
                    "no admissible interleaving width: the smallest candidate s = 2^{k} \
                     fails 4s³·log₂log₂(1/λ) ≤ log₂(1/λ); at this target the plain \
                     walk pipeline (exp_walk_pipeline) is the right tool"
                )));
            }
            let mut log2_window_max = k;
            while fits(log2_window_max + 1) {
                log2_window_max += 1;
            }
            if k > 62 {
                return Err(Error::capacity(format!(
                    "interleaving width 2^{k} exceeds the planner's integer range"
                )));
            }
            let s = 1u64 << k;
            let s_big = BigUint::from(s);
            let log2_d2 = &s_big * (4u32 * k);
            let log2_d1 = &log2_d2 * 5u32;
            let b2 = &s_big * 5u32 * &log2_d2;
            let log2_n2 = b2.clone();
            let log2_b2 = log2_enclosure(&rational_from_biguint(&b2), LOG_PRECISION_BITS)?;
            // λ₂ = b₂/√d₂ pessimistically: L₂ = log₂d₂/2 − log₂b₂.
            let half_d2 = BigRational::new(BigInt::from(log2_d2.clone()), BigInt::from(2));
            let l2 = Enclosure { lo: &half_d2 - &log2_b2.hi, hi: &half_d2 - &log2_b2.lo };
            if !l2.lo.is_positive() {
                return Err(Error::certification(
                    "inner expansion bound fails λ₂ < 1 — selection arithmetic broken"
                        .to_string(),
                ));
            }
            let log2_10 = log2_enclosure(&rational_from_u64(10), LOG_PRECISION_BITS)?;
            let log2_inv_lambda1 = Enclosure {
                lo: &l2.lo * BigRational::from_integer(BigInt::from(2)) + &log2_10.lo,
                hi: &l2.hi * BigRational::from_integer(BigInt::from(2)) + &log2_10.hi,
            };
            let t = formula_walk_length(s, &l, &l2)?;
            Ok(Plan {
                s,
                log2_s: k,
                alpha: BigRational::new(BigInt::one(), BigInt::from(s)),
                beta: beta.clone(),
                size_s: size_s.clone(),
                log2_size,
                log2_inv_lambda: l,
                log2_inv_lambda2: l2,
                t,
                symbols: Some(RegimeSymbols {
                    log2_d2,
                    log2_d1,
                    log2_n2,
                    b2,
                    log2_b2,
                    log2_inv_lambda1,
                    log2_window_max,
                }),
            })
        }
        PlanMode::SmallS { s, lambda2 } => {
            let s = *s as u64;
            if !s.is_power_of_two() {
                return Err(Error::domain(format!(
                    "interleaving width must be a power of two, got {s}"
                )));
            }
            if s < 8 {
                return Err(Error::domain(format!(
                    "interleaving width s = {s} rejected: the walk-length exponent \
                     (1−5/s)(1−1/s) is {} there, so the length formula certifies \
                     nothing; use s ∈ {{8, 16, 32}}",
                    (1.0 - 5.0 / s as f64) * (1.0 - 1.0 / s as f64)
                )));
            }
            if !(*lambda2 > 0.0 && *lambda2 < 1.0) {
                return Err(Error::domain(format!(
                    "inner expansion λ₂ = {lambda2} outside (0,1)"
                )));
            }
            let l2_rat = BigRational::from_float(*lambda2)
                .ok_or_else(|| Error::domain("inner expansion is not finite".to_string()))?;
            let l2 = log2_enclosure(&l2_rat.recip(), LOG_PRECISION_BITS)?;
            let t = formula_walk_length(s, &l, &l2)?;
            Ok(Plan {
                s,
                log2_s: s.trailing_zeros(),
                alpha: BigRational::new(BigInt::one(), BigInt::from(s)),
                beta: beta.clone(),
                size_s: size_s.clone(),
                log2_size,
                log2_inv_lambda: l,
                log2_inv_lambda2: l2,
                t,
                symbols: None,
            })
        }
    }
}

/// The two consequences of a regime selection that the larger argument
/// rests on, checked exactly in log space.
#[derive(Clone, Debug)]
pub struct TBoundReport {
    /// t−1 ≥ 2s²
    pub ok_i: bool,
    /// (t−1)·log₂d₂ ≤ 2(1+10α)·log₂(1/λ)
    pub ok_ii: bool,
    /// (t−1) − 2s², exact
    pub margin_i: BigInt,
    /// 2(1+10α)·log₂(1/λ) − (t−1)·log₂d₂ in log₂ units (certified lower
    /// bound)
    pub margin_ii: BigRational,
}

pub fn check_t_bound(plan: &Plan) -> Result<TBoundReport> {
    let sym = plan.symbols.as_ref().ok_or_else(|| {
        Error::precondition(
            "walk-length consequence checks apply to regime plans; desk plans \
             certify by direct measurement"
                .to_string(),
        )
    })?;
    let t1 = BigInt::from(plan.t.clone()) - 1;
    let two_s2 = BigInt::from(2u32) * BigInt::from(plan.s) * BigInt::from(plan.s);
    let margin_i: BigInt = &t1 - &two_s2;
    let coeff = BigRational::from_integer(BigInt::from(2))
        * (BigRational::one()
            + BigRational::from_integer(BigInt::from(10)) * &plan.alpha);
    let rhs = coeff * &plan.log2_inv_lambda.lo;
    let lhs = BigRational::from_integer(&t1 * BigInt::from(sym.log2_d2.clone()));
    let margin_ii = &rhs - &lhs;
    Ok(TBoundReport {
        ok_i: !margin_i.is_negative(),
        ok_ii: !margin_ii.is_negative(),
        margin_i,
        margin_ii,
    })
}

/// Size audit of a regime plan: the total walk count must stay within
/// the promised growth |S|/λ^{2+β} up to the fixed slack.
#[derive(Clone, Debug)]
pub struct SizeAudit {
    /// log₂(n′·d₁^s·d₂^{t−1}) — the outer vertex count is only pinned to
    /// [2|S|d₂⁵, 4|S|d₂⁵], hence an interval
    pub log2_walks: Enclosure,
    /// log₂|S| + (2+β)·log₂(1/λ) + slack, certified lower bound
    pub log2_allowance: BigRational,
    /// allowance − walks.hi
    pub slack: BigRational,
    pub ok: bool,
}

pub fn size_audit(plan: &Plan) -> Result<SizeAudit> {
    let sym = plan.symbols.as_ref().ok_or_else(|| {
        Error::precondition(
            "the symbolic size audit applies to regime plans; desk runs report \
             their exact counts instead"
                .to_string(),
        )
    })?;
    let t1 = BigRational::from_integer(BigInt::from(plan.t.clone()) - 1);
    let d2 = BigRational::from_integer(BigInt::from(sym.log2_d2.clone()));
    let d1 = BigRational::from_integer(BigInt::from(sym.log2_d1.clone()));
    let s = BigRational::from_integer(BigInt::from(plan.s));
    // n = 2|S|d₂⁵ and n′ ∈ [n, 2n].
    let base = &s * &d1 + &t1 * &d2 + &d2 * BigRational::from_integer(BigInt::from(5));
    let walks = Enclosure {
        lo: &base + &plan.log2_size.lo + BigRational::one(),
        hi: &base + &plan.log2_size.hi + BigRational::from_integer(BigInt::from(2)),
    };
    let allowance = &plan.log2_size.lo
        + (BigRational::from_integer(BigInt::from(2)) + &plan.beta) * &plan.log2_inv_lambda.lo
        + BigRational::from_integer(BigInt::from(SIZE_SLACK_LOG2));
    let slack = &allowance - &walks.hi;
    Ok(SizeAudit { ok: !slack.is_negative(), log2_walks: walks, log2_allowance: allowance, slack })
}

/// Exact formal walk count of an interleaved product: n′·d₁^s·d₂^{t−1}.
pub fn formal_walk_count(n_prime: u64, d1: u64, s: u32, d2: u64, t_minus_1: u32) -> BigUint {
    BigUint::from(n_prime) * BigUint::from(d1).pow(s) * BigUint::from(d2).pow(t_minus_1)
}

/// The desk boost stage: independent products that bring the bias to the
/// interleaved stage's entry point while the set still materializes.
#[derive(Clone, Debug)]
pub struct BoostStage {
    /// factors per product
    pub reps: u32,
    pub count: BigUint,
    pub bias_in: f64,
    /// λ₀^reps
    pub bound: f64,
    pub bias_out: f64,
    /// the materialization cap stopped the stage short of its landing
    /// target
    pub capped: bool,
    /// landing target λ₂²/3 (never below the final target)
    pub target: f64,
}

/// The desk interleaved stage: walk products over a real auxiliary
/// expander, certified by the walk bound and by exact measurement.
#[derive(Clone, Debug)]
pub struct InterleaveStage {
    pub s: u32,
    /// outer port label width b (d₁ rounded up to 2^b)
    pub block_bits: u32,
    pub outer_n: u64,
    pub outer_degree: u64,
    pub outer_lambda: f64,
    pub replication: u64,
    pub pad: u64,
    pub theta: f64,
    pub aux_label: String,
    /// walk steps
    pub steps: u32,
    /// the closed-formula walk length from the plan, for comparison
    pub formula_t: BigUint,
    pub bias_in: f64,
    pub bias_aligned: f64,
    /// per-step decay λ₀ + 2λ(X)
    pub lambda1: f64,
    pub bound: f64,
    pub bias_out: f64,
    /// log₂(n′·d₁^s·d₂^{t−1}) with d₁ = 2^b and the index group dense
    /// (d₂ = 2^{s·b})
    pub log2_formal_walks: f64,
    /// log₂(n′·d^t) — the collapsed enumeration actually performed
    pub log2_effective_walks: f64,
    /// the provider served the implicit complete graph (independent
    /// draws) instead of a materialized rotation map
    pub complete_aux: bool,
}

/// End-to-end result: boosted and interleaved generating multiset with
/// exact final bias, size and word-length bookkeeping.
#[derive(Clone, Debug)]
pub struct RamanujanRun {
    pub multiset: GeneratorMultiset,
    pub plan: Plan,
    pub lambda0: f64,
    pub target: f64,
    pub beta: f64,
    pub final_bias: f64,
    pub boost: Option<BoostStage>,
    pub interleave: Option<InterleaveStage>,
    /// input-set factors per output element
    pub word_length: u64,
    /// word_length / log₂(1/λ)
    pub word_ratio: f64,
    pub log2_count: f64,
    /// desk rendering of the size allowance log₂|S| + (2+β)·log₂(1/λ) + C
    pub log2_allowance: f64,
}

fn conv_power(s: &GeneratorMultiset, reps: u32) -> Result<GeneratorMultiset> {
    let w = s.weights_table()?;
    let powered = match s.descriptor().kind() {
        GroupKind::XorBits => xor_conv_power(&w, &BigUint::from(reps)),
        _ => group_conv_power(s.descriptor(), &w, reps as u64)?,
    };
    GeneratorMultiset::from_weights(s.descriptor(), powered, s.count_exact().pow(reps))
}

/// Transform a generating multiset into one whose Cayley graph expands
/// at rate ≤ λ, via an initial boost of independent products followed by
/// walk products over an auxiliary expander. Desk-scale only: regime
/// parameters are symbolic and cannot be materialized.
pub fn almost_ramanujan_pipeline(
    s_in: &GeneratorMultiset,
    lambda: f64,
    beta: f64,
    mode: &PlanMode,
    provider: &dyn ExpanderProvider,
) -> Result<RamanujanRun> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!("target λ = {lambda} outside (0,1)")));
    }
    if !(beta > 0.0) {
        return Err(Error::domain(format!("size exponent β = {beta} must be positive")));
    }
    let (s_width, lambda2) = match mode {
        PlanMode::SmallS { s, lambda2 } => (*s, *lambda2),
        PlanMode::Regime => {
            return Err(Error::precondition(
                "regime-mode parameters are symbolic (degrees like s^{4s}); \
                 builds need the desk schedule — pass the small-s mode"
                    .to_string(),
            ));
        }
    };
    let lambda0 = s_in.bias()?;
    if lambda0 > 1.0 - 1e-12 {
        return Err(Error::precondition(format!(
            "input bias {lambda0} is not bounded away from 1; no walk schedule amplifies it"
        )));
    }
    let size = s_in.count_exact();
    let beta_rat = BigRational::from_float(beta)
        .ok_or_else(|| Error::domain("size exponent is not finite".to_string()))?;
    let plan = make_plan(&TargetSpec::Lambda(lambda), &beta_rat, &size, mode)?;
    let log2_inv_lambda = -(lambda.log2());
    let log2_allowance =
        log2_biguint(&size) + (2.0 + beta) * log2_inv_lambda + SIZE_SLACK_LOG2 as f64;

    if lambda >= lambda0 {
        return Ok(RamanujanRun {
            multiset: s_in.clone(),
            plan,
            lambda0,
            target: lambda,
            beta,
            final_bias: lambda0,
            boost: None,
            interleave: None,
            word_length: 1,
            word_ratio: 1.0 / log2_inv_lambda,
            log2_count: log2_biguint(&size),
            log2_allowance,
        });
    }

    let n0 = s_in.len().ok_or_else(|| {
        Error::precondition(
            "the pipeline starts from a materialized multiset; weight tables \
             carry no vertex assignment for the interleaved stage"
                .to_string(),
        )
    })?;

    // ---- initial boost: independent products to the interleaved
    // stage's entry point, capped so the result still materializes ----
    let landing = (lambda2 * lambda2 / 3.0).max(lambda);
    let r_target = if lambda0 <= landing {
        1
    } else {
        ((landing.ln() / lambda0.ln()) - 1e-12).ceil().max(1.0) as u32
    };
    let mut r_cap = 1u32;
    while (n0 as u128).pow(r_cap + 1) <= BOOST_ALIGN_CAP as u128 {
        r_cap += 1;
    }
    let reps = r_target.min(r_cap);
    let desc = s_in.descriptor();
    let (cur, bias1, boost) = if reps >= 2 {
        let total = (n0 as u64).pow(reps);
        let mut elems = Vec::with_capacity(total as usize);
        for mut idx in 0..total {
            let mut acc = desc.identity();
            for _ in 0..reps {
                let j = (idx % n0 as u64) as usize;
                idx /= n0 as u64;
                acc = desc.mul(&s_in.elem(j), &acc);
            }
            elems.push(acc);
        }
        let m = GeneratorMultiset::from_elems(desc.clone(), elems)?;
        let b = m.bias()?;
        let bound = lambda0.powi(reps as i32);
        if b > bound + 1e-9 {
            return Err(Error::certification(format!(
                "boost bias {b} exceeds the independent-product bound {bound}"
            )));
        }
        let stage = BoostStage {
            reps,
            count: BigUint::from(total),
            bias_in: lambda0,
            bound,
            bias_out: b,
            capped: reps < r_target,
            target: landing,
        };
        (m, b, Some(stage))
    } else {
        (s_in.clone(), lambda0, None)
    };

    if bias1 <= lambda {
        let log2_count = log2_biguint(&cur.count_exact());
        let word_length = reps.max(1) as u64;
        return Ok(RamanujanRun {
            multiset: cur,
            plan,
            lambda0,
            target: lambda,
            beta,
            final_bias: bias1,
            boost,
            interleave: None,
            word_length,
            word_ratio: word_length as f64 / log2_inv_lambda,
            log2_count,
            log2_allowance,
        });
    }

    // ---- interleaved stage: walk products over a real auxiliary
    // expander, with the dense index group collapsing the interleaved
    // walk onto plain outer walks ----
    let n1 = cur.len().expect("boost keeps the multiset materialized") as u64;
    let requests = {
        let thm = lambda2 * lambda2 / 10.0;
        let relaxed = 0.49 * (1.0 - bias1);
        let mut v = vec![thm];
        if relaxed > thm * 1.0001 {
            v.push(relaxed);
        }
        v
    };
    let mut aux = None;
    let mut last_err = None;
    for r in requests {
        match provider.provide(n1, r) {
            Ok(a) => {
                aux = Some(a);
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let aux = match aux {
        Some(a) => a,
        None => return Err(last_err.unwrap()),
    };
    let aligned = align_with_expander(&cur, &aux)?;
    let bias_al = aligned.bias()?;
    let lambda1 = bias_al + 2.0 * aux.lambda;
    if lambda1 >= 1.0 - 1e-9 {
        return Err(Error::provider(format!(
            "auxiliary expander too weak: λ₀ + 2λ(X) = {lambda1} does not decay"
        )));
    }
    let steps = inner_step_count(lambda1, lambda)?;
    let bound = walk_bias_bound(aux.lambda, bias_al, steps, BoundMode::Constant);
    let (out, complete_aux, outer_n, outer_degree) = match &aux.graph {
        AuxGraph::Rot(x) => {
            let out = amplify_via_walks(&aligned, x, steps)?;
            (out, false, x.n() as u64, x.degree() as u64)
        }
        AuxGraph::Complete { n } => {
            let out = conv_power(&aligned, steps + 1)?;
            (out, true, *n, *n)
        }
    };
    let bias_out = out.bias()?;
    if bias_out > bound + 1e-9 {
        return Err(Error::certification(format!(
            "interleaved bias {bias_out} exceeds the walk bound {bound}"
        )));
    }
    if bias_out > lambda + 1e-9 {
        return Err(Error::certification(format!(
            "interleaved bias {bias_out} misses the target {lambda}"
        )));
    }
    let block_bits = (outer_degree.max(2) as f64).log2().ceil() as u32;
    let log2_n_prime = (outer_n as f64).log2();
    let log2_formal_walks =
        log2_n_prime + (s_width * block_bits) as f64 * (1.0 + (steps.saturating_sub(1)) as f64);
    let log2_effective_walks = log2_n_prime + steps as f64 * (outer_degree as f64).log2();
    let interleave = InterleaveStage {
        s: s_width,
        block_bits,
        outer_n,
        outer_degree,
        outer_lambda: aux.lambda,
        replication: aux.replication,
        pad: aux.pad,
        theta: aux.theta,
        aux_label: aux.label.clone(),
        steps,
        formula_t: plan.t.clone(),
        bias_in: bias1,
        bias_aligned: bias_al,
        lambda1,
        bound,
        bias_out,
        log2_formal_walks,
        log2_effective_walks,
        complete_aux,
    };
    let word_length = reps.max(1) as u64 * (steps as u64 + 1);
    let log2_count = log2_biguint(&out.count_exact());
    Ok(RamanujanRun {
        multiset: out,
        plan,
        lambda0,
        target: lambda,
        beta,
        final_bias: bias_out,
        boost,
        interleave: Some(interleave),
        word_length,
        word_ratio: word_length as f64 / log2_inv_lambda,
        log2_count,
        log2_allowance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GeneratorMultiset, GroupDescriptor, GroupElem};
    use crate::zoo::{AghpPadProvider, CompleteProvider};

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn pow2(e: u32) -> BigRational {
        BigRational::from_integer(BigInt::one() << e)
    }

    fn bits_set(m: u32, bits: &[u64]) -> GeneratorMultiset {
        let desc = GroupDescriptor::xor_bits(m).unwrap();
        GeneratorMultiset::from_elems(desc, bits.iter().map(|&b| GroupElem::Bits(b)).collect())
            .unwrap()
    }

    /// All weight-1 and weight-2 vectors of ℤ₂⁸: 8 + 28 = 36 generators.
    fn wt12_set() -> GeneratorMultiset {
        let mut gens = Vec::new();
        for i in 0..8u64 {
            gens.push(1 << i);
        }
        for i in 0..8u64 {
            for j in (i + 1)..8 {
                gens.push((1 << i) | (1 << j));
            }
        }
        bits_set(8, &gens)
    }

    /// Independent oracle for the weight-1+2 set: a character of weight k
    /// sums the single-bit generators to (8−2k) and the two-bit ones to
    /// ((8−2k)²−8)/2, so the bias is max_k |36 − 18k + 2k²|/36.
    fn wt12_bias_oracle() -> f64 {
        let mut best = 0.0f64;
        for k in 1..=8i64 {
            let v = (36 - 18 * k + 2 * k * k) as f64 / 36.0;
            best = best.max(v.abs());
        }
        best
    }

    // ---- logarithm enclosures ----

    #[test]
    fn log2_enclosure_exact_on_powers_of_two() {
        for (v, e) in [(rat(1024, 1), 10i64), (rat(1, 8), -3), (rat(1, 1), 0), (rat(2, 1), 1)] {
            let enc = log2_enclosure(&v, LOG_PRECISION_BITS).unwrap();
            assert_eq!(enc.lo, BigRational::from_integer(BigInt::from(e)));
            assert_eq!(enc.hi, enc.lo, "power of two must enclose exactly");
        }
    }

    #[test]
    fn log2_enclosure_contains_float_oracle() {
        let cases = [
            rat(3, 1),
            rat(10, 1),
            rat(25, 1),
            rat(209715200, 1),
            rat(922746880, 1),
            rat(1, 3),
            rat(7, 5),
        ];
        let max_width = BigRational::new(BigInt::one(), BigInt::one() << 120u32);
        for x in cases {
            let enc = log2_enclosure(&x, LOG_PRECISION_BITS).unwrap();
            let oracle = x.to_f64().unwrap().log2();
            // the float oracle itself carries ~1e−16 relative error, so
            // compare through floats with that much slack
            assert!(enc.lo_f64() <= oracle + 1e-9, "lo {} > oracle {oracle}", enc.lo_f64());
            assert!(enc.hi_f64() >= oracle - 1e-9, "hi {} < oracle {oracle}", enc.hi_f64());
            assert!(enc.width() <= max_width, "width too large for {x}");
        }
    }

    #[test]
    fn log2_enclosure_brackets_every_small_rational() {
        for p in 2u32..40 {
            for q in 1u32..8 {
                let x = rat(p as i64, q as i64);
                let enc = log2_enclosure(&x, 64).unwrap();
                let oracle = (p as f64 / q as f64).log2();
                assert!(enc.lo_f64() <= oracle + 1e-9);
                assert!(enc.hi_f64() >= oracle - 1e-9);
                assert!(enc.width() <= BigRational::new(BigInt::one(), BigInt::one() << 60u32));
            }
        }
    }

    #[test]
    fn log2_enclosure_rejects_nonpositive() {
        assert!(matches!(log2_enclosure(&rat(0, 1), 16), Err(Error::Domain(_))));
        assert!(matches!(log2_enclosure(&rat(-3, 1), 16), Err(Error::Domain(_))));
    }

    // ---- regime plans ----

    #[test]
    fn regime_plan_hand_values_width_1024() {
        let plan = make_plan(
            &TargetSpec::Log2Inv(pow2(40)),
            &rat(1, 32),
            &BigUint::from(1024u32),
            &PlanMode::Regime,
        )
        .unwrap();
        assert_eq!(plan.s, 1024);
        let sym = plan.symbols.as_ref().unwrap();
        assert_eq!(sym.log2_d2, BigUint::from(40960u32));
        assert_eq!(sym.log2_d1, BigUint::from(204800u32));
        assert_eq!(sym.b2, BigUint::from(209715200u32));
        assert_eq!(sym.log2_n2, sym.b2);
        assert_eq!(sym.log2_window_max, 10);
        // λ₂ = b₂/√d₂ in logs: 20480 − log₂(209715200) = 20452.356143810…
        assert!((plan.log2_inv_lambda2.lo_f64() - 20452.356143810225).abs() < 1e-6);
        // t matches the closed formula within the ceiling
        let l = 2f64.powi(40);
        let l2 = 20480.0 - (209715200f64).log2();
        let c = (1019.0 * 1023.0) / (1024.0 * 1024.0);
        let t_est = (l / (c * l2)).ceil() + 1.0;
        let t_f = plan.t.to_f64().unwrap();
        assert!((t_f - t_est).abs() <= 1.0, "t = {t_f}, estimate {t_est}");
        // t is minimal: t−1 walk segments certify the target, t−2 cannot,
        // judged from the safe sides of each enclosure
        let c_exact = rat(1019 * 1023, 1024 * 1024);
        let t1 = BigRational::from_integer(BigInt::from(plan.t.clone()) - 1);
        let one = BigRational::one();
        assert!(&t1 * &c_exact * &plan.log2_inv_lambda2.lo >= plan.log2_inv_lambda.hi);
        assert!(
            (&t1 - &one) * &c_exact * &plan.log2_inv_lambda2.hi < plan.log2_inv_lambda.lo,
            "t is not minimal"
        );
    }

    #[test]
    fn regime_plan_hand_values_width_2048() {
        let plan = make_plan(
            &TargetSpec::Log2Inv(pow2(45)),
            &rat(1, 64),
            &BigUint::from(1024u32),
            &PlanMode::Regime,
        )
        .unwrap();
        assert_eq!(plan.s, 2048);
        let sym = plan.symbols.as_ref().unwrap();
        assert_eq!(sym.log2_d2, BigUint::from(90112u32));
        assert_eq!(sym.log2_d1, BigUint::from(450560u32));
        assert_eq!(sym.b2, BigUint::from(922746880u32));
        assert!((plan.log2_inv_lambda2.lo_f64() - 45026.21864).abs() < 1e-4);
    }

    #[test]
    fn regime_consequence_checks_hold() {
        for (l, beta) in [(40u32, rat(1, 32)), (45, rat(1, 64))] {
            let plan = make_plan(
                &TargetSpec::Log2Inv(pow2(l)),
                &beta,
                &BigUint::from(1024u32),
                &PlanMode::Regime,
            )
            .unwrap();
            let tb = check_t_bound(&plan).unwrap();
            assert!(tb.ok_i, "t−1 ≥ 2s² fails at L = 2^{l}");
            assert!(tb.ok_ii, "degree budget fails at L = 2^{l}");
            assert!(tb.margin_i.is_positive());
            assert!(tb.margin_ii.is_positive());
            let audit = size_audit(&plan).unwrap();
            assert!(audit.ok, "size audit fails at L = 2^{l}");
            assert!(audit.slack.is_positive());
            assert!(audit.log2_walks.lo < audit.log2_walks.hi);
        }
    }

    #[test]
    fn regime_window_empty_recommends_plain_walks() {
        let err = make_plan(
            &TargetSpec::Log2Inv(pow2(40)),
            &rat(1, 64),
            &BigUint::from(1024u32),
            &PlanMode::Regime,
        )
        .unwrap_err();
        match err {
            Error::Precondition(msg) => assert!(msg.contains("walk pipeline"), "{msg}"),
            other => panic!("expected precondition, got {other:?}"),
        }
    }

    #[test]
    fn nonpositive_beta_rejected() {
        let err = make_plan(
            &TargetSpec::Log2Inv(pow2(40)),
            &rat(0, 1),
            &BigUint::from(4u32),
            &PlanMode::Regime,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn perturbed_walk_length_fails_first_check() {
        let mut plan = make_plan(
            &TargetSpec::Log2Inv(pow2(40)),
            &rat(1, 32),
            &BigUint::from(1024u32),
            &PlanMode::Regime,
        )
        .unwrap();
        plan.t = BigUint::from(100u32);
        let tb = check_t_bound(&plan).unwrap();
        assert!(!tb.ok_i, "a 100-step walk cannot cover 2s² segments");
    }

    #[test]
    fn consequence_chain_across_widths() {
        for k in 10u32..=14 {
            let s: u64 = 1 << k;
            let beta = BigRational::new(BigInt::from(32), BigInt::one() << k);
            // smallest power-of-two log-target in the width window:
            // 4s³·log₂log₂(1/λ) ≤ log₂(1/λ) with λ = 2^{−2^j} is exactly
            // 2^{3k+2}·j ≤ 2^j
            let mut j = 3 * k + 2;
            loop {
                let lhs = BigUint::from(j) << (3 * k + 2);
                if lhs <= (BigUint::one() << j) {
                    break;
                }
                j += 1;
            }
            let plan = make_plan(
                &TargetSpec::Log2Inv(pow2(j)),
                &beta,
                &BigUint::from(4u32),
                &PlanMode::Regime,
            )
            .unwrap();
            assert_eq!(plan.s, s, "width selection at k = {k}");
            let sym = plan.symbols.as_ref().unwrap();
            let tb = check_t_bound(&plan).unwrap();
            assert!(tb.ok_i, "walk-length floor fails at s = 2^{k}");
            assert!(tb.ok_ii, "degree budget fails at s = 2^{k}");
            assert!(size_audit(&plan).unwrap().ok, "size audit fails at s = 2^{k}");
            // the b₂ numerator must be cheap against the *two-step* decay
            // λ₂²: (1−2α)·log₂d₂ ≤ 2·log₂(1/λ₂); the unsquared form is
            // false for every width here
            let d2 = BigRational::from_integer(BigInt::from(sym.log2_d2.clone()));
            let lhs = BigRational::new(BigInt::from(s - 2), BigInt::from(s)) * &d2;
            let two = BigRational::from_integer(BigInt::from(2));
            assert!(
                lhs <= &two * &plan.log2_inv_lambda2.lo,
                "two-step degree charge fails at s = 2^{k}"
            );
            assert!(lhs > plan.log2_inv_lambda2.hi.clone(), "unsquared form unexpectedly holds");
            // the inner expansion is far below the 1/(3s²) the interleaved
            // walk consumes per segment
            let three_s2 = log2_enclosure(&rat(3 * (s as i64) * (s as i64), 1), 64).unwrap();
            assert!(plan.log2_inv_lambda2.lo >= three_s2.hi, "λ₂ > 1/(3s²) at s = 2^{k}");
        }
    }

    #[test]
    fn formal_walk_count_multiplies_out() {
        assert_eq!(formal_walk_count(3, 4, 2, 16, 3), BigUint::from(196608u32));
        assert_eq!(formal_walk_count(1, 1, 5, 1, 7), BigUint::one());
    }

    // ---- small-s plans ----

    #[test]
    fn small_s_walk_length_matches_hand_value() {
        // L = log₂1000, L₂ = log₂10, c = (3/8)(7/8) = 21/64:
        // t−1 = ⌈3/(21/64)⌉ = ⌈9.142…⌉ = 10
        let plan = make_plan(
            &TargetSpec::Lambda(1e-3),
            &rat(1, 2),
            &BigUint::from(4u32),
            &PlanMode::SmallS { s: 8, lambda2: 0.1 },
        )
        .unwrap();
        assert_eq!(plan.t, BigUint::from(11u32));
        assert!(plan.symbols.is_none());
        assert!(plan.walk_exponent() == rat(21, 64));
    }

    #[test]
    fn small_s_rejects_widths_without_decay() {
        for s in [1u32, 2, 4] {
            let err = make_plan(
                &TargetSpec::Lambda(0.01),
                &rat(1, 2),
                &BigUint::from(4u32),
                &PlanMode::SmallS { s, lambda2: 0.1 },
            )
            .unwrap_err();
            match err {
                Error::Domain(msg) => assert!(msg.contains("exponent"), "{msg}"),
                other => panic!("expected domain error, got {other:?}"),
            }
        }
        let err = make_plan(
            &TargetSpec::Lambda(0.01),
            &rat(1, 2),
            &BigUint::from(4u32),
            &PlanMode::SmallS { s: 12, lambda2: 0.1 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn small_s_validates_inner_expansion() {
        for l2 in [0.0, 1.0, -0.5] {
            let err = make_plan(
                &TargetSpec::Lambda(0.01),
                &rat(1, 2),
                &BigUint::from(4u32),
                &PlanMode::SmallS { s: 8, lambda2: l2 },
            )
            .unwrap_err();
            assert!(matches!(err, Error::Domain(_)));
        }
    }

    #[test]
    fn small_s_plans_have_no_symbolic_checks() {
        let plan = make_plan(
            &TargetSpec::Lambda(1e-3),
            &rat(1, 2),
            &BigUint::from(4u32),
            &PlanMode::SmallS { s: 8, lambda2: 0.1 },
        )
        .unwrap();
        assert!(matches!(check_t_bound(&plan), Err(Error::Precondition(_))));
        assert!(matches!(size_audit(&plan), Err(Error::Precondition(_))));
    }

    // ---- end-to-end pipeline ----

    #[test]
    fn wt12_bias_is_five_ninths() {
        let s = wt12_set();
        assert_eq!(s.len(), Some(36));
        let oracle = wt12_bias_oracle();
        assert!((oracle - 5.0 / 9.0).abs() < 1e-15);
        assert!((s.bias().unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn pipeline_desk_run_reaches_5_percent() {
        let s = wt12_set();
        let provider = AghpPadProvider { theta_max: 0.34 };
        let run = almost_ramanujan_pipeline(
            &s,
            0.05,
            0.5,
            &PlanMode::SmallS { s: 8, lambda2: 0.6 },
            &provider,
        )
        .unwrap();
        assert!(run.final_bias <= 0.05, "final bias {}", run.final_bias);
        assert!((run.lambda0 - 5.0 / 9.0).abs() < 1e-12);
        // closed-formula walk length recorded for comparison
        assert_eq!(run.plan.t, BigUint::from(19u32));

        let boost = run.boost.as_ref().expect("boost stage must run");
        assert_eq!(boost.reps, 2);
        assert_eq!(boost.count, BigUint::from(1296u32));
        assert!((boost.bias_out - 25.0 / 81.0).abs() < 1e-12);
        assert!(boost.capped, "the landing target 0.12 needs more reps than materialize");

        let il = run.interleave.as_ref().expect("interleaved stage must run");
        assert!(!il.complete_aux);
        assert_eq!(il.s, 8);
        assert_eq!(il.outer_n, 4096);
        assert_eq!(il.outer_degree, 4096);
        assert_eq!(il.replication, 3);
        assert_eq!(il.pad, 208);
        assert!(il.outer_lambda <= 0.1875 + 1e-12);
        assert!(il.bias_aligned <= (1.0 - il.theta) * boost.bias_out + il.theta + 1e-9);
        assert!(il.lambda1 < 1.0);
        assert!(il.steps >= 2);
        assert!(il.bound <= 0.05 + 1e-12);
        assert!(il.bias_out <= il.bound + 1e-9);
        assert_eq!(il.formula_t, BigUint::from(19u32));
        assert!(il.log2_formal_walks >= il.log2_effective_walks);

        assert_eq!(run.word_length, 2 * (il.steps as u64 + 1));
        let expected_ratio = run.word_length as f64 / (1.0f64 / 0.05).log2();
        assert!((run.word_ratio - expected_ratio).abs() < 1e-9);
        assert!((run.multiset.bias().unwrap() - run.final_bias).abs() < 1e-12);
        assert!(run.multiset.len().is_none(), "walk products stay in weight-table form");
    }

    #[test]
    fn pipeline_trivial_when_target_is_loose() {
        let s = wt12_set();
        let run = almost_ramanujan_pipeline(
            &s,
            0.9,
            0.5,
            &PlanMode::SmallS { s: 8, lambda2: 0.6 },
            &CompleteProvider,
        )
        .unwrap();
        assert!(run.boost.is_none());
        assert!(run.interleave.is_none());
        assert_eq!(run.word_length, 1);
        assert_eq!(run.multiset.len(), Some(36));
        assert!((run.final_bias - run.lambda0).abs() < 1e-15);
    }

    #[test]
    fn pipeline_rejects_regime_mode() {
        let s = wt12_set();
        let err =
            almost_ramanujan_pipeline(&s, 0.05, 0.5, &PlanMode::Regime, &CompleteProvider)
                .unwrap_err();
        match err {
            Error::Precondition(msg) => assert!(msg.contains("symbolic"), "{msg}"),
            other => panic!("expected precondition, got {other:?}"),
        }
    }

    #[test]
    fn pipeline_rejects_unamplifiable_input() {
        let s = bits_set(3, &[0b000, 0b000]);
        let err = almost_ramanujan_pipeline(
            &s,
            0.5,
            0.5,
            &PlanMode::SmallS { s: 8, lambda2: 0.6 },
            &CompleteProvider,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn pipeline_boost_alone_can_finish() {
        // bias(S) = 1/2 exactly; landing target 0.6²/3 = 0.12 needs four
        // factors, and 0.5⁴ = 0.0625 already beats λ = 0.1
        let s = bits_set(3, &[0b001, 0b010, 0b100, 0b110]);
        assert!((s.bias().unwrap() - 0.5).abs() < 1e-15);
        let run = almost_ramanujan_pipeline(
            &s,
            0.1,
            1.0,
            &PlanMode::SmallS { s: 8, lambda2: 0.6 },
            &CompleteProvider,
        )
        .unwrap();
        let boost = run.boost.as_ref().unwrap();
        assert_eq!(boost.reps, 4);
        assert!(!boost.capped);
        assert_eq!(boost.count, BigUint::from(256u32));
        assert!(run.interleave.is_none());
        assert!((run.final_bias - 0.0625).abs() < 1e-12);
        assert_eq!(run.word_length, 4);
        assert_eq!(run.multiset.len(), Some(256));
    }

    #[test]
    fn pipeline_independent_draws_when_aux_is_complete() {
        let s = bits_set(3, &[0b001, 0b010, 0b100, 0b110]);
        let run = almost_ramanujan_pipeline(
            &s,
            0.02,
            1.0,
            &PlanMode::SmallS { s: 8, lambda2: 0.6 },
            &CompleteProvider,
        )
        .unwrap();
        let boost = run.boost.as_ref().unwrap();
        assert_eq!(boost.reps, 4);
        let il = run.interleave.as_ref().unwrap();
        assert!(il.complete_aux);
        assert_eq!(il.outer_n, 256);
        assert_eq!(il.steps, 5);
        assert!((il.bound - 0.0625f64.powi(2)).abs() < 1e-15);
        // 4 boost factors × 6 independent draws = 24 input factors, and
        // every character power multiplies exactly: bias = 2⁻²⁴
        assert_eq!(run.word_length, 24);
        assert!((run.final_bias - 0.5f64.powi(24)).abs() < 1e-15);
        assert!(run.multiset.len().is_none());
    }
}
