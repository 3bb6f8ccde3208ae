//! Deterministic spectral amplification of expanders.
//!
//! This crate turns a generating multiset of a finite group (or a regular
//! multigraph) with a *mediocre* spectral expansion parameter λ₀ into a larger
//! multiset (or graph) whose expansion parameter is certified to be at most a
//! requested λ.  The constructions composed here are
//!
//! * plain expander-walk amplification: new generators are products of the
//!   input generators read along walks of an auxiliary expander,
//! * the s-wide replacement product: walks on the auxiliary expander are
//!   themselves derandomized by a second, much smaller expander,
//! * operator-valued expander mixing: one product per edge of the auxiliary
//!   expander, squaring the bias per round,
//!
//! together with the measurement machinery needed to *certify* every claimed
//! parameter numerically: exact character sums for bit-vector groups, dense
//! eigendecompositions and deterministic power iteration for everything else,
//! and exact rational log-space audits for parameter regimes far outside
//! floating-point range.
//!
//! All randomized paths are seeded and reproducible; all constructions are
//! canonically ordered so that repeated runs are byte-identical.

pub mod budget;
pub mod eml;
pub mod error;
pub mod graph;
pub mod group;
pub mod operator;
pub mod perm;
pub mod plan;
pub mod rng;
pub mod swide;
pub mod walks;
pub mod zoo;

pub use error::{Error, Result};
pub use graph::{LocalInversion, RotationGraph, SpectralMethod, SpectralReport};
pub use group::{GeneratorMultiset, GroupDescriptor, GroupElem, GroupKind};
pub use operator::{LiftProject, OperatorFunction, RepKind};
pub use perm::{PartialMonotoneMap, PermutationList};
pub use plan::{Plan, PlanMode, RamanujanRun, TargetSpec};
pub use swide::{SWideProduct, SWideWalk};
pub use walks::WalkCollection;
pub use zoo::{AghpSet, AuxExpander, AuxGraph, ExpanderProvider};
