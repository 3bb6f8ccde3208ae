//! Finite groups, their elements, and generating multisets.
//!
//! Three group families are supported:
//!
//! * `xor-bits m` — the Boolean cube ℤ₂^m under XOR; elements are bit vectors,
//! * `sl2 p` — SL₂(p), 2×2 matrices over ℤ_p with determinant 1,
//! * `symmetric n` — Sym(n), permutations of {1,…,n}.
//!
//! Elements are value types; all arithmetic goes through the
//! [`GroupDescriptor`] so the same multiset code serves every family.
//! Multiset-level operations (bias measurement, Cayley graphs, padding)
//! live in [`multiset`]; irreducible-representation oracles used to
//! cross-check spectral measurements live in [`irreps`].

mod elem;
pub mod io;
pub mod irreps;
mod multiset;

pub use elem::{GroupDescriptor, GroupElem, GroupIndex, GroupKind};
pub use multiset::{walsh_inplace, GeneratorMultiset, MultisetStore};
