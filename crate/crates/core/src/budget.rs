//! Capacity budgets.
//!
//! Every potentially explosive operation checks one of these knobs and
//! returns [`crate::Error::Capacity`] instead of allocating unboundedly.

/// Largest group order that may be enumerated element-by-element.
pub const GROUP_ENUM_CAP: usize = 200_000;

/// Largest dimension handled by dense eigendecomposition / SVD by default.
/// Override at runtime with the `OPAMP_DENSE_CAP` environment variable.
pub const DENSE_CAP_DEFAULT: usize = 2048;

/// Default number of walks that may be materialized explicitly.
pub const WALK_BUDGET: u64 = 10_000_000;

/// Largest rotation-map port table (n·d entries) that may be allocated.
pub const PORT_CAP: usize = 40_000_000;

/// Widest bit-vector group for which full 2^m frequency tables (and their
/// fast transforms) may be allocated.
pub const XOR_WALSH_BITS_CAP: u32 = 24;

/// Largest lookup table (entries) for group-translation operators:
/// covers a full Cayley table of SL₂(19) (6840² ≈ 4.7·10⁷).
pub const CONV_TABLE_CAP: usize = 50_000_000;

/// Dense cap honouring the `OPAMP_DENSE_CAP` override.
pub fn dense_cap() -> usize {
    std::env::var("OPAMP_DENSE_CAP")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(DENSE_CAP_DEFAULT)
}
