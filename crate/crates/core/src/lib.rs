//! Explicit quadratic Chabauty machinery over quadratic fields.
//!
//! The crate provides the p-adic layers needed to run the method at desk
//! scale: capped-precision arithmetic in Q_p ([`padic`]), truncated
//! multivariate power series ([`mseries`]), a certified multivariate
//! Hensel/Newton root solver ([`hensel`]), continuous idele class
//! characters of quadratic fields ([`icc`]), and the height-coefficient
//! and target-set assembly that ties them together ([`qc`]).
//!
//! Coleman integrals, regular models and Mordell-Weil data are *inputs*
//! here: they enter as truncated series expansions and per-prime value
//! tables, never computed.

pub mod guide;
pub mod hensel;
pub mod icc;
pub mod json;
pub mod linalg;
pub mod mseries;
pub mod padic;
pub mod qc;

pub use padic::{BranchConstant, PadicContext, PadicError, PadicNumber};

#[cfg(test)]
mod concurrency_contract {
    // Every value type is immutable after construction and safe to share
    // across threads; evaluation and solving are reentrant.
    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn values_are_shareable() {
        assert_send_sync::<crate::padic::PadicNumber>();
        assert_send_sync::<crate::padic::PadicContext>();
        assert_send_sync::<crate::mseries::TruncatedSeries>();
        assert_send_sync::<crate::mseries::SeriesSystem>();
        assert_send_sync::<crate::hensel::RootReport>();
        assert_send_sync::<crate::icc::IdeleClassCharacter>();
        assert_send_sync::<crate::icc::QuadraticFieldData>();
        assert_send_sync::<crate::qc::RhoSystem>();
        assert_send_sync::<crate::qc::TSet>();
    }
}
