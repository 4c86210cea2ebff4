//! The user guide, embedded chapter by chapter so that every code snippet
//! in the book compiles and runs under `cargo test --doc`.
//!
//! The rendered book lives in `book/` at the repository root and is built
//! with `mdbook build book`; the modules here exist to keep its examples
//! in lock-step with the crate.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/padic.md")]
pub mod padic_arithmetic {}

#[doc = include_str!("../../../book/src/series.md")]
pub mod truncated_series {}

#[doc = include_str!("../../../book/src/hensel.md")]
pub mod root_solving {}

#[doc = include_str!("../../../book/src/characters.md")]
pub mod idele_class_characters {}

#[doc = include_str!("../../../book/src/heights.md")]
pub mod heights_and_target_sets {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod command_line {}
