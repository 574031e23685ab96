//! Rendered derivation notes and pipeline reference.
//!
//! The markdown lives in the repository `docs/` directory and is embedded
//! here so that every numeric claim inside it runs as a doctest.

#[doc = include_str!("../../../docs/derivations.md")]
pub mod derivations {}

#[doc = include_str!("../../../docs/degradation.md")]
pub mod degradation {}
