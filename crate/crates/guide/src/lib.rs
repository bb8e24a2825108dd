//! Guide chapters compiled as doc-tests, so the book's listings cannot
//! drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/state-vectors.md")]
pub mod state_vectors {}

#[doc = include_str!("../../../book/src/measurement.md")]
pub mod measurement {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}

#[doc = include_str!("../../../book/src/prediction.md")]
pub mod prediction {}

#[doc = include_str!("../../../book/src/feasibility.md")]
pub mod feasibility {}

#[doc = include_str!("../../../book/src/protocol-language.md")]
pub mod protocol_language {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
