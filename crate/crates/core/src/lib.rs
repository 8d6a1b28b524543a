//! Sobolev inner products, norms and distances estimated from samples
//! through truncated empirical Fourier series.
//!
//! The guide under `book/` walks through the pieces; its snippets run as
//! doctests of this crate.

pub mod accum;
pub mod bench;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod lattice;
mod numeric;
pub mod oracles;
pub mod pipeline;
pub mod report;
pub mod rescale;
pub mod samples;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/lattice.md")]
    pub struct Lattice;
    #[doc = include_str!("../../../book/src/estimators.md")]
    pub struct Estimators;
    #[doc = include_str!("../../../book/src/radius.md")]
    pub struct Radius;
    #[doc = include_str!("../../../book/src/inference.md")]
    pub struct Inference;
    #[doc = include_str!("../../../book/src/oracles.md")]
    pub struct Oracles;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
