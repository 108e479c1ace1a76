//! Weighted solutions of `div u = f` on rasterized planar domains, built from
//! a dyadic Whitney decomposition and a family of paths to a fixed center.

pub mod battery;
pub mod decomp;
pub mod domain;
pub mod error;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod paths;
pub mod poincare;
pub mod weight;
pub mod whitney;

pub use error::{Error, Result};

/// Chapters of the accompanying book; their code blocks run as doc-tests.
pub mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod overview {}
    #[doc = include_str!("../../../book/src/domains.md")]
    pub mod domains {}
    #[doc = include_str!("../../../book/src/whitney.md")]
    pub mod whitney {}
    #[doc = include_str!("../../../book/src/paths.md")]
    pub mod paths {}
    #[doc = include_str!("../../../book/src/weight.md")]
    pub mod weight {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    pub mod kernel {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    pub mod decomposition {}
    #[doc = include_str!("../../../book/src/poincare.md")]
    pub mod poincare {}
}
