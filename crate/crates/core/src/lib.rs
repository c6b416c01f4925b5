//! Tree reconstruction from binary character matrices and tests of fit to
//! general Markov models on trees.

pub mod analysis;
pub mod distance;
pub mod error;
pub mod invariants;
pub mod markov;
pub mod matrix;
pub mod reconstruct;
pub mod report;
pub mod seed;
pub mod tree;

pub use error::{Error, Result};

/// Compiles the guide's snippets as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/matrices.md")]
    struct Matrices;
    #[doc = include_str!("../../../book/src/trees.md")]
    struct Trees;
    #[doc = include_str!("../../../book/src/distances.md")]
    struct Distances;
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    struct Reconstruction;
    #[doc = include_str!("../../../book/src/markov.md")]
    struct Markov;
    #[doc = include_str!("../../../book/src/invariants.md")]
    struct Invariants;
    #[doc = include_str!("../../../book/src/analysis.md")]
    struct Analysis;
}
