//! Learned algorithm selection for simplex pivot rules and all-pairs shortest paths.

pub mod apsp;
pub mod eval;
pub mod features;
pub mod graph;
pub mod io;
pub mod learn;
pub mod linalg;
pub mod lp;
pub mod lp_gen;
pub mod rng;
pub mod simplex;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/simplex.md")]
    mod simplex {}
    #[doc = include_str!("../../../book/src/generators.md")]
    mod generators {}
    #[doc = include_str!("../../../book/src/apsp.md")]
    mod apsp {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
