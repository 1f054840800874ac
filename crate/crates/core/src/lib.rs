//! Constrained spectral clustering.
//!
//! Pairwise side information (must-links, cannot-links, soft beliefs, or a
//! whole second graph) is encoded in a symmetric matrix `Q`. A cut is a
//! vector `v` on the graph; it costs `vᵀL̄v` and satisfies the constraints to
//! the degree `vᵀQ̄v`. The solver minimizes cost subject to satisfaction
//! above a threshold β, which reduces to a generalized symmetric eigenproblem.
//!
//! ```
//! use conspec::constraints::BetaPolicy;
//! use conspec::fixtures::{toy_constraints, toy_graph};
//! use conspec::solver::csp_two_way;
//!
//! let graph = toy_graph();
//! let cm = toy_constraints(&graph);
//! let cut = csp_two_way(&graph, &cm, BetaPolicy::Explicit(2.0 * graph.vol()))?;
//! assert_eq!(cut.labels, vec![0, 0, 0, 0, 1, 1]);
//! # Ok::<(), conspec::Error>(())
//! ```

pub mod cli;
pub mod constraints;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod solver;

pub use error::{Error, Result};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/constraints.md")]
    mod constraints {}
    #[doc = include_str!("../../../book/src/beta.md")]
    mod beta {}
    #[doc = include_str!("../../../book/src/feasible.md")]
    mod feasible {}
    #[doc = include_str!("../../../book/src/kway.md")]
    mod kway {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
