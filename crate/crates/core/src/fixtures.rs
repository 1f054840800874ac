//! The six-node illustrative instance: a graph whose affinity structure says
//! `{0,1,2} | {3,4,5}` and a full-information constraint matrix that says
//! `{0,1,2,3} | {4,5}` (0-based).

use crate::constraints::ConstraintMatrix;
use crate::graph::{build_laplacian, AffinityGraph};
use crate::linalg::SymMatrix;

pub const TOY_EDGES: [(usize, usize); 7] = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)];

pub const TOY_COLORS: [usize; 6] = [0, 0, 0, 0, 1, 1];

pub fn toy_affinity() -> SymMatrix {
    SymMatrix::from_fn(6, |i, j| {
        if TOY_EDGES.contains(&(i.min(j), i.max(j))) { 1.0 } else { 0.0 }
    })
    .expect("finite")
}

pub fn toy_graph() -> AffinityGraph {
    build_laplacian(toy_affinity()).expect("toy graph is connected")
}

/// `Q = ccᵀ` with `c = (+1,+1,+1,+1,−1,−1)`, unit diagonal included.
pub fn toy_q() -> SymMatrix {
    let c = |i: usize| if TOY_COLORS[i] == 0 { 1.0 } else { -1.0 };
    SymMatrix::from_fn(6, |i, j| c(i) * c(j)).expect("finite")
}

pub fn toy_constraints(graph: &AffinityGraph) -> ConstraintMatrix {
    ConstraintMatrix::from_dense(toy_q(), graph).expect("sizes match")
}
