//! Offline autoscheduling for sparse tensor programs.
//!
//! This crate analyzes and schedules sparse tensor kernels written in
//! *protocolized concrete index notation*: loop nests (`forall`), temporaries
//! (`where`), and assignments whose tensor accesses carry per-mode iteration
//! protocols (step/locate for reads, append/insert for writes).
//!
//! The main pieces are:
//!
//! * [`cinp`] — the intermediate representation, its text syntax,
//!   pretty-printer, and structural validation.
//! * [`queries`] — task sets as unions of conjunctive queries with
//!   dimension-typed heads, homomorphism-based containment, and
//!   simplification. Containment decides *asymptotic domination*.
//! * [`costmodel`] — abstract interpretation deriving the task-set cost of a
//!   program: which index tuples it coiterates and computes over.
//! * [`frontier`] — streaming Pareto filter keeping the asymptotically
//!   undominated candidates.
//! * [`scheduler`] — the enumerative pipeline: expression rewrites, workspace
//!   groupings, loop nestings, depth filter, workspace naming, protocol
//!   enumeration, asymptotic filter, reformatting, empirical ranking.
//! * [`interp`] — a reference interpreter over level-tree sparse tensors that
//!   records executed tasks; the empirical oracle for the cost model and the
//!   semantics oracle for the scheduler.
//!
//! A quick taste: derive the cost of a sparse matrix-vector product.
//!
//! ```
//! use sparse_asympt::{cinp, costmodel};
//!
//! let program = cinp::parse(
//!     "tensor a {I} format (u)\n\
//!      tensor B {I, J} format (u, c)\n\
//!      tensor c {J} format (u)\n\
//!      forall i, j: a[a i] += B[l i, s j] * c[l j]\n",
//! )
//! .unwrap();
//! let cost = costmodel::derive_cost(&program).unwrap();
//! // One set for walking the dense rows, one for the sparse work per row.
//! assert_eq!(cost.total.to_text(), "{[i:I] | true} + {[i:I, j:J] | B(i,j)}");
//! ```

pub mod cinp;
pub mod costmodel;
pub mod fixtures;
pub mod frontier;
pub mod interp;
pub mod queries;
pub mod scheduler;

// The guide chapters double as doc-tests so their code blocks stay honest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/notation.md")]
    pub mod notation {}
    #[doc = include_str!("../../../book/src/task-sets.md")]
    pub mod task_sets {}
    #[doc = include_str!("../../../book/src/containment.md")]
    pub mod containment {}
    #[doc = include_str!("../../../book/src/cost-model.md")]
    pub mod cost_model {}
    #[doc = include_str!("../../../book/src/frontier.md")]
    pub mod frontier {}
    #[doc = include_str!("../../../book/src/scheduling.md")]
    pub mod scheduling {}
    #[doc = include_str!("../../../book/src/interpreter.md")]
    pub mod interpreter {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
