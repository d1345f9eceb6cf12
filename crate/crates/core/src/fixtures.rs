//! Shared example kernels and hand-computed reference costs.
//!
//! The tests, the guide, and the command-line examples all draw on the same
//! small zoo: classic sparse kernels as schedulable specifications, three
//! well-known SpGEMM implementation strategies (inner products, Gustavson's
//! row-by-row algorithm, outer products) and two SDDMM variants as runnable
//! programs, and the per-loop task sets those strategies are traditionally
//! credited with, built clause by clause.
//!
//! The inner-products and outer-products programs take pre-transposed
//! copies of one operand (`Ct`, `Bt`) so every access is concordant with
//! its loop order; [`TaskSet::rename_predicate`] re-phrases a reference
//! set onto such an input when a comparison needs both spellings.

use crate::cinp::parse;
use crate::queries::{Clause, Cq, TaskSet};
use crate::scheduler::KernelSpec;

/// Inner-products SpGEMM over row-major `B` and a pre-transposed `Ct`.
pub const INNER_SPGEMM: &str = "tensor A {I, J} format (c, c)\n\
                                tensor B {I, K} format (c, c)\n\
                                tensor Ct {J, K} format (c, c)\n\
                                forall i, j, k: A[a i, a j] += B[s i, s k] * Ct[s j, s k]\n";

/// Gustavson's row-by-row SpGEMM with a per-row hash workspace.
pub const GUSTAVSON_SPGEMM: &str = "tensor A {I, J} format (c, c)\n\
                                    tensor B {I, K} format (c, c)\n\
                                    tensor C {K, J} format (c, c)\n\
                                    tensor w {J} format (h)\n\
                                    forall i: (forall j: A[a i, a j] = w[s j]) where \
                                    (forall k, j: w[i j] += B[s i, s k] * C[s k, s j])\n";

/// Outer-products SpGEMM over a pre-transposed `Bt`, scattering into a
/// hash-formatted output.
pub const OUTER_SPGEMM: &str = "tensor A {I, J} format (h, h)\n\
                                tensor Bt {K, I} format (c, c)\n\
                                tensor C {K, J} format (c, c)\n\
                                forall k, i, j: A[i i, i j] += Bt[s k, s i] * C[s k, s j]\n";

/// Outer-products SpGEMM as a self-contained plan over the original `B`:
/// a transposing copy pass feeds the scatter loop, and an in-order assembly
/// drains the scattered workspace into the compressed output. This is
/// exactly what [`crate::scheduler::insert_reformatting`] builds from the
/// `k`-outermost loop nest.
pub const TRANSPOSING_OUTER_SPGEMM: &str =
    "tensor A {I, J} format (c, c)\n\
     tensor B {I, K} format (c, c)\n\
     tensor C {K, J} format (c, c)\n\
     tensor Br {K, I} format (c, c)\n\
     tensor w {I, J} format (h, h)\n\
     (forall i, j: A[a i, a j] = w[s i, s j]) where \
     ((forall k, i, j: w[i i, i j] += Br[s k, s i] * C[s k, s j]) where \
     (forall k, i: Br[a k, a i] = B[s i, s k]))\n";

/// SDDMM with the sampling matrix `D` fused into the contraction loop.
pub const FUSED_SDDMM: &str = "tensor A {I, J} format (u, c)\n\
                               tensor D {I, J} format (c, c)\n\
                               tensor B {I, K} format (u, u)\n\
                               tensor C {K, J} format (u, u)\n\
                               forall i, j, k: A[a i, a j] += D[s i, s j] * B[l i, l k] * C[l k, l j]\n";

/// SDDMM that materializes the full dense product first, then samples it.
pub const NONFUSED_SDDMM: &str = "tensor A {I, J} format (u, c)\n\
                                  tensor D {I, J} format (c, c)\n\
                                  tensor B {I, K} format (u, u)\n\
                                  tensor C {K, J} format (u, u)\n\
                                  tensor T {I, J} format (u, u)\n\
                                  (forall i, j: A[a i, a j] = D[s i, s j] * T[l i, l j]) where \
                                  (forall i, j, k: T[a i, a j] += B[l i, l k] * C[l k, l j])\n";

/// `a_i = Σ_j B_ij · c_j` — sparse matrix-vector product.
pub const SPMV_KERNEL: &str = "tensor a {I} format (u)\n\
                               tensor B {I, J} format (u, c)\n\
                               tensor c {J} format (u)\n\
                               forall i, j: a[i] += B[i, j] * c[j]\n";

/// `a_i = Σ_jk B_ij · C_jk · d_k` — two chained matrix-vector products.
pub const SPMV2_KERNEL: &str = "tensor a {I} format (u)\n\
                                tensor B {I, J} format (u, c)\n\
                                tensor C {J, K} format (u, c)\n\
                                tensor d {K} format (u)\n\
                                forall i, j, k: a[i] += B[i, j] * C[j, k] * d[k]\n";

/// `A_ij = Σ_k B_ik · C_kj` — sparse matrix-matrix product.
pub const SPGEMM_KERNEL: &str = "tensor A {I, J} format (u, c)\n\
                                 tensor B {I, K} format (u, c)\n\
                                 tensor C {K, J} format (u, c)\n\
                                 forall i, j, k: A[i, j] += B[i, k] * C[k, j]\n";

/// `A_ij = Σ_kl B_ik · C_kl · D_lj` — three-matrix chain product.
pub const SPGEMM2_KERNEL: &str = "tensor A {I, J} format (u, c)\n\
                                  tensor B {I, K} format (u, c)\n\
                                  tensor C {K, L} format (u, c)\n\
                                  tensor D {L, J} format (u, c)\n\
                                  forall i, j, k, l: A[i, j] += B[i, k] * C[k, l] * D[l, j]\n";

/// `A_ij = Σ_k B_ik · C_kj · D_kj` — matrix product with a Hadamard factor.
pub const SPGEMMH_KERNEL: &str = "tensor A {I, J} format (u, c)\n\
                                  tensor B {I, K} format (u, c)\n\
                                  tensor C {K, J} format (u, c)\n\
                                  tensor D {K, J} format (u, c)\n\
                                  forall i, j, k: A[i, j] += B[i, k] * C[k, j] * D[k, j]\n";

/// `A_ij = Σ_kl B_ikl · C_kj · D_lj` — matricized-tensor times Khatri-Rao.
pub const SPMTTKRP_KERNEL: &str = "tensor A {I, J} format (u, c)\n\
                                   tensor B {I, K, L} format (u, c, c)\n\
                                   tensor C {K, J} format (u, c)\n\
                                   tensor D {L, J} format (u, c)\n\
                                   forall i, j, k, l: A[i, j] += B[i, k, l] * C[k, j] * D[l, j]\n";

/// `A_ij = Σ_k D_ij · B_ik · C_kj` — sampled dense-dense matrix product.
pub const SDDMM_KERNEL: &str = "tensor A {I, J} format (u, c)\n\
                                tensor D {I, J} format (c, c)\n\
                                tensor B {I, K} format (u, u)\n\
                                tensor C {K, J} format (u, u)\n\
                                forall i, j, k: A[i, j] += D[i, j] * B[i, k] * C[k, j]\n";

fn spec_of(text: &str) -> KernelSpec {
    KernelSpec::from_program(&parse(text).expect("fixture kernels parse"))
        .expect("fixture kernels are schedulable")
}

pub fn spmv() -> KernelSpec {
    spec_of(SPMV_KERNEL)
}

pub fn spmv2() -> KernelSpec {
    spec_of(SPMV2_KERNEL)
}

pub fn spgemm() -> KernelSpec {
    spec_of(SPGEMM_KERNEL)
}

pub fn spgemm2() -> KernelSpec {
    spec_of(SPGEMM2_KERNEL)
}

pub fn spgemmh() -> KernelSpec {
    spec_of(SPGEMMH_KERNEL)
}

pub fn spmttkrp() -> KernelSpec {
    spec_of(SPMTTKRP_KERNEL)
}

pub fn sddmm() -> KernelSpec {
    spec_of(SDDMM_KERNEL)
}

/// The cost lines traditionally credited to one implementation strategy:
/// one task set per loop (labeled by its variable) and per assignment
/// (labeled `=`), outermost first, consumers before their producers.
#[derive(Debug, Clone)]
pub struct StrategyCost {
    pub name: &'static str,
    pub lines: Vec<(&'static str, TaskSet)>,
}

impl StrategyCost {
    /// The strategy's whole cost: the union of every line.
    pub fn total(&self) -> TaskSet {
        let mut total = TaskSet::empty();
        for (_, tasks) in &self.lines {
            total.union_with(tasks);
        }
        total.normalized()
    }
}

fn set(disjuncts: Vec<Cq>) -> TaskSet {
    TaskSet { disjuncts }.normalized()
}

fn b(i: &str, k: &str) -> Clause {
    Clause::new("B", &[i, k])
}

fn c(k: &str, j: &str) -> Clause {
    Clause::new("C", &[k, j])
}

fn d(i: &str, j: &str) -> Clause {
    Clause::new("D", &[i, j])
}

const I: (&str, &str) = ("i", "I");
const J: (&str, &str) = ("j", "J");
const K: (&str, &str) = ("k", "K");

/// Inner products: iterate rows of `B` against columns of `C`, merging the
/// two `k` streams for every `(i, j)` pair.
pub fn inner_products_cost() -> StrategyCost {
    StrategyCost {
        name: "inner products",
        lines: vec![
            ("i", set(vec![Cq::new(&[I], vec![b("i", "k1")])])),
            (
                "j",
                set(vec![Cq::new(&[I, J], vec![b("i", "k1"), c("k2", "j")])]),
            ),
            (
                "k",
                set(vec![
                    Cq::new(&[I, J, K], vec![b("i", "k")]),
                    Cq::new(&[I, J, K], vec![c("k", "j")]),
                ]),
            ),
            (
                "=",
                set(vec![Cq::new(&[I, J, K], vec![b("i", "k"), c("k", "j")])]),
            ),
        ],
    }
}

/// Gustavson: per row of `B`, merge the rows of `C` it selects into a
/// workspace.
pub fn gustavson_cost() -> StrategyCost {
    StrategyCost {
        name: "Gustavson",
        lines: vec![
            ("i", set(vec![Cq::new(&[I], vec![b("i", "k1")])])),
            (
                "k",
                set(vec![
                    Cq::new(&[I, K], vec![b("i", "k")]),
                    Cq::new(&[I, K], vec![c("k", "j1")]),
                ]),
            ),
            (
                "j",
                set(vec![Cq::new(&[I, J, K], vec![b("i", "k"), c("k", "j")])]),
            ),
            (
                "=",
                set(vec![Cq::new(&[I, J, K], vec![b("i", "k"), c("k", "j")])]),
            ),
        ],
    }
}

/// Outer products: pair every column of `B` with the matching row of `C`,
/// scattering rank-one updates.
pub fn outer_products_cost() -> StrategyCost {
    StrategyCost {
        name: "outer products",
        lines: vec![
            (
                "k",
                set(vec![
                    Cq::new(&[K], vec![b("i1", "k")]),
                    Cq::new(&[K], vec![c("k", "j1")]),
                ]),
            ),
            (
                "i",
                set(vec![Cq::new(&[I, K], vec![b("i", "k"), c("k", "j1")])]),
            ),
            (
                "j",
                set(vec![Cq::new(&[I, J, K], vec![b("i", "k"), c("k", "j")])]),
            ),
            (
                "=",
                set(vec![Cq::new(&[I, J, K], vec![b("i", "k"), c("k", "j")])]),
            ),
        ],
    }
}

/// Fused SDDMM: every loop is gated by the sampling matrix.
pub fn fused_sddmm_cost() -> StrategyCost {
    StrategyCost {
        name: "fused SDDMM",
        lines: vec![
            ("i", set(vec![Cq::new(&[I], vec![d("i", "k1")])])),
            ("j", set(vec![Cq::new(&[I, J], vec![d("i", "j")])])),
            ("k", set(vec![Cq::new(&[I, J, K], vec![d("i", "j")])])),
            ("=", set(vec![Cq::new(&[I, J, K], vec![d("i", "j")])])),
        ],
    }
}

/// Non-fused SDDMM: a sampled consumer over a fully dense producer.
pub fn nonfused_sddmm_cost() -> StrategyCost {
    StrategyCost {
        name: "non-fused SDDMM",
        lines: vec![
            ("i", set(vec![Cq::new(&[I], vec![d("i", "k1")])])),
            ("j", set(vec![Cq::new(&[I, J], vec![d("i", "j")])])),
            ("=", set(vec![Cq::new(&[I, J], vec![d("i", "j")])])),
            ("i", set(vec![Cq::new(&[I], vec![])])),
            ("j", set(vec![Cq::new(&[I, J], vec![])])),
            ("k", set(vec![Cq::new(&[I, J, K], vec![])])),
            ("=", set(vec![Cq::new(&[I, J, K], vec![])])),
        ],
    }
}
