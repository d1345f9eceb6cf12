//! Derives the task-set cost of a program by abstract interpretation.
//!
//! The derivation walks the labeled statement tree once, threading three
//! pieces of abstract information:
//!
//! * **bound** — the loop variables in scope, with their dimensions;
//! * **guard** — a [`PatternExpr`] over the bound variables describing the
//!   index tuples that can actually reach the current statement;
//! * **state** — for every tensor, a [`PatternExpr`] over one canonical
//!   variable per mode describing where that tensor may hold nonzeros.
//!   Inputs start as their own predicate; a workspace is reset to the empty
//!   pattern at the `where` that produces it and grows with every write.
//!
//! At a loop `forall i`, every step-protocol read of `i` is a *stepper*: it
//! walks its stored coordinates, so the loop coiterates the union of the
//! steppers' supports. Each stepper contributes an iteration set (the guard
//! conjoined with its state, projected onto the bound variables), and the
//! body is analyzed once per subset of steppers, substituting zero for the
//! absent ones and re-simplifying. A loop with no steppers walks its whole
//! dimension, which is recorded as an iteration set of its own. Locate reads
//! and writes never constrain iteration; they are served point-wise.
//!
//! Each assignment contributes its guard as a compute set and widens the
//! written tensor's state with the guard renamed onto the tensor's mode
//! variables. Variables bound outside the producing `where` are kept by name
//! in a workspace's state, so a consumer read sees the pattern correlated
//! with the surrounding loops rather than a union over them.
//!
//! The simplification applied here (zero annihilation, skipped cases) is the
//! same the interpreter applies at run time, so the derived sets agree
//! exactly with recorded executions rather than merely bounding them.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::cinp::{Access, LNode, LStmt, Program, Protocol, TensorKind};
use crate::queries::{simplify, Clause, Cq, TaskSet};

/// A predicate over named, dimension-typed variables: a union of conjunctive
/// bodies whose heads list the free variables. Guards, abstract tensor state,
/// and emitted iteration sets are all pattern expressions; the head of a
/// guard is the current bound-variable list, the head of a tensor's state is
/// its canonical mode variables plus any kept outer variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternExpr {
    pub disjuncts: Vec<Cq>,
}

impl PatternExpr {
    /// The always-true pattern over the given free variables.
    pub fn truth(head: &[(String, String)]) -> PatternExpr {
        PatternExpr {
            disjuncts: vec![Cq {
                head: head.to_vec(),
                clauses: Vec::new(),
            }],
        }
    }

    /// The always-false pattern: an empty union.
    pub fn falsity() -> PatternExpr {
        PatternExpr::default()
    }

    pub fn from_cq(cq: Cq) -> PatternExpr {
        PatternExpr { disjuncts: vec![cq] }
    }

    pub fn or(&mut self, other: &PatternExpr) {
        self.disjuncts.extend(other.disjuncts.iter().cloned());
    }

    /// Conjunction, distributed over both unions. Quantified variables are
    /// renamed apart so they can neither clash with nor capture the other
    /// side's names; the heads are merged left-to-right.
    pub fn conjoin(&self, other: &PatternExpr) -> PatternExpr {
        let mut out = Vec::new();
        for p in &self.disjuncts {
            for q in &other.disjuncts {
                let p = p.rename_quantified_avoiding(&q.all_vars());
                let q = q.rename_quantified_avoiding(&p.all_vars());
                let mut head = p.head.clone();
                for (v, d) in &q.head {
                    if !head.iter().any(|(hv, _)| hv == v) {
                        head.push((v.clone(), d.clone()));
                    }
                }
                let mut clauses = p.clauses.clone();
                clauses.extend(q.clauses.iter().cloned());
                out.push(Cq { head, clauses });
            }
        }
        PatternExpr { disjuncts: out }
    }

    /// Re-head every disjunct onto the given variable list. Old head
    /// variables missing from the new head become existentially quantified;
    /// new head variables need not occur in the body. Quantified variables
    /// that would collide with a new head name are renamed first.
    pub fn restrict_head(&self, head: &[(String, String)]) -> PatternExpr {
        let names: BTreeSet<String> = head.iter().map(|(v, _)| v.clone()).collect();
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|cq| {
                let cq = cq.rename_quantified_avoiding(&names);
                Cq {
                    head: head.to_vec(),
                    clauses: cq.clauses,
                }
            })
            .collect();
        PatternExpr { disjuncts }
    }

    pub fn to_task_set(&self) -> TaskSet {
        TaskSet {
            disjuncts: self.disjuncts.clone(),
        }
    }

    /// Canonicalize, deduplicate, and prune contained disjuncts.
    fn compact(&self) -> PatternExpr {
        PatternExpr {
            disjuncts: simplify(&self.to_task_set().normalized()).disjuncts,
        }
    }
}

/// Canonical name of one tensor mode's variable.
fn mode_var(tensor: &str, mode: usize) -> String {
    format!("{tensor}%{mode}")
}

/// Rename a guard onto a written access: access variables become the
/// tensor's canonical mode variables, `keep` variables stay free under their
/// own names, and every other guard variable is existentially quantified.
/// When a variable is both kept and an access variable, the access rename
/// wins: the mode variable itself carries the correlation.
fn rename_onto_modes(
    guard: &PatternExpr,
    access: &Access,
    dims: &[String],
    keep: &[(String, String)],
) -> PatternExpr {
    let mut sub: BTreeMap<String, String> = BTreeMap::new();
    let mut head: Vec<(String, String)> = Vec::new();
    for (mode, (var, _)) in access.indices.iter().enumerate() {
        let mv = mode_var(&access.tensor, mode);
        sub.entry(var.clone()).or_insert_with(|| mv.clone());
        head.push((mv, dims[mode].clone()));
    }
    for (v, d) in keep {
        if !sub.contains_key(v) && !head.iter().any(|(hv, _)| hv == v) {
            head.push((v.clone(), d.clone()));
        }
    }
    let names: BTreeSet<String> = head.iter().map(|(v, _)| v.clone()).collect();
    let disjuncts = guard
        .disjuncts
        .iter()
        .map(|cq| {
            let cq = cq.rename_quantified_avoiding(&names);
            let mut clauses = cq.clauses;
            for clause in &mut clauses {
                for arg in &mut clause.args {
                    if let Some(new) = sub.get(arg) {
                        *arg = new.clone();
                    }
                }
            }
            Cq {
                head: head.clone(),
                clauses,
            }
        })
        .collect();
    PatternExpr { disjuncts }
}

/// Rename a guard onto a written access with nothing kept: the result
/// mentions only the tensor's canonical mode variables. `dims` are the
/// tensor's declared mode dimensions, in logical order.
pub fn rename_guard(guard: &PatternExpr, access: &Access, dims: &[String]) -> PatternExpr {
    rename_onto_modes(guard, access, dims, &[])
}

/// Instantiate a tensor's state at a read access: canonical mode variables
/// become the access variables (kept variables pass through untouched).
fn state_at_access(state: &PatternExpr, access: &Access) -> PatternExpr {
    let mut sub: BTreeMap<String, String> = BTreeMap::new();
    for (mode, (var, _)) in access.indices.iter().enumerate() {
        sub.insert(mode_var(&access.tensor, mode), var.clone());
    }
    let avoid: BTreeSet<String> = sub.values().cloned().collect();
    let disjuncts = state
        .disjuncts
        .iter()
        .map(|cq| {
            let cq = cq.rename_quantified_avoiding(&avoid);
            let mut head: Vec<(String, String)> = Vec::new();
            for (v, d) in &cq.head {
                let name = sub.get(v).cloned().unwrap_or_else(|| v.clone());
                if !head.iter().any(|(hv, _)| *hv == name) {
                    head.push((name, d.clone()));
                }
            }
            let mut clauses = cq.clauses;
            for clause in &mut clauses {
                for arg in &mut clause.args {
                    if let Some(new) = sub.get(arg) {
                        *arg = new.clone();
                    }
                }
            }
            Cq {
                head,
                clauses,
            }
        })
        .collect();
    PatternExpr { disjuncts }
}

/// Everything `derive_cost` learns about one program.
///
/// Coiteration sets are keyed by loop site, loop variable, and the stepper
/// access that walks its stored coordinates there; a `None` access is a loop
/// with no steppers, which walks its full dimension. Compute sets are keyed
/// by assignment site. `total` is the simplified union of every per-site
/// set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedCost {
    pub coiteration: BTreeMap<(usize, String, Option<Access>), TaskSet>,
    pub compute: BTreeMap<usize, TaskSet>,
    pub total: TaskSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error("no protocol specified for `{var}` in access to `{tensor}`")]
    UnspecifiedProtocol { tensor: String, var: String },
    #[error("index variable `{var}` is used but not bound by an enclosing loop")]
    UnboundVariable { var: String },
    #[error("cannot infer a dimension for loop variable `{var}`")]
    UnknownDimension { var: String },
}

/// Derive the coiteration and compute task sets of a program.
///
/// The program must access only declared tensors with ranks matching their
/// declarations (the parser guarantees both); protocol or format mismatches
/// the validator would flag do not prevent derivation.
pub fn derive_cost(program: &Program) -> Result<DerivedCost, DeriveError> {
    let mut deriver = Deriver::new(program);
    let root = program.labeled();
    deriver.visit(&root, &[], &PatternExpr::truth(&[]))?;
    let finish = |set: TaskSet| simplify(&set.normalized());
    let coiteration: BTreeMap<_, _> = deriver
        .coiteration
        .into_iter()
        .map(|(k, v)| (k, finish(v)))
        .collect();
    let compute: BTreeMap<_, _> = deriver
        .compute
        .into_iter()
        .map(|(k, v)| (k, finish(v)))
        .collect();
    let mut total = TaskSet::empty();
    for set in coiteration.values().chain(compute.values()) {
        total.union_with(set);
    }
    let total = finish(total);
    Ok(DerivedCost {
        coiteration,
        compute,
        total,
    })
}

struct Deriver<'p> {
    program: &'p Program,
    var_dims: BTreeMap<String, String>,
    /// Workspace produced by the `where` at each site, read off the original
    /// tree so a case split that empties the producer still resets it.
    where_workspace: BTreeMap<usize, String>,
    state: BTreeMap<String, PatternExpr>,
    keep: BTreeMap<String, Vec<(String, String)>>,
    coiteration: BTreeMap<(usize, String, Option<Access>), TaskSet>,
    compute: BTreeMap<usize, TaskSet>,
}

impl<'p> Deriver<'p> {
    fn new(program: &'p Program) -> Deriver<'p> {
        let mut var_dims = BTreeMap::new();
        program.root.for_each_access(&mut |access, _| {
            if let Some(decl) = program.decl(&access.tensor) {
                for (mode, (var, _)) in access.indices.iter().enumerate() {
                    var_dims
                        .entry(var.clone())
                        .or_insert_with(|| decl.dims[mode].clone());
                }
            }
        });
        let mut where_workspace = BTreeMap::new();
        collect_where_workspaces(&program.labeled(), &mut where_workspace);
        let mut state = BTreeMap::new();
        for decl in &program.decls {
            if decl.kind == TensorKind::Input {
                let head: Vec<(String, String)> = decl
                    .dims
                    .iter()
                    .enumerate()
                    .map(|(mode, dim)| (mode_var(&decl.name, mode), dim.clone()))
                    .collect();
                let args: Vec<&str> = head.iter().map(|(v, _)| v.as_str()).collect();
                let clause = Clause::new(decl.name.as_str(), &args);
                state.insert(
                    decl.name.clone(),
                    PatternExpr::from_cq(Cq {
                        head,
                        clauses: vec![clause],
                    }),
                );
            }
        }
        Deriver {
            program,
            var_dims,
            where_workspace,
            state,
            keep: BTreeMap::new(),
            coiteration: BTreeMap::new(),
            compute: BTreeMap::new(),
        }
    }

    fn visit(
        &mut self,
        stmt: &LStmt,
        bound: &[(String, String)],
        guard: &PatternExpr,
    ) -> Result<(), DeriveError> {
        match &stmt.node {
            LNode::Skip => Ok(()),
            LNode::Forall { var, body } => self.visit_forall(stmt.site, var, body, bound, guard),
            LNode::Where { consumer, producer } => {
                if let Some(ws) = self.where_workspace.get(&stmt.site).cloned() {
                    self.state.insert(ws.clone(), PatternExpr::falsity());
                    self.keep.insert(ws, bound.to_vec());
                }
                self.visit(producer, bound, guard)?;
                self.visit(consumer, bound, guard)
            }
            LNode::Assign { lhs, rhs, .. } => {
                self.check_access(lhs, bound)?;
                for access in rhs.accesses() {
                    self.check_access(access, bound)?;
                }
                self.compute
                    .entry(stmt.site)
                    .or_insert_with(TaskSet::empty)
                    .union_with(&guard.to_task_set());
                if let Some(decl) = self.program.decl(&lhs.tensor) {
                    let keep = self.keep.get(&lhs.tensor).cloned().unwrap_or_default();
                    let written = rename_onto_modes(guard, lhs, &decl.dims, &keep);
                    let entry = self
                        .state
                        .entry(lhs.tensor.clone())
                        .or_insert_with(PatternExpr::falsity);
                    entry.or(&written);
                    *entry = entry.compact();
                }
                Ok(())
            }
        }
    }

    fn visit_forall(
        &mut self,
        site: usize,
        var: &str,
        body: &LStmt,
        bound: &[(String, String)],
        guard: &PatternExpr,
    ) -> Result<(), DeriveError> {
        let dim = self
            .var_dims
            .get(var)
            .cloned()
            .ok_or_else(|| DeriveError::UnknownDimension { var: var.to_string() })?;
        let mut inner = bound.to_vec();
        inner.push((var.to_string(), dim));

        let steppers = body.steppers(var);
        if steppers.is_empty() {
            // Nothing walks this loop's coordinates, so it visits the whole
            // dimension wherever the guard holds.
            let dense = guard.restrict_head(&inner);
            self.coiteration
                .entry((site, var.to_string(), None))
                .or_insert_with(TaskSet::empty)
                .union_with(&dense.to_task_set());
            return self.visit(body, &inner, &dense);
        }

        let mut stepped = Vec::new();
        for access in &steppers {
            let state = self
                .state
                .get(&access.tensor)
                .cloned()
                .unwrap_or_else(PatternExpr::falsity);
            let walked = state_at_access(&state, access).restrict_head(&inner);
            let iteration = guard.conjoin(&walked);
            self.coiteration
                .entry((site, var.to_string(), Some(access.clone())))
                .or_insert_with(TaskSet::empty)
                .union_with(&iteration.to_task_set());
            stepped.push(walked);
        }

        // One case per subset of steppers: substitute zero for the absent
        // ones, drop the case if the body collapses, and conjoin the state
        // predicates of the steppers that survive in the remaining body.
        for mask in 0u64..(1u64 << steppers.len()) {
            let mut case = body.clone();
            for (s, access) in steppers.iter().enumerate() {
                if mask & (1 << s) == 0 {
                    case = case.substitute_zero(access);
                }
            }
            if case.is_skip() {
                continue;
            }
            let mut case_guard = guard.restrict_head(&inner);
            for (s, access) in steppers.iter().enumerate() {
                if mask & (1 << s) != 0 && case.contains_read(access) {
                    case_guard = case_guard.conjoin(&stepped[s]);
                }
            }
            self.visit(&case, &inner, &case_guard.compact())?;
        }
        Ok(())
    }

    fn check_access(&self, access: &Access, bound: &[(String, String)]) -> Result<(), DeriveError> {
        for (var, protocol) in &access.indices {
            if *protocol == Protocol::Unspecified {
                return Err(DeriveError::UnspecifiedProtocol {
                    tensor: access.tensor.clone(),
                    var: var.clone(),
                });
            }
            if !bound.iter().any(|(b, _)| b == var) {
                return Err(DeriveError::UnboundVariable { var: var.clone() });
            }
        }
        Ok(())
    }
}

fn collect_where_workspaces(stmt: &LStmt, out: &mut BTreeMap<usize, String>) {
    match &stmt.node {
        LNode::Forall { body, .. } => collect_where_workspaces(body, out),
        LNode::Where { consumer, producer } => {
            if let Some(ws) = producer.result_tensor() {
                out.insert(stmt.site, ws.to_string());
            }
            collect_where_workspaces(consumer, out);
            collect_where_workspaces(producer, out);
        }
        LNode::Assign { .. } | LNode::Skip => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cinp::parse;
    use crate::queries::{compare, Comparison, Context};

    fn access(tensor: &str, indices: &[(&str, Protocol)]) -> Access {
        Access {
            tensor: tensor.to_string(),
            indices: indices
                .iter()
                .map(|(v, p)| (v.to_string(), *p))
                .collect(),
        }
    }

    fn text(pe: &PatternExpr) -> String {
        pe.to_task_set().normalized().to_text()
    }

    #[test]
    fn rename_guard_quantifies_vars_missing_from_the_access() {
        let guard = PatternExpr::from_cq(Cq::new(
            &[("i", "I"), ("k", "K"), ("j", "J")],
            vec![Clause::new("B", &["i", "k"]), Clause::new("C", &["k", "j"])],
        ));
        let w = access("w", &[("j", Protocol::Insert)]);
        let renamed = rename_guard(&guard, &w, &["J".to_string()]);
        assert_eq!(
            text(&renamed),
            "{[w%0:J] | exists k1, k2 . B(k1,k2) & C(k2,w%0)}"
        );
    }

    #[test]
    fn rename_guard_of_a_clause_free_guard_stays_clause_free() {
        let guard = PatternExpr::truth(&[
            ("i".to_string(), "I".to_string()),
            ("j".to_string(), "J".to_string()),
        ]);
        let a = access("A", &[("i", Protocol::Insert), ("j", Protocol::Insert)]);
        let renamed = rename_guard(&guard, &a, &["I".to_string(), "J".to_string()]);
        assert_eq!(text(&renamed), "{[A%0:I, A%1:J] | true}");
    }

    #[test]
    fn rename_guard_maps_access_vars_onto_mode_vars() {
        let guard = PatternExpr::from_cq(Cq::new(
            &[("i", "I")],
            vec![Clause::new("b", &["i"])],
        ));
        let a = access("a", &[("i", Protocol::Append)]);
        let renamed = rename_guard(&guard, &a, &["I".to_string()]);
        assert_eq!(text(&renamed), "{[a%0:I] | b(a%0)}");
    }

    #[test]
    fn spmv_cost_splits_dense_rows_from_sparse_row_work() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (u, c)\n\
             tensor c {J} format (u)\n\
             forall i, j: a[a i] += B[l i, s j] * c[l j]\n",
        )
        .unwrap();
        let cost = derive_cost(&program).unwrap();
        let keys: Vec<_> = cost.coiteration.keys().cloned().collect();
        let b = access("B", &[("i", Protocol::Locate), ("j", Protocol::Step)]);
        assert_eq!(
            keys,
            vec![
                (0, "i".to_string(), None),
                (1, "j".to_string(), Some(b.clone())),
            ]
        );
        assert_eq!(
            cost.coiteration[&(0, "i".to_string(), None)].to_text(),
            "{[i:I] | true}"
        );
        assert_eq!(
            cost.coiteration[&(1, "j".to_string(), Some(b))].to_text(),
            "{[i:I, j:J] | B(i,j)}"
        );
        assert_eq!(cost.compute[&2].to_text(), "{[i:I, j:J] | B(i,j)}");
        assert_eq!(
            cost.total.to_text(),
            "{[i:I] | true} + {[i:I, j:J] | B(i,j)}"
        );
    }

    #[test]
    fn loops_without_steppers_emit_their_full_extent() {
        let program = parse(
            "tensor A {I, J} format (u, u)\n\
             tensor B {I, J} format (u, u)\n\
             forall i, j: A[a i, a j] = B[l i, l j]\n",
        )
        .unwrap();
        let cost = derive_cost(&program).unwrap();
        assert_eq!(
            cost.coiteration[&(0, "i".to_string(), None)].to_text(),
            "{[i:I] | true}"
        );
        assert_eq!(
            cost.coiteration[&(1, "j".to_string(), None)].to_text(),
            "{[i:I, j:J] | true}"
        );
        assert_eq!(cost.total.to_text(), "{[i:I, j:J] | true}");
    }

    #[test]
    fn workspace_state_carries_outer_loop_correlation() {
        let program = parse(
            "tensor A {I, J} format (c, c)\n\
             tensor B {I, K} format (c, c)\n\
             tensor C {K, J} format (c, c)\n\
             tensor w {J} format (h)\n\
             forall i: (forall j: A[a i, a j] = w[s j]) where (forall k, j: w[i j] += B[s i, s k] * C[s k, s j])\n",
        )
        .unwrap();
        let cost = derive_cost(&program).unwrap();
        let w = access("w", &[("j", Protocol::Step)]);
        assert_eq!(
            cost.coiteration[&(2, "j".to_string(), Some(w))].to_text(),
            "{[i:I, j:J] | exists k1 . B(i,k1) & C(k1,j)}"
        );
        let b = access("B", &[("i", Protocol::Step), ("k", Protocol::Step)]);
        assert_eq!(
            cost.coiteration[&(0, "i".to_string(), Some(b))].to_text(),
            "{[i:I] | exists k1 . B(i,k1)}"
        );
        assert_eq!(
            cost.compute[&6].to_text(),
            "{[i:I, k:K, j:J] | B(i,k) & C(k,j)}"
        );
    }

    #[test]
    fn addition_of_steppers_case_splits_the_compute_set() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             tensor c {I} format (c)\n\
             forall i: a[a i] = b[s i] + c[s i]\n",
        )
        .unwrap();
        let cost = derive_cost(&program).unwrap();
        assert_eq!(
            cost.compute[&1].to_text(),
            "{[i:I] | b(i)} + {[i:I] | c(i)}"
        );
    }

    #[test]
    fn case_guards_union_to_the_steppers_union() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             tensor c {I} format (c)\n\
             forall i: a[a i] = b[s i] + c[s i]\n",
        )
        .unwrap();
        let cost = derive_cost(&program).unwrap();
        let mut steppers = TaskSet::empty();
        for ((_, _, access), set) in &cost.coiteration {
            assert!(access.is_some());
            steppers.union_with(set);
        }
        assert_eq!(
            compare(&cost.compute[&1], &steppers, &Context::empty()),
            Comparison::Equivalent
        );
    }

    #[test]
    fn locate_only_terms_force_a_dense_fallback() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             tensor d {I} format (u)\n\
             forall i: a[a i] = b[s i] + d[l i]\n",
        )
        .unwrap();
        let cost = derive_cost(&program).unwrap();
        let b = access("b", &[("i", Protocol::Step)]);
        let keys: Vec<_> = cost.coiteration.keys().cloned().collect();
        assert_eq!(keys, vec![(0, "i".to_string(), Some(b.clone()))]);
        assert_eq!(
            cost.coiteration[&(0, "i".to_string(), Some(b))].to_text(),
            "{[i:I] | b(i)}"
        );
        assert_eq!(cost.compute[&1].to_text(), "{[i:I] | true}");
        assert_eq!(cost.total.to_text(), "{[i:I] | true}");
    }

    #[test]
    fn unspecified_protocols_are_rejected() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             forall i: a[a i] = b[i]\n",
        )
        .unwrap();
        assert_eq!(
            derive_cost(&program),
            Err(DeriveError::UnspecifiedProtocol {
                tensor: "b".to_string(),
                var: "i".to_string(),
            })
        );
    }

    #[test]
    fn unbound_variables_are_rejected() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor B {I, K} format (u, c)\n\
             forall i: a[a i] += B[l i, s k]\n",
        )
        .unwrap();
        assert_eq!(
            derive_cost(&program),
            Err(DeriveError::UnboundVariable {
                var: "k".to_string(),
            })
        );
    }

    #[test]
    fn overwrite_and_increment_update_state_alike() {
        let overwrite = parse(
            "tensor a {I} format (c)\n\
             tensor b {I} format (c)\n\
             tensor w {I} format (h)\n\
             (forall i: a[a i] = w[s i]) where (forall i: w[i i] = b[s i])\n",
        )
        .unwrap();
        let increment = parse(
            "tensor a {I} format (c)\n\
             tensor b {I} format (c)\n\
             tensor w {I} format (h)\n\
             (forall i: a[a i] = w[s i]) where (forall i: w[i i] += b[s i])\n",
        )
        .unwrap();
        let left = derive_cost(&overwrite).unwrap();
        let right = derive_cost(&increment).unwrap();
        assert_eq!(left.total.to_text(), right.total.to_text());
        assert_eq!(left.total.to_text(), "{[i:I] | b(i)}");
    }
}
