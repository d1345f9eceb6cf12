//! Task sets: asymptotic cost expressions as unions of conjunctive queries.
//!
//! A task set describes how much work a schedule performs as a set of tasks,
//! one per tuple of index values satisfying a logical condition. Each
//! disjunct `{[i:I, j:J] | body}` has a dimension-typed head listing the
//! tuple slots, and a body that is a conjunction of predicate clauses over
//! head variables and existentially quantified variables; a clause `B(i,k)`
//! holds when the tensor `B` is structurally nonzero at that coordinate.
//!
//! Task sets are compared under a subset-closed reading: the tasks denoted
//! by a disjunct include every sub-tuple (any subset of the slots, in any
//! order) of every satisfying head tuple. One task set asymptotically covers
//! another when, on every input pattern, each of the other's tasks is such a
//! sub-tuple of one of its own. This makes comparisons insensitive to loop
//! order and lets a coarser loop nest pay for the finer ones it encloses.
//!
//! [`contain`] decides that relation symbolically through query
//! homomorphisms, and [`eval`] grounds task sets on concrete patterns, both
//! to count work and to cross-check the symbolic decision by brute force.

mod contain;
mod eval;

pub use contain::{cq_contained, cq_witness, simplify, ucq_contained};
pub use eval::{brute_contained, eval_expansion, Database, EvalError, Relation, Task};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::json;

use crate::cinp::{Program, TensorKind};

/// One predicate application, e.g. `B(i,k)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause {
    pub pred: String,
    pub args: Vec<String>,
}

impl Clause {
    pub fn new(pred: impl Into<String>, args: &[&str]) -> Clause {
        Clause {
            pred: pred.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

/// One conjunctive disjunct: a typed head and a clause conjunction. Clause
/// variables absent from the head are existentially quantified.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cq {
    /// `(variable, dimension)` pairs, in presentation order.
    pub head: Vec<(String, String)>,
    pub clauses: Vec<Clause>,
}

impl Cq {
    pub fn new(head: &[(&str, &str)], clauses: Vec<Clause>) -> Cq {
        Cq {
            head: head
                .iter()
                .map(|(v, d)| (v.to_string(), d.to_string()))
                .collect(),
            clauses,
        }
    }

    pub fn is_head_var(&self, var: &str) -> bool {
        self.head.iter().any(|(v, _)| v == var)
    }

    /// Dimension of a head variable, if it is one.
    pub fn head_dim(&self, var: &str) -> Option<&str> {
        self.head
            .iter()
            .find(|(v, _)| v == var)
            .map(|(_, d)| d.as_str())
    }

    /// Quantified variables in first-occurrence order over the clauses.
    pub fn quantified_vars(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for clause in &self.clauses {
            for arg in &clause.args {
                if !self.is_head_var(arg) && !seen.contains(arg) {
                    seen.push(arg.clone());
                }
            }
        }
        seen
    }

    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut vars: BTreeSet<String> = self.head.iter().map(|(v, _)| v.clone()).collect();
        for clause in &self.clauses {
            vars.extend(clause.args.iter().cloned());
        }
        vars
    }

    /// Rename quantified variables to `k1, k2, …` (skipping any head name),
    /// then sort and deduplicate the clauses. Naming order follows first use
    /// over the clauses pre-sorted with quantified names masked out, so two
    /// spellings of the same disjunct normalize alike.
    pub fn canonicalize(&mut self) {
        let quantified: BTreeSet<String> = self.quantified_vars().into_iter().collect();
        let mask = |c: &Clause| -> (String, Vec<Option<String>>) {
            (
                c.pred.clone(),
                c.args
                    .iter()
                    .map(|a| (!quantified.contains(a)).then(|| a.clone()))
                    .collect(),
            )
        };
        self.clauses.sort_by_key(&mask);
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        let mut counter = 0usize;
        for clause in &self.clauses {
            for arg in &clause.args {
                if quantified.contains(arg) && !map.contains_key(arg) {
                    let name = loop {
                        counter += 1;
                        let name = format!("k{counter}");
                        if !self.head.iter().any(|(v, _)| *v == name) {
                            break name;
                        }
                    };
                    map.insert(arg.clone(), name);
                }
            }
        }
        for clause in &mut self.clauses {
            for arg in &mut clause.args {
                if let Some(new) = map.get(arg) {
                    *arg = new.clone();
                }
            }
        }
        self.clauses.sort();
        self.clauses.dedup();
    }

    /// Copy with quantified variables renamed apart from `avoid` (head
    /// variables keep their names).
    pub fn rename_quantified_avoiding(&self, avoid: &BTreeSet<String>) -> Cq {
        let mut taken: BTreeSet<String> = avoid.union(&self.all_vars()).cloned().collect();
        let mut map = BTreeMap::new();
        for var in self.quantified_vars() {
            if avoid.contains(&var) {
                let fresh = fresh_var(&var, &taken);
                taken.insert(fresh.clone());
                map.insert(var, fresh);
            }
        }
        let mut out = self.clone();
        for clause in &mut out.clauses {
            for arg in &mut clause.args {
                if let Some(new) = map.get(arg) {
                    *arg = new.clone();
                }
            }
        }
        out
    }

    fn body_text(&self) -> String {
        if self.clauses.is_empty() {
            return "true".to_string();
        }
        let quantified = self.quantified_vars();
        let clauses = self
            .clauses
            .iter()
            .map(|c| format!("{}({})", c.pred, c.args.join(",")))
            .collect::<Vec<_>>()
            .join(" & ");
        if quantified.is_empty() {
            clauses
        } else {
            format!("exists {} . {clauses}", quantified.join(", "))
        }
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = self
            .head
            .iter()
            .map(|(v, d)| format!("{v}:{d}"))
            .collect::<Vec<_>>()
            .join(", ");
        write!(f, "{{[{head}] | {}}}", self.body_text())
    }
}

/// A union of conjunctive disjuncts; the empty union denotes no work.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskSet {
    pub disjuncts: Vec<Cq>,
}

impl TaskSet {
    pub fn empty() -> TaskSet {
        TaskSet::default()
    }

    pub fn from_cq(cq: Cq) -> TaskSet {
        TaskSet { disjuncts: vec![cq] }
    }

    pub fn union_with(&mut self, other: &TaskSet) {
        self.disjuncts.extend(other.disjuncts.iter().cloned());
    }

    /// Canonicalize each disjunct, then sort and deduplicate the union.
    pub fn normalize(&mut self) {
        for d in &mut self.disjuncts {
            d.canonicalize();
        }
        self.disjuncts.sort();
        self.disjuncts.dedup();
    }

    pub fn normalized(mut self) -> TaskSet {
        self.normalize();
        self
    }

    /// Rewrite every clause over predicate `from` into one over `to`,
    /// permuting arguments so that new argument `m` is old argument
    /// `perm[m]`. A reformatted copy of an input stores the same
    /// coordinates addressed in a different order, so a cost derived
    /// against the copy can be expressed over the original's pattern.
    pub fn rename_predicate(&self, from: &str, to: &str, perm: &[usize]) -> TaskSet {
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|d| Cq {
                head: d.head.clone(),
                clauses: d
                    .clauses
                    .iter()
                    .map(|c| {
                        if c.pred != from {
                            return c.clone();
                        }
                        assert_eq!(c.args.len(), perm.len());
                        Clause {
                            pred: to.to_string(),
                            args: perm.iter().map(|&m| c.args[m].clone()).collect(),
                        }
                    })
                    .collect(),
            })
            .collect();
        TaskSet { disjuncts }.normalized()
    }

    /// Canonical text form, disjuncts joined by ` + `.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "union": self.disjuncts.iter().map(|d| {
                json!({
                    "head": d.head.iter()
                        .map(|(v, dim)| json!([v, dim]))
                        .collect::<Vec<_>>(),
                    "clauses": d.clauses.iter().map(|c| {
                        let mut parts = vec![c.pred.clone()];
                        parts.extend(c.args.iter().cloned());
                        json!(parts)
                    }).collect::<Vec<_>>(),
                })
            }).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.disjuncts.is_empty() {
            return write!(f, "{{}}");
        }
        let parts = self
            .disjuncts
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Pick a name based on `base` that is not yet taken.
pub(crate) fn fresh_var(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    let stem = base.split('%').next().unwrap_or(base);
    for n in 2.. {
        let cand = format!("{stem}%{n}");
        if !taken.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// How two costs relate once a context has been applied to both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// The left cost is covered by the right but not vice versa.
    StrictlyContained,
    /// The left cost covers the right but not vice versa.
    StrictlyContains,
    Equivalent,
    Incomparable,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Comparison::StrictlyContained => "StrictlyContained",
            Comparison::StrictlyContains => "StrictlyContains",
            Comparison::Equivalent => "Equivalent",
            Comparison::Incomparable => "Incomparable",
        };
        write!(f, "{s}")
    }
}

/// Costs every schedule must pay and facts that may be assumed while
/// comparing.
///
/// Sunk disjuncts are unioned into both sides before a comparison: reading a
/// sparse input or touching every dimension once is unavoidable, so charging
/// it to both sides cancels it out. Assumptions are clause conjunctions that
/// are known to hold somewhere (all their variables read existentially);
/// each is conjoined onto every disjunct with fresh variable names, which
/// lets containment discharge conditions like "B is nonempty".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    pub sunk: TaskSet,
    pub assumptions: Vec<Vec<Clause>>,
}

impl Context {
    pub fn empty() -> Context {
        Context::default()
    }
}

/// The context every comparison of schedules for `program` may take for
/// granted: per-dimension iteration and one read of each sparse input are
/// sunk, and each sparse input is assumed nonempty.
pub fn default_context(program: &Program) -> Context {
    let mut sunk = TaskSet::empty();
    let mut seen_dims: Vec<String> = Vec::new();
    for decl in &program.decls {
        for dim in &decl.dims {
            if !seen_dims.contains(dim) {
                seen_dims.push(dim.clone());
            }
        }
    }
    for dim in &seen_dims {
        sunk.disjuncts.push(Cq {
            head: vec![(dim.to_lowercase(), dim.clone())],
            clauses: Vec::new(),
        });
    }
    let mut assumptions = Vec::new();
    for decl in &program.decls {
        if decl.kind != TensorKind::Input || !decl.is_sparse() {
            continue;
        }
        let mut head = Vec::new();
        for (mode, dim) in decl.dims.iter().enumerate() {
            let mut var = dim.to_lowercase();
            if head.iter().any(|(v, _)| *v == var) {
                var = format!("{var}{}", mode + 1);
            }
            head.push((var, dim.clone()));
        }
        let clause = Clause {
            pred: decl.name.clone(),
            args: head.iter().map(|(v, _)| v.clone()).collect(),
        };
        sunk.disjuncts.push(Cq {
            head,
            clauses: vec![clause.clone()],
        });
        assumptions.push(vec![clause]);
    }
    Context { sunk, assumptions }
}

/// Union the sunk work into a cost and conjoin every assumption onto every
/// disjunct (with fresh quantified names), then simplify.
pub fn apply_context(cost: &TaskSet, context: &Context) -> TaskSet {
    let mut disjuncts = cost.disjuncts.clone();
    disjuncts.extend(context.sunk.disjuncts.iter().cloned());
    for d in &mut disjuncts {
        for assumption in &context.assumptions {
            let mut taken = d.all_vars();
            let mut map: BTreeMap<&str, String> = BTreeMap::new();
            for clause in assumption {
                for arg in &clause.args {
                    if !map.contains_key(arg.as_str()) {
                        let fresh = fresh_var(arg, &taken);
                        taken.insert(fresh.clone());
                        map.insert(arg, fresh);
                    }
                }
                d.clauses.push(Clause {
                    pred: clause.pred.clone(),
                    args: clause.args.iter().map(|a| map[a.as_str()].clone()).collect(),
                });
            }
        }
    }
    simplify(&TaskSet { disjuncts }.normalized())
}

/// Decide how two costs relate under a context by testing coverage both
/// ways.
pub fn compare(left: &TaskSet, right: &TaskSet, context: &Context) -> Comparison {
    let l = apply_context(left, context);
    let r = apply_context(right, context);
    match (ucq_contained(&l, &r), ucq_contained(&r, &l)) {
        (true, true) => Comparison::Equivalent,
        (true, false) => Comparison::StrictlyContained,
        (false, true) => Comparison::StrictlyContains,
        (false, false) => Comparison::Incomparable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul_total() -> Cq {
        Cq::new(
            &[("i", "I"), ("j", "J")],
            vec![Clause::new("B", &["i", "k"]), Clause::new("C", &["k", "j"])],
        )
    }

    #[test]
    fn canonical_text_form() {
        let mut cq = matmul_total();
        cq.canonicalize();
        assert_eq!(cq.to_string(), "{[i:I, j:J] | exists k1 . B(i,k1) & C(k1,j)}");
    }

    #[test]
    fn clause_free_body_prints_true() {
        let cq = Cq::new(&[("i", "I")], vec![]);
        assert_eq!(cq.to_string(), "{[i:I] | true}");
    }

    #[test]
    fn predicate_renaming_permutes_arguments() {
        let transposed = TaskSet::from_cq(Cq::new(
            &[("k", "K"), ("i", "I")],
            vec![Clause::new("Bt", &["k", "i"]), Clause::new("C", &["k", "j"])],
        ));
        let renamed = transposed.rename_predicate("Bt", "B", &[1, 0]);
        assert_eq!(
            renamed.to_text(),
            "{[k:K, i:I] | exists k1 . B(i,k) & C(k,k1)}"
        );
    }

    #[test]
    fn union_text_joins_disjuncts() {
        let ts = TaskSet {
            disjuncts: vec![Cq::new(&[("i", "I")], vec![]), matmul_total()],
        }
        .normalized();
        assert_eq!(
            ts.to_text(),
            "{[i:I] | true} + {[i:I, j:J] | exists k1 . B(i,k1) & C(k1,j)}"
        );
    }

    #[test]
    fn spellings_normalize_alike() {
        let a = Cq::new(
            &[("i", "I"), ("j", "J")],
            vec![Clause::new("C", &["z", "j"]), Clause::new("B", &["i", "z"])],
        );
        let b = matmul_total();
        let (mut a, mut b) = (a, b);
        a.canonicalize();
        b.canonicalize();
        assert_eq!(a, b);
    }

    #[test]
    fn canonical_names_skip_head_names() {
        let mut cq = Cq::new(
            &[("k1", "I")],
            vec![Clause::new("B", &["k1", "z"])],
        );
        cq.canonicalize();
        assert_eq!(cq.to_string(), "{[k1:I] | exists k2 . B(k1,k2)}");
    }

    #[test]
    fn json_form() {
        let ts = TaskSet::from_cq(matmul_total()).normalized();
        let json = ts.to_json();
        assert_eq!(
            json.to_string(),
            r#"{"union":[{"clauses":[["B","i","k1"],["C","k1","j"]],"head":[["i","I"],["j","J"]]}]}"#
        );
    }

    #[test]
    fn empty_union_prints_braces() {
        assert_eq!(TaskSet::empty().to_text(), "{}");
    }

    #[test]
    fn default_context_for_matvec() {
        let program = crate::cinp::parse(
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (u, c)\n\
             tensor c {J} format (u)\n\
             forall i, j: a[a i] += B[l i, s j] * c[l j]\n",
        )
        .unwrap();
        let ctx = default_context(&program);
        let texts: Vec<String> = ctx.sunk.disjuncts.iter().map(|d| d.to_string()).collect();
        assert_eq!(
            texts,
            vec![
                "{[i:I] | true}",
                "{[j:J] | true}",
                "{[i:I, j:J] | B(i,j)}",
            ]
        );
        assert_eq!(ctx.assumptions, vec![vec![Clause::new("B", &["i", "j"])]]);
    }

    #[test]
    fn apply_context_avoids_capture() {
        // The assumption's variables must not collide with the disjunct's.
        let cost = TaskSet::from_cq(Cq::new(
            &[("i", "I")],
            vec![Clause::new("B", &["i", "j"])],
        ));
        let ctx = Context {
            sunk: TaskSet::empty(),
            assumptions: vec![vec![Clause::new("B", &["i", "j"])]],
        };
        let applied = apply_context(&cost, &ctx);
        // B(i,k1) already implies exists B(i%,j%), so the assumption is
        // simplified away entirely.
        assert_eq!(applied.to_text(), "{[i:I] | exists k1 . B(i,k1)}");
    }
}
