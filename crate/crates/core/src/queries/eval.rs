//! Grounding task sets on concrete sparsity patterns.
//!
//! A [`Database`] holds one relation per predicate: the set of coordinates
//! at which the tensor is structurally nonzero, plus a size for every
//! dimension. Evaluating a disjunct joins its clauses against those
//! relations and ranges unconstrained head variables over their whole
//! dimension, yielding the disjunct's full tasks. A task is recorded as a
//! sorted multiset of `(dimension, value)` slots, which makes it insensitive
//! to slot order and lets sub-tasks be plain sub-multisets.
//!
//! [`brute_contained`] decides coverage between two small task sets by sheer
//! enumeration of every pattern, which pins down the semantics the symbolic
//! homomorphism check must agree with.

use std::collections::{BTreeMap, BTreeSet};

use super::{Cq, TaskSet};

/// The nonzero coordinates of one predicate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Relation {
    /// Dimension names, one per argument position.
    pub dims: Vec<String>,
    pub tuples: BTreeSet<Vec<u32>>,
}

/// Dimension sizes and predicate patterns to evaluate task sets against.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    pub dim_sizes: BTreeMap<String, u32>,
    pub relations: BTreeMap<String, Relation>,
}

impl Relation {
    pub fn from_tuples(dims: &[&str], tuples: &[Vec<u32>]) -> Relation {
        Relation {
            dims: dims.iter().map(|d| d.to_string()).collect(),
            tuples: tuples.iter().cloned().collect(),
        }
    }
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    pub fn set_dim(&mut self, dim: &str, size: u32) {
        self.dim_sizes.insert(dim.to_string(), size);
    }

    pub fn insert(&mut self, pred: &str, relation: Relation) {
        self.relations.insert(pred.to_string(), relation);
    }

    pub fn size_of(&self, dim: &str) -> u32 {
        self.dim_sizes.get(dim).copied().unwrap_or(0)
    }
}

/// One unit of work: dimension-labeled index values, kept sorted.
pub type Task = Vec<(String, u32)>;

/// Satisfying full head assignments of `cq`, values in head order.
fn satisfying(cq: &Cq, db: &Database) -> BTreeSet<Vec<u32>> {
    let mut out = BTreeSet::new();
    join(cq, db, 0, &mut BTreeMap::new(), &mut out);
    out
}

/// All full head tuples of `cq` on `db`, as labeled tasks.
pub fn full_tasks(cq: &Cq, db: &Database) -> BTreeSet<Task> {
    satisfying(cq, db)
        .into_iter()
        .map(|values| {
            let mut task: Task = cq
                .head
                .iter()
                .zip(values)
                .map(|((_, dim), v)| (dim.clone(), v))
                .collect();
            task.sort();
            task
        })
        .collect()
}

fn join(
    cq: &Cq,
    db: &Database,
    idx: usize,
    assign: &mut BTreeMap<String, u32>,
    out: &mut BTreeSet<Vec<u32>>,
) {
    let Some(clause) = cq.clauses.get(idx) else {
        let free: Vec<(String, String)> = cq
            .head
            .iter()
            .filter(|(v, _)| !assign.contains_key(v))
            .cloned()
            .collect();
        range_free(cq, db, &free, 0, assign, out);
        return;
    };
    let Some(rel) = db.relations.get(&clause.pred) else {
        return;
    };
    'tuples: for tuple in &rel.tuples {
        if tuple.len() != clause.args.len() {
            continue;
        }
        let mut added = Vec::new();
        for (arg, &value) in clause.args.iter().zip(tuple) {
            match assign.get(arg) {
                Some(&bound) if bound == value => {}
                Some(_) => {
                    for var in added.drain(..) {
                        assign.remove(&var);
                    }
                    continue 'tuples;
                }
                None => {
                    assign.insert(arg.clone(), value);
                    added.push(arg.clone());
                }
            }
        }
        join(cq, db, idx + 1, assign, out);
        for var in added {
            assign.remove(&var);
        }
    }
}

/// Head variables bound by no clause range over their whole dimension.
fn range_free(
    cq: &Cq,
    db: &Database,
    free: &[(String, String)],
    idx: usize,
    assign: &mut BTreeMap<String, u32>,
    out: &mut BTreeSet<Vec<u32>>,
) {
    let Some((var, dim)) = free.get(idx) else {
        out.insert(cq.head.iter().map(|(v, _)| assign[v]).collect());
        return;
    };
    for value in 0..db.size_of(dim) {
        assign.insert(var.clone(), value);
        range_free(cq, db, free, idx + 1, assign, out);
    }
    assign.remove(var);
}

impl TaskSet {
    /// Union of every disjunct's full tasks.
    pub fn full_tasks(&self, db: &Database) -> BTreeSet<Task> {
        let mut out = BTreeSet::new();
        for d in &self.disjuncts {
            out.extend(full_tasks(d, db));
        }
        out
    }

    /// Distinct full tasks on `db`: the unit in which work is counted.
    pub fn task_count(&self, db: &Database) -> usize {
        self.full_tasks(db).len()
    }

    /// The subset-closed denotation: every sub-multiset of every full task.
    pub fn expansion_tasks(&self, db: &Database) -> BTreeSet<Task> {
        let mut out = BTreeSet::new();
        for task in self.full_tasks(db) {
            for mask in 0u32..(1 << task.len()) {
                let sub: Task = task
                    .iter()
                    .enumerate()
                    .filter(|(slot, _)| mask >> slot & 1 == 1)
                    .map(|(_, s)| s.clone())
                    .collect();
                out.insert(sub);
            }
        }
        out
    }

    /// Full satisfying head tuples labeled by variable name, in head order.
    /// This is the set the interpreter's recorded tasks are compared against.
    pub fn full_labeled(&self, db: &Database) -> BTreeSet<Vec<(String, u32)>> {
        let mut out = BTreeSet::new();
        for d in &self.disjuncts {
            for values in satisfying(d, db) {
                out.insert(
                    d.head
                        .iter()
                        .zip(values)
                        .map(|((v, _), x)| (v.clone(), x))
                        .collect(),
                );
            }
        }
        out
    }
}

/// Errors from grounding a task set on a database.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no pattern bound for predicate `{0}`")]
    UnboundPredicate(String),
    #[error("predicate `{pred}` has {expected} positions but is applied to {found}")]
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("no size given for dimension `{0}`")]
    UnknownDimension(String),
}

/// The written-out lazy denotation, labeled by variable name: every subset of
/// every full satisfying tuple's slots, in every order.
pub fn eval_expansion(
    ts: &TaskSet,
    db: &Database,
) -> Result<BTreeSet<Vec<(String, u32)>>, EvalError> {
    for d in &ts.disjuncts {
        for (_, dim) in &d.head {
            if !db.dim_sizes.contains_key(dim) {
                return Err(EvalError::UnknownDimension(dim.clone()));
            }
        }
        for c in &d.clauses {
            let Some(rel) = db.relations.get(&c.pred) else {
                return Err(EvalError::UnboundPredicate(c.pred.clone()));
            };
            if rel.dims.len() != c.args.len() {
                return Err(EvalError::ArityMismatch {
                    pred: c.pred.clone(),
                    expected: rel.dims.len(),
                    found: c.args.len(),
                });
            }
        }
    }
    use itertools::Itertools;
    let mut out = BTreeSet::new();
    for full in ts.full_labeled(db) {
        for mask in 0u32..(1 << full.len()) {
            let subset: Vec<&(String, u32)> = full
                .iter()
                .enumerate()
                .filter(|(slot, _)| mask >> slot & 1 == 1)
                .map(|(_, s)| s)
                .collect();
            let len = subset.len();
            for perm in subset.into_iter().permutations(len) {
                out.insert(perm.into_iter().cloned().collect::<Vec<_>>());
            }
        }
    }
    Ok(out)
}

/// Decide coverage by enumerating every pattern over `dim_size`-sized
/// dimensions. Returns `None` when predicate signatures cannot be inferred
/// consistently or the search space exceeds `max_cells` pattern cells.
pub fn brute_contained(
    p: &TaskSet,
    q: &TaskSet,
    dim_size: u32,
    max_cells: u32,
) -> Option<bool> {
    let signatures = infer_signatures(&[p, q])?;
    let mut dims: BTreeSet<String> = BTreeSet::new();
    for ts in [p, q] {
        for d in &ts.disjuncts {
            dims.extend(d.head.iter().map(|(_, dim)| dim.clone()));
        }
    }
    for sig in signatures.values() {
        dims.extend(sig.iter().cloned());
    }
    let mut cells: Vec<(String, Vec<u32>)> = Vec::new();
    for (pred, sig) in &signatures {
        let mut tuple = vec![0u32; sig.len()];
        loop {
            cells.push((pred.clone(), tuple.clone()));
            if !advance(&mut tuple, dim_size) {
                break;
            }
        }
    }
    if cells.len() > max_cells as usize {
        return None;
    }
    let dim_sizes: BTreeMap<String, u32> = dims.into_iter().map(|d| (d, dim_size)).collect();
    for pattern in 0u64..(1 << cells.len()) {
        let mut db = Database {
            dim_sizes: dim_sizes.clone(),
            relations: signatures
                .iter()
                .map(|(pred, sig)| {
                    (
                        pred.clone(),
                        Relation {
                            dims: sig.clone(),
                            tuples: BTreeSet::new(),
                        },
                    )
                })
                .collect(),
        };
        for (bit, (pred, tuple)) in cells.iter().enumerate() {
            if pattern >> bit & 1 == 1 {
                db.relations.get_mut(pred).unwrap().tuples.insert(tuple.clone());
            }
        }
        let denotation_q = q.expansion_tasks(&db);
        if !p.full_tasks(&db).is_subset(&denotation_q) {
            return Some(false);
        }
    }
    Some(true)
}

/// Odometer step over `len(tuple)` positions of size `dim_size`.
fn advance(tuple: &mut [u32], dim_size: u32) -> bool {
    for slot in (0..tuple.len()).rev() {
        tuple[slot] += 1;
        if tuple[slot] < dim_size {
            return true;
        }
        tuple[slot] = 0;
    }
    false
}

/// Per-predicate argument dimensions, propagated from head types until every
/// occurrence agrees; unconstrained positions get a private dimension.
fn infer_signatures(sets: &[&TaskSet]) -> Option<BTreeMap<String, Vec<String>>> {
    let mut sigs: BTreeMap<String, Vec<Option<String>>> = BTreeMap::new();
    for ts in sets {
        for d in &ts.disjuncts {
            for c in &d.clauses {
                let sig = sigs.entry(c.pred.clone()).or_insert_with(|| vec![None; c.args.len()]);
                if sig.len() != c.args.len() {
                    return None;
                }
            }
        }
    }
    // Propagate to fixed point: head types flow into signature positions and
    // back into quantified variables that share positions across clauses.
    loop {
        let mut changed = false;
        for ts in sets {
            for d in &ts.disjuncts {
                let mut var_dims: BTreeMap<String, String> = d
                    .head
                    .iter()
                    .map(|(v, dim)| (v.clone(), dim.clone()))
                    .collect();
                // Local fixed point inside the disjunct.
                loop {
                    let mut local = false;
                    for c in &d.clauses {
                        let sig = sigs.get_mut(&c.pred).unwrap();
                        for (pos, arg) in c.args.iter().enumerate() {
                            match (var_dims.get(arg).cloned(), sig[pos].clone()) {
                                (Some(vd), Some(sd)) => {
                                    if vd != sd {
                                        return None;
                                    }
                                }
                                (Some(vd), None) => {
                                    sig[pos] = Some(vd);
                                    local = true;
                                    changed = true;
                                }
                                (None, Some(sd)) => {
                                    var_dims.insert(arg.clone(), sd);
                                    local = true;
                                }
                                (None, None) => {}
                            }
                        }
                    }
                    if !local {
                        break;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Some(
        sigs.into_iter()
            .map(|(pred, sig)| {
                let full: Vec<String> = sig
                    .into_iter()
                    .enumerate()
                    .map(|(pos, d)| d.unwrap_or_else(|| format!("_{pred}{pos}")))
                    .collect();
                (pred, full)
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::super::{ucq_contained, Clause};
    use super::*;
    use proptest::prelude::*;

    fn db_matmul() -> Database {
        let mut db = Database::default();
        db.dim_sizes = [("I", 2), ("J", 2), ("K", 2)]
            .into_iter()
            .map(|(d, s)| (d.to_string(), s))
            .collect();
        db.relations.insert(
            "B".to_string(),
            Relation {
                dims: vec!["I".to_string(), "K".to_string()],
                tuples: [vec![0, 0], vec![1, 1]].into_iter().collect(),
            },
        );
        db.relations.insert(
            "C".to_string(),
            Relation {
                dims: vec!["K".to_string(), "J".to_string()],
                tuples: [vec![0, 1]].into_iter().collect(),
            },
        );
        db
    }

    #[test]
    fn join_counts_witnessed_tuples() {
        let cq = Cq::new(
            &[("i", "I"), ("j", "J")],
            vec![Clause::new("B", &["i", "k"]), Clause::new("C", &["k", "j"])],
        );
        let tasks = full_tasks(&cq, &db_matmul());
        // Only B(0,0) joins C(0,1), giving the task {I:0, J:1}.
        assert_eq!(tasks.len(), 1);
        assert_eq!(
            tasks.into_iter().next().unwrap(),
            vec![("I".to_string(), 0), ("J".to_string(), 1)]
        );
    }

    #[test]
    fn unbound_head_vars_range_over_the_dimension() {
        let cq = Cq::new(
            &[("i", "I"), ("j", "J")],
            vec![Clause::new("B", &["i", "k"])],
        );
        // Two B rows, each crossed with both j values.
        assert_eq!(full_tasks(&cq, &db_matmul()).len(), 4);
    }

    #[test]
    fn expansion_contains_sub_tasks() {
        let ts = TaskSet::from_cq(Cq::new(
            &[("i", "I"), ("k", "K")],
            vec![Clause::new("B", &["i", "k"])],
        ));
        let expansion = ts.expansion_tasks(&db_matmul());
        assert!(expansion.contains(&vec![]));
        assert!(expansion.contains(&vec![("I".to_string(), 1)]));
        assert!(expansion.contains(&vec![("I".to_string(), 1), ("K".to_string(), 1)]));
        assert!(!expansion.contains(&vec![("I".to_string(), 0), ("K".to_string(), 1)]));
    }

    #[test]
    fn brute_force_agrees_on_the_projection_example() {
        let proj = TaskSet::from_cq(Cq::new(
            &[("i", "I")],
            vec![Clause::new("B", &["i", "k"])],
        ));
        let full = TaskSet::from_cq(Cq::new(
            &[("i", "I"), ("k", "K")],
            vec![Clause::new("B", &["i", "k"])],
        ));
        assert_eq!(brute_contained(&proj, &full, 2, 16), Some(true));
        assert_eq!(brute_contained(&full, &proj, 2, 16), Some(false));
    }

    #[test]
    fn expansion_of_a_singleton_vector_pattern() {
        let mut db = Database::default();
        db.dim_sizes.insert("I".to_string(), 3);
        db.relations.insert(
            "B".to_string(),
            Relation {
                dims: vec!["I".to_string()],
                tuples: [vec![2]].into_iter().collect(),
            },
        );
        let ts = TaskSet::from_cq(Cq::new(&[("i", "I")], vec![Clause::new("B", &["i"])]));
        let expansion = eval_expansion(&ts, &db).unwrap();
        let expected: BTreeSet<Vec<(String, u32)>> =
            [vec![], vec![("i".to_string(), 2)]].into_iter().collect();
        assert_eq!(expansion, expected);
    }

    #[test]
    fn expansion_lists_subsets_and_permutations() {
        let mut db = Database::default();
        for d in ["I", "J", "K"] {
            db.dim_sizes.insert(d.to_string(), 3);
        }
        db.relations.insert(
            "A".to_string(),
            Relation {
                dims: ["I", "J", "K"].map(String::from).to_vec(),
                tuples: [vec![1, 2, 1]].into_iter().collect(),
            },
        );
        let ts = TaskSet::from_cq(Cq::new(
            &[("i", "I"), ("j", "J")],
            vec![Clause::new("A", &["i", "j", "k"])],
        ));
        let expansion = eval_expansion(&ts, &db).unwrap();
        let i = ("i".to_string(), 1u32);
        let j = ("j".to_string(), 2u32);
        let expected: BTreeSet<Vec<(String, u32)>> = [
            vec![i.clone(), j.clone()],
            vec![j.clone(), i.clone()],
            vec![i.clone()],
            vec![j.clone()],
            vec![],
        ]
        .into_iter()
        .collect();
        assert_eq!(expansion, expected);
    }

    #[test]
    fn dense_factor_multiplies_the_count() {
        let mut db = Database::default();
        db.dim_sizes.insert("I".to_string(), 4);
        db.dim_sizes.insert("J".to_string(), 3);
        db.relations.insert(
            "b".to_string(),
            Relation {
                dims: vec!["I".to_string()],
                tuples: (0..4).map(|v| vec![v]).collect(),
            },
        );
        let ts = TaskSet::from_cq(Cq::new(
            &[("i", "I"), ("j", "J")],
            vec![Clause::new("b", &["i"])],
        ));
        assert_eq!(ts.full_labeled(&db).len(), 12);
    }

    #[test]
    fn evaluation_errors_are_reported() {
        let db = Database::default();
        let ts = TaskSet::from_cq(Cq::new(&[("i", "I")], vec![]));
        assert_eq!(
            eval_expansion(&ts, &db),
            Err(EvalError::UnknownDimension("I".to_string()))
        );
        let mut db = db;
        db.dim_sizes.insert("I".to_string(), 2);
        let ts = TaskSet::from_cq(Cq::new(&[("i", "I")], vec![Clause::new("B", &["i"])]));
        assert_eq!(
            eval_expansion(&ts, &db),
            Err(EvalError::UnboundPredicate("B".to_string()))
        );
    }

    #[test]
    fn rank_zero_predicates_enumerate_one_cell() {
        let scalar = TaskSet::from_cq(Cq::new(&[], vec![Clause::new("w", &[])]));
        let anything = TaskSet::from_cq(Cq::new(&[], vec![]));
        assert_eq!(brute_contained(&scalar, &anything, 2, 16), Some(true));
        assert_eq!(brute_contained(&anything, &scalar, 2, 16), Some(false));
    }

    // Random queries over fixed signatures A(I), B(I,J), C(J): 8 pattern
    // cells, so the brute check enumerates 256 databases per case.
    fn arb_var(dim: &'static str) -> impl Strategy<Value = String> {
        let pool: Vec<String> = match dim {
            "I" => vec!["i".into(), "x".into()],
            _ => vec!["j".into(), "y".into()],
        };
        proptest::sample::select(pool)
    }

    fn arb_clause() -> impl Strategy<Value = Clause> {
        prop_oneof![
            arb_var("I").prop_map(|v| Clause { pred: "A".into(), args: vec![v] }),
            (arb_var("I"), arb_var("J")).prop_map(|(v, w)| Clause {
                pred: "B".into(),
                args: vec![v, w],
            }),
            arb_var("J").prop_map(|v| Clause { pred: "C".into(), args: vec![v] }),
        ]
    }

    fn arb_cq() -> impl Strategy<Value = Cq> {
        let head = prop_oneof![
            Just(vec![]),
            Just(vec![("i".to_string(), "I".to_string())]),
            Just(vec![("j".to_string(), "J".to_string())]),
            Just(vec![
                ("i".to_string(), "I".to_string()),
                ("j".to_string(), "J".to_string()),
            ]),
        ];
        (head, proptest::collection::vec(arb_clause(), 0..3))
            .prop_map(|(head, clauses)| Cq { head, clauses })
    }

    fn arb_task_set() -> impl Strategy<Value = TaskSet> {
        proptest::collection::vec(arb_cq(), 1..3)
            .prop_map(|disjuncts| TaskSet { disjuncts }.normalized())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn symbolic_containment_matches_brute_force(
            p in arb_task_set(),
            q in arb_task_set(),
        ) {
            let symbolic = ucq_contained(&p, &q);
            let brute = brute_contained(&p, &q, 2, 16).expect("within budget");
            prop_assert_eq!(symbolic, brute);
        }

        #[test]
        fn simplify_preserves_coverage_both_ways(ts in arb_task_set()) {
            let simplified = super::super::simplify(&ts);
            prop_assert!(ucq_contained(&simplified, &ts));
            prop_assert!(ucq_contained(&ts, &simplified));
        }

        #[test]
        fn normalize_is_idempotent(ts in arb_task_set()) {
            let once = ts.clone().normalized();
            let twice = once.clone().normalized();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn containment_is_transitive(
            p in arb_task_set(),
            q in arb_task_set(),
            r in arb_task_set(),
        ) {
            if ucq_contained(&p, &q) && ucq_contained(&q, &r) {
                prop_assert!(ucq_contained(&p, &r));
            }
        }

        #[test]
        fn normalize_preserves_full_tuples(
            raw in proptest::collection::vec(arb_cq(), 1..3),
            pattern in 0u64..256,
        ) {
            // Renaming and reordering must not change what the union denotes.
            let ts = TaskSet { disjuncts: raw };
            let sigs = infer_signatures(&[&ts]).expect("fixed signatures");
            let mut db = Database::default();
            for d in ["I", "J"] {
                db.dim_sizes.insert(d.to_string(), 2);
            }
            let mut cells = Vec::new();
            for (pred, sig) in &sigs {
                let mut tuple = vec![0u32; sig.len()];
                loop {
                    cells.push((pred.clone(), tuple.clone()));
                    if !advance(&mut tuple, 2) {
                        break;
                    }
                }
                db.relations.insert(pred.clone(), Relation { dims: sig.clone(), tuples: BTreeSet::new() });
            }
            for (bit, (pred, tuple)) in cells.iter().enumerate() {
                if pattern >> bit & 1 == 1 {
                    db.relations.get_mut(pred).unwrap().tuples.insert(tuple.clone());
                }
            }
            prop_assert_eq!(ts.full_tasks(&db), ts.clone().normalized().full_tasks(&db));
        }
    }
}
