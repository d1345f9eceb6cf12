//! Symbolic coverage between task sets, decided by query homomorphisms.
//!
//! Disjunct `p` is covered by disjunct `q` exactly when there is a mapping
//! `h` from `q`'s variables into `p`'s such that every clause of `q` lands
//! on a clause of `p` and every head slot of `p` is the image of a
//! same-dimension head slot of `q`. Each satisfying tuple of `p` is then a
//! sub-tuple of a satisfying tuple of `q`, on every input pattern. Head
//! variables of `q` that appear in no clause and are not needed to cover
//! `p`'s head may stay unmapped: they range over a whole (nonempty)
//! dimension, so a witness value always exists.
//!
//! The search runs in two phases: first an injective, dimension-matched
//! assignment of `p`-head slots to `q`-head slots, then a backtracking
//! embedding of `q`'s clauses into `p`'s.

use std::collections::BTreeMap;

use super::{Clause, Cq, TaskSet};

/// Is every task of `p` a sub-tuple of some task of `q`, on every pattern?
pub fn cq_contained(p: &Cq, q: &Cq) -> bool {
    cover_heads(p, q, 0, &mut BTreeMap::new())
}

/// The mapping from `q`'s variables into `p`'s that witnesses
/// `cq_contained(p, q)`, when containment holds.
pub fn cq_witness(p: &Cq, q: &Cq) -> Option<BTreeMap<String, String>> {
    let mut h = BTreeMap::new();
    cover_heads(p, q, 0, &mut h).then_some(h)
}

/// Phase 1: choose, for each head slot of `p`, a distinct same-dimension
/// head slot of `q` mapping onto it.
fn cover_heads(p: &Cq, q: &Cq, slot: usize, h: &mut BTreeMap<String, String>) -> bool {
    let Some((pvar, pdim)) = p.head.get(slot) else {
        return embed_clauses(p, q, &q.clauses, h);
    };
    for (qvar, qdim) in &q.head {
        if qdim != pdim || h.contains_key(qvar) {
            continue;
        }
        h.insert(qvar.clone(), pvar.clone());
        if cover_heads(p, q, slot + 1, h) {
            return true;
        }
        h.remove(qvar);
    }
    false
}

/// Phase 2: extend the head assignment so every clause of `q` maps onto a
/// clause of `p`.
fn embed_clauses(
    p: &Cq,
    q: &Cq,
    remaining: &[Clause],
    h: &mut BTreeMap<String, String>,
) -> bool {
    let Some((clause, rest)) = remaining.split_first() else {
        return true;
    };
    for target in &p.clauses {
        if target.pred != clause.pred || target.args.len() != clause.args.len() {
            continue;
        }
        let mut added = Vec::new();
        let mut ok = true;
        for (qa, pa) in clause.args.iter().zip(&target.args) {
            match h.get(qa) {
                Some(existing) if existing == pa => {}
                Some(_) => {
                    ok = false;
                    break;
                }
                None => {
                    // A typed head variable may only map to a variable of
                    // the same dimension.
                    if let (Some(qd), Some(pd)) = (q.head_dim(qa), p.head_dim(pa)) {
                        if qd != pd {
                            ok = false;
                            break;
                        }
                    }
                    h.insert(qa.clone(), pa.clone());
                    added.push(qa.clone());
                }
            }
        }
        if ok && embed_clauses(p, q, rest, h) {
            return true;
        }
        for var in added {
            h.remove(&var);
        }
    }
    false
}

/// Is every disjunct of `p` covered by some disjunct of `q`?
pub fn ucq_contained(p: &TaskSet, q: &TaskSet) -> bool {
    p.disjuncts
        .iter()
        .all(|dp| q.disjuncts.iter().any(|dq| cq_contained(dp, dq)))
}

/// Remove redundancy without changing what the union covers: drop disjuncts
/// covered by other disjuncts (keeping the first of a mutually-covering
/// group), and drop clauses whose removal keeps each disjunct equivalent.
pub fn simplify(cost: &TaskSet) -> TaskSet {
    let pruned = prune_disjuncts(cost.clone().normalized());
    let dropped = TaskSet {
        disjuncts: pruned.disjuncts.iter().map(drop_clauses).collect(),
    };
    prune_disjuncts(dropped.normalized())
}

fn prune_disjuncts(cost: TaskSet) -> TaskSet {
    let ds = &cost.disjuncts;
    let n = ds.len();
    let mut keep = Vec::with_capacity(n);
    for i in 0..n {
        let redundant = (0..n).any(|j| {
            j != i
                && cq_contained(&ds[i], &ds[j])
                && (!cq_contained(&ds[j], &ds[i]) || j < i)
        });
        keep.push(!redundant);
    }
    TaskSet {
        disjuncts: ds
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(d, _)| d.clone())
            .collect(),
    }
}

/// Greedily remove clauses while the disjunct stays equivalent. Removing a
/// clause only ever widens coverage, so equivalence reduces to the widened
/// disjunct still being covered by the current one.
fn drop_clauses(cq: &Cq) -> Cq {
    let mut current = cq.clone();
    let mut idx = 0;
    while idx < current.clauses.len() {
        let mut candidate = current.clone();
        candidate.clauses.remove(idx);
        if cq_contained(&candidate, &current) {
            current = candidate;
            idx = 0;
        } else {
            idx += 1;
        }
    }
    current.canonicalize();
    current
}

#[cfg(test)]
mod tests {
    use super::super::{Clause, Cq, TaskSet};
    use super::*;

    fn cq(head: &[(&str, &str)], clauses: Vec<Clause>) -> Cq {
        Cq::new(head, clauses)
    }

    #[test]
    fn containment_is_reflexive() {
        let d = cq(
            &[("i", "I"), ("j", "J")],
            vec![Clause::new("B", &["i", "k"]), Clause::new("C", &["k", "j"])],
        );
        assert!(cq_contained(&d, &d));
    }

    #[test]
    fn clauses_refine_the_dense_set() {
        let sparse = cq(&[("i", "I"), ("j", "J")], vec![Clause::new("B", &["i", "j"])]);
        let dense = cq(&[("i", "I"), ("j", "J")], vec![]);
        assert!(cq_contained(&sparse, &dense));
        assert!(!cq_contained(&dense, &sparse));
    }

    #[test]
    fn projection_is_covered_by_the_full_tuple() {
        // Tasks over i with some witness k are sub-tuples of (i,k) tasks.
        let proj = cq(&[("i", "I")], vec![Clause::new("B", &["i", "k"])]);
        let full = cq(
            &[("i", "I"), ("k", "K")],
            vec![Clause::new("B", &["i", "k"])],
        );
        assert!(cq_contained(&proj, &full));
        assert!(!cq_contained(&full, &proj));
    }

    #[test]
    fn head_dimensions_must_match() {
        let p = cq(&[("i", "I")], vec![]);
        let q = cq(&[("j", "J")], vec![]);
        assert!(!cq_contained(&p, &q));
        assert!(cq_contained(&p, &cq(&[("x", "I")], vec![])));
    }

    #[test]
    fn unconstrained_head_slots_may_stay_unmapped() {
        // q ranges over all of Z besides covering i, so any i-task is a
        // sub-tuple of some (i,z)-task.
        let p = cq(&[("i", "I")], vec![Clause::new("B", &["i", "k"])]);
        let q = cq(
            &[("i", "I"), ("z", "Z")],
            vec![Clause::new("B", &["i", "k"])],
        );
        assert!(cq_contained(&p, &q));
    }

    #[test]
    fn repeated_dimension_heads_need_distinct_preimages() {
        let pair = cq(&[("x", "I"), ("y", "I")], vec![]);
        let single = cq(&[("x", "I")], vec![]);
        assert!(cq_contained(&single, &pair));
        assert!(!cq_contained(&pair, &single));
    }

    #[test]
    fn witness_maps_covering_variables_onto_covered_ones() {
        let proj = cq(&[("i", "I")], vec![Clause::new("B", &["i", "k"])]);
        let full = cq(
            &[("i", "I"), ("k", "K")],
            vec![Clause::new("B", &["i", "k"])],
        );
        let h = cq_witness(&proj, &full).expect("containment holds");
        assert_eq!(h.get("i").map(String::as_str), Some("i"));
        assert_eq!(h.get("k").map(String::as_str), Some("k"));
        assert!(cq_witness(&full, &proj).is_none());
    }

    #[test]
    fn union_coverage_is_per_disjunct() {
        let p = TaskSet {
            disjuncts: vec![
                cq(&[("i", "I")], vec![Clause::new("B", &["i", "k"])]),
                cq(&[("j", "J")], vec![]),
            ],
        };
        let q = TaskSet {
            disjuncts: vec![cq(&[("i", "I")], vec![]), cq(&[("j", "J")], vec![])],
        };
        assert!(ucq_contained(&p, &q));
        assert!(!ucq_contained(&q, &p));
        assert!(ucq_contained(&TaskSet::empty(), &q));
    }

    #[test]
    fn simplify_drops_covered_disjuncts() {
        let ts = TaskSet {
            disjuncts: vec![
                cq(&[("i", "I")], vec![Clause::new("B", &["i", "k"])]),
                cq(&[("i", "I")], vec![]),
            ],
        };
        assert_eq!(simplify(&ts).to_text(), "{[i:I] | true}");
    }

    #[test]
    fn simplify_keeps_one_of_an_equivalent_pair() {
        let ts = TaskSet {
            disjuncts: vec![
                cq(&[("i", "I")], vec![Clause::new("B", &["i", "x"])]),
                cq(&[("i", "I")], vec![Clause::new("B", &["i", "y"])]),
            ],
        };
        assert_eq!(simplify(&ts).to_text(), "{[i:I] | exists k1 . B(i,k1)}");
    }

    #[test]
    fn simplify_drops_redundant_clauses() {
        let ts = TaskSet::from_cq(cq(
            &[("i", "I")],
            vec![Clause::new("B", &["i", "x"]), Clause::new("B", &["i", "y"])],
        ));
        assert_eq!(simplify(&ts).to_text(), "{[i:I] | exists k1 . B(i,k1)}");
    }

    #[test]
    fn simplify_keeps_necessary_clauses() {
        let ts = TaskSet::from_cq(cq(
            &[("i", "I"), ("j", "J")],
            vec![Clause::new("B", &["i", "k"]), Clause::new("C", &["k", "j"])],
        ));
        assert_eq!(
            simplify(&ts).to_text(),
            "{[i:I, j:J] | exists k1 . B(i,k1) & C(k1,j)}"
        );
    }
}
