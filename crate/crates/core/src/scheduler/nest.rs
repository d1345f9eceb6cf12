//! Loop nesting: every placement of each index variable's loop on a
//! skeleton statement.
//!
//! Each variable independently either stays where it is (anchoring above
//! the current node) or pushes through a `where`. A producer with a
//! reduction anywhere inside pulls the variable into exactly the sides that
//! use it in an access; a reduction-free producer re-runs in the consumer —
//! the variable descends there always, and into the producer only when the
//! producer uses it. Pushing descends recursively, so a variable may anchor
//! at any depth. Variables that anchor at the same node form a block, and
//! every ordering of every block is emitted.
//!
//! Pushing a loop past a consumer that never mentions its variable is still
//! sound: the workspace naming stage indexes each workspace by the
//! variables quantified below its `where` on both sides, so per-iteration
//! values are kept apart rather than overwritten.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;

use super::cartesian;
use crate::cinp::{Access, AssignOp, Expr, Stmt};

/// Every way of hanging the variables' loops on the skeleton. Anchor paths
/// and block orders both multiply out; the result is deduplicated.
pub fn enumerate_nestings(skeleton: &Stmt, vars: &[String]) -> BTreeSet<Stmt> {
    let per_var: Vec<Vec<BTreeSet<Vec<u8>>>> = vars
        .iter()
        .map(|var| {
            let mut options = placements(skeleton, var);
            options.sort();
            options.dedup();
            options
        })
        .collect();
    let mut out = BTreeSet::new();
    for combo in cartesian(&per_var) {
        let mut blocks: BTreeMap<Vec<u8>, Vec<String>> = BTreeMap::new();
        for (var, anchors) in vars.iter().zip(&combo) {
            for path in anchors {
                blocks
                    .entry(path.clone())
                    .or_default()
                    .push(var.clone());
            }
        }
        let paths: Vec<Vec<u8>> = blocks.keys().cloned().collect();
        let orderings: Vec<Vec<Vec<String>>> = blocks
            .values()
            .map(|block| {
                block
                    .iter()
                    .cloned()
                    .permutations(block.len())
                    .collect()
            })
            .collect();
        for choice in cartesian(&orderings) {
            let mut stmt = skeleton.clone();
            for (path, block) in paths.iter().zip(&choice) {
                wrap_at(&mut stmt, path, block);
            }
            out.insert(stmt);
        }
    }
    out
}

/// Keep the statements whose maximum loop nesting depth is minimal.
pub fn filter_min_depth(stmts: &BTreeSet<Stmt>) -> BTreeSet<Stmt> {
    let Some(min) = stmts.iter().map(Stmt::depth).min() else {
        return BTreeSet::new();
    };
    stmts
        .iter()
        .filter(|stmt| stmt.depth() == min)
        .cloned()
        .collect()
}

/// The variable's placement options on `stmt`: each option is the set of
/// anchor paths (0 = consumer, 1 = producer, per `where` passed through)
/// its loop wraps.
fn placements(stmt: &Stmt, var: &str) -> Vec<BTreeSet<Vec<u8>>> {
    match stmt {
        Stmt::Assign { .. } => vec![std::iter::once(Vec::new()).collect()],
        Stmt::Where { consumer, producer } => {
            let mut options: Vec<BTreeSet<Vec<u8>>> =
                vec![std::iter::once(Vec::new()).collect()];
            let targets: Vec<(u8, &Stmt)> = if contains_increment(producer) {
                [(0u8, consumer.as_ref()), (1u8, producer.as_ref())]
                    .into_iter()
                    .filter(|(_, side)| uses_var(side, var))
                    .collect()
            } else {
                let mut targets = vec![(0u8, consumer.as_ref())];
                if uses_var(producer, var) {
                    targets.push((1u8, producer.as_ref()));
                }
                targets
            };
            if !targets.is_empty() {
                let per_side: Vec<Vec<BTreeSet<Vec<u8>>>> = targets
                    .iter()
                    .map(|(_, side)| placements(side, var))
                    .collect();
                for combo in cartesian(&per_side) {
                    let mut anchors = BTreeSet::new();
                    for ((side, _), sub) in targets.iter().zip(&combo) {
                        for path in sub {
                            let mut prefixed = vec![*side];
                            prefixed.extend_from_slice(path);
                            anchors.insert(prefixed);
                        }
                    }
                    options.push(anchors);
                }
            }
            options
        }
        Stmt::Forall { .. } => unreachable!("skeletons carry no loops"),
    }
}

/// Wrap the node at `path` in the block's loops, first variable outermost.
/// Loops already placed are stepped through transparently.
fn wrap_at(stmt: &mut Stmt, path: &[u8], block: &[String]) {
    if let Stmt::Forall { body, .. } = stmt {
        return wrap_at(body, path, block);
    }
    match path.split_first() {
        None => {
            let dummy = Stmt::Assign {
                lhs: Access {
                    tensor: String::new(),
                    indices: vec![],
                },
                op: AssignOp::Overwrite,
                rhs: Expr::Literal(0),
            };
            let mut inner = std::mem::replace(stmt, dummy);
            for var in block.iter().rev() {
                inner = Stmt::Forall {
                    var: var.clone(),
                    body: Box::new(inner),
                };
            }
            *stmt = inner;
        }
        Some((&side, rest)) => match stmt {
            Stmt::Where { consumer, producer } => {
                wrap_at(if side == 0 { consumer } else { producer }, rest, block);
            }
            _ => unreachable!("anchor path mismatches statement"),
        },
    }
}

fn contains_increment(stmt: &Stmt) -> bool {
    match stmt {
        Stmt::Forall { body, .. } => contains_increment(body),
        Stmt::Where { consumer, producer } => {
            contains_increment(consumer) || contains_increment(producer)
        }
        Stmt::Assign { op, .. } => *op == AssignOp::IncrementAdd,
    }
}

fn uses_var(stmt: &Stmt, var: &str) -> bool {
    let mut used = false;
    stmt.for_each_access(&mut |access, _| used |= access.uses_var(var));
    used
}
