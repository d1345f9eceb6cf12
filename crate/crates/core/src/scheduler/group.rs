//! Workspace grouping: every way of extracting subexpressions into `where`
//! statements.
//!
//! A grouping picks a set of subexpression positions, each with at least
//! two accesses, and replaces every picked subtree with a placeholder
//! workspace computed by a producer. Extraction comes in two flavors:
//! overwrite (`=`), always sound because the consumer re-reads whatever the
//! producer last computed under shared loops; and increment (`+=`), which
//! absorbs summation into the workspace and is only sound when everything
//! between the extracted position and its enclosing extraction multiplies —
//! pre-summing an operand of `+` would let outer loops scale it by their
//! trip count.
//!
//! Skeletons carry no loops and use `?0`, `?1`, … for the unnamed
//! workspaces; the nesting stage hangs loops on them and the naming stage
//! replaces the placeholders with declared tensors.

use std::collections::BTreeSet;

use super::{cartesian, is_placeholder, map_stmt_accesses, KernelSpec};
use crate::cinp::{Access, AssignOp, Expr, Stmt};

/// Every extraction of subexpressions into placeholder workspaces, as
/// loop-free skeleton statements. Includes the empty extraction: the kernel
/// as a single assignment.
pub fn enumerate_groupings(spec: &KernelSpec, expr: &Expr) -> BTreeSet<Stmt> {
    let positions = extractable_positions(expr);
    assert!(
        positions.len() < usize::BITS as usize,
        "expression too large to group"
    );
    let mut out = BTreeSet::new();
    for mask in 0usize..(1 << positions.len()) {
        let chosen: Vec<Vec<usize>> = positions
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, p)| p.clone())
            .collect();
        let ops: Vec<Vec<AssignOp>> = chosen
            .iter()
            .map(|p| {
                let mut ops = vec![AssignOp::Overwrite];
                if increment_admissible(expr, p, &chosen) {
                    ops.push(AssignOp::IncrementAdd);
                }
                ops
            })
            .collect();
        for combo in cartesian(&ops) {
            out.insert(canonical_placeholders(statement_for(
                None, spec, expr, &chosen, &combo,
            )));
        }
    }
    out
}

/// Paths (0 = left, 1 = right) of the subexpressions worth extracting:
/// those containing at least two accesses, the root included.
fn extractable_positions(expr: &Expr) -> Vec<Vec<usize>> {
    fn walk(expr: &Expr, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if count_accesses(expr) >= 2 {
            out.push(path.clone());
        }
        if let Expr::Add(l, r) | Expr::Mul(l, r) = expr {
            path.push(0);
            walk(l, path, out);
            path.pop();
            path.push(1);
            walk(r, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(expr, &mut Vec::new(), &mut out);
    out
}

fn count_accesses(expr: &Expr) -> usize {
    match expr {
        Expr::Access(_) => 1,
        Expr::Literal(_) => 0,
        Expr::Add(l, r) | Expr::Mul(l, r) => count_accesses(l) + count_accesses(r),
    }
}

fn subexpr_at<'a>(expr: &'a Expr, path: &[usize]) -> &'a Expr {
    match path.split_first() {
        None => expr,
        Some((&side, rest)) => match expr {
            Expr::Add(l, r) | Expr::Mul(l, r) => {
                subexpr_at(if side == 0 { l } else { r }, rest)
            }
            Expr::Access(_) | Expr::Literal(_) => unreachable!("path into a leaf"),
        },
    }
}

fn replace_at(expr: &Expr, path: &[usize], with: &Expr) -> Expr {
    match path.split_first() {
        None => with.clone(),
        Some((&side, rest)) => {
            let rebuild = |l: &Expr, r: &Expr| {
                if side == 0 {
                    (Box::new(replace_at(l, rest, with)), Box::new(r.clone()))
                } else {
                    (Box::new(l.clone()), Box::new(replace_at(r, rest, with)))
                }
            };
            match expr {
                Expr::Add(l, r) => {
                    let (l, r) = rebuild(l, r);
                    Expr::Add(l, r)
                }
                Expr::Mul(l, r) => {
                    let (l, r) = rebuild(l, r);
                    Expr::Mul(l, r)
                }
                Expr::Access(_) | Expr::Literal(_) => unreachable!("path into a leaf"),
            }
        }
    }
}

/// An increment extraction at `p` is admissible when every operator from
/// the enclosing chosen extraction down to (but excluding) `p` multiplies,
/// so the extracted sum is a factor of its enclosure rather than a term
/// scaled by loops it ignores. The outermost extraction is always
/// admissible.
fn increment_admissible(expr: &Expr, p: &[usize], chosen: &[Vec<usize>]) -> bool {
    let start = chosen
        .iter()
        .filter(|q| q.len() < p.len() && p.starts_with(q))
        .map(|q| q.len())
        .max()
        .unwrap_or(0);
    (start..p.len()).all(|k| matches!(subexpr_at(expr, &p[..k]), Expr::Mul(..)))
}

/// The statement computing the extraction at `parent` (`None` for the
/// kernel output): its assignment, wrapped in a `where` per directly nested
/// extraction, first-read innermost.
fn statement_for(
    parent: Option<usize>,
    spec: &KernelSpec,
    expr: &Expr,
    chosen: &[Vec<usize>],
    ops: &[AssignOp],
) -> Stmt {
    let (lhs, op) = match parent {
        None => (spec.output.clone(), spec.op()),
        Some(i) => (placeholder_access(i), ops[i]),
    };
    let rhs = content(parent, expr, chosen);
    let reads: Vec<usize> = rhs
        .accesses()
        .iter()
        .filter(|a| is_placeholder(&a.tensor))
        .map(|a| a.tensor[1..].parse().expect("placeholder number"))
        .collect();
    let mut stmt = Stmt::Assign { lhs, op, rhs };
    for child in reads {
        stmt = Stmt::Where {
            consumer: Box::new(stmt),
            producer: Box::new(statement_for(Some(child), spec, expr, chosen, ops)),
        };
    }
    stmt
}

/// The subexpression at `parent`, with each directly nested chosen position
/// replaced by its placeholder. Direct means no other chosen position lies
/// strictly between.
fn content(parent: Option<usize>, expr: &Expr, chosen: &[Vec<usize>]) -> Expr {
    let base: &[usize] = match parent {
        None => &[],
        Some(i) => &chosen[i],
    };
    let mut result = subexpr_at(expr, base).clone();
    for (child, path) in chosen.iter().enumerate() {
        if Some(child) == parent || !path.starts_with(base) {
            continue;
        }
        let direct = !chosen.iter().enumerate().any(|(other, q)| {
            other != child
                && Some(other) != parent
                && q.len() < path.len()
                && path.starts_with(q)
                && q.starts_with(base)
        });
        if direct {
            result = replace_at(
                &result,
                &path[base.len()..],
                &Expr::Access(placeholder_access(child)),
            );
        }
    }
    result
}

fn placeholder_access(i: usize) -> Access {
    Access {
        tensor: format!("?{i}"),
        indices: vec![],
    }
}

/// Renumber placeholders in first-appearance order (consumers before
/// producers) so extractions that differ only in construction order compare
/// equal.
fn canonical_placeholders(mut stmt: Stmt) -> Stmt {
    let mut order: Vec<String> = Vec::new();
    stmt.for_each_access(&mut |access, _| {
        if is_placeholder(&access.tensor) && !order.contains(&access.tensor) {
            order.push(access.tensor.clone());
        }
    });
    let renames: std::collections::BTreeMap<String, String> = order
        .into_iter()
        .enumerate()
        .map(|(i, old)| (old, format!("?{i}")))
        .collect();
    map_stmt_accesses(&mut stmt, &mut |access| {
        if let Some(new) = renames.get(&access.tensor) {
            access.tensor = new.clone();
        }
    });
    stmt
}
