//! Expression rewriting: reassociation, commutation, and one round of
//! distributing `*` over `+`.
//!
//! The closure is taken literally — every parenthesization and operand
//! order is a distinct expression — because later stages read structure off
//! the tree: grouping extracts subtrees, and nesting orders loops by where
//! variables occur. Distribution only ever expands (`(a + b) * c` becomes
//! `a * c + b * c`, never the reverse) and runs once over the closed set,
//! so a product of sums unfolds one level per pipeline run rather than
//! diverging.

use std::collections::BTreeSet;

use crate::cinp::Expr;

/// Close `expr` under associativity and commutativity, distribute `*` over
/// `+` once at every position, and close again. Returns the set and whether
/// the `limit` cut it short.
pub fn enumerate_rewrites(expr: &Expr, limit: usize) -> (BTreeSet<Expr>, bool) {
    let (mut closed, mut truncated) = close_assoc_comm([expr.clone()], limit);
    let has_add = closed.iter().any(contains_add);
    let has_mul = closed.iter().any(contains_mul);
    if has_add && has_mul {
        let mut seeds: Vec<Expr> = closed.iter().cloned().collect();
        for expr in &closed {
            seeds.extend(distribute_once(expr));
        }
        let (reclosed, cut) = close_assoc_comm(seeds, limit);
        closed = reclosed;
        truncated |= cut;
    }
    (closed, truncated)
}

/// Breadth-first closure under single-step reassociations and commutations
/// applied at every position.
fn close_assoc_comm(seeds: impl IntoIterator<Item = Expr>, limit: usize) -> (BTreeSet<Expr>, bool) {
    let mut seen: BTreeSet<Expr> = BTreeSet::new();
    let mut queue: Vec<Expr> = Vec::new();
    let mut truncated = false;
    for seed in seeds {
        if seen.len() >= limit {
            truncated |= !seen.contains(&seed);
            continue;
        }
        if seen.insert(seed.clone()) {
            queue.push(seed);
        }
    }
    let mut at = 0;
    while at < queue.len() {
        let expr = queue[at].clone();
        at += 1;
        for next in neighbors(&expr) {
            if seen.contains(&next) {
                continue;
            }
            if seen.len() >= limit {
                truncated = true;
                continue;
            }
            seen.insert(next.clone());
            queue.push(next);
        }
    }
    (seen, truncated)
}

/// Every expression one reassociation or commutation away.
fn neighbors(expr: &Expr) -> Vec<Expr> {
    let mut out = Vec::new();
    match expr {
        Expr::Access(_) | Expr::Literal(_) => {}
        Expr::Add(l, r) => {
            out.push(Expr::Add(r.clone(), l.clone()));
            if let Expr::Add(x, y) = l.as_ref() {
                out.push(Expr::Add(x.clone(), Box::new(Expr::Add(y.clone(), r.clone()))));
            }
            if let Expr::Add(y, z) = r.as_ref() {
                out.push(Expr::Add(Box::new(Expr::Add(l.clone(), y.clone())), z.clone()));
            }
            for left in neighbors(l) {
                out.push(Expr::Add(Box::new(left), r.clone()));
            }
            for right in neighbors(r) {
                out.push(Expr::Add(l.clone(), Box::new(right)));
            }
        }
        Expr::Mul(l, r) => {
            out.push(Expr::Mul(r.clone(), l.clone()));
            if let Expr::Mul(x, y) = l.as_ref() {
                out.push(Expr::Mul(x.clone(), Box::new(Expr::Mul(y.clone(), r.clone()))));
            }
            if let Expr::Mul(y, z) = r.as_ref() {
                out.push(Expr::Mul(Box::new(Expr::Mul(l.clone(), y.clone())), z.clone()));
            }
            for left in neighbors(l) {
                out.push(Expr::Mul(Box::new(left), r.clone()));
            }
            for right in neighbors(r) {
                out.push(Expr::Mul(l.clone(), Box::new(right)));
            }
        }
    }
    out
}

/// Every expression obtained by distributing one `*` over one `+`, at any
/// position, in the expanding direction only.
fn distribute_once(expr: &Expr) -> Vec<Expr> {
    let mut out = Vec::new();
    match expr {
        Expr::Access(_) | Expr::Literal(_) => {}
        Expr::Mul(l, r) => {
            if let Expr::Add(a, b) = l.as_ref() {
                out.push(Expr::Add(
                    Box::new(Expr::Mul(a.clone(), r.clone())),
                    Box::new(Expr::Mul(b.clone(), r.clone())),
                ));
            }
            if let Expr::Add(a, b) = r.as_ref() {
                out.push(Expr::Add(
                    Box::new(Expr::Mul(l.clone(), a.clone())),
                    Box::new(Expr::Mul(l.clone(), b.clone())),
                ));
            }
            for left in distribute_once(l) {
                out.push(Expr::Mul(Box::new(left), r.clone()));
            }
            for right in distribute_once(r) {
                out.push(Expr::Mul(l.clone(), Box::new(right)));
            }
        }
        Expr::Add(l, r) => {
            for left in distribute_once(l) {
                out.push(Expr::Add(Box::new(left), r.clone()));
            }
            for right in distribute_once(r) {
                out.push(Expr::Add(l.clone(), Box::new(right)));
            }
        }
    }
    out
}

fn contains_add(expr: &Expr) -> bool {
    match expr {
        Expr::Add(..) => true,
        Expr::Mul(l, r) => contains_add(l) || contains_add(r),
        Expr::Access(_) | Expr::Literal(_) => false,
    }
}

fn contains_mul(expr: &Expr) -> bool {
    match expr {
        Expr::Mul(..) => true,
        Expr::Add(l, r) => contains_mul(l) || contains_mul(r),
        Expr::Access(_) | Expr::Literal(_) => false,
    }
}
