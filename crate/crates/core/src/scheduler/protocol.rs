//! Protocol assignment: how each access meets its tensor's levels.
//!
//! Writes are not choices. A level is appended when its variable is either
//! fixed above the tensor's birth scope or preceded, among the variables
//! quantified since birth, only by variables already pinned by outer levels
//! of the same write; otherwise the level must insert. This reproduces the
//! legality rule for `a`/`i` exactly, so the assignment never manufactures
//! an append-order violation.
//!
//! Reads enumerate. Unrestricted, every mode of every right-hand-side
//! access independently steps or locates. In TACO mode the menu narrows to
//! what its scheduling language reaches: workspaces are stepped on every
//! mode, all-dense inputs are located on every mode, and a sparse input is
//! either stepped throughout or located at its outermost-quantified mode
//! and stepped below.

use std::collections::BTreeMap;

use super::cartesian;
use crate::cinp::{Access, LevelFormat, Program, Protocol, Stmt, TensorDecl, TensorKind};

/// Every protocolized variant of `program`: the deterministic write
/// assignment times each combination of read choices.
pub fn enumerate_protocols(program: &Program, taco: bool) -> Vec<Program> {
    let mut base = program.clone();
    apply_write_protocols(&mut base);
    let sites = read_sites(&base, taco);
    cartesian(&sites)
        .into_iter()
        .map(|choice| {
            let mut candidate = base.clone();
            let mut next = 0;
            apply_reads(&mut candidate.root, &choice, &mut next);
            candidate
        })
        .collect()
}

/// How many programs [`enumerate_protocols`] would return, without
/// materializing them.
pub fn protocol_combinations(program: &Program, taco: bool) -> u128 {
    read_sites(program, taco)
        .iter()
        .map(|options| options.len() as u128)
        .product()
}

/// Set every write protocol to the appendable choice its storage order
/// admits, inserting otherwise.
pub(crate) fn apply_write_protocols(program: &mut Program) {
    let orders: BTreeMap<String, Vec<usize>> = program
        .decls
        .iter()
        .map(|d| (d.name.clone(), d.mode_order.clone()))
        .collect();
    let mut births = BTreeMap::new();
    birth_scopes(&program.root, 0, &mut births);
    let mut scope = Vec::new();
    walk_writes(&mut program.root, &mut scope, &births, &orders);
}

/// Loop depth at which each `where`-produced tensor comes into being.
fn birth_scopes(stmt: &Stmt, depth: usize, births: &mut BTreeMap<String, usize>) {
    match stmt {
        Stmt::Forall { body, .. } => birth_scopes(body, depth + 1, births),
        Stmt::Where { consumer, producer } => {
            births.insert(producer.result_tensor().to_string(), depth);
            birth_scopes(consumer, depth, births);
            birth_scopes(producer, depth, births);
        }
        Stmt::Assign { .. } => {}
    }
}

fn walk_writes(
    stmt: &mut Stmt,
    scope: &mut Vec<String>,
    births: &BTreeMap<String, usize>,
    orders: &BTreeMap<String, Vec<usize>>,
) {
    match stmt {
        Stmt::Forall { var, body } => {
            scope.push(var.clone());
            walk_writes(body, scope, births, orders);
            scope.pop();
        }
        Stmt::Where { consumer, producer } => {
            walk_writes(consumer, scope, births, orders);
            walk_writes(producer, scope, births, orders);
        }
        Stmt::Assign { lhs, .. } => {
            let order = &orders[&lhs.tensor];
            let birth = births.get(&lhs.tensor).copied().unwrap_or(0);
            let quantified = &scope[birth.min(scope.len())..];
            let storage_vars: Vec<String> =
                order.iter().map(|&m| lhs.indices[m].0.clone()).collect();
            for (level, &mode) in order.iter().enumerate() {
                let var = storage_vars[level].clone();
                let appendable = match quantified.iter().position(|q| *q == var) {
                    None => true,
                    Some(pos) => quantified[..pos]
                        .iter()
                        .all(|q| storage_vars[..level].contains(q)),
                };
                lhs.indices[mode].1 = if appendable {
                    Protocol::Append
                } else {
                    Protocol::Insert
                };
            }
        }
    }
}

/// Per read site (in traversal order), the menu of per-mode protocol
/// choices.
fn read_sites(program: &Program, taco: bool) -> Vec<Vec<Vec<Protocol>>> {
    let mut sites = Vec::new();
    let mut scope = Vec::new();
    walk_reads(&program.root, &mut scope, &mut |access, scope| {
        let decl = program.decl(&access.tensor).expect("reads are declared");
        sites.push(read_options(decl, access, scope, taco));
    });
    sites
}

fn read_options(
    decl: &TensorDecl,
    access: &Access,
    scope: &[String],
    taco: bool,
) -> Vec<Vec<Protocol>> {
    let rank = access.indices.len();
    if rank == 0 {
        return vec![vec![]];
    }
    if !taco {
        let per_mode: Vec<Vec<Protocol>> = (0..rank)
            .map(|_| vec![Protocol::Step, Protocol::Locate])
            .collect();
        return cartesian(&per_mode);
    }
    if decl.kind == TensorKind::Workspace {
        return vec![vec![Protocol::Step; rank]];
    }
    if decl
        .formats
        .iter()
        .all(|f| *f == LevelFormat::Uncompressed)
    {
        return vec![vec![Protocol::Locate; rank]];
    }
    let outermost = (0..rank)
        .min_by_key(|&mode| {
            scope
                .iter()
                .position(|v| *v == access.indices[mode].0)
                .unwrap_or(usize::MAX)
        })
        .expect("rank checked nonzero");
    let mut with_locate = vec![Protocol::Step; rank];
    with_locate[outermost] = Protocol::Locate;
    vec![vec![Protocol::Step; rank], with_locate]
}

fn walk_reads<'a>(
    stmt: &'a Stmt,
    scope: &mut Vec<String>,
    f: &mut impl FnMut(&'a Access, &[String]),
) {
    match stmt {
        Stmt::Forall { var, body } => {
            scope.push(var.clone());
            walk_reads(body, scope, f);
            scope.pop();
        }
        Stmt::Where { consumer, producer } => {
            walk_reads(consumer, scope, f);
            walk_reads(producer, scope, f);
        }
        Stmt::Assign { rhs, .. } => {
            for access in rhs.accesses() {
                f(access, scope);
            }
        }
    }
}

/// Overwrite read protocols site by site, in the same traversal order the
/// menus were collected in.
fn apply_reads(stmt: &mut Stmt, choice: &[Vec<Protocol>], next: &mut usize) {
    match stmt {
        Stmt::Forall { body, .. } => apply_reads(body, choice, next),
        Stmt::Where { consumer, producer } => {
            apply_reads(consumer, choice, next);
            apply_reads(producer, choice, next);
        }
        Stmt::Assign { rhs, .. } => rhs.map_accesses(&mut |access| {
            let protocols = &choice[*next];
            *next += 1;
            for (slot, protocol) in access.indices.iter_mut().zip(protocols) {
                slot.1 = *protocol;
            }
        }),
    }
}
