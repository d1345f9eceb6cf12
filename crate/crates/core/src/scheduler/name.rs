//! Workspace naming: placeholders become declared tensors.
//!
//! A workspace must hold every value the producer computes that the
//! consumer has not yet read, so it is indexed by exactly the variables
//! quantified below its `where` on both the producer's path to the write
//! and the consumer's path to the read — variables bound above the `where`
//! are fixed per instance, and a variable looped on only one side never
//! distinguishes values the other side can tell apart. Index order follows
//! the producer's loops. A workspace lives for one execution of its
//! `where`: it starts empty and is dropped after the consumer finishes.

use std::collections::{BTreeMap, BTreeSet};

use super::{is_placeholder, map_stmt_accesses, KernelSpec};
use crate::cinp::{LevelFormat, Program, Protocol, Stmt, TensorDecl, TensorKind};

/// Replace every placeholder workspace in `stmt` with a declared tensor
/// indexed by the variables shared below its `where`, provisionally
/// hash-formatted until protocols are known. In TACO mode a workspace of
/// rank two or more disqualifies the whole statement.
pub fn name_workspaces(spec: &KernelSpec, stmt: &Stmt, taco: bool) -> Option<Program> {
    let mut found: Vec<(String, Vec<String>)> = Vec::new();
    collect(stmt, &mut found);
    found.sort_by_key(|(name, _)| placeholder_number(name));
    if taco && found.iter().any(|(_, shared)| shared.len() >= 2) {
        return None;
    }
    let var_dims = spec.var_dims();
    let mut taken: BTreeSet<String> = spec.decls.iter().map(|d| d.name.clone()).collect();
    let mut decls = spec.decls.clone();
    let mut renames: BTreeMap<String, (String, Vec<String>)> = BTreeMap::new();
    for (placeholder, shared) in found {
        let name = fresh(&taken, "w");
        taken.insert(name.clone());
        decls.push(TensorDecl {
            name: name.clone(),
            dims: shared.iter().map(|v| var_dims[v].clone()).collect(),
            formats: vec![LevelFormat::Hash; shared.len()],
            mode_order: (0..shared.len()).collect(),
            kind: TensorKind::Workspace,
        });
        renames.insert(placeholder, (name, shared));
    }
    let mut root = stmt.clone();
    map_stmt_accesses(&mut root, &mut |access| {
        if let Some((name, shared)) = renames.get(&access.tensor) {
            access.tensor = name.clone();
            access.indices = shared
                .iter()
                .map(|v| (v.clone(), Protocol::Unspecified))
                .collect();
        }
    });
    let mut program = Program { decls, root };
    program.infer_kinds();
    Some(program)
}

/// Find every placeholder `where` and the variables shared below it.
fn collect(stmt: &Stmt, out: &mut Vec<(String, Vec<String>)>) {
    match stmt {
        Stmt::Forall { body, .. } => collect(body, out),
        Stmt::Where { consumer, producer } => {
            let result = producer.result_tensor().to_string();
            if is_placeholder(&result) {
                let to_write = binders_to(producer, &|s| writes(s, &result))
                    .expect("a producer writes its own result");
                let to_read = binders_to(consumer, &|s| reads(s, &result))
                    .expect("a consumer reads its producer's result");
                let shared: Vec<String> = to_write
                    .into_iter()
                    .filter(|v| to_read.contains(v))
                    .collect();
                out.push((result, shared));
            }
            collect(consumer, out);
            collect(producer, out);
        }
        Stmt::Assign { .. } => {}
    }
}

/// Loop variables on the path from `stmt` down to the first assignment
/// satisfying `matches`, outermost first.
fn binders_to(stmt: &Stmt, matches: &dyn Fn(&Stmt) -> bool) -> Option<Vec<String>> {
    fn walk(stmt: &Stmt, matches: &dyn Fn(&Stmt) -> bool, path: &mut Vec<String>) -> bool {
        match stmt {
            Stmt::Forall { var, body } => {
                path.push(var.clone());
                if walk(body, matches, path) {
                    return true;
                }
                path.pop();
                false
            }
            Stmt::Where { consumer, producer } => {
                walk(consumer, matches, path) || walk(producer, matches, path)
            }
            Stmt::Assign { .. } => matches(stmt),
        }
    }
    let mut path = Vec::new();
    walk(stmt, matches, &mut path).then_some(path)
}

fn writes(stmt: &Stmt, tensor: &str) -> bool {
    matches!(stmt, Stmt::Assign { lhs, .. } if lhs.tensor == tensor)
}

fn reads(stmt: &Stmt, tensor: &str) -> bool {
    matches!(stmt, Stmt::Assign { rhs, .. }
        if rhs.accesses().iter().any(|a| a.tensor == tensor))
}

fn placeholder_number(name: &str) -> usize {
    name[1..].parse().expect("placeholder names carry a number")
}

pub(crate) fn fresh(taken: &BTreeSet<String>, base: &str) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}{i}"))
        .find(|name| !taken.contains(name))
        .expect("an untaken name exists")
}
