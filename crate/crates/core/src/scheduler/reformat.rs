//! Reformatting: make frontier programs executable as written.
//!
//! The cost filter compares programs on protocols alone, so a survivor may
//! still read a tensor against its storage order or use a protocol its
//! format does not support. This stage first pins each workspace's formats
//! to the cheapest level kind supporting its observed protocols, then
//! repairs reads by copying the offending tensor into a fresh tensor laid
//! out in loop order, and finally, when the output's writes are illegal,
//! routes the kernel through a workspace that an in-order assembly loop
//! drains into the output.
//!
//! A read copy keeps any leading levels that already agree with the
//! outermost loops and are legally read, and re-materializes only the rest,
//! once per iteration of those loops. Copies of inputs become standalone
//! pre-passes in TACO mode (which also allows at most one in-kernel copy,
//! of rank one); copies of workspaces always stay inside the kernel, at the
//! top of their `where`'s consumer side, where the workspace is live.

use std::collections::{BTreeMap, BTreeSet};

use super::protocol::apply_write_protocols;
use super::{fresh, PipelineOptions};
use crate::cinp::{
    Access, AssignOp, Expr, LevelFormat, Program, Protocol, Stmt, TensorDecl, TensorKind,
};

/// A frontier survivor made executable.
#[derive(Debug, Clone)]
pub struct Reformatted {
    /// The kernel, with formats finalized and any copies inserted.
    pub kernel: Program,
    /// Standalone copy passes to run before the kernel, in order.
    pub prepasses: Vec<Program>,
}

/// One structural step on the path to a statement.
#[derive(Debug, Clone, Copy)]
enum Crumb {
    Body,
    Consumer,
    Producer,
}

/// One read access that cannot execute as stored.
struct ReadFix {
    /// Position among all right-hand-side accesses, in traversal order.
    ordinal: usize,
    tensor: String,
    workspace: bool,
    /// Leading storage levels kept in place; the copy covers the rest.
    prefix: usize,
    /// Distinct access variables in loop-binding order.
    target: Vec<String>,
    /// The kernel's protocol for each target variable.
    kept: Vec<Protocol>,
    /// The original access, reused as the copy's source read.
    pattern: Access,
    /// Path from the root to the reading assignment.
    crumbs: Vec<Crumb>,
}

/// Make `program` executable, or report (by `None`, TACO mode only) that
/// its repairs exceed what TACO-style reformatting allows.
pub fn insert_reformatting(program: &Program, opts: &PipelineOptions) -> Option<Reformatted> {
    let taco = opts.taco_mode;
    let mut kernel = program.clone();
    kernel.infer_kinds();
    finalize_workspace_formats(&mut kernel);
    let mut prepasses = Vec::new();
    let mut copies: BTreeSet<String> = BTreeSet::new();
    let mut internal_copies = 0usize;

    while let Some(fix) = next_read_fix(&kernel, &copies, taco) {
        let source = kernel
            .decl(&fix.tensor)
            .expect("reads are declared")
            .clone();
        let bottom = &fix.target[fix.prefix..];
        if taco && fix.workspace && bottom.len() >= 2 {
            return None;
        }
        let var_dims = kernel
            .infer_var_dims()
            .expect("schedules keep dimensions inferable");
        let copy_name = fresh(&declared_names(&kernel), &format!("{}r", fix.tensor));
        let copy_decl = TensorDecl {
            name: copy_name.clone(),
            dims: bottom.iter().map(|v| var_dims[v].clone()).collect(),
            formats: fix.kept[fix.prefix..]
                .iter()
                .map(|p| match p {
                    Protocol::Locate => LevelFormat::Uncompressed,
                    _ => LevelFormat::Compressed,
                })
                .collect(),
            mode_order: (0..bottom.len()).collect(),
            kind: TensorKind::Workspace,
        };

        let mut source_read = fix.pattern.clone();
        for (mode, slot) in source_read.indices.iter_mut().enumerate() {
            slot.1 = match source.formats[source.level_of_mode(mode)] {
                LevelFormat::Uncompressed => Protocol::Locate,
                LevelFormat::Compressed | LevelFormat::Hash => Protocol::Step,
            };
        }
        let copy_write = Access {
            tensor: copy_name.clone(),
            indices: bottom
                .iter()
                .map(|v| (v.clone(), Protocol::Unspecified))
                .collect(),
        };
        let mut copy_stmt = Stmt::Assign {
            lhs: copy_write,
            op: AssignOp::Overwrite,
            rhs: Expr::Access(source_read),
        };
        for var in bottom.iter().rev() {
            copy_stmt = Stmt::Forall {
                var: var.clone(),
                body: Box::new(copy_stmt),
            };
        }

        let retargeted = Access {
            tensor: copy_name.clone(),
            indices: bottom
                .iter()
                .zip(&fix.kept[fix.prefix..])
                .map(|(v, p)| (v.clone(), *p))
                .collect(),
        };
        retarget_read(&mut kernel.root, fix.ordinal, &retargeted);
        kernel.decls.push(copy_decl.clone());

        if taco && !fix.workspace {
            let mut pass = Program {
                decls: vec![source, copy_decl],
                root: copy_stmt,
            };
            apply_write_protocols(&mut pass);
            pass.infer_kinds();
            prepasses.push(pass);
        } else if fix.workspace {
            wrap_birth_consumer(&mut kernel.root, &fix.tensor, &copy_stmt);
            internal_copies += 1;
        } else {
            wrap_below(&mut kernel.root, &fix.crumbs, fix.prefix, copy_stmt);
            internal_copies += 1;
        }
        copies.insert(copy_name);
    }
    if taco && internal_copies > 1 {
        return None;
    }

    let output = kernel
        .decls
        .iter()
        .find(|d| d.kind == TensorKind::Output)
        .map(|d| d.name.clone());
    let mut drained: Option<String> = None;
    if let Some(out_name) = output {
        if let Some((pattern, scope, crumbs)) = locate_write(&kernel.root, &out_name) {
            let decl = kernel.decl(&out_name).expect("the output is declared").clone();
            let unsupported = (0..decl.rank()).any(|level| {
                !decl.formats[level].supports_write(pattern.indices[decl.mode_order[level]].1)
            });
            if unsupported {
                let storage_vars: Vec<String> = decl
                    .mode_order
                    .iter()
                    .map(|&m| pattern.indices[m].0.clone())
                    .collect();
                let mut p = 0;
                while p < storage_vars.len()
                    && p < scope.len()
                    && storage_vars[p] == scope[p]
                    && decl.formats[p].supports_write(pattern.indices[decl.mode_order[p]].1)
                {
                    p += 1;
                }
                let bottom = storage_vars[p..].to_vec();
                if taco && (bottom.len() != 1 || internal_copies >= 1) {
                    return None;
                }
                let var_dims = kernel
                    .infer_var_dims()
                    .expect("schedules keep dimensions inferable");
                let w_name = fresh(&declared_names(&kernel), "w");
                let w_decl = TensorDecl {
                    name: w_name.clone(),
                    dims: bottom.iter().map(|v| var_dims[v].clone()).collect(),
                    formats: vec![LevelFormat::Hash; bottom.len()],
                    mode_order: (0..bottom.len()).collect(),
                    kind: TensorKind::Workspace,
                };
                let w_write = Access {
                    tensor: w_name.clone(),
                    indices: bottom
                        .iter()
                        .map(|v| (v.clone(), Protocol::Unspecified))
                        .collect(),
                };
                replace_write(&mut kernel.root, &out_name, &w_write);
                let out_write = Access {
                    tensor: out_name.clone(),
                    indices: pattern
                        .indices
                        .iter()
                        .map(|(v, _)| (v.clone(), Protocol::Unspecified))
                        .collect(),
                };
                let drain_read = Access {
                    tensor: w_name.clone(),
                    indices: bottom
                        .iter()
                        .map(|v| (v.clone(), Protocol::Step))
                        .collect(),
                };
                let mut assembly = Stmt::Assign {
                    lhs: out_write,
                    op: AssignOp::Overwrite,
                    rhs: Expr::Access(drain_read),
                };
                for var in bottom.iter().rev() {
                    assembly = Stmt::Forall {
                        var: var.clone(),
                        body: Box::new(assembly),
                    };
                }
                drain_below(&mut kernel.root, &crumbs, p, assembly);
                kernel.decls.push(w_decl);
                drained = Some(w_name);
            }
        }
    }

    apply_write_protocols(&mut kernel);
    if let Some(w_name) = drained {
        let protocols =
            write_protocols_of(&kernel.root, &w_name).expect("the drain workspace is written");
        let decl = kernel
            .decls
            .iter_mut()
            .find(|d| d.name == w_name)
            .expect("the drain workspace is declared");
        decl.formats = protocols
            .iter()
            .map(|p| match p {
                Protocol::Append => LevelFormat::Compressed,
                _ => LevelFormat::Hash,
            })
            .collect();
    }
    kernel.infer_kinds();
    Some(Reformatted { kernel, prepasses })
}

/// Pin each workspace level to the first of uncompressed, compressed, hash
/// that supports every protocol used against it.
fn finalize_workspace_formats(program: &mut Program) {
    let mut observed: BTreeMap<(String, usize), BTreeSet<Protocol>> = BTreeMap::new();
    {
        let decls: BTreeMap<&str, &TensorDecl> =
            program.decls.iter().map(|d| (d.name.as_str(), d)).collect();
        program.root.for_each_access(&mut |access, _| {
            let Some(decl) = decls.get(access.tensor.as_str()) else {
                return;
            };
            if decl.kind != TensorKind::Workspace {
                return;
            }
            for (mode, (_, protocol)) in access.indices.iter().enumerate() {
                observed
                    .entry((access.tensor.clone(), decl.level_of_mode(mode)))
                    .or_default()
                    .insert(*protocol);
            }
        });
    }
    for decl in &mut program.decls {
        if decl.kind != TensorKind::Workspace {
            continue;
        }
        for level in 0..decl.formats.len() {
            let Some(protocols) = observed.get(&(decl.name.clone(), level)) else {
                continue;
            };
            decl.formats[level] = [
                LevelFormat::Uncompressed,
                LevelFormat::Compressed,
                LevelFormat::Hash,
            ]
            .into_iter()
            .find(|f| protocols.iter().all(|p| level_supports(*f, *p)))
            .expect("hash levels support every protocol");
        }
    }
}

fn level_supports(format: LevelFormat, protocol: Protocol) -> bool {
    match protocol {
        Protocol::Step | Protocol::Locate => format.supports_read(protocol),
        Protocol::Append | Protocol::Insert => format.supports_write(protocol),
        Protocol::Unspecified => true,
    }
}

/// The first read, in traversal order, that is out of loop order or uses an
/// unsupported protocol. Reads inside copy assignments are the repairs
/// themselves and are exempt.
fn next_read_fix(kernel: &Program, copies: &BTreeSet<String>, taco: bool) -> Option<ReadFix> {
    fn walk(
        stmt: &Stmt,
        kernel: &Program,
        copies: &BTreeSet<String>,
        taco: bool,
        scope: &mut Vec<String>,
        crumbs: &mut Vec<Crumb>,
        ordinal: &mut usize,
    ) -> Option<ReadFix> {
        match stmt {
            Stmt::Forall { var, body } => {
                scope.push(var.clone());
                crumbs.push(Crumb::Body);
                let found = walk(body, kernel, copies, taco, scope, crumbs, ordinal);
                crumbs.pop();
                scope.pop();
                found
            }
            Stmt::Where { consumer, producer } => {
                crumbs.push(Crumb::Consumer);
                let found = walk(consumer, kernel, copies, taco, scope, crumbs, ordinal);
                crumbs.pop();
                if found.is_some() {
                    return found;
                }
                crumbs.push(Crumb::Producer);
                let found = walk(producer, kernel, copies, taco, scope, crumbs, ordinal);
                crumbs.pop();
                found
            }
            Stmt::Assign { lhs, rhs, .. } => {
                let exempt = copies.contains(&lhs.tensor);
                for access in rhs.accesses() {
                    let my_ordinal = *ordinal;
                    *ordinal += 1;
                    if exempt || access.indices.is_empty() {
                        continue;
                    }
                    let decl = kernel.decl(&access.tensor).expect("reads are declared");
                    let positions: Vec<usize> = decl
                        .mode_order
                        .iter()
                        .map(|&m| {
                            scope
                                .iter()
                                .position(|s| *s == access.indices[m].0)
                                .expect("access variables are bound")
                        })
                        .collect();
                    let concordant = positions.windows(2).all(|w| w[0] <= w[1]);
                    let supported = (0..decl.rank()).all(|level| {
                        decl.formats[level]
                            .supports_read(access.indices[decl.mode_order[level]].1)
                    });
                    if concordant && supported {
                        continue;
                    }
                    let mut keyed: Vec<(usize, String)> = Vec::new();
                    for (var, _) in &access.indices {
                        if !keyed.iter().any(|(_, v)| v == var) {
                            let at = scope
                                .iter()
                                .position(|s| s == var)
                                .expect("access variables are bound");
                            keyed.push((at, var.clone()));
                        }
                    }
                    keyed.sort();
                    let kept: Vec<Protocol> = keyed
                        .iter()
                        .map(|(_, v)| {
                            access
                                .indices
                                .iter()
                                .find(|(av, _)| av == v)
                                .expect("variable comes from this access")
                                .1
                        })
                        .collect();
                    let target: Vec<String> = keyed.into_iter().map(|(_, v)| v).collect();
                    let workspace = decl.kind == TensorKind::Workspace;
                    let mut prefix = 0;
                    if !workspace && !taco {
                        let storage_vars: Vec<&String> = decl
                            .mode_order
                            .iter()
                            .map(|&m| &access.indices[m].0)
                            .collect();
                        while prefix < target.len()
                            && prefix < storage_vars.len()
                            && prefix < scope.len()
                            && *storage_vars[prefix] == target[prefix]
                            && target[prefix] == scope[prefix]
                            && decl.formats[prefix]
                                .supports_read(access.indices[decl.mode_order[prefix]].1)
                        {
                            prefix += 1;
                        }
                    }
                    return Some(ReadFix {
                        ordinal: my_ordinal,
                        tensor: access.tensor.clone(),
                        workspace,
                        prefix,
                        target,
                        kept,
                        pattern: access.clone(),
                        crumbs: crumbs.clone(),
                    });
                }
                None
            }
        }
    }
    walk(
        &kernel.root,
        kernel,
        copies,
        taco,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut 0,
    )
}

/// Replace the read at `ordinal` (counting all right-hand-side accesses in
/// traversal order) with `with`.
fn retarget_read(root: &mut Stmt, ordinal: usize, with: &Access) {
    fn walk(stmt: &mut Stmt, ordinal: usize, with: &Access, next: &mut usize) {
        match stmt {
            Stmt::Forall { body, .. } => walk(body, ordinal, with, next),
            Stmt::Where { consumer, producer } => {
                walk(consumer, ordinal, with, next);
                walk(producer, ordinal, with, next);
            }
            Stmt::Assign { rhs, .. } => rhs.map_accesses(&mut |access| {
                if *next == ordinal {
                    *access = with.clone();
                }
                *next += 1;
            }),
        }
    }
    walk(root, ordinal, with, &mut 0);
}

fn placeholder_stmt() -> Stmt {
    Stmt::Assign {
        lhs: Access {
            tensor: String::new(),
            indices: vec![],
        },
        op: AssignOp::Overwrite,
        rhs: Expr::Literal(0),
    }
}

/// Follow `crumbs` until `binders` loops have been passed, then make the
/// statement there the consumer of a new `where` producing `pass`.
fn wrap_below(stmt: &mut Stmt, crumbs: &[Crumb], binders: usize, pass: Stmt) {
    if binders == 0 {
        let consumer = std::mem::replace(stmt, placeholder_stmt());
        *stmt = Stmt::Where {
            consumer: Box::new(consumer),
            producer: Box::new(pass),
        };
        return;
    }
    match (stmt, crumbs.split_first()) {
        (Stmt::Forall { body, .. }, Some((Crumb::Body, rest))) => {
            wrap_below(body, rest, binders - 1, pass)
        }
        (Stmt::Where { consumer, .. }, Some((Crumb::Consumer, rest))) => {
            wrap_below(consumer, rest, binders, pass)
        }
        (Stmt::Where { producer, .. }, Some((Crumb::Producer, rest))) => {
            wrap_below(producer, rest, binders, pass)
        }
        _ => unreachable!("crumbs diverge from the statement"),
    }
}

/// Follow `crumbs` until `binders` loops have been passed, then make the
/// statement there the producer under a new `where` consumed by `assembly`.
fn drain_below(stmt: &mut Stmt, crumbs: &[Crumb], binders: usize, assembly: Stmt) {
    if binders == 0 {
        let producer = std::mem::replace(stmt, placeholder_stmt());
        *stmt = Stmt::Where {
            consumer: Box::new(assembly),
            producer: Box::new(producer),
        };
        return;
    }
    match (stmt, crumbs.split_first()) {
        (Stmt::Forall { body, .. }, Some((Crumb::Body, rest))) => {
            drain_below(body, rest, binders - 1, assembly)
        }
        (Stmt::Where { consumer, .. }, Some((Crumb::Consumer, rest))) => {
            drain_below(consumer, rest, binders, assembly)
        }
        (Stmt::Where { producer, .. }, Some((Crumb::Producer, rest))) => {
            drain_below(producer, rest, binders, assembly)
        }
        _ => unreachable!("crumbs diverge from the statement"),
    }
}

/// Put `pass` at the top of the consumer side of the `where` producing
/// `tensor` — the whole region where the workspace is live.
fn wrap_birth_consumer(stmt: &mut Stmt, tensor: &str, pass: &Stmt) -> bool {
    match stmt {
        Stmt::Forall { body, .. } => wrap_birth_consumer(body, tensor, pass),
        Stmt::Where { consumer, producer } => {
            if producer.result_tensor() == tensor {
                let inner = std::mem::replace(consumer.as_mut(), placeholder_stmt());
                **consumer = Stmt::Where {
                    consumer: Box::new(inner),
                    producer: Box::new(pass.clone()),
                };
                true
            } else {
                wrap_birth_consumer(consumer, tensor, pass)
                    || wrap_birth_consumer(producer, tensor, pass)
            }
        }
        Stmt::Assign { .. } => false,
    }
}

/// The first assignment writing `tensor`: its left-hand side, the loop
/// variables in scope there, and the path to it.
fn locate_write(root: &Stmt, tensor: &str) -> Option<(Access, Vec<String>, Vec<Crumb>)> {
    fn walk(
        stmt: &Stmt,
        tensor: &str,
        scope: &mut Vec<String>,
        crumbs: &mut Vec<Crumb>,
    ) -> Option<(Access, Vec<String>, Vec<Crumb>)> {
        match stmt {
            Stmt::Forall { var, body } => {
                scope.push(var.clone());
                crumbs.push(Crumb::Body);
                let found = walk(body, tensor, scope, crumbs);
                crumbs.pop();
                scope.pop();
                found
            }
            Stmt::Where { consumer, producer } => {
                crumbs.push(Crumb::Consumer);
                let found = walk(consumer, tensor, scope, crumbs);
                crumbs.pop();
                if found.is_some() {
                    return found;
                }
                crumbs.push(Crumb::Producer);
                let found = walk(producer, tensor, scope, crumbs);
                crumbs.pop();
                found
            }
            Stmt::Assign { lhs, .. } => {
                (lhs.tensor == tensor).then(|| (lhs.clone(), scope.clone(), crumbs.clone()))
            }
        }
    }
    walk(root, tensor, &mut Vec::new(), &mut Vec::new())
}

fn replace_write(stmt: &mut Stmt, tensor: &str, with: &Access) {
    match stmt {
        Stmt::Forall { body, .. } => replace_write(body, tensor, with),
        Stmt::Where { consumer, producer } => {
            replace_write(consumer, tensor, with);
            replace_write(producer, tensor, with);
        }
        Stmt::Assign { lhs, .. } => {
            if lhs.tensor == tensor {
                *lhs = with.clone();
            }
        }
    }
}

/// Per-mode write protocols of the assignment writing `tensor`.
fn write_protocols_of(stmt: &Stmt, tensor: &str) -> Option<Vec<Protocol>> {
    match stmt {
        Stmt::Forall { body, .. } => write_protocols_of(body, tensor),
        Stmt::Where { consumer, producer } => write_protocols_of(consumer, tensor)
            .or_else(|| write_protocols_of(producer, tensor)),
        Stmt::Assign { lhs, .. } => (lhs.tensor == tensor)
            .then(|| lhs.indices.iter().map(|(_, p)| *p).collect()),
    }
}

fn declared_names(program: &Program) -> BTreeSet<String> {
    program.decls.iter().map(|d| d.name.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cinp::{parse, validate};

    fn reformat(text: &str, taco: bool) -> Option<Reformatted> {
        let opts = PipelineOptions {
            taco_mode: taco,
            ..PipelineOptions::default()
        };
        insert_reformatting(&parse(text).unwrap(), &opts)
    }

    #[test]
    fn a_concordant_supported_kernel_passes_through_unchanged() {
        let text = "tensor a {I} format (u)\n\
                    tensor B {I, J} format (u, c)\n\
                    tensor c {J} format (u)\n\
                    forall i, j: a[a i] += B[l i, s j] * c[l j]\n";
        for taco in [false, true] {
            let got = reformat(text, taco).unwrap();
            assert_eq!(got.kernel.to_string(), text);
            assert!(got.prepasses.is_empty());
        }
    }

    #[test]
    fn workspace_formats_shrink_to_what_their_protocols_need() {
        let text = "tensor a {I} format (u)\n\
                    tensor b {I} format (c)\n\
                    tensor w {I} format (h)\n\
                    (forall i: a[a i] = w[s i]) where (forall i: w[a i] = b[s i])\n";
        let got = reformat(text, false).unwrap();
        assert!(got
            .kernel
            .to_string()
            .contains("tensor w {I} format (c)"));
        assert!(validate(&got.kernel).is_empty());
    }

    #[test]
    fn a_transposed_read_and_an_out_of_order_output_both_get_repaired() {
        // Loops run k, i, j but B stores i before k and the output inserts
        // into compressed levels: B is copied into loop order up front, and
        // the kernel accumulates into a hash workspace that an ordered loop
        // nest drains into the output afterwards.
        let text = "tensor A {I, J} format (c, c)\n\
                    tensor B {I, K} format (u, c)\n\
                    tensor C {K, J} format (c, c)\n\
                    forall k, i, j: A[i i, i j] += B[s i, s k] * C[s k, s j]\n";
        let got = reformat(text, false).unwrap();
        assert_eq!(
            got.kernel.to_string(),
            "tensor A {I, J} format (c, c)\n\
             tensor B {I, K} format (u, c)\n\
             tensor C {K, J} format (c, c)\n\
             tensor Br {K, I} format (c, c)\n\
             tensor w {I, J} format (h, h)\n\
             (forall i, j: A[a i, a j] = w[s i, s j]) where \
             ((forall k, i, j: w[i i, i j] += Br[s k, s i] * C[s k, s j]) where \
             (forall k, i: Br[a k, a i] = B[l i, s k]))\n"
        );
        assert!(got.prepasses.is_empty());
        assert!(validate(&got.kernel).is_empty());
        // TACO mode cannot express the rank-2 drain workspace.
        assert!(reformat(text, true).is_none());
    }

    #[test]
    fn a_matching_loop_prefix_keeps_the_drain_workspace_small() {
        let text = "tensor A {I, J} format (u, c)\n\
                    tensor B {I, K} format (c, c)\n\
                    tensor C {K, J} format (c, c)\n\
                    forall i, k, j: A[a i, i j] += B[s i, s k] * C[s k, s j]\n";
        let expected = "tensor A {I, J} format (u, c)\n\
                        tensor B {I, K} format (c, c)\n\
                        tensor C {K, J} format (c, c)\n\
                        tensor w {J} format (h)\n\
                        forall i: (forall j: A[a i, a j] = w[s j]) where \
                        (forall k, j: w[i j] += B[s i, s k] * C[s k, s j])\n";
        for taco in [false, true] {
            let got = reformat(text, taco).unwrap();
            assert_eq!(got.kernel.to_string(), expected);
            assert!(got.prepasses.is_empty());
            assert!(validate(&got.kernel).is_empty());
        }
    }

    #[test]
    fn taco_mode_copies_inputs_in_standalone_passes() {
        let text = "tensor a {I} format (u)\n\
                    tensor B {I, J} format (u, u)\n\
                    tensor c {J} format (u)\n\
                    forall i, j: a[a i] += B[s i, s j] * c[l j]\n";
        let got = reformat(text, true).unwrap();
        assert_eq!(got.prepasses.len(), 1);
        assert_eq!(
            got.prepasses[0].to_string(),
            "tensor B {I, J} format (u, u)\n\
             tensor Br {I, J} format (c, c)\n\
             forall i, j: Br[a i, a j] = B[l i, l j]\n"
        );
        assert_eq!(
            got.kernel.to_string(),
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (u, u)\n\
             tensor c {J} format (u)\n\
             tensor Br {I, J} format (c, c)\n\
             forall i, j: a[a i] += Br[s i, s j] * c[l j]\n"
        );
        for pass in &got.prepasses {
            assert!(validate(pass).is_empty());
        }
        assert!(validate(&got.kernel).is_empty());
    }
}
