//! Static well-formedness checks.
//!
//! `validate` walks one labeled program and reports every rule violation it
//! finds rather than stopping at the first:
//!
//! - loop variables must be bound exactly once on any root-to-leaf path,
//!   every access variable must be bound, and every loop variable must have
//!   an inferable dimension;
//! - a statement's result tensor may not be read on its own right-hand side;
//! - each tensor is written by at most one assignment;
//! - specified protocols must be supported by the level format they touch
//!   (unspecified protocols are left for scheduling to fill in);
//! - appends must land in storage order: writes to an appended level may not
//!   restart for an earlier coordinate once a later one has been emitted.
//!
//! The append-order rule in full: let `S` be the write's variables in
//! storage order and `Q` the variables quantified between the tensor's birth
//! scope (the root for outputs, the producing `where` for workspaces) and
//! the write. A level holding variable `v` may use the append protocol if
//! `v` is fixed above the birth scope, or if every variable of `Q` bound
//! before `v` is pinned by an outer storage level of the same write. Anything
//! else revisits a finished coordinate at run time.

use std::collections::BTreeMap;
use std::fmt;

use super::ast::{Access, LNode, LStmt, LevelFormat, Program, Protocol, TensorDecl};

/// A single rule violation, anchored to the statement that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub site: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "statement {}: {}", self.site, self.message)
    }
}

fn format_name(format: LevelFormat) -> &'static str {
    match format {
        LevelFormat::Uncompressed => "uncompressed",
        LevelFormat::Compressed => "compressed",
        LevelFormat::Hash => "hash",
    }
}

fn protocol_name(protocol: Protocol) -> &'static str {
    match protocol {
        Protocol::Step => "step",
        Protocol::Locate => "locate",
        Protocol::Append => "append",
        Protocol::Insert => "insert",
        Protocol::Unspecified => "unspecified",
    }
}

struct Validator<'a> {
    program: &'a Program,
    var_dims: BTreeMap<String, String>,
    diagnostics: Vec<Diagnostic>,
    /// Assignment sites per written tensor, to flag double writes.
    writes: BTreeMap<String, Vec<usize>>,
}

/// Check a program against the static rules, returning every violation in
/// statement order. An empty result means the program is executable once all
/// of its protocols are specified.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let labeled = program.labeled();
    let mut v = Validator {
        program,
        var_dims: BTreeMap::new(),
        diagnostics: Vec::new(),
        writes: BTreeMap::new(),
    };
    v.infer_dims(&labeled);
    let mut scope = Vec::new();
    let mut birth = BTreeMap::new();
    if let Some(result) = labeled.result_tensor() {
        birth.insert(result.to_string(), 0usize);
    }
    v.walk(&labeled, &mut scope, &mut birth);
    for (tensor, sites) in std::mem::take(&mut v.writes) {
        if sites.len() > 1 {
            v.diagnostics.push(Diagnostic {
                site: sites[1],
                message: format!(
                    "tensor `{tensor}` is written by more than one statement (first at statement {})",
                    sites[0]
                ),
            });
        }
    }
    v.diagnostics
}

impl<'a> Validator<'a> {
    fn push(&mut self, site: usize, message: String) {
        self.diagnostics.push(Diagnostic { site, message });
    }

    /// Best-effort variable-to-dimension map from every access, reporting
    /// unknown tensors and conflicting uses along the way.
    fn infer_dims(&mut self, root: &LStmt) {
        let mut conflicted: Vec<String> = Vec::new();
        let mut stack = vec![root];
        while let Some(l) = stack.pop() {
            match &l.node {
                LNode::Forall { body, .. } => stack.push(body),
                LNode::Where { consumer, producer } => {
                    stack.push(producer);
                    stack.push(consumer);
                }
                LNode::Assign { lhs, rhs, .. } => {
                    let mut accesses = vec![lhs.clone()];
                    accesses.extend(rhs.accesses().into_iter().cloned());
                    for access in accesses {
                        let Some(decl) = self.program.decl(&access.tensor) else {
                            self.push(l.site, format!("unknown tensor `{}`", access.tensor));
                            continue;
                        };
                        for (mode, (var, _)) in access.indices.iter().enumerate() {
                            let dim = &decl.dims[mode];
                            match self.var_dims.get(var) {
                                None => {
                                    self.var_dims.insert(var.clone(), dim.clone());
                                }
                                Some(prev) if prev != dim && !conflicted.contains(var) => {
                                    conflicted.push(var.clone());
                                    self.push(
                                        l.site,
                                        format!(
                                            "variable `{var}` is used with conflicting dimensions {prev} and {dim}"
                                        ),
                                    );
                                }
                                Some(_) => {}
                            }
                        }
                    }
                }
                LNode::Skip => {}
            }
        }
    }

    fn walk(&mut self, l: &LStmt, scope: &mut Vec<String>, birth: &mut BTreeMap<String, usize>) {
        match &l.node {
            LNode::Forall { var, body } => {
                if scope.contains(var) {
                    self.push(l.site, format!("variable `{var}` is already bound"));
                }
                if !self.var_dims.contains_key(var) {
                    self.push(
                        l.site,
                        format!("cannot infer a dimension for loop variable `{var}`"),
                    );
                }
                scope.push(var.clone());
                self.walk(body, scope, birth);
                scope.pop();
            }
            LNode::Where { consumer, producer } => {
                if let Some(result) = producer.result_tensor() {
                    birth.insert(result.to_string(), scope.len());
                }
                self.walk(consumer, scope, birth);
                self.walk(producer, scope, birth);
            }
            LNode::Assign { lhs, rhs, .. } => {
                self.writes
                    .entry(lhs.tensor.clone())
                    .or_default()
                    .push(l.site);
                for access in rhs.accesses() {
                    if access.tensor == lhs.tensor {
                        self.push(
                            l.site,
                            format!(
                                "result tensor `{}` is read on the right-hand side",
                                lhs.tensor
                            ),
                        );
                    }
                    self.check_access(l.site, access, false, scope);
                }
                self.check_access(l.site, lhs, true, scope);
                self.check_append_order(l.site, lhs, scope, birth);
            }
            LNode::Skip => {}
        }
    }

    fn check_access(&mut self, site: usize, access: &Access, write: bool, scope: &[String]) {
        for (var, _) in &access.indices {
            if !scope.iter().any(|s| s == var) {
                self.push(
                    site,
                    format!("unbound variable `{var}` in access to `{}`", access.tensor),
                );
            }
        }
        let Some(decl) = self.program.decl(&access.tensor) else {
            return; // already reported by infer_dims
        };
        for (mode, (_, protocol)) in access.indices.iter().enumerate() {
            if *protocol == Protocol::Unspecified {
                continue;
            }
            let level = decl.level_of_mode(mode);
            let format = decl.formats[level];
            let supported = if write {
                format.supports_write(*protocol)
            } else {
                format.supports_read(*protocol)
            };
            if !supported {
                self.push(
                    site,
                    format!(
                        "level {} of tensor `{}` is {} and does not support {} {}",
                        level + 1,
                        access.tensor,
                        format_name(format),
                        protocol_name(*protocol),
                        if write { "writes" } else { "reads" },
                    ),
                );
            }
        }
    }

    /// Enforce the storage-order rule for append-protocol levels of a write.
    fn check_append_order(
        &mut self,
        site: usize,
        lhs: &Access,
        scope: &[String],
        birth: &BTreeMap<String, usize>,
    ) {
        let Some(decl) = self.program.decl(&lhs.tensor) else {
            return;
        };
        if lhs.indices.len() != decl.rank() {
            return;
        }
        let storage: Vec<&(String, Protocol)> = storage_ordered(decl, lhs);
        let birth_depth = birth.get(&lhs.tensor).copied().unwrap_or(0);
        let quantified = &scope[birth_depth.min(scope.len())..];
        for (level, (var, protocol)) in storage.iter().enumerate() {
            if *protocol != Protocol::Append {
                continue;
            }
            let Some(pos) = quantified.iter().position(|q| q == var) else {
                continue; // fixed above the birth scope: one visit per value
            };
            let outer: Vec<&String> = storage[..level].iter().map(|(v, _)| v).collect();
            if let Some(unpinned) = quantified[..pos].iter().find(|q| !outer.contains(q)) {
                self.push(
                    site,
                    format!(
                        "append order violated for tensor `{}`: level {} appends `{var}` while `{unpinned}` still varies",
                        lhs.tensor,
                        level + 1,
                    ),
                );
            }
        }
    }
}

/// The access's `(variable, protocol)` pairs rearranged from mode order into
/// storage-level order.
fn storage_ordered<'b>(decl: &TensorDecl, access: &'b Access) -> Vec<&'b (String, Protocol)> {
    decl.mode_order
        .iter()
        .map(|&mode| &access.indices[mode])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse;
    use super::*;

    fn messages(text: &str) -> Vec<String> {
        validate(&parse(text).unwrap())
            .into_iter()
            .map(|d| d.message)
            .collect()
    }

    #[test]
    fn clean_program_has_no_diagnostics() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (u, c)\n\
             tensor c {J} format (u)\n\
             forall i, j: a[a i] += B[l i, s j] * c[l j]\n",
        );
        assert!(diags.is_empty(), "{diags:?}");
    }

    #[test]
    fn unspecified_protocols_are_deferred() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (u, c)\n\
             tensor c {J} format (u)\n\
             forall i, j: a[i] += B[i, j] * c[j]\n",
        );
        assert!(diags.is_empty(), "{diags:?}");
    }

    #[test]
    fn step_read_of_uncompressed_level() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {I} format (u)\n\
             forall i: a[a i] += b[s i]\n",
        );
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("does not support step reads"), "{diags:?}");
    }

    #[test]
    fn locate_read_of_compressed_level() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             forall i: a[a i] += b[l i]\n",
        );
        assert_eq!(diags.len(), 1);
        assert!(
            diags[0].contains("does not support locate reads"),
            "{diags:?}"
        );
    }

    #[test]
    fn insert_write_to_compressed_level() {
        let diags = messages(
            "tensor a {I} format (c)\n\
             tensor b {I} format (c)\n\
             forall i: a[i i] += b[s i]\n",
        );
        assert_eq!(diags.len(), 1);
        assert!(
            diags[0].contains("does not support insert writes"),
            "{diags:?}"
        );
    }

    #[test]
    fn append_order_violation_under_transposed_storage() {
        // A stores mode 2 before mode 1, so appending j at the outer level
        // restarts once per i.
        let diags = messages(
            "tensor A {I, J} format (c, c) order (2, 1)\n\
             tensor B {I, J} format (c, c)\n\
             forall i, j: A[a i, a j] += B[s i, s j]\n",
        );
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("append order violated"), "{diags:?}");
    }

    #[test]
    fn append_order_violation_with_interleaved_loop() {
        let diags = messages(
            "tensor A {I, J} format (c, c)\n\
             tensor B {I, K, J} format (c, c, c)\n\
             forall i, k, j: A[a i, a j] += B[s i, s k, s j]\n",
        );
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("append order violated"), "{diags:?}");
        assert!(diags[0].contains("`k` still varies"), "{diags:?}");
    }

    #[test]
    fn workspace_birth_scope_resets_quantification() {
        // w is born under the i loop, so appending k inside the producer is
        // ordered even though i varies outside.
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {K} format (c)\n\
             tensor w {K} format (c)\n\
             forall i: (a[a i] += w[s i]) where (forall k: w[a k] += b[s k])\n",
        );
        // The consumer reads w[s i] with i of dimension I against w's K: one
        // conflicting-dimension diagnostic, but no append-order violation.
        assert!(
            diags.iter().all(|m| !m.contains("append order")),
            "{diags:?}"
        );
    }

    #[test]
    fn output_append_restarting_across_outer_loop() {
        let diags = messages(
            "tensor a {K} format (c)\n\
             tensor B {I, K} format (c, c)\n\
             forall i, k: a[a k] += B[s i, s k]\n",
        );
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("append order violated"), "{diags:?}");
    }

    #[test]
    fn rebound_and_unbound_variables() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {I} format (u)\n\
             forall i: forall i: a[a i] += b[l i]\n",
        );
        assert!(
            diags.iter().any(|m| m.contains("already bound")),
            "{diags:?}"
        );
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {J} format (u)\n\
             forall i: a[a i] += b[l j]\n",
        );
        assert!(
            diags.iter().any(|m| m.contains("unbound variable `j`")),
            "{diags:?}"
        );
    }

    #[test]
    fn loop_variable_without_dimension() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {I} format (u)\n\
             forall i, z: a[a i] += b[l i]\n",
        );
        assert!(
            diags
                .iter()
                .any(|m| m.contains("cannot infer a dimension for loop variable `z`")),
            "{diags:?}"
        );
    }

    #[test]
    fn result_tensor_read_on_rhs() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {I} format (u)\n\
             forall i: a[a i] += a[l i] * b[l i]\n",
        );
        assert!(
            diags
                .iter()
                .any(|m| m.contains("read on the right-hand side")),
            "{diags:?}"
        );
    }

    #[test]
    fn double_write_reported() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {I} format (u)\n\
             forall i: (a[a i] += b[l i]) where (a[a i] += b[l i])\n",
        );
        assert!(
            diags
                .iter()
                .any(|m| m.contains("written by more than one statement")),
            "{diags:?}"
        );
    }

    #[test]
    fn conflicting_dimensions_reported() {
        let diags = messages(
            "tensor a {I} format (u)\n\
             tensor b {J} format (u)\n\
             forall i: a[a i] += b[l i]\n",
        );
        assert!(
            diags
                .iter()
                .any(|m| m.contains("conflicting dimensions I and J")),
            "{diags:?}"
        );
    }
}
