//! The executor and its protocol-blind referent.
//!
//! [`run`] walks a program's labeled tree over concrete tensors. Loops with
//! steppers visit the union of their steppers' supports (or the whole
//! dimension when even all-absent operands leave live work), simplifying
//! the body per present-subset with the same zero annihilation the cost
//! model uses — so the recorded trace equals the derived sets exactly, not
//! just asymptotically. [`eval_dense`] evaluates the same statement with
//! every loop dense and no storage at all, giving the semantics every
//! schedule must reproduce.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::cinp::{Access, AssignOp, Expr, LNode, LStmt, Program, Protocol, Stmt, TensorKind};

use super::{Node, SparseTensor, Value};

/// Which tasks an execution performed. Coiteration tasks are keyed by loop
/// site and the stepper access that visited the coordinate (`None` for the
/// full-dimension walk of a stepper-less loop); compute tasks by assignment
/// site. Tuples list the bound variables at the site, outermost first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskTrace {
    pub coiteration: BTreeSet<(usize, Option<Access>, Vec<(String, u32)>)>,
    pub compute: BTreeSet<(usize, Vec<(String, u32)>)>,
}

impl TaskTrace {
    /// Tasks one stepper (or the dense walk) recorded at one loop site.
    pub fn coiteration_at(
        &self,
        site: usize,
        access: Option<&Access>,
    ) -> BTreeSet<Vec<(String, u32)>> {
        self.coiteration
            .iter()
            .filter(|(s, a, _)| *s == site && a.as_ref() == access)
            .map(|(_, _, task)| task.clone())
            .collect()
    }

    pub fn compute_at(&self, site: usize) -> BTreeSet<Vec<(String, u32)>> {
        self.compute
            .iter()
            .filter(|(s, _)| *s == site)
            .map(|(_, task)| task.clone())
            .collect()
    }

    /// JSON form: sets keyed by site id.
    pub fn to_json(&self) -> serde_json::Value {
        let task_json = |task: &[(String, u32)]| -> serde_json::Value {
            serde_json::Value::Array(
                task.iter()
                    .map(|(v, x)| serde_json::json!([v, x]))
                    .collect(),
            )
        };
        let mut coiteration: BTreeMap<String, Vec<serde_json::Value>> = BTreeMap::new();
        for (site, access, task) in &self.coiteration {
            coiteration.entry(site.to_string()).or_default().push(
                serde_json::json!({
                    "stepper": access.as_ref().map(|a| a.to_string()),
                    "task": task_json(task),
                }),
            );
        }
        let mut compute: BTreeMap<String, Vec<serde_json::Value>> = BTreeMap::new();
        for (site, task) in &self.compute {
            compute
                .entry(site.to_string())
                .or_default()
                .push(task_json(task));
        }
        serde_json::json!({ "coiteration": coiteration, "compute": compute })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("no tensor supplied for input `{tensor}`")]
    MissingInput { tensor: String },
    #[error("no protocol specified for `{var}` in access to `{tensor}`")]
    UnspecifiedProtocol { tensor: String, var: String },
    #[error("index variable `{var}` is used but not bound by an enclosing loop")]
    UnboundVariable { var: String },
    #[error("cannot infer a dimension for loop variable `{var}`")]
    UnknownDimension { var: String },
    #[error(
        "append to tensor `{tensor}` out of order: coordinate {coordinate} after {previous}"
    )]
    AppendOrder {
        tensor: String,
        coordinate: u32,
        previous: u32,
    },
}

/// Execute a program, returning its outputs and the task trace.
pub fn run(
    program: &Program,
    inputs: &BTreeMap<String, SparseTensor>,
    dim_sizes: &BTreeMap<String, u32>,
) -> Result<(BTreeMap<String, SparseTensor>, TaskTrace), RunError> {
    let mut unspecified = None;
    program.root.for_each_access(&mut |access, _| {
        if unspecified.is_none() {
            if let Some((var, _)) = access
                .indices
                .iter()
                .find(|(_, p)| *p == Protocol::Unspecified)
            {
                unspecified = Some(RunError::UnspecifiedProtocol {
                    tensor: access.tensor.clone(),
                    var: var.clone(),
                });
            }
        }
    });
    if let Some(err) = unspecified {
        return Err(err);
    }

    let mut store: BTreeMap<String, SparseTensor> = BTreeMap::new();
    for decl in &program.decls {
        match decl.kind {
            TensorKind::Input => {
                let tensor = inputs
                    .get(&decl.name)
                    .cloned()
                    .ok_or_else(|| RunError::MissingInput {
                        tensor: decl.name.clone(),
                    })?;
                store.insert(decl.name.clone(), tensor);
            }
            TensorKind::Output => {
                store.insert(decl.name.clone(), SparseTensor::zero(decl, dim_sizes));
            }
            TensorKind::Workspace => {}
        }
    }

    let mut var_dims = BTreeMap::new();
    program.root.for_each_access(&mut |access, _| {
        if let Some(decl) = program.decl(&access.tensor) {
            for (mode, (var, _)) in access.indices.iter().enumerate() {
                var_dims
                    .entry(var.clone())
                    .or_insert_with(|| decl.dims[mode].clone());
            }
        }
    });
    let mut where_workspace = BTreeMap::new();
    collect_where_workspaces(&program.labeled(), &mut where_workspace);

    let mut exec = Exec {
        program,
        dim_sizes,
        var_dims,
        where_workspace,
        store,
        trace: TaskTrace::default(),
    };
    let root = program.labeled();
    exec.visit(&root, &mut Vec::new())?;

    let mut outputs = BTreeMap::new();
    for decl in &program.decls {
        if decl.kind == TensorKind::Output {
            if let Some(t) = exec.store.remove(&decl.name) {
                outputs.insert(decl.name.clone(), t);
            }
        }
    }
    Ok((outputs, exec.trace))
}

struct Exec<'p> {
    program: &'p Program,
    dim_sizes: &'p BTreeMap<String, u32>,
    var_dims: BTreeMap<String, String>,
    where_workspace: BTreeMap<usize, String>,
    store: BTreeMap<String, SparseTensor>,
    trace: TaskTrace,
}

impl Exec<'_> {
    fn extent_of(&self, var: &str) -> Result<u32, RunError> {
        let dim = self
            .var_dims
            .get(var)
            .ok_or_else(|| RunError::UnknownDimension {
                var: var.to_string(),
            })?;
        Ok(self.dim_sizes.get(dim).copied().unwrap_or(0))
    }

    fn visit(
        &mut self,
        stmt: &LStmt,
        binding: &mut Vec<(String, u32)>,
    ) -> Result<(), RunError> {
        match &stmt.node {
            LNode::Skip => Ok(()),
            LNode::Forall { var, body } => self.visit_forall(stmt.site, var, body, binding),
            LNode::Where { consumer, producer } => {
                let ws = self.where_workspace.get(&stmt.site).cloned();
                if let Some(ws) = &ws {
                    if let Some(decl) = self.program.decl(ws) {
                        self.store
                            .insert(ws.clone(), SparseTensor::zero(decl, self.dim_sizes));
                    }
                }
                self.visit(producer, binding)?;
                self.visit(consumer, binding)?;
                if let Some(ws) = &ws {
                    self.store.remove(ws);
                }
                Ok(())
            }
            LNode::Assign { lhs, op, rhs } => {
                let value = self.eval(rhs, binding)?;
                self.trace.compute.insert((stmt.site, binding.clone()));
                self.write(lhs, *op, value, binding)
            }
        }
    }

    fn visit_forall(
        &mut self,
        site: usize,
        var: &str,
        body: &LStmt,
        binding: &mut Vec<(String, u32)>,
    ) -> Result<(), RunError> {
        let steppers = body.steppers(var);
        if steppers.is_empty() {
            for v in 0..self.extent_of(var)? {
                binding.push((var.to_string(), v));
                self.trace
                    .coiteration
                    .insert((site, None, binding.clone()));
                self.visit(body, binding)?;
                binding.pop();
            }
            return Ok(());
        }

        let mut supports = Vec::new();
        for access in &steppers {
            supports.push(self.support(access, var, binding)?);
        }
        // If zeroing every stepper still leaves work, the loop walks its
        // whole dimension; otherwise only the union of the supports.
        let mut all_zeroed = body.clone();
        for access in &steppers {
            all_zeroed = all_zeroed.substitute_zero(access);
        }
        let domain: Vec<u32> = if all_zeroed.is_skip() {
            let mut union = BTreeSet::new();
            for support in &supports {
                union.extend(support.iter().copied());
            }
            union.into_iter().collect()
        } else {
            (0..self.extent_of(var)?).collect()
        };

        let mut cases: BTreeMap<u64, LStmt> = BTreeMap::new();
        for v in domain {
            let mut mask = 0u64;
            binding.push((var.to_string(), v));
            for (s, support) in supports.iter().enumerate() {
                if support.contains(&v) {
                    mask |= 1 << s;
                    self.trace.coiteration.insert((
                        site,
                        Some(steppers[s].clone()),
                        binding.clone(),
                    ));
                }
            }
            let case = cases.entry(mask).or_insert_with(|| {
                let mut case = body.clone();
                for (s, access) in steppers.iter().enumerate() {
                    if mask & (1 << s) == 0 {
                        case = case.substitute_zero(access);
                    }
                }
                case
            });
            if !case.is_skip() {
                let case = case.clone();
                self.visit(&case, binding)?;
            }
            binding.pop();
        }
        Ok(())
    }

    /// Coordinates the access can step `var` to under the current binding:
    /// values with a stored continuation through every level, ranging over
    /// unbound variables.
    fn support(
        &self,
        access: &Access,
        var: &str,
        binding: &[(String, u32)],
    ) -> Result<BTreeSet<u32>, RunError> {
        let tensor = self
            .store
            .get(&access.tensor)
            .ok_or_else(|| RunError::MissingInput {
                tensor: access.tensor.clone(),
            })?;
        let bound: BTreeMap<&str, u32> = binding
            .iter()
            .map(|(v, x)| (v.as_str(), *x))
            .collect();
        let mut out = BTreeSet::new();
        collect_support(
            tensor,
            access,
            0,
            &tensor.root,
            &bound,
            var,
            None,
            &mut out,
        );
        Ok(out)
    }

    fn eval(&self, expr: &Expr, binding: &[(String, u32)]) -> Result<Value, RunError> {
        match expr {
            Expr::Literal(v) => Ok(*v),
            Expr::Access(access) => self.read(access, binding),
            Expr::Add(l, r) => Ok(self.eval(l, binding)? + self.eval(r, binding)?),
            Expr::Mul(l, r) => Ok(self.eval(l, binding)? * self.eval(r, binding)?),
        }
    }

    fn coords(
        &self,
        access: &Access,
        binding: &[(String, u32)],
    ) -> Result<Vec<u32>, RunError> {
        access
            .indices
            .iter()
            .map(|(var, _)| {
                binding
                    .iter()
                    .rev()
                    .find(|(b, _)| b == var)
                    .map(|(_, x)| *x)
                    .ok_or_else(|| RunError::UnboundVariable { var: var.clone() })
            })
            .collect()
    }

    fn read(&self, access: &Access, binding: &[(String, u32)]) -> Result<Value, RunError> {
        let coords = self.coords(access, binding)?;
        let tensor = self
            .store
            .get(&access.tensor)
            .ok_or_else(|| RunError::MissingInput {
                tensor: access.tensor.clone(),
            })?;
        Ok(tensor.get(&coords))
    }

    fn write(
        &mut self,
        access: &Access,
        op: AssignOp,
        value: Value,
        binding: &[(String, u32)],
    ) -> Result<(), RunError> {
        let coords = self.coords(access, binding)?;
        let tensor = self
            .store
            .get_mut(&access.tensor)
            .ok_or_else(|| RunError::MissingInput {
                tensor: access.tensor.clone(),
            })?;
        // Appended coordinates must not go backwards at any compressed
        // level along the existing path.
        let mut node = Some(&tensor.root);
        for level in 0..tensor.decl.rank() {
            let mode = tensor.decl.mode_order[level];
            let coord = coords[mode];
            let Some(current) = node else { break };
            if access.indices[mode].1 == Protocol::Append {
                if let Node::Compressed(children) = current {
                    if let Some((previous, _)) = children.last() {
                        if coord < *previous {
                            return Err(RunError::AppendOrder {
                                tensor: access.tensor.clone(),
                                coordinate: coord,
                                previous: *previous,
                            });
                        }
                    }
                }
            }
            node = current.child(coord);
        }
        match op {
            AssignOp::Overwrite => tensor.set(&coords, value),
            AssignOp::IncrementAdd => tensor.add(&coords, value),
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn collect_support(
    tensor: &SparseTensor,
    access: &Access,
    level: usize,
    node: &Node,
    bound: &BTreeMap<&str, u32>,
    var: &str,
    candidate: Option<u32>,
    out: &mut BTreeSet<u32>,
) {
    if level == tensor.decl.rank() {
        if let Some(c) = candidate {
            out.insert(c);
        }
        return;
    }
    let mode = tensor.decl.mode_order[level];
    let level_var = &access.indices[mode].0;
    let fixed = if level_var == var {
        candidate
    } else {
        bound.get(level_var.as_str()).copied()
    };
    match fixed {
        Some(c) => {
            if let Some(child) = node.child(c) {
                collect_support(tensor, access, level + 1, child, bound, var, candidate, out);
            }
        }
        None => {
            for c in node.coords() {
                let next = if level_var == var { Some(c) } else { candidate };
                if level_var == var && out.contains(&c) && candidate.is_none() {
                    continue;
                }
                if let Some(child) = node.child(c) {
                    collect_support(tensor, access, level + 1, child, bound, var, next, out);
                }
            }
        }
    }
}

fn collect_where_workspaces(stmt: &LStmt, out: &mut BTreeMap<usize, String>) {
    match &stmt.node {
        LNode::Forall { body, .. } => collect_where_workspaces(body, out),
        LNode::Where { consumer, producer } => {
            if let Some(ws) = producer.result_tensor() {
                out.insert(stmt.site, ws.to_string());
            }
            collect_where_workspaces(consumer, out);
            collect_where_workspaces(producer, out);
        }
        LNode::Assign { .. } | LNode::Skip => {}
    }
}

/// Evaluate the statement's mathematical content: every loop dense, no
/// formats, no protocols. Returns the output's nonzero values by logical
/// coordinates — what every schedule of the statement must produce.
pub fn eval_dense(
    program: &Program,
    inputs: &BTreeMap<String, SparseTensor>,
    dim_sizes: &BTreeMap<String, u32>,
) -> BTreeMap<Vec<u32>, Value> {
    let mut var_dims = BTreeMap::new();
    program.root.for_each_access(&mut |access, _| {
        if let Some(decl) = program.decl(&access.tensor) {
            for (mode, (var, _)) in access.indices.iter().enumerate() {
                var_dims
                    .entry(var.clone())
                    .or_insert_with(|| decl.dims[mode].clone());
            }
        }
    });
    let mut store: BTreeMap<String, BTreeMap<Vec<u32>, Value>> = inputs
        .iter()
        .map(|(name, t)| (name.clone(), t.to_value_map()))
        .collect();
    let output = program.root.result_tensor().to_string();
    store.insert(output.clone(), BTreeMap::new());
    dense_walk(
        &program.root,
        &mut BTreeMap::new(),
        &mut store,
        &var_dims,
        dim_sizes,
    );
    store
        .remove(&output)
        .unwrap_or_default()
        .into_iter()
        .filter(|(_, v)| *v != 0)
        .collect()
}

fn dense_walk(
    stmt: &Stmt,
    binding: &mut BTreeMap<String, u32>,
    store: &mut BTreeMap<String, BTreeMap<Vec<u32>, Value>>,
    var_dims: &BTreeMap<String, String>,
    dim_sizes: &BTreeMap<String, u32>,
) {
    match stmt {
        Stmt::Forall { var, body } => {
            let extent = var_dims
                .get(var)
                .and_then(|d| dim_sizes.get(d))
                .copied()
                .unwrap_or(0);
            for v in 0..extent {
                binding.insert(var.clone(), v);
                dense_walk(body, binding, store, var_dims, dim_sizes);
            }
            binding.remove(var);
        }
        Stmt::Where { consumer, producer } => {
            store.insert(producer.result_tensor().to_string(), BTreeMap::new());
            dense_walk(producer, binding, store, var_dims, dim_sizes);
            dense_walk(consumer, binding, store, var_dims, dim_sizes);
        }
        Stmt::Assign { lhs, op, rhs } => {
            let value = dense_eval(rhs, binding, store);
            let coords: Vec<u32> = lhs.indices.iter().map(|(v, _)| binding[v]).collect();
            let entry = store
                .get_mut(&lhs.tensor)
                .expect("assigned tensor allocated")
                .entry(coords)
                .or_insert(0);
            match op {
                AssignOp::Overwrite => *entry = value,
                AssignOp::IncrementAdd => *entry += value,
            }
        }
    }
}

fn dense_eval(
    expr: &Expr,
    binding: &BTreeMap<String, u32>,
    store: &BTreeMap<String, BTreeMap<Vec<u32>, Value>>,
) -> Value {
    match expr {
        Expr::Literal(v) => *v,
        Expr::Access(access) => {
            let coords: Vec<u32> = access.indices.iter().map(|(v, _)| binding[v]).collect();
            store
                .get(&access.tensor)
                .and_then(|m| m.get(&coords))
                .copied()
                .unwrap_or(0)
        }
        Expr::Add(l, r) => dense_eval(l, binding, store) + dense_eval(r, binding, store),
        Expr::Mul(l, r) => dense_eval(l, binding, store) * dense_eval(r, binding, store),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{gen_uniform, parse_tensor};
    use super::*;
    use crate::cinp::{parse, validate};
    use crate::costmodel::derive_cost;
    use crate::queries::Database;

    const GUSTAVSON: &str = "tensor A {I, J} format (c, c)\n\
         tensor B {I, K} format (c, c)\n\
         tensor C {K, J} format (c, c)\n\
         tensor w {J} format (h)\n\
         forall i: (forall j: A[a i, a j] = w[s j]) \
         where (forall k, j: w[i j] += B[s i, s k] * C[s k, s j])\n";

    const INNER: &str = "tensor A {I, J} format (c, c)\n\
         tensor B {I, K} format (c, c)\n\
         tensor Ct {J, K} format (c, c)\n\
         forall i, j, k: A[a i, a j] += B[s i, s k] * Ct[s j, s k]\n";

    fn sizes(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|(d, s)| (d.to_string(), *s)).collect()
    }

    fn matrix(
        program: &Program,
        name: &str,
        dims: &BTreeMap<String, u32>,
        entries: &[(u32, u32, Value)],
    ) -> SparseTensor {
        let decl = program.decl(name).unwrap();
        let mut text = String::from("dims");
        for (d, s) in dims {
            text.push_str(&format!(" {d}={s}"));
        }
        text.push('\n');
        for (i, j, v) in entries {
            text.push_str(&format!("{} {} {v}\n", i + 1, j + 1));
        }
        parse_tensor(decl, &text).unwrap()
    }

    #[test]
    fn gustavson_multiplies_two_by_two_matrices() {
        let program = parse(GUSTAVSON).unwrap();
        assert!(validate(&program).is_empty());
        let dims = sizes(&[("I", 2), ("J", 2), ("K", 2)]);
        let b = matrix(&program, "B", &dims, &[(0, 0, 1), (1, 1, 2)]);
        let c = matrix(&program, "C", &dims, &[(0, 1, 3), (1, 0, 4)]);
        let inputs = BTreeMap::from([("B".to_string(), b), ("C".to_string(), c)]);
        let (outputs, _) = run(&program, &inputs, &dims).unwrap();
        let a = &outputs["A"];
        assert_eq!(
            a.to_value_map(),
            BTreeMap::from([(vec![0, 1], 3), (vec![1, 0], 8)])
        );
        assert!(a.root.compressed_sorted());
    }

    #[test]
    fn running_twice_is_idempotent() {
        let program = parse(GUSTAVSON).unwrap();
        let dims = sizes(&[("I", 3), ("J", 3), ("K", 3)]);
        let b = gen_uniform(program.decl("B").unwrap(), &dims, 0.5, 5);
        let c = gen_uniform(program.decl("C").unwrap(), &dims, 0.5, 6);
        let inputs = BTreeMap::from([("B".to_string(), b), ("C".to_string(), c)]);
        let first = run(&program, &inputs, &dims).unwrap();
        let second = run(&program, &inputs, &dims).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn all_zero_inputs_leave_only_dense_walks() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (u, c)\n\
             tensor c {J} format (u)\n\
             forall i, j: a[a i] += B[l i, s j] * c[l j]\n",
        )
        .unwrap();
        let dims = sizes(&[("I", 3), ("J", 3)]);
        let b = SparseTensor::zero(program.decl("B").unwrap(), &dims);
        let c = gen_uniform(program.decl("c").unwrap(), &dims, 1.0, 1);
        let inputs = BTreeMap::from([("B".to_string(), b), ("c".to_string(), c)]);
        let (outputs, trace) = run(&program, &inputs, &dims).unwrap();
        assert_eq!(outputs["a"].to_value_map(), BTreeMap::new());
        assert!(trace.compute.is_empty());
        assert!(trace.coiteration.iter().all(|(_, access, _)| access.is_none()));
        assert_eq!(trace.coiteration.len(), 3);
    }

    #[test]
    fn inner_products_match_gustavson_but_coiterate_more() {
        let gustavson = parse(GUSTAVSON).unwrap();
        let inner = parse(INNER).unwrap();
        assert!(validate(&inner).is_empty());
        let dims = sizes(&[("I", 2), ("J", 2), ("K", 2)]);

        // Same product as the hand test; Ct holds C transposed.
        let b = matrix(&gustavson, "B", &dims, &[(0, 0, 1), (1, 1, 2)]);
        let c = matrix(&gustavson, "C", &dims, &[(0, 1, 3), (1, 0, 4)]);
        let ct = matrix(&inner, "Ct", &dims, &[(1, 0, 3), (0, 1, 4)]);
        let g_inputs = BTreeMap::from([("B".to_string(), b.clone()), ("C".to_string(), c)]);
        let i_inputs = BTreeMap::from([("B".to_string(), b), ("Ct".to_string(), ct)]);
        let (g_out, _) = run(&gustavson, &g_inputs, &dims).unwrap();
        let (i_out, _) = run(&inner, &i_inputs, &dims).unwrap();
        assert_eq!(g_out["A"].to_value_map(), i_out["A"].to_value_map());

        // Disjoint row/column support: inner products still pair them up.
        let b = matrix(&gustavson, "B", &dims, &[(0, 0, 1)]);
        let c = matrix(&gustavson, "C", &dims, &[(1, 1, 5)]);
        let ct = matrix(&inner, "Ct", &dims, &[(1, 1, 5)]);
        let g_inputs = BTreeMap::from([("B".to_string(), b.clone()), ("C".to_string(), c)]);
        let i_inputs = BTreeMap::from([("B".to_string(), b), ("Ct".to_string(), ct)]);
        let (g_out, g_trace) = run(&gustavson, &g_inputs, &dims).unwrap();
        let (i_out, i_trace) = run(&inner, &i_inputs, &dims).unwrap();
        assert_eq!(g_out["A"].to_value_map(), BTreeMap::new());
        assert_eq!(i_out["A"].to_value_map(), BTreeMap::new());
        assert!(i_trace.coiteration.len() > g_trace.coiteration.len());
    }

    #[test]
    fn level_formats_change_no_values_and_no_tasks() {
        let csr = parse(
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (u, c)\n\
             tensor c {J} format (u)\n\
             forall i, j: a[a i] += B[l i, s j] * c[l j]\n",
        )
        .unwrap();
        let hashed = parse(
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (h, h)\n\
             tensor c {J} format (u)\n\
             forall i, j: a[a i] += B[l i, s j] * c[l j]\n",
        )
        .unwrap();
        let dims = sizes(&[("I", 4), ("J", 4)]);
        let b_csr = gen_uniform(csr.decl("B").unwrap(), &dims, 0.5, 9);
        let b_hash = {
            let mut t = SparseTensor::zero(hashed.decl("B").unwrap(), &dims);
            for (coords, v) in b_csr.to_value_map() {
                t.set(&coords, v);
            }
            t
        };
        let c = gen_uniform(csr.decl("c").unwrap(), &dims, 0.8, 10);
        let csr_inputs =
            BTreeMap::from([("B".to_string(), b_csr), ("c".to_string(), c.clone())]);
        let hash_inputs = BTreeMap::from([("B".to_string(), b_hash), ("c".to_string(), c)]);
        let (csr_out, csr_trace) = run(&csr, &csr_inputs, &dims).unwrap();
        let (hash_out, hash_trace) = run(&hashed, &hash_inputs, &dims).unwrap();
        assert_eq!(
            csr_out["a"].to_value_map(),
            hash_out["a"].to_value_map()
        );
        assert_eq!(csr_trace, hash_trace);
    }

    #[test]
    fn out_of_order_appends_are_reported() {
        let program = parse(
            "tensor a {I} format (c)\n\
             tensor B {K, I} format (c, c)\n\
             forall k, i: a[a i] += B[s k, s i]\n",
        )
        .unwrap();
        let dims = sizes(&[("K", 2), ("I", 3)]);
        let b = matrix(&program, "B", &dims, &[(0, 2, 1), (1, 1, 1)]);
        let inputs = BTreeMap::from([("B".to_string(), b)]);
        let err = run(&program, &inputs, &dims).unwrap_err();
        assert_eq!(
            err,
            RunError::AppendOrder {
                tensor: "a".to_string(),
                coordinate: 1,
                previous: 2,
            }
        );
    }

    #[test]
    fn missing_inputs_and_unspecified_protocols_are_reported() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             forall i: a[a i] = b[s i]\n",
        )
        .unwrap();
        let dims = sizes(&[("I", 2)]);
        assert_eq!(
            run(&program, &BTreeMap::new(), &dims).unwrap_err(),
            RunError::MissingInput {
                tensor: "b".to_string()
            }
        );
        let unspecified = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             forall i: a[a i] = b[i]\n",
        )
        .unwrap();
        assert_eq!(
            run(&unspecified, &BTreeMap::new(), &dims).unwrap_err(),
            RunError::UnspecifiedProtocol {
                tensor: "b".to_string(),
                var: "i".to_string(),
            }
        );
    }

    /// The central oracle property: recorded tasks equal the evaluated
    /// derived sets, per site and stepper, and outputs match the dense
    /// referent.
    fn assert_agreement(text: &str, dims: &[(&str, u32)], densities: &[f64], seeds: &[u64]) {
        let program = parse(text).unwrap();
        let derived = derive_cost(&program).unwrap();
        let dim_sizes = sizes(dims);
        for &density in densities {
            for &seed in seeds {
                let mut inputs = BTreeMap::new();
                let mut db = Database::new();
                for (d, s) in dims {
                    db.set_dim(d, *s);
                }
                for (offset, decl) in program.decls.iter().enumerate() {
                    if decl.kind == TensorKind::Input {
                        let t =
                            gen_uniform(decl, &dim_sizes, density, seed + offset as u64);
                        db.insert(&decl.name, t.to_pattern());
                        inputs.insert(decl.name.clone(), t);
                    }
                }
                let (outputs, trace) = run(&program, &inputs, &dim_sizes).unwrap();

                for (site, set) in &derived.compute {
                    assert_eq!(
                        trace.compute_at(*site),
                        set.full_labeled(&db),
                        "compute tasks at site {site} (seed {seed}, density {density})"
                    );
                }
                for (site, _) in &trace.compute {
                    assert!(derived.compute.contains_key(site));
                }
                for ((site, _, access), set) in &derived.coiteration {
                    assert_eq!(
                        trace.coiteration_at(*site, access.as_ref()),
                        set.full_labeled(&db),
                        "coiteration tasks at site {site} (seed {seed}, density {density})"
                    );
                }
                for (site, access, _) in &trace.coiteration {
                    assert!(derived
                        .coiteration
                        .keys()
                        .any(|(s, _, a)| s == site && a.as_ref() == access.as_ref()));
                }

                let output = program.root.result_tensor();
                assert_eq!(
                    outputs[output].to_value_map(),
                    eval_dense(&program, &inputs, &dim_sizes),
                    "output values (seed {seed}, density {density})"
                );
            }
        }
    }

    #[test]
    fn derivation_agrees_with_execution_for_spmv() {
        assert_agreement(
            "tensor a {I} format (u)\n\
             tensor B {I, J} format (u, c)\n\
             tensor c {J} format (u)\n\
             forall i, j: a[a i] += B[l i, s j] * c[l j]\n",
            &[("I", 5), ("J", 5)],
            &[0.0, 0.3, 0.7],
            &[1, 2, 3],
        );
    }

    #[test]
    fn derivation_agrees_with_execution_for_gustavson() {
        assert_agreement(
            GUSTAVSON,
            &[("I", 4), ("J", 4), ("K", 4)],
            &[0.2, 0.5],
            &[1, 2, 3],
        );
    }

    #[test]
    fn derivation_agrees_with_execution_for_inner_products() {
        assert_agreement(
            INNER,
            &[("I", 4), ("J", 4), ("K", 4)],
            &[0.2, 0.5],
            &[4, 5, 6],
        );
    }

    #[test]
    fn derivation_agrees_with_execution_for_outer_products() {
        assert_agreement(
            "tensor A {I, J} format (h, h)\n\
             tensor Bt {K, I} format (c, c)\n\
             tensor C {K, J} format (c, c)\n\
             forall k, i, j: A[i i, i j] += Bt[s k, s i] * C[s k, s j]\n",
            &[("I", 4), ("J", 4), ("K", 4)],
            &[0.2, 0.5],
            &[7, 8],
        );
    }

    #[test]
    fn derivation_agrees_with_execution_for_fused_sddmm() {
        assert_agreement(
            "tensor A {I, J} format (u, c)\n\
             tensor D {I, J} format (c, c)\n\
             tensor B {I, K} format (u, u)\n\
             tensor C {K, J} format (u, u)\n\
             forall i, j, k: A[a i, a j] += D[s i, s j] * B[l i, l k] * C[l k, l j]\n",
            &[("I", 3), ("J", 3), ("K", 3)],
            &[0.3, 0.8],
            &[9, 10],
        );
    }

    #[test]
    fn derivation_agrees_with_execution_for_nonfused_sddmm() {
        assert_agreement(
            "tensor A {I, J} format (u, c)\n\
             tensor D {I, J} format (c, c)\n\
             tensor B {I, K} format (u, u)\n\
             tensor C {K, J} format (u, u)\n\
             tensor T {I, J} format (u, u)\n\
             (forall i, j: A[a i, a j] = D[s i, s j] * T[l i, l j]) \
             where (forall i, j, k: T[i i, i j] += B[l i, l k] * C[l k, l j])\n",
            &[("I", 3), ("J", 3), ("K", 3)],
            &[0.3, 0.8],
            &[11, 12],
        );
    }

    #[test]
    fn derivation_agrees_with_execution_for_stepper_case_splits() {
        assert_agreement(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             tensor c {I} format (c)\n\
             forall i: a[a i] = b[s i] + c[s i]\n",
            &[("I", 8)],
            &[0.0, 0.4, 1.0],
            &[13, 14, 15],
        );
    }

    #[test]
    fn derivation_agrees_with_execution_for_dense_fallbacks() {
        assert_agreement(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             tensor d {I} format (u)\n\
             forall i: a[a i] = b[s i] + d[l i]\n",
            &[("I", 8)],
            &[0.0, 0.4, 1.0],
            &[16, 17],
        );
    }

    #[test]
    fn trace_json_is_keyed_by_site() {
        let program = parse(
            "tensor a {I} format (u)\n\
             tensor b {I} format (c)\n\
             forall i: a[a i] = b[s i]\n",
        )
        .unwrap();
        let dims = sizes(&[("I", 3)]);
        let decl = program.decl("b").unwrap();
        let b = parse_tensor(decl, "dims I=3\n2 7\n").unwrap();
        let inputs = BTreeMap::from([("b".to_string(), b)]);
        let (_, trace) = run(&program, &inputs, &dims).unwrap();
        let json = trace.to_json();
        assert_eq!(
            json["coiteration"]["0"][0]["stepper"],
            serde_json::json!("b[s i]")
        );
        assert_eq!(
            json["compute"]["1"],
            serde_json::json!([[["i", 1]]])
        );
    }
}
