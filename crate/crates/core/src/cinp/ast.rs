//! Abstract syntax for programs, plus the shared structural utilities
//! (zero-annihilation, stepper collection, site labeling) that keep the cost
//! model and the interpreter in exact agreement.

use std::collections::BTreeMap;

/// Storage layout of one tensor level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LevelFormat {
    /// Dense array over the whole dimension.
    Uncompressed,
    /// Sorted list of stored coordinates.
    Compressed,
    /// Unordered coordinate map.
    Hash,
}

impl LevelFormat {
    pub fn letter(self) -> char {
        match self {
            LevelFormat::Uncompressed => 'u',
            LevelFormat::Compressed => 'c',
            LevelFormat::Hash => 'h',
        }
    }

    pub fn from_letter(c: char) -> Option<LevelFormat> {
        match c {
            'u' => Some(LevelFormat::Uncompressed),
            'c' => Some(LevelFormat::Compressed),
            'h' => Some(LevelFormat::Hash),
            _ => None,
        }
    }

    /// Which read protocols the level layout can serve: dense arrays only
    /// locate, sorted lists only step, hash maps both.
    pub fn supports_read(self, p: Protocol) -> bool {
        match self {
            LevelFormat::Uncompressed => p == Protocol::Locate,
            LevelFormat::Compressed => p == Protocol::Step,
            LevelFormat::Hash => p == Protocol::Step || p == Protocol::Locate,
        }
    }

    /// Which write protocols the level layout can serve: sorted lists must be
    /// appended in order, dense arrays and hash maps take either.
    pub fn supports_write(self, p: Protocol) -> bool {
        match self {
            LevelFormat::Uncompressed => p == Protocol::Append || p == Protocol::Insert,
            LevelFormat::Compressed => p == Protocol::Append,
            LevelFormat::Hash => p == Protocol::Append || p == Protocol::Insert,
        }
    }
}

/// How an index variable interacts with a tensor mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    /// Read by coiterating the stored coordinates.
    Step,
    /// Read by random access (absent coordinates read as zero).
    Locate,
    /// Write coordinates in lexicographic order.
    Append,
    /// Write coordinates in any order.
    Insert,
    /// Not yet chosen (scheduler input; the validator skips these).
    Unspecified,
}

impl Protocol {
    pub fn letter(self) -> Option<char> {
        match self {
            Protocol::Step => Some('s'),
            Protocol::Locate => Some('l'),
            Protocol::Append => Some('a'),
            Protocol::Insert => Some('i'),
            Protocol::Unspecified => None,
        }
    }

    pub fn from_letter(c: char) -> Option<Protocol> {
        match c {
            's' => Some(Protocol::Step),
            'l' => Some(Protocol::Locate),
            'a' => Some(Protocol::Append),
            'i' => Some(Protocol::Insert),
            _ => None,
        }
    }

    pub fn is_read(self) -> bool {
        matches!(self, Protocol::Step | Protocol::Locate)
    }

    pub fn is_write(self) -> bool {
        matches!(self, Protocol::Append | Protocol::Insert)
    }
}

/// Role of a tensor within one program. Kinds are inferred, not written: the
/// tensor assigned by the root statement is the output, the tensor assigned
/// by each `where` producer is a workspace, everything else is an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TensorKind {
    Input,
    Output,
    Workspace,
}

/// Declaration of one tensor: dimension names in logical mode order, level
/// formats in storage order, and the storage-to-logical mode permutation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorDecl {
    pub name: String,
    /// Dimension names, one per logical mode.
    pub dims: Vec<String>,
    /// Level formats, one per storage level, outermost first.
    pub formats: Vec<LevelFormat>,
    /// `mode_order[level]` is the logical mode stored at that level.
    pub mode_order: Vec<usize>,
    pub kind: TensorKind,
}

impl TensorDecl {
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Storage level holding the given logical mode.
    pub fn level_of_mode(&self, mode: usize) -> usize {
        self.mode_order
            .iter()
            .position(|&m| m == mode)
            .expect("mode_order is a permutation")
    }

    /// Format of the level holding the given logical mode.
    pub fn format_of_mode(&self, mode: usize) -> LevelFormat {
        self.formats[self.level_of_mode(mode)]
    }

    /// True when any level is stored sparsely (compressed or hash).
    pub fn is_sparse(&self) -> bool {
        self.formats
            .iter()
            .any(|f| matches!(f, LevelFormat::Compressed | LevelFormat::Hash))
    }

    pub fn has_identity_order(&self) -> bool {
        self.mode_order.iter().enumerate().all(|(l, &m)| l == m)
    }
}

/// One tensor access: index variables with their protocols, in logical mode
/// order. Rank-0 tensors have an empty index list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Access {
    pub tensor: String,
    pub indices: Vec<(String, Protocol)>,
}

impl Access {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.indices.iter().map(|(v, _)| v.as_str())
    }

    pub fn uses_var(&self, var: &str) -> bool {
        self.indices.iter().any(|(v, _)| v == var)
    }

    /// True when the access steps the given variable at some mode.
    pub fn steps_var(&self, var: &str) -> bool {
        self.indices
            .iter()
            .any(|(v, p)| v == var && *p == Protocol::Step)
    }
}

/// Index expressions: accesses and integer literals combined with binary
/// addition and multiplication (n-ary source text is right-associated).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Access(Access),
    Literal(i64),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Literal(0))
    }

    /// All accesses in the expression, left to right.
    pub fn accesses(&self) -> Vec<&Access> {
        let mut out = Vec::new();
        self.collect_accesses(&mut out);
        out
    }

    fn collect_accesses<'a>(&'a self, out: &mut Vec<&'a Access>) {
        match self {
            Expr::Access(a) => out.push(a),
            Expr::Literal(_) => {}
            Expr::Add(l, r) | Expr::Mul(l, r) => {
                l.collect_accesses(out);
                r.collect_accesses(out);
            }
        }
    }

    /// Apply `f` to every access in place.
    pub fn map_accesses(&mut self, f: &mut impl FnMut(&mut Access)) {
        match self {
            Expr::Access(a) => f(a),
            Expr::Literal(_) => {}
            Expr::Add(l, r) | Expr::Mul(l, r) => {
                l.map_accesses(f);
                r.map_accesses(f);
            }
        }
    }

    /// Replace every occurrence syntactically equal to `target` with the
    /// literal zero.
    pub fn substitute_zero(&self, target: &Access) -> Expr {
        match self {
            Expr::Access(a) if a == target => Expr::Literal(0),
            Expr::Access(_) | Expr::Literal(_) => self.clone(),
            Expr::Add(l, r) => Expr::Add(
                Box::new(l.substitute_zero(target)),
                Box::new(r.substitute_zero(target)),
            ),
            Expr::Mul(l, r) => Expr::Mul(
                Box::new(l.substitute_zero(target)),
                Box::new(r.substitute_zero(target)),
            ),
        }
    }

    /// Annihilation rules: `x * 0 -> 0`, `0 * x -> 0`, `x + 0 -> x`,
    /// `0 + x -> x`, applied bottom-up.
    pub fn simplify_zeros(&self) -> Expr {
        match self {
            Expr::Access(_) | Expr::Literal(_) => self.clone(),
            Expr::Add(l, r) => {
                let l = l.simplify_zeros();
                let r = r.simplify_zeros();
                if l.is_zero() {
                    r
                } else if r.is_zero() {
                    l
                } else {
                    Expr::Add(Box::new(l), Box::new(r))
                }
            }
            Expr::Mul(l, r) => {
                let l = l.simplify_zeros();
                let r = r.simplify_zeros();
                if l.is_zero() || r.is_zero() {
                    Expr::Literal(0)
                } else {
                    Expr::Mul(Box::new(l), Box::new(r))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssignOp {
    /// `=`
    Overwrite,
    /// `+=`
    IncrementAdd,
}

/// Surface statements. `forall i, j:` sugar parses into nested single-index
/// loops; the printer merges maximal chains back.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stmt {
    Forall {
        var: String,
        body: Box<Stmt>,
    },
    Where {
        consumer: Box<Stmt>,
        producer: Box<Stmt>,
    },
    Assign {
        lhs: Access,
        op: AssignOp,
        rhs: Expr,
    },
}

impl Stmt {
    /// Tensor this statement ultimately assigns: the left-hand side of the
    /// assignment reached by following consumers.
    pub fn result_tensor(&self) -> &str {
        match self {
            Stmt::Forall { body, .. } => body.result_tensor(),
            Stmt::Where { consumer, .. } => consumer.result_tensor(),
            Stmt::Assign { lhs, .. } => &lhs.tensor,
        }
    }

    /// Visit every access with its write/read position.
    pub fn for_each_access<'a>(&'a self, f: &mut impl FnMut(&'a Access, bool)) {
        match self {
            Stmt::Forall { body, .. } => body.for_each_access(f),
            Stmt::Where { consumer, producer } => {
                consumer.for_each_access(f);
                producer.for_each_access(f);
            }
            Stmt::Assign { lhs, rhs, .. } => {
                f(lhs, true);
                for a in rhs.accesses() {
                    f(a, false);
                }
            }
        }
    }

    /// Maximum forall nesting depth.
    pub fn depth(&self) -> usize {
        match self {
            Stmt::Forall { body, .. } => 1 + body.depth(),
            Stmt::Where { consumer, producer } => consumer.depth().max(producer.depth()),
            Stmt::Assign { .. } => 0,
        }
    }
}

/// Statement tree with stable site labels. Labels are assigned pre-order
/// (consumer before producer) and survive case-splitting substitution, so the
/// cost model and the interpreter key their task sets identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LStmt {
    pub site: usize,
    pub node: LNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LNode {
    Forall {
        var: String,
        body: Box<LStmt>,
    },
    Where {
        consumer: Box<LStmt>,
        producer: Box<LStmt>,
    },
    Assign {
        lhs: Access,
        op: AssignOp,
        rhs: Expr,
    },
    /// Canonical empty statement produced by zero-simplification.
    Skip,
}

impl LStmt {
    pub fn is_skip(&self) -> bool {
        matches!(self.node, LNode::Skip)
    }

    pub fn result_tensor(&self) -> Option<&str> {
        match &self.node {
            LNode::Forall { body, .. } => body.result_tensor(),
            LNode::Where { consumer, .. } => consumer.result_tensor(),
            LNode::Assign { lhs, .. } => Some(&lhs.tensor),
            LNode::Skip => None,
        }
    }

    /// Distinct step-protocol accesses of `var` in read position anywhere in
    /// this subtree, in first-occurrence order.
    pub fn steppers(&self, var: &str) -> Vec<Access> {
        let mut out: Vec<Access> = Vec::new();
        self.visit_reads(&mut |a| {
            if a.steps_var(var) && !out.contains(a) {
                out.push(a.clone());
            }
        });
        out
    }

    fn visit_reads(&self, f: &mut impl FnMut(&Access)) {
        match &self.node {
            LNode::Forall { body, .. } => body.visit_reads(f),
            LNode::Where { consumer, producer } => {
                consumer.visit_reads(f);
                producer.visit_reads(f);
            }
            LNode::Assign { rhs, .. } => {
                for a in rhs.accesses() {
                    f(a);
                }
            }
            LNode::Skip => {}
        }
    }

    /// True when the access still occurs in read position in this subtree.
    pub fn contains_read(&self, target: &Access) -> bool {
        let mut found = false;
        self.visit_reads(&mut |a| {
            if a == target {
                found = true;
            }
        });
        found
    }

    /// Substitute zero for every read of `target` and re-simplify, keeping
    /// site labels: assignments whose right side collapses to zero become
    /// `Skip`, loops over `Skip` become `Skip`, and a `where` whose consumer
    /// is `Skip` becomes `Skip` (a skipped producer is kept: the workspace
    /// must still be reset).
    pub fn substitute_zero(&self, target: &Access) -> LStmt {
        let node = match &self.node {
            LNode::Forall { var, body } => {
                let body = body.substitute_zero(target);
                if body.is_skip() {
                    LNode::Skip
                } else {
                    LNode::Forall {
                        var: var.clone(),
                        body: Box::new(body),
                    }
                }
            }
            LNode::Where { consumer, producer } => {
                let consumer = consumer.substitute_zero(target);
                let producer = producer.substitute_zero(target);
                if consumer.is_skip() {
                    LNode::Skip
                } else {
                    LNode::Where {
                        consumer: Box::new(consumer),
                        producer: Box::new(producer),
                    }
                }
            }
            LNode::Assign { lhs, op, rhs } => {
                let rhs = rhs.substitute_zero(target).simplify_zeros();
                if rhs.is_zero() {
                    LNode::Skip
                } else {
                    LNode::Assign {
                        lhs: lhs.clone(),
                        op: *op,
                        rhs,
                    }
                }
            }
            LNode::Skip => LNode::Skip,
        };
        LStmt {
            site: self.site,
            node,
        }
    }
}

/// A whole program: declarations plus the root statement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Program {
    pub decls: Vec<TensorDecl>,
    pub root: Stmt,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&TensorDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    /// Recompute tensor kinds from the statement structure: the root result
    /// is the output, each producer result is a workspace, the rest inputs.
    pub fn infer_kinds(&mut self) {
        let output = self.root.result_tensor().to_string();
        let mut workspaces = Vec::new();
        collect_producer_results(&self.root, &mut workspaces);
        for d in &mut self.decls {
            d.kind = if workspaces.contains(&d.name) {
                TensorKind::Workspace
            } else if d.name == output {
                TensorKind::Output
            } else {
                TensorKind::Input
            };
        }
    }

    /// Dimension of every index variable, inferred from the declared mode
    /// dimensions of the accesses using it. Errors on conflicting or missing
    /// uses.
    pub fn infer_var_dims(&self) -> Result<BTreeMap<String, String>, String> {
        let mut dims: BTreeMap<String, String> = BTreeMap::new();
        let mut err = None;
        self.root.for_each_access(&mut |access, _| {
            if err.is_some() {
                return;
            }
            let Some(decl) = self.decl(&access.tensor) else {
                err = Some(format!("unknown tensor `{}`", access.tensor));
                return;
            };
            for (mode, (var, _)) in access.indices.iter().enumerate() {
                let dim = &decl.dims[mode];
                match dims.get(var) {
                    None => {
                        dims.insert(var.clone(), dim.clone());
                    }
                    Some(prev) if prev != dim => {
                        err = Some(format!(
                            "index variable `{var}` used with conflicting dimensions `{prev}` and `{dim}`"
                        ));
                    }
                    Some(_) => {}
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(dims),
        }
    }

    /// Assign site labels pre-order (consumer before producer).
    pub fn labeled(&self) -> LStmt {
        let mut next = 0;
        label(&self.root, &mut next)
    }
}

fn collect_producer_results(s: &Stmt, out: &mut Vec<String>) {
    match s {
        Stmt::Forall { body, .. } => collect_producer_results(body, out),
        Stmt::Where { consumer, producer } => {
            out.push(producer.result_tensor().to_string());
            collect_producer_results(consumer, out);
            collect_producer_results(producer, out);
        }
        Stmt::Assign { .. } => {}
    }
}

fn label(s: &Stmt, next: &mut usize) -> LStmt {
    let site = *next;
    *next += 1;
    let node = match s {
        Stmt::Forall { var, body } => LNode::Forall {
            var: var.clone(),
            body: Box::new(label(body, next)),
        },
        Stmt::Where { consumer, producer } => {
            let consumer = label(consumer, next);
            let producer = label(producer, next);
            LNode::Where {
                consumer: Box::new(consumer),
                producer: Box::new(producer),
            }
        }
        Stmt::Assign { lhs, op, rhs } => LNode::Assign {
            lhs: lhs.clone(),
            op: *op,
            rhs: rhs.clone(),
        },
    };
    LStmt { site, node }
}

