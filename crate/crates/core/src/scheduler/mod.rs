//! The enumerative scheduling pipeline.
//!
//! A *kernel* ([`KernelSpec`]) says only what to compute: one assignment
//! under loops whose order carries no meaning, with every protocol left
//! unspecified. Scheduling enumerates the protocolized programs that compute
//! the same thing and keeps the asymptotically best ones:
//!
//! 1. [`enumerate_rewrites`] — associative/commutative closure of the
//!    right-hand side, with one round of distributing `*` over `+`.
//! 2. [`enumerate_groupings`] — every extraction of subexpressions into
//!    placeholder workspaces behind `where` statements.
//! 3. [`enumerate_nestings`] — every placement of each loop (above a
//!    `where`, or pushed into the sides that use it) times every ordering
//!    of contiguous loop blocks.
//! 4. [`filter_min_depth`] — keep statements whose maximum loop nesting
//!    depth is minimal.
//! 5. [`name_workspaces`] — turn placeholders into declared tensors indexed
//!    by the variables shared below their `where`.
//! 6. [`enumerate_protocols`] — every read protocol combination; writes
//!    follow deterministically from storage order.
//! 7. [`filter_asymptotic`] — derive each candidate's task-set cost and
//!    keep the undominated frontier.
//! 8. [`insert_reformatting`] — make survivors executable: finalize
//!    workspace formats and insert copies for reordered or unsupported
//!    accesses.
//! 9. [`empirical_rank`] — optionally run survivors on seeded uniform
//!    inputs and rank them by executed task count.
//!
//! [`schedule`] runs the stages in order; [`count_universe`] sizes the
//! space the filter would see, without materializing the programs.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use thiserror::Error;

use crate::cinp::{self, Access, AssignOp, Expr, Program, Protocol, Stmt, TensorDecl};
use crate::costmodel::{derive_cost, DeriveError};
use crate::frontier::{build_frontier, Candidate, Frontier};
use crate::interp::RunError;
use crate::queries::Context;

mod group;
mod name;
mod nest;
mod protocol;
mod rank;
mod reformat;
mod rewrite;

pub use group::enumerate_groupings;
pub(crate) use name::fresh;
pub use name::name_workspaces;
pub use nest::{enumerate_nestings, filter_min_depth};
pub use protocol::{enumerate_protocols, protocol_combinations};
pub use rank::{empirical_rank, Ranked};
pub use reformat::{insert_reformatting, Reformatted};
pub use rewrite::enumerate_rewrites;

/// What to compute, independent of any schedule: the declarations, the
/// output access, and the right-hand side of a single assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelSpec {
    pub decls: Vec<TensorDecl>,
    pub output: Access,
    pub expr: Expr,
}

impl KernelSpec {
    /// Read a kernel from a plain loop nest `forall …: out[…] op expr`.
    /// Protocols are stripped and the loop order is forgotten; `where`
    /// statements are rejected, since workspaces are the scheduler's to
    /// introduce.
    pub fn from_program(program: &Program) -> Result<KernelSpec, ScheduleError> {
        if let Some(diagnostic) = cinp::validate(program).into_iter().next() {
            return Err(ScheduleError::Spec(diagnostic.message));
        }
        let mut loops: Vec<String> = Vec::new();
        let mut stmt = &program.root;
        let (lhs, op, rhs) = loop {
            match stmt {
                Stmt::Forall { var, body } => {
                    loops.push(var.clone());
                    stmt = body;
                }
                Stmt::Where { .. } => {
                    return Err(ScheduleError::Spec(
                        "a kernel is a single assignment under loops; \
                         workspaces are introduced by scheduling"
                            .into(),
                    ))
                }
                Stmt::Assign { lhs, op, rhs } => break (lhs, *op, rhs),
            }
        };
        let mut output = lhs.clone();
        strip_protocols(&mut output);
        let mut expr = rhs.clone();
        expr.map_accesses(&mut strip_protocols);

        let rhs_vars: BTreeSet<&str> = expr.accesses().iter().flat_map(|a| a.vars()).collect();
        for (var, _) in &output.indices {
            if !rhs_vars.contains(var.as_str()) {
                return Err(ScheduleError::Spec(format!(
                    "output variable `{var}` does not appear on the right-hand side"
                )));
            }
        }
        for var in &loops {
            if !rhs_vars.contains(var.as_str()) && !output.uses_var(var) {
                return Err(ScheduleError::Spec(format!(
                    "loop variable `{var}` indexes no access"
                )));
            }
        }
        let spec = KernelSpec {
            decls: program.decls.clone(),
            output,
            expr,
        };
        if !spec.reduction_indices().is_empty() && op != AssignOp::IncrementAdd {
            return Err(ScheduleError::Spec(
                "a kernel that sums over variables must assign with `+=`".into(),
            ));
        }
        Ok(spec)
    }

    /// Variables summed over: used on the right-hand side but absent from
    /// the output, in first-appearance order.
    pub fn reduction_indices(&self) -> Vec<String> {
        let mut out = Vec::new();
        for access in self.expr.accesses() {
            for var in access.vars() {
                if !self.output.uses_var(var) && !out.iter().any(|v| v == var) {
                    out.push(var.to_string());
                }
            }
        }
        out
    }

    /// Every index variable: the output's first, then the remaining
    /// right-hand-side variables in first-appearance order.
    pub fn all_indices(&self) -> Vec<String> {
        let mut out: Vec<String> = self.output.vars().map(str::to_string).collect();
        for access in self.expr.accesses() {
            for var in access.vars() {
                if !out.iter().any(|v| v == var) {
                    out.push(var.to_string());
                }
            }
        }
        out
    }

    /// `+=` when the kernel sums over variables, `=` otherwise.
    pub fn op(&self) -> AssignOp {
        if self.reduction_indices().is_empty() {
            AssignOp::Overwrite
        } else {
            AssignOp::IncrementAdd
        }
    }

    /// The unscheduled referent: alphabetically ordered loops, no
    /// workspaces, no protocols. Every candidate the pipeline emits must
    /// compute exactly this.
    pub fn reference_program(&self) -> Program {
        let mut vars = self.all_indices();
        vars.sort();
        let mut root = Stmt::Assign {
            lhs: self.output.clone(),
            op: self.op(),
            rhs: self.expr.clone(),
        };
        for var in vars.into_iter().rev() {
            root = Stmt::Forall {
                var,
                body: Box::new(root),
            };
        }
        let mut program = Program {
            decls: self.decls.clone(),
            root,
        };
        program.infer_kinds();
        program
    }

    /// Dimension of each index variable, read off the declared accesses.
    pub fn var_dims(&self) -> BTreeMap<String, String> {
        self.reference_program()
            .infer_var_dims()
            .expect("kernel dimensions are inferable")
    }
}

/// Knobs for [`schedule`] and [`count_universe`].
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Restrict enumeration to what the TACO compiler's scheduling language
    /// reaches: step-read dense workspaces of rank at most one, locate-only
    /// dense inputs, at most one locate mode per sparse input, and input
    /// reformatting packaged as standalone pre-passes.
    pub taco_mode: bool,
    /// Hard cap on each enumeration stage. Hitting it sets the stage's
    /// `truncated` flag instead of failing, keeping results deterministic.
    pub max_stage_programs: usize,
    /// Seed for the inputs generated during empirical ranking.
    pub seed: u64,
    /// Run the frontier on seeded inputs and rank by executed task count.
    pub empirical: bool,
    /// Extent of every dimension in empirical runs.
    pub empirical_dims: u32,
    /// Density of the generated inputs in empirical runs.
    pub empirical_density: f64,
}

impl Default for PipelineOptions {
    fn default() -> PipelineOptions {
        PipelineOptions {
            taco_mode: false,
            max_stage_programs: 10_000_000,
            seed: 0,
            empirical: false,
            empirical_dims: 32,
            empirical_density: 0.01,
        }
    }
}

/// Size, duration, and truncation of one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: String,
    pub count: usize,
    pub seconds: f64,
    pub truncated: bool,
}

/// Per-stage log of one pipeline run.
#[derive(Debug, Clone, Default)]
pub struct StageTrace {
    pub stages: Vec<StageReport>,
}

impl StageTrace {
    fn record(&mut self, stage: &str, count: usize, started: Instant, truncated: bool) {
        self.stages.push(StageReport {
            stage: stage.to_string(),
            count,
            seconds: started.elapsed().as_secs_f64(),
            truncated,
        });
    }

    /// Stage names, counts, and truncation flags. Durations are left out on
    /// purpose so identical runs serialize identically.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.stages
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "stage": s.stage,
                        "count": s.count,
                        "truncated": s.truncated,
                    })
                })
                .collect(),
        )
    }
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct Scheduled {
    /// Undominated candidates, reformatted to be executable. Each member
    /// keeps the cost and universe position it was filtered with.
    pub frontier: Frontier,
    /// Standalone reformatting passes per frontier member (parallel to
    /// `frontier.members`), to run before the kernel, in order.
    pub prepasses: Vec<Vec<Program>>,
    /// Empirical ranking, when requested.
    pub ranked: Option<Vec<Ranked>>,
    /// Per-stage sizes, durations, and truncation flags.
    pub trace: StageTrace,
}

impl Scheduled {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "frontier": self.frontier.to_json(),
            "prepasses": self
                .prepasses
                .iter()
                .map(|passes| passes.iter().map(Program::to_string).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "ranked": self
                .ranked
                .as_ref()
                .map(|ranked| ranked.iter().map(Ranked::to_json).collect::<Vec<_>>()),
            "stages": self.trace.to_json(),
        })
    }
}

/// Size of the pre-filter search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniverseCount {
    /// Distinct minimum-depth statements, before protocols.
    pub statements: usize,
    /// Protocolized programs those statements expand to.
    pub programs: u128,
    /// Whether a stage cap clipped the count.
    pub truncated: bool,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    /// The input program is not a schedulable kernel.
    #[error("not a schedulable kernel: {0}")]
    Spec(String),
    /// A candidate's cost could not be derived.
    #[error(transparent)]
    Cost(#[from] DeriveError),
    /// Empirical ranking failed to execute a candidate.
    #[error("candidate {origin} failed to run: {source}")]
    Run { origin: usize, source: RunError },
}

/// Run the whole pipeline on a kernel.
pub fn schedule(spec: &KernelSpec, opts: &PipelineOptions) -> Result<Scheduled, ScheduleError> {
    let cap = opts.max_stage_programs.max(1);
    let mut trace = StageTrace::default();

    let started = Instant::now();
    let (exprs, truncated) = enumerate_rewrites(&spec.expr, cap);
    trace.record("rewrites", exprs.len(), started, truncated);

    let started = Instant::now();
    let mut skeletons: BTreeSet<Stmt> = BTreeSet::new();
    let mut truncated = false;
    for expr in &exprs {
        truncated |= bounded_extend(&mut skeletons, enumerate_groupings(spec, expr), cap);
    }
    trace.record("groupings", skeletons.len(), started, truncated);

    let started = Instant::now();
    let vars = spec.all_indices();
    let mut nestings: BTreeSet<Stmt> = BTreeSet::new();
    let mut truncated = false;
    for skeleton in &skeletons {
        truncated |= bounded_extend(&mut nestings, enumerate_nestings(skeleton, &vars), cap);
    }
    trace.record("nestings", nestings.len(), started, truncated);

    let started = Instant::now();
    let shallow = filter_min_depth(&nestings);
    trace.record("min-depth", shallow.len(), started, false);

    let started = Instant::now();
    let mut named: BTreeSet<Program> = BTreeSet::new();
    for stmt in &shallow {
        if let Some(program) = name_workspaces(spec, stmt, opts.taco_mode) {
            named.insert(program);
        }
    }
    trace.record("named", named.len(), started, false);

    let started = Instant::now();
    let mut programs: Vec<Program> = Vec::new();
    let mut truncated = false;
    'proto: for program in &named {
        for candidate in enumerate_protocols(program, opts.taco_mode) {
            if programs.len() >= cap {
                truncated = true;
                break 'proto;
            }
            programs.push(candidate);
        }
    }
    trace.record("protocols", programs.len(), started, truncated);

    let started = Instant::now();
    let context = crate::queries::default_context(&spec.reference_program());
    let frontier = filter_asymptotic(&programs, &context)?;
    trace.record("frontier", frontier.members.len(), started, false);

    let started = Instant::now();
    let mut members = Vec::new();
    let mut prepasses = Vec::new();
    for member in frontier.members {
        let Some(reformatted) = insert_reformatting(&member.program, opts) else {
            continue;
        };
        members.push(Candidate {
            program: reformatted.kernel,
            ..member
        });
        prepasses.push(reformatted.prepasses);
    }
    let frontier = Frontier { members };
    trace.record("reformatted", frontier.members.len(), started, false);

    let ranked = if opts.empirical {
        let started = Instant::now();
        let ranked = empirical_rank(&frontier, &prepasses, spec, opts)?;
        trace.record("ranked", ranked.len(), started, false);
        Some(ranked)
    } else {
        None
    };

    Ok(Scheduled {
        frontier,
        prepasses,
        ranked,
        trace,
    })
}

/// Cost every program and keep the asymptotically undominated ones under
/// the given comparison context.
pub fn filter_asymptotic(programs: &[Program], context: &Context) -> Result<Frontier, DeriveError> {
    let mut candidates = Vec::with_capacity(programs.len());
    for (origin, program) in programs.iter().enumerate() {
        let cost = derive_cost(program)?;
        candidates.push(Candidate::new(program.clone(), cost.total, origin));
    }
    Ok(build_frontier(candidates, context))
}

/// Count the distinct minimum-depth statements and the protocolized
/// programs they expand to, without materializing the programs.
pub fn count_universe(spec: &KernelSpec, opts: &PipelineOptions) -> UniverseCount {
    let cap = opts.max_stage_programs.max(1);
    let (exprs, mut truncated) = enumerate_rewrites(&spec.expr, cap);
    let vars = spec.all_indices();
    let mut min_depth = usize::MAX;
    let mut statements: BTreeSet<Stmt> = BTreeSet::new();
    for expr in &exprs {
        for skeleton in enumerate_groupings(spec, expr) {
            for nesting in enumerate_nestings(&skeleton, &vars) {
                let depth = nesting.depth();
                if depth < min_depth {
                    min_depth = depth;
                    statements.clear();
                }
                if depth == min_depth {
                    if statements.len() >= cap && !statements.contains(&nesting) {
                        truncated = true;
                    } else {
                        statements.insert(nesting);
                    }
                }
            }
        }
    }
    let mut programs: u128 = 0;
    for stmt in &statements {
        if let Some(program) = name_workspaces(spec, stmt, opts.taco_mode) {
            programs += protocol_combinations(&program, opts.taco_mode);
        }
    }
    UniverseCount {
        statements: statements.len(),
        programs,
        truncated,
    }
}

/// Insert until the cap; report whether anything new was dropped.
fn bounded_extend<T: Ord>(
    set: &mut BTreeSet<T>,
    items: impl IntoIterator<Item = T>,
    cap: usize,
) -> bool {
    let mut truncated = false;
    for item in items {
        if set.len() >= cap && !set.contains(&item) {
            truncated = true;
            continue;
        }
        set.insert(item);
    }
    truncated
}

/// Set every protocol of an access to unspecified.
pub(crate) fn strip_protocols(access: &mut Access) {
    for (_, protocol) in &mut access.indices {
        *protocol = Protocol::Unspecified;
    }
}

/// Apply `f` to every access of a statement, left-hand sides included.
pub(crate) fn map_stmt_accesses(stmt: &mut Stmt, f: &mut impl FnMut(&mut Access)) {
    match stmt {
        Stmt::Forall { body, .. } => map_stmt_accesses(body, f),
        Stmt::Where { consumer, producer } => {
            map_stmt_accesses(consumer, f);
            map_stmt_accesses(producer, f);
        }
        Stmt::Assign { lhs, rhs, .. } => {
            f(lhs);
            rhs.map_accesses(f);
        }
    }
}

/// All picks of one element per option list; a single empty pick when
/// `options` is empty.
pub(crate) fn cartesian<T: Clone>(options: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut combos: Vec<Vec<T>> = vec![Vec::new()];
    for opts in options {
        let mut next = Vec::with_capacity(combos.len() * opts.len());
        for combo in &combos {
            for opt in opts {
                let mut extended = combo.clone();
                extended.push(opt.clone());
                next.push(extended);
            }
        }
        combos = next;
    }
    combos
}

/// Placeholder workspaces carry `?`-prefixed names between the grouping and
/// naming stages; real tensors never do.
pub(crate) fn is_placeholder(name: &str) -> bool {
    name.starts_with('?')
}
