//! Empirical ranking: run every survivor on one seeded random instance and
//! order the frontier by how many tasks the interpreter performs.

use std::collections::BTreeMap;

use serde_json::json;

use super::{KernelSpec, PipelineOptions, ScheduleError};
use crate::cinp::Program;
use crate::frontier::Frontier;
use crate::interp::{gen_uniform, run, SparseTensor};

/// A frontier member ordered by measured work.
#[derive(Debug, Clone)]
pub struct Ranked {
    /// The member's position in the candidate universe.
    pub origin: usize,
    /// The kernel's text.
    pub program: String,
    /// Co-iteration plus compute tasks executed, pre-passes included.
    pub tasks: usize,
}

impl Ranked {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "origin": self.origin,
            "program": self.program,
            "tasks": self.tasks,
        })
    }
}

/// Execute every frontier member on one uniformly random instance — its
/// pre-passes first, outputs feeding forward — and sort by executed task
/// count, tie-broken by program text.
pub fn empirical_rank(
    frontier: &Frontier,
    prepasses: &[Vec<Program>],
    spec: &KernelSpec,
    opts: &PipelineOptions,
) -> Result<Vec<Ranked>, ScheduleError> {
    let dims: BTreeMap<String, u32> = spec
        .var_dims()
        .values()
        .map(|dim| (dim.clone(), opts.empirical_dims))
        .collect();
    let mut inputs: BTreeMap<String, SparseTensor> = BTreeMap::new();
    for (stride, decl) in spec.decls.iter().enumerate() {
        if decl.name == spec.output.tensor {
            continue;
        }
        inputs.insert(
            decl.name.clone(),
            gen_uniform(
                decl,
                &dims,
                opts.empirical_density,
                opts.seed.wrapping_add(stride as u64),
            ),
        );
    }
    let mut ranked = Vec::with_capacity(frontier.members.len());
    for (member, passes) in frontier.members.iter().zip(prepasses) {
        let origin = member.meta.origin;
        let mut available = inputs.clone();
        let mut tasks = 0usize;
        for pass in passes.iter().chain([&member.program]) {
            let (outputs, trace) =
                run(pass, &available, &dims).map_err(|source| ScheduleError::Run { origin, source })?;
            tasks += trace.coiteration.len() + trace.compute.len();
            available.extend(outputs);
        }
        ranked.push(Ranked {
            origin,
            program: member.program.to_string(),
            tasks,
        });
    }
    ranked.sort_by(|a, b| (a.tasks, &a.program).cmp(&(b.tasks, &b.program)));
    Ok(ranked)
}
