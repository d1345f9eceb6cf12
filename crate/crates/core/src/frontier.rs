//! The asymptotic frontier: a streaming Pareto filter over candidate
//! schedules.
//!
//! A candidate is kept only while no other candidate's cost is strictly
//! contained in its own under the comparison context. Processing is
//! incremental — each candidate is compared against the current frontier,
//! not the whole universe — so the number of containment checks stays far
//! below quadratic whenever the frontier stays small.

use std::collections::BTreeMap;

use crate::cinp::Program;
use crate::queries::{apply_context, ucq_contained, Comparison, Context, TaskSet};

/// One schedule under consideration: the program, its simplified cost, and
/// bookkeeping about where in the enumeration it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub program: Program,
    pub cost: TaskSet,
    pub meta: CandidateMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateMeta {
    /// Position in the enumeration that produced the candidate.
    pub origin: usize,
}

impl Candidate {
    pub fn new(program: Program, cost: TaskSet, origin: usize) -> Candidate {
        Candidate {
            program,
            cost: crate::queries::simplify(&cost),
            meta: CandidateMeta { origin },
        }
    }
}

/// The undominated candidates: no member's cost is strictly contained in
/// another member's.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Frontier {
    pub members: Vec<Candidate>,
}

impl Frontier {
    /// JSON form: one object per member with the program text and the
    /// canonical cost.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.members
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "program": c.program.to_string(),
                        "cost": c.cost.to_text(),
                        "origin": c.meta.origin,
                    })
                })
                .collect(),
        )
    }
}

/// Filter a universe of candidates down to the undominated ones.
///
/// Each candidate is compared against the current members: if some
/// member's cost is strictly contained in the candidate's, the candidate
/// is discarded; otherwise it is inserted and every member whose cost
/// strictly contains the candidate's is removed. Candidates equivalent to
/// a member are kept unless they repeat the member's cost text and program
/// exactly.
pub fn build_frontier(
    universe: impl IntoIterator<Item = Candidate>,
    context: &Context,
) -> Frontier {
    let mut members: Vec<Candidate> = Vec::new();
    let mut contexted: Vec<TaskSet> = Vec::new();
    // Schedules share cost expressions constantly; memoizing on canonical
    // text avoids repeating the same containment search.
    let mut memo: BTreeMap<(String, String), Comparison> = BTreeMap::new();
    'universe: for candidate in universe {
        let cost = apply_context(&candidate.cost, context);
        let mut dominated = vec![false; members.len()];
        for (m, member_cost) in contexted.iter().enumerate() {
            match compare_memo(&mut memo, member_cost, &cost) {
                // An existing member does strictly less work.
                Comparison::StrictlyContained => continue 'universe,
                // The candidate does strictly less work than this member.
                Comparison::StrictlyContains => dominated[m] = true,
                Comparison::Equivalent => {
                    if members[m].cost.to_text() == candidate.cost.to_text()
                        && members[m].program.to_string() == candidate.program.to_string()
                    {
                        continue 'universe;
                    }
                }
                Comparison::Incomparable => {}
            }
        }
        let mut keep = dominated.iter().map(|d| !d);
        members.retain(|_| keep.next().unwrap());
        let mut keep = dominated.iter().map(|d| !d);
        contexted.retain(|_| keep.next().unwrap());
        members.push(candidate);
        contexted.push(cost);
    }
    Frontier { members }
}

fn compare_memo(
    memo: &mut BTreeMap<(String, String), Comparison>,
    left: &TaskSet,
    right: &TaskSet,
) -> Comparison {
    let key = (left.to_text(), right.to_text());
    if let Some(verdict) = memo.get(&key) {
        return *verdict;
    }
    let verdict = match (ucq_contained(left, right), ucq_contained(right, left)) {
        (true, true) => Comparison::Equivalent,
        (true, false) => Comparison::StrictlyContained,
        (false, true) => Comparison::StrictlyContains,
        (false, false) => Comparison::Incomparable,
    };
    memo.insert(key, verdict);
    verdict
}

/// Summary numbers for one filtering run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub universe: usize,
    pub undominated: usize,
    pub mean_filter_seconds: f64,
}

pub fn frontier_stats(frontier: &Frontier, universe: usize, filter_seconds: f64) -> Report {
    Report {
        universe,
        undominated: frontier.members.len(),
        mean_filter_seconds: if universe == 0 {
            0.0
        } else {
            filter_seconds / universe as f64
        },
    }
}
