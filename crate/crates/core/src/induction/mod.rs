//! Cost-optimal induction of reward machines from weighted examples.
//!
//! A hypothesis is scored as its length (per edge: one plus the number of
//! literals, or literals only) plus the summed penalty of the examples it does
//! not cover. [`induce`] searches all deterministic machines with at most a
//! given number of intermediate states and returns one of minimal score.
//! [`brute_force_induce`] is an independent exhaustive solver for small
//! instances, used to check it.
//!
//! Learned machines number their states `u0 = 0`, intermediates `1..=k`,
//! `uA = k + 1`, `uR = k + 2`, and pay reward 1 on every edge into `uA`.

mod guards;
mod oracle;
mod search;

use std::fmt;
use std::time::Duration;

use num_traits::Zero;

use crate::error::Result;
use crate::events::{Alphabet, TraceOutcome};
use crate::examples::{Penalty, Rational, WeightedExample};
use crate::machine::{Guard, RewardMachine};

pub use oracle::brute_force_induce;
pub use search::induce;

/// How the length of an edge is charged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EdgeCost {
    /// One for the edge plus one per literal.
    #[default]
    EdgePlusLiterals,
    /// Literal count only.
    LiteralsOnly,
}

impl EdgeCost {
    pub fn base(self) -> u32 {
        match self {
            EdgeCost::EdgePlusLiterals => 1,
            EdgeCost::LiteralsOnly => 0,
        }
    }

    pub fn edge(self, guard: &Guard) -> u32 {
        self.base() + guard.literal_count() as u32
    }
}

impl std::str::FromStr for EdgeCost {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "edge+literals" => Ok(EdgeCost::EdgePlusLiterals),
            "literals" => Ok(EdgeCost::LiteralsOnly),
            other => Err(crate::Error::config(
                "edge_cost",
                format!("expected `edge+literals` or `literals`, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InductionTask {
    pub alphabet: Alphabet,
    /// Consolidated pool.
    pub examples: Vec<WeightedExample>,
    pub max_intermediate_states: usize,
    pub edge_cost: EdgeCost,
    /// Wall-clock budget; `None` searches to completion.
    pub budget: Option<Duration>,
    /// A machine whose score bounds the search from the start, typically the
    /// one in use. The result never scores worse, and a complete search
    /// returns the same machine with or without it.
    pub hint: Option<RewardMachine>,
}

impl InductionTask {
    pub fn new(alphabet: Alphabet, examples: Vec<WeightedExample>, max_intermediate_states: usize) -> Self {
        InductionTask {
            alphabet,
            examples,
            max_intermediate_states,
            edge_cost: EdgeCost::default(),
            budget: Some(Duration::from_secs(60)),
            hint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredHypothesis {
    pub machine: RewardMachine,
    pub length: u32,
    pub penalty: Penalty,
    pub score: Penalty,
    /// Set when the budget ran out before optimality was proved.
    pub suboptimal: bool,
}

impl fmt::Display for ScoredHypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "score {} (length {}, penalty {}){}",
            self.score,
            self.length,
            self.penalty,
            if self.suboptimal { ", suboptimal" } else { "" }
        )
    }
}

/// Whether replaying the body ends in the state class the outcome demands.
pub fn covers(rm: &RewardMachine, ex: &WeightedExample) -> bool {
    let last = rm.final_state(&ex.body);
    match ex.outcome {
        TraceOutcome::Goal => last == rm.accepting(),
        TraceOutcome::DeadEnd => last == rm.rejecting(),
        TraceOutcome::Incomplete => !rm.is_sink(last),
    }
}

pub fn machine_length(rm: &RewardMachine, edge_cost: EdgeCost) -> u32 {
    rm.edges().map(|(_, e)| edge_cost.edge(&e.guard)).sum()
}

pub fn score(rm: &RewardMachine, task: &InductionTask) -> ScoredHypothesis {
    let length = machine_length(rm, task.edge_cost);
    let penalty = task
        .examples
        .iter()
        .filter(|ex| !covers(rm, ex))
        .fold(Penalty::Finite(Rational::zero()), |acc, ex| acc + ex.penalty);
    ScoredHypothesis {
        machine: rm.clone(),
        length,
        penalty,
        score: penalty + Penalty::Finite(Rational::from_integer(length as i128)),
        suboptimal: false,
    }
}
