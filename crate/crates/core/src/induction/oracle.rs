//! Exhaustive reference solver for small instances (at most three
//! propositions and two intermediate states).
//!
//! Examples are replayed heaviest first; each unseen (state, label) pair is
//! branched over every successor, fresh intermediate states being numbered in
//! order of first use. The guard cost of a state is the minimum over every set
//! of pairwise exclusive cubes over the whole alphabet that realises the
//! state's observed transitions. Scores are kept as exact rationals with hard
//! violations counted separately.

use std::collections::HashMap;

use num_traits::Zero;

use super::{score, InductionTask, ScoredHypothesis};
use crate::error::{Error, Result};
use crate::events::{Label, TraceOutcome};
use crate::examples::{Penalty, Rational, WeightedExample};
use crate::machine::{Edge, Guard, RewardMachine};

pub const MAX_PROPS: usize = 3;
pub const MAX_INTERMEDIATE: usize = 2;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct Cost {
    hard: u32,
    soft: Rational,
}

impl Cost {
    fn zero() -> Self {
        Cost {
            hard: 0,
            soft: Rational::zero(),
        }
    }

    fn add(self, p: Penalty) -> Self {
        match p {
            Penalty::Finite(r) => Cost {
                hard: self.hard,
                soft: self.soft + r,
            },
            Penalty::Infinite => Cost {
                hard: self.hard + 1,
                soft: self.soft,
            },
        }
    }

    fn plus(self, units: u32) -> Self {
        Cost {
            hard: self.hard,
            soft: self.soft + Rational::from_integer(units as i128),
        }
    }
}

/// All sets of pairwise exclusive guards over `n` propositions.
fn exclusive_families(n: usize) -> Vec<Vec<Guard>> {
    let mut cubes = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let (mut pos, mut neg, mut c) = (Label::EMPTY, Label::EMPTY, code);
        for id in 0..n as u8 {
            match c % 3 {
                1 => pos = pos.with(id),
                2 => neg = neg.with(id),
                _ => {}
            }
            c /= 3;
        }
        cubes.push(Guard::new(pos, neg).expect("disjoint by construction"));
    }
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn rec(cubes: &[Guard], from: usize, stack: &mut Vec<Guard>, out: &mut Vec<Vec<Guard>>) {
        out.push(stack.clone());
        for i in from..cubes.len() {
            if stack.iter().all(|g| g.excludes(&cubes[i])) {
                stack.push(cubes[i]);
                rec(cubes, i + 1, stack, out);
                stack.pop();
            }
        }
    }
    rec(&cubes, 0, &mut stack, &mut out);
    out
}

type Transitions = Vec<(Label, usize)>;
/// Cost and (guard, target) list of one state's cheapest guard assignment.
type Assignment = (u32, Vec<(Guard, usize)>);

struct Oracle<'a> {
    task: &'a InductionTask,
    /// The pool, heaviest examples first.
    examples: &'a [WeightedExample],
    families: Vec<Vec<Guard>>,
    k: usize,
    delta: Vec<Transitions>,
    used: usize,
    /// Cheapest guard assignment per (state, transitions).
    memo: HashMap<(usize, Transitions), Assignment>,
    best: Option<(Cost, RewardMachine)>,
    /// Pass threshold and the smallest bound it cut.
    limit: Cost,
    over: Option<Cost>,
}

const ACC: usize = usize::MAX - 1;
const REJ: usize = usize::MAX;

impl Oracle<'_> {
    /// Cheapest guard set for state `u` given its observed transitions;
    /// `usize` targets other than `u` are successors.
    fn guards(&mut self, u: usize) -> (u32, Vec<(Guard, usize)>) {
        let mut trans = self.delta[u].clone();
        trans.sort();
        if let Some(hit) = self.memo.get(&(u, trans.clone())) {
            return hit.clone();
        }
        let base = self.task.edge_cost;
        let mut best: Option<(u32, Vec<(Guard, usize)>)> = None;
        'families: for fam in &self.families {
            let mut tagged: Vec<(Guard, Option<usize>)> = fam.iter().map(|g| (*g, None)).collect();
            for &(l, t) in &trans {
                let hit = tagged.iter_mut().find(|(g, _)| g.satisfied_by(l));
                match (hit, t == u) {
                    (None, true) => {}
                    (None, false) => continue 'families,
                    (Some(_), true) => continue 'families,
                    (Some((_, tag)), false) => match tag {
                        Some(prev) if *prev != t => continue 'families,
                        _ => *tag = Some(t),
                    },
                }
            }
            // Guards covering no observed label are dropped.
            let kept: Vec<(Guard, usize)> = tagged
                .into_iter()
                .filter_map(|(g, t)| t.map(|t| (g, t)))
                .collect();
            let cost: u32 = kept.iter().map(|(g, _)| base.edge(g)).sum();
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, kept));
            }
        }
        let best = best.expect("full minterms always realise a pattern");
        self.memo.insert((u, trans), best.clone());
        best
    }

    fn guard_total(&mut self) -> u32 {
        (0..=self.used).map(|u| self.guards(u).0).sum()
    }

    fn is_sink(s: usize) -> bool {
        s == ACC || s == REJ
    }

    /// Final state of `steps` from `state` if the partial transition function
    /// already determines it.
    fn settled(&self, mut state: usize, steps: &[Label]) -> Option<usize> {
        for &l in steps {
            if Self::is_sink(state) {
                return Some(state);
            }
            state = match self.delta[state].iter().find(|(m, _)| *m == l) {
                Some(&(_, t)) => t,
                None => return None,
            };
        }
        Some(state)
    }

    fn penalty_at(&self, ex: usize, state: usize) -> Option<Penalty> {
        let e = &self.examples[ex];
        let ok = match e.outcome {
            TraceOutcome::Goal => state == ACC,
            TraceOutcome::DeadEnd => state == REJ,
            TraceOutcome::Incomplete => !Self::is_sink(state),
        };
        (!ok).then_some(e.penalty)
    }

    /// Lower bound: penalties fixed so far, including every later example
    /// whose whole run is already determined, plus current guard costs.
    fn bound(&mut self, ex: usize, step: usize, state: usize, cost: Cost) -> Cost {
        let examples = self.examples;
        let mut total = cost;
        let e = &examples[ex];
        if let Some(end) = self.settled(state, &e.body.steps[step..]) {
            total = self.penalty_at(ex, end).map_or(total, |p| total.add(p));
        }
        for (i, e) in examples.iter().enumerate().skip(ex + 1) {
            if let Some(end) = self.settled(0, &e.body.steps) {
                total = self.penalty_at(i, end).map_or(total, |p| total.add(p));
            }
        }
        total.plus(self.guard_total())
    }

    fn cut(&mut self, lb: Cost) -> bool {
        if self.best.as_ref().is_some_and(|(b, _)| lb >= *b) {
            return true;
        }
        if lb > self.limit {
            self.over = Some(self.over.map_or(lb, |o| o.min(lb)));
            return true;
        }
        false
    }

    fn replay(&mut self, mut ex: usize, mut step: usize, mut state: usize, mut cost: Cost) {
        let examples = self.examples;
        let l = loop {
            if ex == examples.len() {
                let total = cost.plus(self.guard_total());
                if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                    let machine = self.machine();
                    self.best = Some((total, machine));
                }
                return;
            }
            let e = &examples[ex];
            if step == e.body.len() || Self::is_sink(state) {
                if let Some(p) = self.penalty_at(ex, state) {
                    cost = cost.add(p);
                }
                ex += 1;
                step = 0;
                state = 0;
                continue;
            }
            let l = e.body.steps[step];
            match self.delta[state].iter().find(|(m, _)| *m == l) {
                Some(&(_, t)) => {
                    state = t;
                    step += 1;
                }
                None => break l,
            }
        };
        let lb = self.bound(ex, step, state, cost);
        if self.cut(lb) {
            return;
        }
        let mut options: Vec<usize> = (0..=self.used).collect();
        if self.used < self.k {
            options.push(self.used + 1);
        }
        options.extend([ACC, REJ]);
        // Most promising successor first.
        let mut ranked = Vec::with_capacity(options.len());
        for (i, &t) in options.iter().enumerate() {
            self.delta[state].push((l, t));
            ranked.push((self.bound(ex, step + 1, t, cost), i, t));
            self.delta[state].pop();
        }
        ranked.sort();
        for (lb, _, t) in ranked {
            if self.cut(lb) {
                break;
            }
            let fresh = t != ACC && t != REJ && t > self.used;
            if fresh {
                self.used += 1;
            }
            self.delta[state].push((l, t));
            self.replay(ex, step + 1, t, cost);
            self.delta[state].pop();
            if fresh {
                self.used -= 1;
            }
        }
    }

    fn machine(&mut self) -> RewardMachine {
        let used = self.used;
        let id = |t: usize| match t {
            ACC => used + 1,
            REJ => used + 2,
            t => t,
        };
        let mut edges = Vec::new();
        for u in 0..=used {
            for (guard, t) in self.guards(u).1 {
                let to = id(t);
                let reward = if to == used + 1 { 1.0 } else { 0.0 };
                edges.push((u, Edge { guard, to, reward }));
            }
        }
        RewardMachine::new(used + 3, 0, used + 1, used + 2, edges).expect("families are exclusive")
    }
}

/// Globally optimal score by exhaustive search. Refuses instances above
/// [`MAX_PROPS`] propositions or [`MAX_INTERMEDIATE`] intermediate states.
pub fn brute_force_induce(task: &InductionTask) -> Result<ScoredHypothesis> {
    if task.alphabet.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    if task.alphabet.len() > MAX_PROPS || task.max_intermediate_states > MAX_INTERMEDIATE {
        return Err(Error::InstanceTooLarge(format!(
            "{} propositions, {} intermediate states (caps {MAX_PROPS}, {MAX_INTERMEDIATE})",
            task.alphabet.len(),
            task.max_intermediate_states
        )));
    }
    let k = task.max_intermediate_states;
    let mut examples = task.examples.clone();
    examples.sort_by_key(|e| std::cmp::Reverse(e.penalty));
    let mut oracle = Oracle {
        task,
        examples: &examples,
        families: exclusive_families(task.alphabet.len()),
        k,
        delta: vec![Vec::new(); k + 1],
        used: 0,
        memo: HashMap::new(),
        best: None,
        limit: Cost::zero(),
        over: None,
    };
    // Passes under a growing threshold; a pass that finds a machine within
    // its threshold has examined everything cheaper.
    let mut step = 1;
    loop {
        oracle.over = None;
        oracle.replay(0, 0, 0, Cost::zero());
        let done = oracle.best.as_ref().is_some_and(|(b, _)| *b <= oracle.limit);
        match oracle.over {
            Some(o) if !done => {
                oracle.limit = o.max(oracle.limit.plus(step));
                step *= 2;
            }
            _ => break,
        }
    }
    let (_, machine) = oracle.best.expect("the empty assignment is always explored");
    let h = score(&machine, task);
    if h.score.is_infinite() {
        return Err(Error::NoFiniteSolution);
    }
    Ok(h)
}
