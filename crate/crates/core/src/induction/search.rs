//! Branch-and-bound over transition assignments.
//!
//! Example bodies are merged into a prefix tree. A node's machine state is
//! known once its parent's state and the transition on its label are; nodes
//! whose transition is still open wait on their (state, label) pair. The
//! search branches on the open pair with the most example weight waiting on
//! it: stay, any other existing state, a fresh one (ids handed out in order of
//! first use, which removes relabelled duplicates), the accepting or the
//! rejecting state. Fixing a pair places every waiting node and propagates
//! through pairs that are already fixed.
//!
//! Examples ending at a node are settled as soon as the node's state is known,
//! and a node sent to a sink settles its whole subtree. The lower bound adds
//! settled penalties, the cheapest guard families for the partial per-state
//! patterns (a pattern only gains constraints as the search deepens), and for
//! every unsettled node the penalty no state can avoid there.
//!
//! Penalties are scaled to integers by the least common denominator, so
//! scores compare exactly. Hard examples weigh `HARD`, far above any finite
//! score.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::time::Instant;

use num_integer::Integer;

use super::guards::{Family, GuardSolver, PatternKey};
use super::{covers, machine_length, score, InductionTask, ScoredHypothesis};
use crate::error::{Error, Result};
use crate::events::{Label, TraceOutcome};
use crate::examples::Penalty;
use crate::machine::{Edge, Guard, RewardMachine};

const ACC: u8 = 254;
const REJ: u8 = 255;
const UNSET: u8 = 253;
const HARD: i128 = 1 << 90;

const G: usize = 0;
const D: usize = 1;

struct Node {
    children: Vec<(u16, usize)>,
    ends: [i128; 3],
    sub: [i128; 3],
    conflict: i128,
    sub_conflict: i128,
}

impl Node {
    fn new() -> Self {
        Node {
            children: Vec::new(),
            ends: [0; 3],
            sub: [0; 3],
            conflict: 0,
            sub_conflict: 0,
        }
    }

    fn weight(&self) -> i128 {
        self.sub.iter().sum()
    }
}

fn scale_of(task: &InductionTask) -> i128 {
    task.examples
        .iter()
        .filter_map(|e| e.penalty.finite())
        .fold(1i128, |acc, r| acc.lcm(r.denom()))
}

fn weight(p: &Penalty, scale: i128) -> i128 {
    match p {
        Penalty::Finite(r) => r.numer() * (scale / r.denom()),
        Penalty::Infinite => HARD,
    }
}

fn hint_score(rm: &RewardMachine, task: &InductionTask, scale: i128) -> i128 {
    let missed: i128 = task
        .examples
        .iter()
        .filter(|e| !covers(rm, e))
        .map(|e| weight(&e.penalty, scale))
        .sum();
    missed + machine_length(rm, task.edge_cost) as i128 * scale
}

fn build_trie(task: &InductionTask, scale: i128) -> Vec<Node> {
    debug_assert_eq!(TraceOutcome::Goal.index(), G);
    debug_assert_eq!(TraceOutcome::DeadEnd.index(), D);
    let mut nodes = vec![Node::new()];
    let mut edges: HashMap<(usize, u16), usize> = HashMap::new();
    for ex in &task.examples {
        let mut n = 0;
        for l in &ex.body.steps {
            n = match edges.get(&(n, l.bits())) {
                Some(&c) => c,
                None => {
                    let c = nodes.len();
                    nodes.push(Node::new());
                    nodes[n].children.push((l.bits(), c));
                    edges.insert((n, l.bits()), c);
                    c
                }
            };
        }
        nodes[n].ends[ex.outcome.index()] += weight(&ex.penalty, scale);
    }
    // Children always get higher indices, so a reverse sweep is bottom-up.
    for n in (0..nodes.len()).rev() {
        nodes[n].children.sort_unstable();
        let node = &nodes[n];
        let total: i128 = node.ends.iter().sum();
        let conflict = total - node.ends.iter().max().unwrap();
        let mut sub = node.ends;
        let mut sub_conflict = conflict;
        for &(_, c) in &node.children {
            for (s, x) in sub.iter_mut().zip(nodes[c].sub) {
                *s += x;
            }
            sub_conflict += nodes[c].sub_conflict;
        }
        let node = &mut nodes[n];
        node.conflict = conflict;
        node.sub = sub;
        node.sub_conflict = sub_conflict;
    }
    nodes
}

struct Best {
    score: i128,
    text: String,
    machine: RewardMachine,
}

type Pair = (u8, u16);

#[derive(Clone, Default)]
struct Waiting {
    nodes: Vec<usize>,
    weight: i128,
}

enum Undo {
    Placed(usize),
    Waited(Pair),
    Taken(Pair, Waiting),
}

struct Search<'a> {
    task: &'a InductionTask,
    nodes: &'a [Node],
    solver: &'a mut GuardSolver,
    scale: i128,
    k: usize,
    used: usize,
    n_labels: usize,
    node_state: Vec<u8>,
    /// Fixed successor per (state, label), `UNSET` while open.
    target: Vec<u8>,
    pattern: Vec<Vec<(u16, u8)>>,
    waiting: BTreeMap<Pair, Waiting>,
    trail: Vec<Undo>,
    cost: Vec<i128>,
    cost_sum: i128,
    penalty: i128,
    remaining: i128,
    best: Option<Best>,
    /// Score of the hint machine; nothing worse is explored.
    ceiling: i128,
    ticks: u64,
    deadline: Option<Instant>,
    timed_out: bool,
    /// Pass threshold: subtrees whose bound exceeds it are cut.
    limit: i128,
    /// Smallest bound cut by `limit` in the current pass.
    over: Option<i128>,
    /// Stop at the first leaf.
    dive: bool,
    stop: bool,
}

impl Search<'_> {
    fn key(&self, s: usize) -> (PatternKey, Vec<u8>) {
        let mut pat = self.pattern[s].clone();
        pat.sort_unstable();
        let mut targets = vec![s as u8];
        let key = pat
            .iter()
            .map(|&(l, t)| {
                let g = match targets.iter().position(|&x| x == t) {
                    Some(g) => g,
                    None => {
                        targets.push(t);
                        targets.len() - 1
                    }
                };
                (l, g as u8)
            })
            .collect();
        (key, targets)
    }

    fn family(&mut self, s: usize) -> (Rc<Family>, Vec<u8>) {
        let (key, targets) = self.key(s);
        (self.solver.solve(&key), targets)
    }

    fn slot(&self, s: u8, label: u16) -> usize {
        s as usize * self.n_labels + label as usize
    }

    /// Penalty settled by giving node `c` state `t`, and the unavoidable part
    /// of it already counted in `remaining`.
    fn charge(&self, c: usize, t: u8) -> (i128, i128) {
        let n = &self.nodes[c];
        match t {
            ACC => (n.weight() - n.sub[G], n.sub_conflict),
            REJ => (n.weight() - n.sub[D], n.sub_conflict),
            _ => (n.ends[G] + n.ends[D], n.conflict),
        }
    }

    /// Gives node `c` state `t` and follows every transition already fixed.
    fn place(&mut self, c: usize, t: u8) {
        let nodes = self.nodes;
        let mut stack = vec![(c, t)];
        while let Some((c, t)) = stack.pop() {
            let (pen, unavoidable) = self.charge(c, t);
            self.penalty += pen;
            self.remaining -= unavoidable;
            self.node_state[c] = t;
            self.trail.push(Undo::Placed(c));
            if t == ACC || t == REJ {
                continue;
            }
            for &(l, d) in &nodes[c].children {
                match self.target[self.slot(t, l)] {
                    UNSET => {
                        let w = self.waiting.entry((t, l)).or_default();
                        w.nodes.push(d);
                        w.weight += nodes[d].weight();
                        self.trail.push(Undo::Waited((t, l)));
                    }
                    u => stack.push((d, u)),
                }
            }
        }
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().expect("length checked") {
                Undo::Placed(c) => self.node_state[c] = UNSET,
                Undo::Waited(p) => {
                    let w = self.waiting.get_mut(&p).expect("pushed earlier");
                    let d = w.nodes.pop().expect("pushed earlier");
                    w.weight -= self.nodes[d].weight();
                    if w.nodes.is_empty() {
                        self.waiting.remove(&p);
                    }
                }
                Undo::Taken(p, w) => {
                    self.waiting.insert(p, w);
                }
            }
        }
    }

    fn bound(&self) -> i128 {
        self.penalty + self.remaining + self.cost_sum
    }

    fn cut(&mut self, b: i128) -> bool {
        if b > self.ceiling || self.best.as_ref().is_some_and(|best| b > best.score) {
            return true;
        }
        if b > self.limit {
            self.over = Some(self.over.map_or(b, |o| o.min(b)));
            return true;
        }
        false
    }

    fn out_of_time(&mut self) -> bool {
        self.ticks += 1;
        if !self.timed_out && self.ticks.is_multiple_of(256) {
            if let Some(d) = self.deadline {
                self.timed_out = Instant::now() >= d;
            }
        }
        self.timed_out
    }

    fn run(&mut self, limit: i128, dive: bool) {
        (self.limit, self.dive, self.over, self.stop) = (limit, dive, None, false);
        self.used = 0;
        self.pattern.iter_mut().for_each(Vec::clear);
        self.cost.iter_mut().for_each(|c| *c = 0);
        self.cost_sum = 0;
        self.node_state.iter_mut().for_each(|s| *s = UNSET);
        self.target.iter_mut().for_each(|s| *s = UNSET);
        self.waiting.clear();
        self.trail.clear();
        self.penalty = 0;
        self.remaining = self.nodes[0].sub_conflict;
        self.place(0, 0);
        self.dfs();
    }

    fn dfs(&mut self) {
        if self.stop || self.out_of_time() || self.cut(self.bound()) {
            return;
        }
        // Heaviest open pair first; ties towards the smallest pair.
        let next = self
            .waiting
            .iter()
            .max_by(|a, b| a.1.weight.cmp(&b.1.weight).then(b.0.cmp(a.0)))
            .map(|(&p, _)| p);
        match next {
            None => {
                self.leaf();
                self.stop = self.dive;
            }
            Some(p) => self.branch(p),
        }
    }

    fn branch(&mut self, (s8, label): Pair) {
        let s = s8 as usize;
        let waiting = self.waiting.remove(&(s8, label)).expect("chosen from the map");
        let mark = self.trail.len();
        self.trail.push(Undo::Taken((s8, label), waiting.clone()));

        let mut options: Vec<u8> = vec![s8];
        options.extend((0..=self.used as u8).filter(|&u| u != s8));
        let fresh = (self.used < self.k).then_some(self.used as u8 + 1);
        options.extend(fresh);
        options.extend([ACC, REJ]);

        let mut ranked = Vec::with_capacity(options.len());
        for (i, &t) in options.iter().enumerate() {
            self.pattern[s].push((label, t));
            let (fam, _) = self.family(s);
            self.pattern[s].pop();
            let new_cost = fam.cost as i128 * self.scale;
            let charged: i128 = waiting.nodes.iter().map(|&c| self.charge(c, t).0).sum();
            ranked.push((new_cost - self.cost[s] + charged, i, t, new_cost));
        }
        ranked.sort_unstable();

        let slot = self.slot(s8, label);
        for (_, _, t, new_cost) in ranked {
            let (old_cost, old_used) = (self.cost[s], self.used);
            if Some(t) == fresh {
                self.used += 1;
            }
            self.pattern[s].push((label, t));
            self.target[slot] = t;
            self.cost[s] = new_cost;
            self.cost_sum += new_cost - old_cost;
            let saved = (self.penalty, self.remaining);
            let inner = self.trail.len();
            for &c in &waiting.nodes {
                self.place(c, t);
            }

            self.dfs();

            self.undo_to(inner);
            (self.penalty, self.remaining) = saved;
            self.cost_sum -= new_cost - old_cost;
            self.cost[s] = old_cost;
            self.target[slot] = UNSET;
            self.pattern[s].pop();
            self.used = old_used;
            if self.timed_out || self.stop {
                break;
            }
        }
        self.undo_to(mark);
    }

    fn leaf(&mut self) {
        debug_assert_eq!(self.remaining, 0);
        let score = self.penalty + self.cost_sum;
        if score > self.ceiling || self.best.as_ref().is_some_and(|b| score > b.score) {
            return;
        }
        let machine = self.machine();
        let text = machine.format(&self.task.alphabet);
        let better = match &self.best {
            None => true,
            Some(b) => score < b.score || text < b.text,
        };
        if better {
            self.best = Some(Best {
                score,
                text,
                machine,
            });
        }
    }

    fn machine(&mut self) -> RewardMachine {
        let used = self.used;
        let map = |t: u8| match t {
            ACC => used + 1,
            REJ => used + 2,
            t => t as usize,
        };
        let mut edges = Vec::new();
        for u in 0..=used {
            let (fam, targets) = self.family(u);
            for cube in &fam.cubes {
                let to = map(targets[cube.group as usize]);
                let guard = Guard::new(Label::from_bits(cube.pos), Label::from_bits(cube.neg))
                    .expect("cube literals are disjoint");
                let reward = if to == used + 1 { 1.0 } else { 0.0 };
                edges.push((u, Edge { guard, to, reward }));
            }
        }
        edges.sort_by_key(|(u, e)| (*u, e.to, e.guard));
        RewardMachine::new(used + 3, 0, used + 1, used + 2, edges)
            .expect("search only builds deterministic machines")
    }
}

/// Minimal-score machine with at most `task.max_intermediate_states`
/// intermediate states. Equal scores are resolved towards the
/// lexicographically smallest text serialisation.
pub fn induce(task: &InductionTask) -> Result<ScoredHypothesis> {
    if task.alphabet.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    let scale = scale_of(task);
    let nodes = build_trie(task, scale);
    let deadline = task.budget.map(|b| Instant::now() + b);
    let mut solver = GuardSolver::new(task.edge_cost.base());
    let k = task.max_intermediate_states;
    let n_labels = 1usize << task.alphabet.len();
    let mut search = Search {
        task,
        nodes: &nodes,
        solver: &mut solver,
        scale,
        k,
        used: 0,
        n_labels,
        node_state: vec![UNSET; nodes.len()],
        target: vec![UNSET; (k + 1) * n_labels],
        pattern: vec![Vec::new(); k + 1],
        waiting: BTreeMap::new(),
        trail: Vec::new(),
        cost: vec![0; k + 1],
        cost_sum: 0,
        penalty: 0,
        remaining: 0,
        best: None,
        ceiling: task
            .hint
            .as_ref()
            .filter(|h| h.n_states() <= k + 3)
            .map_or(i128::MAX, |h| hint_score(h, task, scale)),
        ticks: 0,
        deadline,
        timed_out: false,
        limit: i128::MAX,
        over: None,
        dive: false,
        stop: false,
    };
    // A greedy dive gives an incumbent; then passes with a rising threshold
    // visit every subtree whose bound is within it. The first pass that
    // reaches a leaf under its threshold has seen every optimum, ties
    // included. The threshold grows by at least half its value per pass so
    // fine-grained penalties do not force one pass per distinct bound.
    search.run(i128::MAX, true);
    let mut limit = 0;
    while !search.timed_out {
        search.run(limit, false);
        let done = search.best.as_ref().is_some_and(|b| b.score <= limit);
        match search.over {
            Some(o) if !done => limit = o.max(limit.saturating_add(scale.max(limit / 2))),
            _ => break,
        }
    }
    let timed_out = search.timed_out;
    // Only a timeout leaves no leaf under a hint's ceiling.
    let machine = match (search.best, &task.hint) {
        (Some(b), _) => b.machine,
        (None, Some(h)) => h.clone(),
        (None, None) => RewardMachine::trivial(),
    };
    let mut h = score(&machine, task);
    if h.score.is_infinite() {
        return Err(Error::NoFiniteSolution);
    }
    h.suboptimal = timed_out;
    Ok(h)
}
