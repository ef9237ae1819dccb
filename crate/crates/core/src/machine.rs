//! Reward machines: guarded deterministic automata over labels with absorbing
//! accepting and rejecting states.
//!
//! Besides crisp traversal this module carries the belief filter over machine
//! states (each state's outgoing guards are marginalised over the propositions
//! they mention), the distance-to-accept potential and the belief-weighted
//! shaping reward derived from it.
//!
//! Text format: a header `states N u0 uA uR`, then one edge per line
//! `from to reward lits` where `lits` is a comma-separated list of `name` or
//! `!name`, or `-` for the always-true guard. `#` lines are comments.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::events::{Alphabet, Label, ProbLabel, PropId, SymbolicTrace, TraceOutcome};

pub type StateId = usize;

/// Conjunction of literals: all of `positive` present, none of `negative`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Guard {
    positive: Label,
    negative: Label,
}

impl Guard {
    /// Always-true guard.
    pub const TRUE: Guard = Guard {
        positive: Label::EMPTY,
        negative: Label::EMPTY,
    };

    pub fn new(positive: Label, negative: Label) -> Result<Self> {
        if !positive.intersection(negative).is_empty() {
            return Err(Error::IllFormedMachine(
                "guard contains a literal and its negation".into(),
            ));
        }
        Ok(Guard { positive, negative })
    }

    pub fn positive(&self) -> Label {
        self.positive
    }

    pub fn negative(&self) -> Label {
        self.negative
    }

    pub fn literal_count(&self) -> usize {
        self.positive.len() + self.negative.len()
    }

    /// Propositions mentioned by the guard.
    pub fn props(&self) -> Label {
        self.positive.union(self.negative)
    }

    pub fn satisfied_by(&self, label: Label) -> bool {
        self.positive.is_subset(label) && label.intersection(self.negative).is_empty()
    }

    /// Syntactic mutual exclusion: the guards share a complementary literal.
    pub fn excludes(&self, other: &Guard) -> bool {
        !self.positive.intersection(other.negative).is_empty()
            || !self.negative.intersection(other.positive).is_empty()
    }

    pub fn display(&self, alphabet: &Alphabet) -> String {
        if self.literal_count() == 0 {
            return "-".into();
        }
        let mut lits = Vec::with_capacity(self.literal_count());
        for id in self.props().ids() {
            if self.positive.contains(id) {
                lits.push(alphabet.name(id).to_string());
            } else {
                lits.push(format!("!{}", alphabet.name(id)));
            }
        }
        lits.join(",")
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let text = text.trim();
        if text == "-" {
            return Ok(Guard::TRUE);
        }
        let mut pos = Label::EMPTY;
        let mut neg = Label::EMPTY;
        for lit in text.split(',') {
            let lit = lit.trim();
            match lit.strip_prefix('!') {
                Some(name) => neg = neg.with(alphabet.lookup(name)?),
                None => pos = pos.with(alphabet.lookup(lit)?),
            }
        }
        Guard::new(pos, neg)
    }
}

/// True iff `label`, read as a truth assignment, satisfies `guard`.
pub fn satisfies(label: Label, guard: &Guard) -> bool {
    guard.satisfied_by(label)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub guard: Guard,
    pub to: StateId,
    pub reward: f64,
}

/// Deterministic reward machine. Labels matching no guard self-loop with
/// reward 0; the accepting and rejecting states are absorbing.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardMachine {
    n_states: usize,
    initial: StateId,
    accepting: StateId,
    rejecting: StateId,
    edges: Vec<Vec<Edge>>,
}

impl RewardMachine {
    pub fn new(
        n_states: usize,
        initial: StateId,
        accepting: StateId,
        rejecting: StateId,
        edges: Vec<(StateId, Edge)>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::IllFormedMachine(msg));
        if initial >= n_states || accepting >= n_states || rejecting >= n_states {
            return bad(format!("distinguished state out of range 0..{n_states}"));
        }
        if accepting == rejecting {
            return bad("accepting and rejecting states coincide".into());
        }
        let mut table: Vec<Vec<Edge>> = vec![Vec::new(); n_states];
        for (from, edge) in edges {
            if from >= n_states || edge.to >= n_states {
                return bad(format!("edge {from}->{} out of range", edge.to));
            }
            if from == accepting || from == rejecting {
                return bad(format!("absorbing state {from} has an outgoing edge"));
            }
            if !edge.reward.is_finite() {
                return bad(format!("edge {from}->{} has a non-finite reward", edge.to));
            }
            table[from].push(edge);
        }
        for (u, out) in table.iter().enumerate() {
            for (i, a) in out.iter().enumerate() {
                for b in &out[i + 1..] {
                    if !a.guard.excludes(&b.guard) {
                        return bad(format!(
                            "state {u}: guards towards {} and {} are not mutually exclusive",
                            a.to, b.to
                        ));
                    }
                }
            }
        }
        Ok(RewardMachine {
            n_states,
            initial,
            accepting,
            rejecting,
            edges: table,
        })
    }

    /// Three states {u0, uA, uR} and no edges: every trace stays in u0.
    pub fn trivial() -> Self {
        RewardMachine::new(3, 0, 1, 2, Vec::new()).expect("valid")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn accepting(&self) -> StateId {
        self.accepting
    }

    pub fn rejecting(&self) -> StateId {
        self.rejecting
    }

    pub fn edges_from(&self, u: StateId) -> &[Edge] {
        &self.edges[u]
    }

    pub fn edges(&self) -> impl Iterator<Item = (StateId, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .flat_map(|(u, out)| out.iter().map(move |e| (u, e)))
    }

    pub fn is_sink(&self, u: StateId) -> bool {
        u == self.accepting || u == self.rejecting
    }

    /// Propositions mentioned by any guard.
    pub fn relevant_props(&self) -> Label {
        self.edges()
            .fold(Label::EMPTY, |acc, (_, e)| acc.union(e.guard.props()))
    }

    fn state_props(&self, u: StateId) -> Label {
        self.edges[u]
            .iter()
            .fold(Label::EMPTY, |acc, e| acc.union(e.guard.props()))
    }

    /// Successor and reward of one transition.
    pub fn step(&self, state: StateId, label: Label) -> Result<(StateId, f64)> {
        if state >= self.n_states {
            return Err(Error::IllFormedMachine(format!("no state {state}")));
        }
        let mut hit: Option<&Edge> = None;
        for e in &self.edges[state] {
            if e.guard.satisfied_by(label) {
                if hit.is_some() {
                    return Err(Error::IllFormedMachine(format!(
                        "state {state}: two guards satisfied by one label"
                    )));
                }
                hit = Some(e);
            }
        }
        Ok(hit.map_or((state, 0.0), |e| (e.to, e.reward)))
    }

    /// Successor only. Determinism is checked at construction, so the first
    /// satisfied guard is the only one.
    pub fn next_state(&self, state: StateId, label: Label) -> StateId {
        self.edges[state]
            .iter()
            .find(|e| e.guard.satisfied_by(label))
            .map_or(state, |e| e.to)
    }

    /// States visited on `trace`, starting with the initial state.
    pub fn traverse(&self, trace: &SymbolicTrace) -> Result<Vec<StateId>> {
        let mut states = Vec::with_capacity(trace.len() + 1);
        let mut u = self.initial;
        states.push(u);
        for &l in &trace.steps {
            u = self.step(u, l)?.0;
            states.push(u);
        }
        Ok(states)
    }

    pub fn final_state(&self, trace: &SymbolicTrace) -> StateId {
        trace
            .steps
            .iter()
            .fold(self.initial, |u, &l| self.next_state(u, l))
    }

    /// Outcome class of the state `trace` ends in.
    pub fn classify(&self, trace: &SymbolicTrace) -> TraceOutcome {
        match self.final_state(trace) {
            u if u == self.accepting => TraceOutcome::Goal,
            u if u == self.rejecting => TraceOutcome::DeadEnd,
            _ => TraceOutcome::Incomplete,
        }
    }

    pub fn format(&self, alphabet: &Alphabet) -> String {
        let mut out = format!(
            "states {} {} {} {}\n",
            self.n_states, self.initial, self.accepting, self.rejecting
        );
        for (u, e) in self.edges() {
            out.push_str(&format!(
                "{} {} {} {}\n",
                u,
                e.to,
                e.reward,
                e.guard.display(alphabet)
            ));
        }
        out
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing `states` header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 || h[0] != "states" {
            return Err(Error::parse(hline, "expected `states N u0 uA uR`"));
        }
        let num = |s: &str, line| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(line, format!("expected a state id, got `{s}`")))
        };
        let (n, u0, ua, ur) = (
            num(h[1], hline)?,
            num(h[2], hline)?,
            num(h[3], hline)?,
            num(h[4], hline)?,
        );
        let mut edges = Vec::new();
        for (line, text) in lines {
            let f: Vec<&str> = text.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::parse(line, "expected `from to reward lits`"));
            }
            let reward = f[2]
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad reward `{}`", f[2])))?;
            let guard = Guard::parse(f[3], alphabet).map_err(|e| Error::parse(line, e.to_string()))?;
            edges.push((
                num(f[0], line)?,
                Edge {
                    guard,
                    to: num(f[1], line)?,
                    reward,
                },
            ));
        }
        RewardMachine::new(n, u0, ua, ur, edges)
    }
}

/// Categorical distribution over machine states.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    pub fn new(probs: Vec<f64>) -> Self {
        BeliefVector(probs)
    }

    pub fn one_hot(n: usize, u: StateId) -> Self {
        let mut v = vec![0.0; n];
        v[u] = 1.0;
        BeliefVector(v)
    }

    pub fn initial(rm: &RewardMachine) -> Self {
        BeliefVector::one_hot(rm.n_states(), rm.initial())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn get(&self, u: StateId) -> f64 {
        self.0[u]
    }

    /// The state carrying all the mass, if any.
    pub fn as_one_hot(&self) -> Option<StateId> {
        let mut found = None;
        for (u, &p) in self.0.iter().enumerate() {
            if p == 1.0 && found.is_none() {
                found = Some(u);
            } else if p != 0.0 {
                return None;
            }
        }
        found
    }
}

/// One filtering step: pushes every state's mass through the distribution of
/// labels implied by `pl`. Output is a distribution whenever the input is.
pub fn belief_step(rm: &RewardMachine, belief: &BeliefVector, pl: &ProbLabel) -> BeliefVector {
    let mut out = vec![0.0; rm.n_states()];
    for (u, &mass) in belief.as_slice().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        if rm.is_sink(u) || rm.edges_from(u).is_empty() {
            out[u] += mass;
            continue;
        }
        let relevant = rm.state_props(u).bits();
        // Submask enumeration over the propositions this state's guards read.
        let mut sub = relevant;
        loop {
            let label = Label::from_bits(sub);
            let mut p = mass;
            let mut rest = relevant;
            while rest != 0 {
                let id = rest.trailing_zeros() as PropId;
                rest &= rest - 1;
                let q = pl.prob(id);
                p *= if label.contains(id) { q } else { 1.0 - q };
            }
            if p != 0.0 {
                out[rm.next_state(u, label)] += p;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & relevant;
        }
    }
    BeliefVector(out)
}

/// Marker for states from which the accepting state cannot be reached.
pub const UNREACHABLE: f64 = f64::NEG_INFINITY;

/// `|U| - d(u, uA)` by reverse breadth-first search over explicit edges;
/// [`UNREACHABLE`] where no path exists.
pub fn potential(rm: &RewardMachine) -> Vec<f64> {
    let n = rm.n_states();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (u, e) in rm.edges() {
        if e.to != u {
            preds[e.to].push(u);
        }
    }
    let mut dist: Vec<Option<usize>> = vec![None; n];
    dist[rm.accepting()] = Some(0);
    let mut queue = VecDeque::from([rm.accepting()]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued states have a distance");
        for &u in &preds[v] {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist.into_iter()
        .map(|d| d.map_or(UNREACHABLE, |d| (n - d) as f64))
        .collect()
}

/// Potential-based shaping over beliefs. Unreachable states use a finite
/// stand-in potential of `floor + |U|`, so zero mass on them contributes
/// nothing and the reward never drops below `floor` for normalised beliefs.
#[derive(Clone, Debug, PartialEq)]
pub struct Shaping {
    potential: Vec<f64>,
    floor: f64,
}

impl Shaping {
    pub fn new(rm: &RewardMachine) -> Self {
        Shaping::with_floor(rm, -10.0 * rm.n_states() as f64)
    }

    pub fn with_floor(rm: &RewardMachine, floor: f64) -> Self {
        let stand_in = floor + rm.n_states() as f64;
        let potential = potential(rm)
            .into_iter()
            .map(|p| if p == UNREACHABLE { stand_in } else { p })
            .collect();
        Shaping { potential, floor }
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potential
    }

    /// Belief-weighted potential.
    pub fn belief_potential(&self, b: &BeliefVector) -> f64 {
        b.as_slice()
            .iter()
            .zip(&self.potential)
            .map(|(&m, &p)| m * p)
            .sum()
    }

    /// `gamma * Phi(b_next) - Phi(b_prev)`, clamped below at the floor.
    pub fn reward(&self, b_prev: &BeliefVector, b_next: &BeliefVector, gamma: f64) -> f64 {
        let r: f64 = b_prev
            .as_slice()
            .iter()
            .zip(b_next.as_slice())
            .zip(&self.potential)
            .map(|((&p, &q), &phi)| (gamma * q - p) * phi)
            .sum();
        r.max(self.floor)
    }
}

pub fn shaped_reward(
    rm: &RewardMachine,
    b_prev: &BeliefVector,
    b_next: &BeliefVector,
    gamma: f64,
) -> f64 {
    Shaping::new(rm).reward(b_prev, b_next, gamma)
}

/// Crisp step on the propositions whose probability exceeds `threshold`.
pub fn threshold_step(
    rm: &RewardMachine,
    state: StateId,
    pl: &ProbLabel,
    threshold: f64,
) -> Result<StateId> {
    Ok(rm.step(state, pl.above(threshold))?.0)
}

/// Argmax of the belief; ties go to the lowest state id.
pub fn most_likely_state(belief: &BeliefVector) -> StateId {
    let mut best = 0;
    for (u, &p) in belief.as_slice().iter().enumerate() {
        if p > belief.as_slice()[best] {
            best = u;
        }
    }
    best
}

pub fn is_terminal_belief(rm: &RewardMachine, belief: &BeliefVector) -> bool {
    rm.is_sink(most_likely_state(belief))
}

/// Fraction of `traces` both machines put in the same outcome class; 1 for
/// no traces.
pub fn agreement(a: &RewardMachine, b: &RewardMachine, traces: &[SymbolicTrace]) -> f64 {
    if traces.is_empty() {
        return 1.0;
    }
    let same = traces.iter().filter(|t| a.classify(t) == b.classify(t)).count();
    same as f64 / traces.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worlds::coffee_machine;
    use proptest::prelude::*;

    const U0: StateId = 0;
    const U1: StateId = 1;
    const UA: StateId = 2;
    const UR: StateId = 3;

    fn ab() -> Alphabet {
        Alphabet::office_world()
    }

    fn lab(names: &[&str]) -> Label {
        let a = ab();
        Label::from_ids(names.iter().map(|n| a.id(n).unwrap()))
    }

    fn guard(text: &str) -> Guard {
        Guard::parse(text, &ab()).unwrap()
    }

    #[test]
    fn satisfies_examples() {
        assert!(satisfies(lab(&["coffee"]), &guard("coffee,!office,!decoration")));
        assert!(satisfies(Label::EMPTY, &Guard::TRUE));
        assert!(!satisfies(lab(&["coffee", "decoration"]), &guard("coffee,!decoration")));
    }

    #[test]
    fn step_follows_coffee_edges() {
        let rm = coffee_machine();
        assert_eq!(rm.step(U0, lab(&["coffee"])).unwrap(), (U1, 0.0));
        assert_eq!(rm.step(U1, Label::EMPTY).unwrap(), (U1, 0.0));
        assert_eq!(rm.step(U1, lab(&["office"])).unwrap(), (UA, 1.0));
        for l in [Label::EMPTY, lab(&["decoration"]), lab(&["office"])] {
            assert_eq!(rm.step(UA, l).unwrap(), (UA, 0.0));
        }
        assert!(rm.step(9, Label::EMPTY).is_err());
    }

    #[test]
    fn traverse_examples() {
        let rm = coffee_machine();
        let t: SymbolicTrace = [&[][..], &["coffee"], &[], &[], &["office"]]
            .iter()
            .map(|n| lab(n))
            .collect();
        assert_eq!(rm.traverse(&t).unwrap(), vec![U0, U0, U1, U1, U1, UA]);
        assert_eq!(rm.traverse(&SymbolicTrace::default()).unwrap(), vec![U0]);
        let dead = SymbolicTrace::new(vec![lab(&["decoration"])]);
        assert_eq!(rm.traverse(&dead).unwrap(), vec![U0, UR]);
    }

    #[test]
    fn classify_and_agreement() {
        let rm = coffee_machine();
        let goal = SymbolicTrace::new(vec![lab(&["coffee"]), lab(&["office"])]);
        let dead = SymbolicTrace::new(vec![lab(&["decoration"])]);
        let open = SymbolicTrace::new(vec![lab(&["office"])]);
        assert_eq!(rm.classify(&goal), TraceOutcome::Goal);
        assert_eq!(rm.classify(&dead), TraceOutcome::DeadEnd);
        assert_eq!(rm.classify(&open), TraceOutcome::Incomplete);
        let traces = [goal, dead, open];
        assert_eq!(agreement(&rm, &rm, &traces), 1.0);
        // the loop machine only agrees on the incomplete trace
        assert!((agreement(&rm, &RewardMachine::trivial(), &traces) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(agreement(&rm, &rm, &[]), 1.0);
    }

    #[test]
    fn construction_rejects_bad_machines() {
        let e = |g: &str, to| Edge {
            guard: guard(g),
            to,
            reward: 0.0,
        };
        assert!(RewardMachine::new(3, 0, 1, 2, vec![(0, e("coffee", 1)), (0, e("office", 2))]).is_err());
        assert!(RewardMachine::new(3, 0, 1, 2, vec![(1, e("coffee", 0))]).is_err());
        assert!(RewardMachine::new(3, 0, 1, 1, vec![]).is_err());
        assert!(RewardMachine::new(3, 0, 1, 2, vec![(0, e("coffee", 5))]).is_err());
        assert!(Guard::new(lab(&["coffee"]), lab(&["coffee"])).is_err());
        assert!(RewardMachine::new(3, 0, 1, 2, vec![(0, e("coffee,!office", 1)), (0, e("office", 2))]).is_ok());
    }

    #[test]
    fn text_format_round_trips() {
        let a = ab();
        let rm = coffee_machine();
        let text = rm.format(&a);
        assert!(text.starts_with("states 4 0 2 3\n"));
        let back = RewardMachine::parse(&text, &a).unwrap();
        assert_eq!(back, rm);
        assert_eq!(back.format(&a), text);
        let with_true = "# comment\nstates 3 0 1 2\n0 1 1 -\n";
        let m = RewardMachine::parse(with_true, &a).unwrap();
        assert_eq!(m.format(&a), "states 3 0 1 2\n0 1 1 -\n");
        assert!(RewardMachine::parse("states 3 0 1\n", &a).is_err());
        assert!(RewardMachine::parse("states 3 0 1 2\n0 1 x coffee\n", &a).is_err());
    }

    #[test]
    fn belief_step_examples() {
        let rm = coffee_machine();
        let n = ab().len();
        let b0 = BeliefVector::initial(&rm);
        let crisp = ProbLabel::crisp(lab(&["coffee"]), n);
        assert_eq!(belief_step(&rm, &b0, &crisp), BeliefVector::one_hot(4, U1));

        let mut probs = vec![0.0; n];
        probs[0] = 0.5;
        let half = belief_step(&rm, &b0, &ProbLabel::new(probs).unwrap());
        assert_eq!(half.as_slice(), &[0.5, 0.5, 0.0, 0.0]);

        let sinks = BeliefVector::new(vec![0.0, 0.0, 0.5, 0.5]);
        let noisy = ProbLabel::new(vec![0.3, 0.1, 0.7, 0.2, 0.0, 0.4, 0.9, 0.6]).unwrap();
        assert_eq!(belief_step(&rm, &sinks, &noisy), sinks);
    }

    #[test]
    fn potential_examples() {
        let rm = coffee_machine();
        assert_eq!(potential(&rm), vec![3.0, 3.0, 4.0, UNREACHABLE]);

        // u0 is itself accepting.
        let single = RewardMachine::new(2, 0, 0, 1, vec![]).unwrap();
        assert_eq!(potential(&single)[0], 2.0);

        let a = ab();
        let chain = RewardMachine::parse("states 4 0 2 3\n0 1 0 A\n1 2 1 B\n", &a).unwrap();
        assert_eq!(&potential(&chain)[..3], &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn shaped_reward_examples() {
        let rm = coffee_machine();
        let prev = BeliefVector::new(vec![1.0, 0.0, 0.0, 0.0]);
        let next = BeliefVector::new(vec![0.0, 0.5, 0.5, 0.0]);
        assert!((shaped_reward(&rm, &prev, &next, 0.9) - 0.15).abs() < 1e-9);
        for u in 0..4 {
            let b = BeliefVector::one_hot(4, u);
            assert_eq!(shaped_reward(&rm, &b, &b, 1.0), 0.0);
        }
        // Full move from u1 into the rejecting state stays above the floor.
        let s = Shaping::new(&rm);
        let r = s.reward(&BeliefVector::one_hot(4, U1), &BeliefVector::one_hot(4, UR), 1.0);
        assert!(r >= s.floor() && r.is_finite());
    }

    #[test]
    fn threshold_examples() {
        let rm = coffee_machine();
        let mut probs = vec![0.0; 8];
        probs[0] = 0.8;
        let pl = ProbLabel::new(probs).unwrap();
        assert_eq!(pl.above(0.7), lab(&["coffee"]));
        assert_eq!(threshold_step(&rm, U0, &pl, 0.7).unwrap(), U1);
        assert_eq!(pl.above(0.9), Label::EMPTY);
        assert_eq!(threshold_step(&rm, U0, &pl, 0.9).unwrap(), U0);
        let zeros = ProbLabel::new(vec![0.0; 8]).unwrap();
        assert_eq!(zeros.above(0.1), Label::EMPTY);
    }

    #[test]
    fn most_likely_state_examples() {
        let rm = coffee_machine();
        assert!(is_terminal_belief(&rm, &BeliefVector::one_hot(4, UA)));
        let b = BeliefVector::new(vec![0.4, 0.3, 0.3, 0.0]);
        assert_eq!(most_likely_state(&b), U0);
        assert!(!is_terminal_belief(&rm, &b));
        let tie = BeliefVector::new(vec![0.5, 0.0, 0.5, 0.0]);
        assert_eq!(most_likely_state(&tie), U0);
    }

    proptest! {
        #[test]
        fn guard_weakening_is_monotone(pos in 0u16..256, neg in 0u16..256, label in 0u16..256, drop in 0u8..8) {
            let neg = neg & !pos;
            let g = Guard::new(Label::from_bits(pos), Label::from_bits(neg)).unwrap();
            let mask = !(1u16 << drop);
            let weaker = Guard::new(Label::from_bits(pos & mask), Label::from_bits(neg & mask)).unwrap();
            let l = Label::from_bits(label);
            if g.satisfied_by(l) {
                prop_assert!(weaker.satisfied_by(l));
            }
        }

        #[test]
        fn telescoping_with_unit_discount(steps in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 8), 1..30)) {
            let rm = coffee_machine();
            let s = Shaping::new(&rm);
            let mut b = BeliefVector::initial(&rm);
            let start = s.belief_potential(&b);
            let mut total = 0.0;
            for probs in steps {
                let next = belief_step(&rm, &b, &ProbLabel::new(probs).unwrap());
                total += s.reward(&b, &next, 1.0);
                b = next;
            }
            prop_assert!((total - (s.belief_potential(&b) - start)).abs() < 1e-6);
        }
    }
}
