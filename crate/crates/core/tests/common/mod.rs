#![allow(dead_code)]

use noisy_rm::events::{Alphabet, Label, SymbolicTrace, TraceOutcome};
use noisy_rm::examples::{consolidate, Penalty, WeightedExample};
use noisy_rm::machine::{Edge, Guard, RewardMachine};
use rand::Rng;

/// Random deterministic machine over `n_props` propositions with `k`
/// intermediate states: each non-sink state gets up to three random pairwise
/// exclusive guards towards random other states.
pub fn random_machine<R: Rng>(rng: &mut R, n_props: usize, k: usize) -> RewardMachine {
    let (acc, rej) = (k + 1, k + 2);
    let mut edges = Vec::new();
    for u in 0..=k {
        let mut guards: Vec<Guard> = Vec::new();
        for _ in 0..3 {
            let mut pos = Label::EMPTY;
            let mut neg = Label::EMPTY;
            for id in 0..n_props as u8 {
                match rng.gen_range(0..3) {
                    0 => pos = pos.with(id),
                    1 => neg = neg.with(id),
                    _ => {}
                }
            }
            let g = Guard::new(pos, neg).unwrap();
            if g.literal_count() == 0 || !guards.iter().all(|h| h.excludes(&g)) {
                continue;
            }
            let choices: Vec<usize> = (0..k + 3).filter(|&v| v != u).collect();
            let to = choices[rng.gen_range(0..choices.len())];
            guards.push(g);
            edges.push((
                u,
                Edge {
                    guard: g,
                    to,
                    reward: if to == acc { 1.0 } else { 0.0 },
                },
            ));
        }
    }
    RewardMachine::new(k + 3, 0, acc, rej, edges).unwrap()
}

/// Uniformly random labels, stopped when the machine reaches a sink or after
/// `max_len` steps.
pub fn random_trace<R: Rng>(
    rng: &mut R,
    rm: &RewardMachine,
    n_props: usize,
    max_len: usize,
) -> (TraceOutcome, SymbolicTrace) {
    walk(rng, rm, n_props, max_len, false)
}

/// Like [`random_trace`], but no label repeats its predecessor, so the trace
/// survives compression unchanged and the outcome stays exact.
pub fn stutter_free_trace<R: Rng>(
    rng: &mut R,
    rm: &RewardMachine,
    n_props: usize,
    max_len: usize,
) -> (TraceOutcome, SymbolicTrace) {
    walk(rng, rm, n_props, max_len, true)
}

fn walk<R: Rng>(
    rng: &mut R,
    rm: &RewardMachine,
    n_props: usize,
    max_len: usize,
    stutter_free: bool,
) -> (TraceOutcome, SymbolicTrace) {
    let len = rng.gen_range(1..=max_len);
    let mut u = rm.initial();
    let mut steps: Vec<Label> = Vec::new();
    let n_labels = 1u16 << n_props;
    for _ in 0..len {
        let l = match steps.last() {
            Some(prev) if stutter_free => {
                let b = rng.gen_range(0..n_labels - 1);
                Label::from_bits(if b >= prev.bits() { b + 1 } else { b })
            }
            _ => Label::from_bits(rng.gen_range(0..n_labels)),
        };
        steps.push(l);
        u = rm.next_state(u, l);
        if rm.is_sink(u) {
            break;
        }
    }
    let outcome = if u == rm.accepting() {
        TraceOutcome::Goal
    } else if u == rm.rejecting() {
        TraceOutcome::DeadEnd
    } else {
        TraceOutcome::Incomplete
    };
    (outcome, SymbolicTrace::new(steps))
}

/// Consolidated pool from `n` random traces of a random machine.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    n_props: usize,
    k: usize,
    n: usize,
) -> (Alphabet, RewardMachine, Vec<WeightedExample>) {
    instance(rng, n_props, k, n, false)
}

/// Consolidated pool from `n` stutter-free traces of a random machine; the
/// machine covers every example.
pub fn exact_instance<R: Rng>(
    rng: &mut R,
    n_props: usize,
    k: usize,
    n: usize,
) -> (Alphabet, RewardMachine, Vec<WeightedExample>) {
    instance(rng, n_props, k, n, true)
}

fn instance<R: Rng>(
    rng: &mut R,
    n_props: usize,
    k: usize,
    n: usize,
    stutter_free: bool,
) -> (Alphabet, RewardMachine, Vec<WeightedExample>) {
    let names: Vec<String> = (0..n_props).map(|i| format!("p{i}")).collect();
    let alphabet = Alphabet::new(names).unwrap();
    let rm = random_machine(rng, n_props, k);
    let raw: Vec<WeightedExample> = (0..n)
        .map(|_| {
            let (o, t) = walk(rng, &rm, n_props, 8, stutter_free);
            WeightedExample::new(o, t, Penalty::one())
        })
        .collect();
    (alphabet, rm, consolidate(&raw))
}
