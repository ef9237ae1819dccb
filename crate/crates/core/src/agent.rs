//! Tabular Q-learning over (grid cell, binned belief) with ε-greedy action
//! selection.
//!
//! Beliefs are truncated to `d` decimals before lookup so that the table stays
//! finite. Missing entries read as zero.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::machine::BeliefVector;
use crate::worlds::{Action, Pos};

/// Slack added before truncation so that values such as `0.29999999999`
/// produced by float arithmetic land in the bin they denote.
const BIN_SLACK: f64 = 1e-9;

/// Belief truncated to fixed point: component `i` is `floor(b[i] * 10^d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinnedBelief(Vec<u32>);

impl BinnedBelief {
    pub fn new(belief: &BeliefVector, decimals: u32) -> Self {
        let scale = 10f64.powi(decimals as i32);
        let top = scale as u32;
        BinnedBelief(
            belief
                .as_slice()
                .iter()
                .map(|&p| ((p * scale + BIN_SLACK).floor().max(0.0) as u32).min(top))
                .collect(),
        )
    }

    pub fn steps(&self) -> &[u32] {
        &self.0
    }

    /// Truncated probabilities.
    pub fn values(&self, decimals: u32) -> Vec<f64> {
        let scale = 10f64.powi(decimals as i32);
        self.0.iter().map(|&v| v as f64 / scale).collect()
    }
}

/// Linear ε decay from `start` to `end` over `decay_steps` agent steps, then
/// constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule {
            start: 1.0,
            end: 0.1,
            decay_steps: 2000,
        }
    }
}

impl ExplorationSchedule {
    pub fn new(start: f64, end: f64, decay_steps: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || end > start {
            return Err(Error::config(
                "epsilon",
                format!("need 0 <= end <= start <= 1, got start {start}, end {end}"),
            ));
        }
        Ok(ExplorationSchedule {
            start,
            end,
            decay_steps,
        })
    }

    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

type Key = (Pos, BinnedBelief);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QTable {
    decimals: u32,
    table: HashMap<Key, [f64; 4]>,
}

impl QTable {
    pub fn new(decimals: u32) -> Self {
        QTable {
            decimals,
            table: HashMap::new(),
        }
    }

    pub fn decimals(&self) -> u32 {
        self.decimals
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn clear(&mut self) {
        self.table.clear();
    }

    pub fn bin(&self, belief: &BeliefVector) -> BinnedBelief {
        BinnedBelief::new(belief, self.decimals)
    }

    pub fn values(&self, pos: Pos, belief: &BeliefVector) -> [f64; 4] {
        self.table
            .get(&(pos, self.bin(belief)))
            .copied()
            .unwrap_or([0.0; 4])
    }

    pub fn get(&self, pos: Pos, belief: &BeliefVector, action: Action) -> f64 {
        self.values(pos, belief)[action.index()]
    }

    pub fn set(&mut self, pos: Pos, belief: &BeliefVector, action: Action, value: f64) {
        let key = (pos, self.bin(belief));
        self.table.entry(key).or_insert([0.0; 4])[action.index()] = value;
    }

    pub fn max_value(&self, pos: Pos, belief: &BeliefVector) -> f64 {
        self.values(pos, belief)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One line per key, sorted: `x y | b_0 .. b_n | q_up q_down q_left q_right`.
    pub fn snapshot(&self) -> String {
        let mut keys: Vec<&Key> = self.table.keys().collect();
        keys.sort();
        let mut out = String::new();
        for key in keys {
            let (pos, bin) = key;
            let b: Vec<String> = bin.values(self.decimals).iter().map(|v| v.to_string()).collect();
            let q: Vec<String> = self.table[key].iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "{} {} | {} | {}", pos.x, pos.y, b.join(" "), q.join(" "));
        }
        out
    }

    /// Lossless text form: bins as integers, values as IEEE bit patterns.
    pub fn dump(&self) -> String {
        let mut keys: Vec<&Key> = self.table.keys().collect();
        keys.sort();
        let mut out = format!("decimals {}\n", self.decimals);
        for key in keys {
            let (pos, bin) = key;
            let b: Vec<String> = bin.0.iter().map(u32::to_string).collect();
            let q: Vec<String> = self.table[key].iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            let _ = writeln!(out, "{} {} | {} | {}", pos.x, pos.y, b.join(" "), q.join(" "));
        }
        out
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let decimals = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix("decimals "))
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::parse(1, "expected `decimals D`"))?;
        let mut q = QTable::new(decimals);
        for (i, line) in lines {
            let bad = |msg: &str| Error::parse(i + 1, msg.to_string());
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            let [pos, bin, vals] = parts.as_slice() else {
                return Err(bad("expected `x y | bins | values`"));
            };
            let xy: Vec<u8> = pos.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("bad cell"))?;
            let [x, y] = xy.as_slice() else {
                return Err(bad("bad cell"));
            };
            let bins = bin.split_whitespace().map(str::parse).collect::<std::result::Result<Vec<u32>, _>>().map_err(|_| bad("bad bin"))?;
            let mut values = [0.0; 4];
            let raw: Vec<&str> = vals.split_whitespace().collect();
            if raw.len() != 4 {
                return Err(bad("expected four values"));
            }
            for (v, r) in values.iter_mut().zip(raw) {
                *v = f64::from_bits(u64::from_str_radix(r, 16).map_err(|_| bad("bad value"))?);
            }
            q.table.insert((Pos::new(*x, *y), BinnedBelief(bins)), values);
        }
        Ok(q)
    }
}

/// ε-greedy; greedy ties are broken uniformly at random.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    pos: Pos,
    belief: &BeliefVector,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    if rng.gen::<f64>() < epsilon {
        return Action::ALL[rng.gen_range(0..4)];
    }
    let values = q.values(pos, belief);
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<Action> = Action::ALL
        .into_iter()
        .filter(|a| values[a.index()] == best)
        .collect();
    ties[rng.gen_range(0..ties.len())]
}

/// Transition fed to [`q_update`].
#[derive(Clone, Debug)]
pub struct Transition<'a> {
    pub pos: Pos,
    pub belief: &'a BeliefVector,
    pub action: Action,
    /// Environment reward plus shaping.
    pub reward: f64,
    pub next_pos: Pos,
    pub next_belief: &'a BeliefVector,
    pub terminal: bool,
}

/// `q ← (1 − α) q + α (r + γ max q')`, without bootstrap on terminal steps.
pub fn q_update(q: &mut QTable, t: &Transition<'_>, alpha: f64, gamma: f64) {
    let future = if t.terminal {
        0.0
    } else {
        q.max_value(t.next_pos, t.next_belief)
    };
    let old = q.get(t.pos, t.belief, t.action);
    let new = (1.0 - alpha) * old + alpha * (t.reward + gamma * future);
    q.set(t.pos, t.belief, t.action, new);
}

/// Q-table with its learning hyperparameters and step counter.
#[derive(Clone, Debug)]
pub struct Agent {
    pub q: QTable,
    pub schedule: ExplorationSchedule,
    pub alpha: f64,
    pub gamma: f64,
    /// Agent steps taken so far; drives ε.
    pub steps: u64,
}

impl Agent {
    pub fn new(decimals: u32, schedule: ExplorationSchedule, alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::config("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::config("gamma", format!("must lie in [0, 1), got {gamma}")));
        }
        Ok(Agent {
            q: QTable::new(decimals),
            schedule,
            alpha,
            gamma,
            steps: 0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.epsilon(self.steps)
    }

    pub fn act<R: Rng + ?Sized>(&self, pos: Pos, belief: &BeliefVector, rng: &mut R) -> Action {
        select_action(&self.q, pos, belief, self.epsilon(), rng)
    }

    pub fn learn(&mut self, t: &Transition<'_>) {
        q_update(&mut self.q, t, self.alpha, self.gamma);
        self.steps += 1;
    }

    /// Forget every action value; the ε schedule keeps its position.
    pub fn reset_q(&mut self) {
        self.q.clear();
    }
}
