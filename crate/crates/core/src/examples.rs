//! Weighted classified examples for the inducer, built from noisy traces by
//! per-step Bernoulli sampling and compression, plus merging of duplicates
//! and per-class rebalancing of penalties.
//!
//! Pool file format: the trace format of [`crate::events`] with a penalty
//! column, `OUTCOME;PENALTY;step|step|...`, where `PENALTY` is an integer,
//! a fraction `p/q`, or `inf` for hard examples.

use std::collections::HashMap;
use std::fmt;
use std::ops::Add;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::events::{
    compress, Alphabet, Label, NoisyTrace, PropId, SymbolicTrace, TraceOutcome,
};

pub type Rational = Ratio<i128>;

/// Cost of leaving an example uncovered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Penalty {
    Finite(Rational),
    Infinite,
}

impl Penalty {
    pub fn one() -> Self {
        Penalty::Finite(Rational::one())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Penalty::Infinite)
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            Penalty::Finite(r) => Some(*r),
            Penalty::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Penalty::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            Penalty::Infinite => f64::INFINITY,
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if text == "inf" {
            return Some(Penalty::Infinite);
        }
        let r = match text.split_once('/') {
            Some((n, d)) => {
                let d: i128 = d.parse().ok()?;
                if d == 0 {
                    return None;
                }
                Rational::new(n.parse().ok()?, d)
            }
            None => Rational::from_integer(text.parse().ok()?),
        };
        (r > Rational::zero()).then_some(Penalty::Finite(r))
    }
}

impl Add for Penalty {
    type Output = Penalty;

    fn add(self, other: Penalty) -> Penalty {
        match (self, other) {
            (Penalty::Finite(a), Penalty::Finite(b)) => Penalty::Finite(a + b),
            _ => Penalty::Infinite,
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Penalty::Infinite => write!(f, "inf"),
            Penalty::Finite(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Penalty::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeightedExample {
    pub id: usize,
    pub penalty: Penalty,
    pub outcome: TraceOutcome,
    /// Compressed symbolic trace.
    pub body: SymbolicTrace,
}

impl WeightedExample {
    pub fn new(outcome: TraceOutcome, body: SymbolicTrace, penalty: Penalty) -> Self {
        WeightedExample {
            id: 0,
            penalty,
            outcome,
            body: compress(&body),
        }
    }
}

/// Draws one crisp label per step, each proposition independently with its
/// posterior probability, then compresses the result.
pub fn sample_trace<R: Rng + ?Sized>(nt: &NoisyTrace, rng: &mut R) -> SymbolicTrace {
    let steps = nt
        .steps
        .iter()
        .map(|pl| {
            pl.probs()
                .iter()
                .enumerate()
                .fold(Label::EMPTY, |l, (i, &p)| {
                    if rng.gen_bool(p) {
                        l.with(i as PropId)
                    } else {
                        l
                    }
                })
        })
        .collect();
    compress(&steps)
}

pub fn sample_example<R: Rng + ?Sized>(
    nt: &NoisyTrace,
    outcome: TraceOutcome,
    rng: &mut R,
) -> WeightedExample {
    WeightedExample {
        id: 0,
        penalty: Penalty::one(),
        outcome,
        body: sample_trace(nt, rng),
    }
}

/// Which proper prefixes of a finished trace become incomplete examples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsample {
    All,
    /// At most this many prefix lengths, drawn uniformly without replacement.
    Uniform(usize),
}

impl Default for Subsample {
    fn default() -> Self {
        Subsample::Uniform(4)
    }
}

impl fmt::Display for Subsample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subsample::All => write!(f, "all"),
            Subsample::Uniform(n) => write!(f, "uniform({n})"),
        }
    }
}

impl std::str::FromStr for Subsample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "all" {
            return Ok(Subsample::All);
        }
        s.strip_prefix("uniform(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|n| n.trim().parse().ok())
            .map(Subsample::Uniform)
            .ok_or_else(|| Error::config("learning.prefixes", format!("expected `all` or `uniform(N)`, got `{s}`")))
    }
}

/// Incomplete examples from proper prefixes, in increasing prefix length.
pub fn incomplete_prefixes<R: Rng + ?Sized>(
    nt: &NoisyTrace,
    subsample: Subsample,
    rng: &mut R,
) -> Vec<WeightedExample> {
    let proper = nt.len().saturating_sub(1);
    let lengths: Vec<usize> = match subsample {
        Subsample::All => (1..=proper).collect(),
        Subsample::Uniform(n) => {
            let mut ks: Vec<usize> = index::sample(rng, proper, n.min(proper))
                .into_iter()
                .map(|i| i + 1)
                .collect();
            ks.sort_unstable();
            ks
        }
    };
    lengths
        .into_iter()
        .map(|k| sample_example(&nt.prefix(k), TraceOutcome::Incomplete, rng))
        .collect()
}

/// Merges identical (outcome, body) pairs by summing penalties, then scales
/// the finite penalties so every non-empty class carries the same total mass.
/// Ids are reassigned in order of first occurrence.
pub fn consolidate(pool: &[WeightedExample]) -> Vec<WeightedExample> {
    let mut merged: Vec<WeightedExample> = Vec::new();
    let mut seen: HashMap<(TraceOutcome, &SymbolicTrace), usize> = HashMap::new();
    for ex in pool {
        match seen.get(&(ex.outcome, &ex.body)) {
            Some(&i) => merged[i].penalty = merged[i].penalty + ex.penalty,
            None => {
                seen.insert((ex.outcome, &ex.body), merged.len());
                merged.push(ex.clone());
            }
        }
    }
    let mut mass = [Rational::zero(); 3];
    for ex in &merged {
        if let Penalty::Finite(r) = ex.penalty {
            mass[ex.outcome.index()] += r;
        }
    }
    let classes = mass.iter().filter(|m| !m.is_zero()).count();
    if classes > 0 {
        let total: Rational = mass.iter().copied().sum();
        let share = total / Rational::from_integer(classes as i128);
        for ex in &mut merged {
            if let Penalty::Finite(r) = ex.penalty {
                ex.penalty = Penalty::Finite(r * share / mass[ex.outcome.index()]);
            }
        }
    }
    for (i, ex) in merged.iter_mut().enumerate() {
        ex.id = i;
    }
    merged
}

/// Total finite penalty per class, indexed by [`TraceOutcome::index`].
pub fn class_mass(pool: &[WeightedExample]) -> [Rational; 3] {
    let mut mass = [Rational::zero(); 3];
    for ex in pool {
        if let Penalty::Finite(r) = ex.penalty {
            mass[ex.outcome.index()] += r;
        }
    }
    mass
}

pub fn format_pool(pool: &[WeightedExample], alphabet: &Alphabet) -> String {
    let mut out = alphabet.header();
    out.push('\n');
    for ex in pool {
        out.push_str(&format!(
            "{};{};{}\n",
            ex.outcome.code(),
            ex.penalty,
            ex.body.format(alphabet)
        ));
    }
    out
}

/// Parses a pool file. Lines may omit the penalty column (`OUTCOME;steps`),
/// in which case the penalty is 1. Returns the alphabet from the header when
/// present, else `alphabet`.
pub fn parse_pool(text: &str, alphabet: Option<&Alphabet>) -> Result<(Alphabet, Vec<WeightedExample>)> {
    let mut alpha = alphabet.cloned();
    let mut pool = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(a) = Alphabet::from_header(line) {
                if alpha.is_none() {
                    alpha = Some(a?);
                }
            }
            continue;
        }
        let a = alpha
            .as_ref()
            .ok_or_else(|| Error::parse(lno, "no alphabet given before the first example"))?;
        let parts: Vec<&str> = line.splitn(3, ';').collect();
        let (code, penalty, body) = match parts.as_slice() {
            [c, p, b] => (*c, Penalty::parse(p).ok_or_else(|| Error::parse(lno, format!("bad penalty `{p}`")))?, *b),
            [c, b] => (*c, Penalty::one(), *b),
            _ => return Err(Error::parse(lno, "expected `OUTCOME;PENALTY;steps`")),
        };
        let outcome = TraceOutcome::from_code(code)
            .ok_or_else(|| Error::parse(lno, format!("unknown outcome `{code}`")))?;
        let body = SymbolicTrace::parse(body, a).map_err(|e| Error::parse(lno, e.to_string()))?;
        let mut ex = WeightedExample::new(outcome, body, penalty);
        ex.id = pool.len();
        pool.push(ex);
    }
    let alpha = alpha.ok_or_else(|| Error::parse(0, "no alphabet"))?;
    Ok((alpha, pool))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::ProbLabel;
    use crate::sensors::label_probability;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_props() -> Alphabet {
        Alphabet::new(["coffee", "office"]).unwrap()
    }

    fn sampling_trace() -> NoisyTrace {
        let pl = |c: f64, o: f64| ProbLabel::new(vec![c, o]).unwrap();
        NoisyTrace::new(vec![
            pl(0.01, 0.01),
            pl(0.9, 0.01),
            pl(0.9, 0.01),
            pl(0.01, 0.01),
            pl(0.01, 0.9),
        ])
    }

    fn ex(outcome: TraceOutcome, text: &str) -> WeightedExample {
        WeightedExample::new(outcome, SymbolicTrace::parse(text, &two_props()).unwrap(), Penalty::one())
    }

    #[test]
    fn crisp_probabilities_sample_the_ground_truth() {
        let a = two_props();
        let gt = SymbolicTrace::parse("-|coffee|coffee|-|office", &a).unwrap();
        let nt = NoisyTrace::new(gt.steps.iter().map(|&l| ProbLabel::crisp(l, 2)).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = sample_example(&nt, TraceOutcome::Goal, &mut rng);
        assert_eq!(e.body, compress(&gt));
        assert_eq!(e.body.format(&a), "-|coffee|-|office");
        assert_eq!(e.penalty, Penalty::one());
    }

    #[test]
    fn most_likely_sample_of_the_worked_trace() {
        let a = two_props();
        let nt = sampling_trace();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let want = SymbolicTrace::parse("-|coffee|-|office", &a).unwrap();
        let hits = (0..2000)
            .filter(|_| sample_example(&nt, TraceOutcome::Goal, &mut rng).body == want)
            .count();
        // The modal sample has probability 0.99^6 * 0.9^3 ~ 0.686.
        assert!(hits > 1200, "{hits}");
    }

    #[test]
    fn step_frequency_matches_label_probability() {
        let nt = sampling_trace();
        let target = Label::from_ids([0]);
        let expect = label_probability(&nt.steps[1], target);
        assert!((expect - 0.891).abs() < 1e-12);
        let step = NoisyTrace::new(vec![nt.steps[1].clone()]);
        let want = SymbolicTrace::new(vec![target]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let hits = (0..n).filter(|_| sample_trace(&step, &mut rng) == want).count();
        assert!((hits as f64 / n as f64 - expect).abs() < 0.02);
    }

    #[test]
    fn prefix_counts() {
        let nt = sampling_trace();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let all = incomplete_prefixes(&nt, Subsample::All, &mut rng);
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|e| e.outcome == TraceOutcome::Incomplete));
        assert!(incomplete_prefixes(&nt.prefix(1), Subsample::All, &mut rng).is_empty());
        let a = incomplete_prefixes(&nt, Subsample::Uniform(2), &mut ChaCha8Rng::seed_from_u64(9));
        let b = incomplete_prefixes(&nt, Subsample::Uniform(2), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn merge_identical_examples() {
        let pool = vec![ex(TraceOutcome::Goal, "coffee|office"); 3];
        let c = consolidate(&pool);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].penalty, Penalty::Finite(Rational::from_integer(3)));
    }

    #[test]
    fn balance_classes() {
        let mut pool: Vec<_> = (0..10).map(|_| ex(TraceOutcome::Goal, "coffee|office")).collect();
        pool.push(ex(TraceOutcome::Incomplete, "coffee"));
        for _ in 0..4 {
            pool.push(ex(TraceOutcome::Incomplete, "office"));
        }
        let before = class_mass(&pool);
        let merged_mass = class_mass(&consolidate(&pool));
        let c = consolidate(&pool);
        let m = class_mass(&c);
        assert_eq!(m[0], m[2]);
        assert_eq!(m[1], Rational::zero());
        assert_eq!(m[0] + m[2], before[0] + before[2]);
        assert_eq!(merged_mass, m);
        assert!(consolidate(&[]).is_empty());
        assert_eq!(consolidate(&c), c);
    }

    #[test]
    fn hard_examples_are_not_rescaled() {
        let mut hard = ex(TraceOutcome::DeadEnd, "office");
        hard.penalty = Penalty::Infinite;
        let pool = vec![hard.clone(), ex(TraceOutcome::Goal, "coffee"), ex(TraceOutcome::Goal, "coffee")];
        let c = consolidate(&pool);
        assert_eq!(c[0].penalty, Penalty::Infinite);
        assert_eq!(c[1].penalty, Penalty::Finite(Rational::from_integer(2)));
    }

    #[test]
    fn pool_text_round_trips() {
        let a = two_props();
        let mut pool = vec![ex(TraceOutcome::Goal, "coffee|office"), ex(TraceOutcome::Incomplete, "")];
        pool[1].penalty = Penalty::Finite(Rational::new(3, 2));
        pool[1].id = 1;
        let text = format_pool(&pool, &a);
        assert_eq!(text, "# alphabet: coffee,office\nG;1;coffee|office\nI;3/2;\n");
        let (a2, back) = parse_pool(&text, None).unwrap();
        assert_eq!(a2, a);
        assert_eq!(back, pool);
        assert!(parse_pool("# alphabet: x\nG;0;x\n", None).is_err());
        assert!(parse_pool("G;1;x\n", None).is_err());
        assert_eq!(Penalty::parse("inf"), Some(Penalty::Infinite));
    }
}
