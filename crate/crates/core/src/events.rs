//! Symbolic vocabulary shared by every other module: propositions, labels,
//! crisp and probabilistic traces, episode outcomes, and the line-based trace
//! file format.
//!
//! A trace line reads `OUTCOME;step|step|...` where `OUTCOME` is one of
//! `G`, `D`, `I`. A symbolic step is a comma-separated list of proposition
//! names, a noisy step a comma-separated list of `name:prob` pairs (names
//! missing from a noisy step have probability 0). An empty step is written
//! `-`; a trace with no steps leaves the part after `;` empty. Files may
//! start with a `# alphabet: a,b,c` header; other `#` lines are comments.

use std::fmt;

use crate::error::{Error, Result};

/// Upper bound on alphabet size; labels are 16-bit sets.
pub const MAX_PROPOSITIONS: usize = 16;

pub type PropId = u8;

/// A named proposition of an [`Alphabet`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Proposition {
    pub id: PropId,
    pub name: String,
}

/// Fixed, ordered set of proposition names. Ids are dense `0..len`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    names: Vec<String>,
}

const RESERVED: &[char] = &[',', '|', ':', ';', '!', '#', '-', '=', '(', ')'];

impl Alphabet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > MAX_PROPOSITIONS {
            return Err(Error::Alphabet(format!(
                "{} propositions exceed the cap of {MAX_PROPOSITIONS}",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty()
                || name.chars().any(|c| c.is_whitespace() || RESERVED.contains(&c))
            {
                return Err(Error::Alphabet(format!("invalid proposition name `{name}`")));
            }
            if names[..i].contains(name) {
                return Err(Error::Alphabet(format!("duplicate proposition `{name}`")));
            }
        }
        Ok(Alphabet { names })
    }

    /// The eight OfficeWorld propositions, in the order coffee, mail, office,
    /// A, B, C, D, decoration.
    pub fn office_world() -> Self {
        Alphabet::new(["coffee", "mail", "office", "A", "B", "C", "D", "decoration"])
            .expect("static alphabet is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: PropId) -> &str {
        &self.names[id as usize]
    }

    pub fn id(&self, name: &str) -> Option<PropId> {
        self.names.iter().position(|n| n == name).map(|i| i as PropId)
    }

    pub fn lookup(&self, name: &str) -> Result<PropId> {
        self.id(name)
            .ok_or_else(|| Error::UnknownProposition(name.to_string()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn propositions(&self) -> impl Iterator<Item = Proposition> + '_ {
        self.names.iter().enumerate().map(|(i, n)| Proposition {
            id: i as PropId,
            name: n.clone(),
        })
    }

    /// Label containing every proposition.
    pub fn full(&self) -> Label {
        Label::from_bits(((1u32 << self.len()) - 1) as u16)
    }

    /// `# alphabet: a,b,c` header line.
    pub fn header(&self) -> String {
        format!("# alphabet: {}", self.names.join(","))
    }

    /// Finds an alphabet header in a text file, if any.
    pub fn from_header(text: &str) -> Option<Result<Alphabet>> {
        text.lines()
            .map(str::trim)
            .find_map(|l| l.strip_prefix("# alphabet:"))
            .map(|rest| Alphabet::new(rest.trim().split(',').map(str::trim)))
    }
}

/// A set of propositions (a truth assignment) as a bitset.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Label(u16);

impl Label {
    pub const EMPTY: Label = Label(0);

    pub fn from_bits(bits: u16) -> Self {
        Label(bits)
    }

    pub fn from_ids<I: IntoIterator<Item = PropId>>(ids: I) -> Self {
        ids.into_iter().fold(Label::EMPTY, Label::with)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn contains(self, id: PropId) -> bool {
        self.0 & (1 << id) != 0
    }

    pub fn with(self, id: PropId) -> Self {
        Label(self.0 | (1 << id))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: Label) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: Label) -> Self {
        Label(self.0 | other.0)
    }

    pub fn intersection(self, other: Label) -> Self {
        Label(self.0 & other.0)
    }

    pub fn difference(self, other: Label) -> Self {
        Label(self.0 & !other.0)
    }

    pub fn ids(self) -> impl Iterator<Item = PropId> {
        (0..MAX_PROPOSITIONS as PropId).filter(move |&i| self.contains(i))
    }

    /// Comma-separated names, or `-` for the empty label.
    pub fn display(self, alphabet: &Alphabet) -> String {
        if self.is_empty() {
            return "-".to_string();
        }
        self.ids()
            .map(|i| alphabet.name(i))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Label> {
        let text = text.trim();
        if text == "-" {
            return Ok(Label::EMPTY);
        }
        text.split(',')
            .map(|n| alphabet.lookup(n.trim()))
            .try_fold(Label::EMPTY, |acc, id| Ok(acc.with(id?)))
    }
}

/// Posterior probability of each proposition at one transition.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbLabel {
    probs: Vec<f64>,
}

impl ProbLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        if probs.len() > MAX_PROPOSITIONS {
            return Err(Error::Alphabet(format!("{} probabilities", probs.len())));
        }
        Ok(ProbLabel { probs })
    }

    /// Degenerate 0/1 probabilities encoding a crisp label.
    pub fn crisp(label: Label, n: usize) -> Self {
        ProbLabel {
            probs: (0..n as PropId)
                .map(|i| if label.contains(i) { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, id: PropId) -> f64 {
        self.probs[id as usize]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Propositions whose probability strictly exceeds `threshold`.
    pub fn above(&self, threshold: f64) -> Label {
        Label::from_ids(
            (0..self.probs.len() as PropId).filter(|&i| self.probs[i as usize] > threshold),
        )
    }

    fn display(&self, alphabet: &Alphabet) -> String {
        let parts: Vec<String> = self
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, p)| format!("{}:{}", alphabet.name(i as PropId), p))
            .collect();
        if parts.is_empty() {
            "-".to_string()
        } else {
            parts.join(",")
        }
    }

    fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let mut probs = vec![0.0; alphabet.len()];
        let text = text.trim();
        if text != "-" {
            for part in text.split(',') {
                let (name, p) = match part.split_once(':') {
                    Some((n, p)) => (
                        n.trim(),
                        p.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::parse(0, format!("bad probability `{p}`: {e}")))?,
                    ),
                    None => (part.trim(), 1.0),
                };
                probs[alphabet.lookup(name)? as usize] = p;
            }
        }
        ProbLabel::new(probs)
    }
}

/// Sequence of noisy labels observed during an episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoisyTrace {
    pub steps: Vec<ProbLabel>,
}

impl NoisyTrace {
    pub fn new(steps: Vec<ProbLabel>) -> Self {
        NoisyTrace { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, step: ProbLabel) {
        self.steps.push(step);
    }

    pub fn prefix(&self, k: usize) -> NoisyTrace {
        NoisyTrace::new(self.steps[..k].to_vec())
    }

    pub fn format(&self, alphabet: &Alphabet) -> String {
        self.steps
            .iter()
            .map(|s| s.display(alphabet))
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        split_steps(text)
            .map(|s| ProbLabel::parse(s, alphabet))
            .collect::<Result<Vec<_>>>()
            .map(NoisyTrace::new)
    }
}

/// Sequence of crisp labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicTrace {
    pub steps: Vec<Label>,
}

impl SymbolicTrace {
    pub fn new(steps: Vec<Label>) -> Self {
        SymbolicTrace { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn format(&self, alphabet: &Alphabet) -> String {
        self.steps
            .iter()
            .map(|l| l.display(alphabet))
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        split_steps(text)
            .map(|s| Label::parse(s, alphabet))
            .collect::<Result<Vec<_>>>()
            .map(SymbolicTrace::new)
    }
}

impl FromIterator<Label> for SymbolicTrace {
    fn from_iter<T: IntoIterator<Item = Label>>(iter: T) -> Self {
        SymbolicTrace::new(iter.into_iter().collect())
    }
}

fn split_steps(text: &str) -> impl Iterator<Item = &str> {
    let text = text.trim();
    text.split('|').filter(move |_| !text.is_empty())
}

/// How a finished trace ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceOutcome {
    Goal,
    DeadEnd,
    Incomplete,
}

impl TraceOutcome {
    pub const ALL: [TraceOutcome; 3] = [
        TraceOutcome::Goal,
        TraceOutcome::DeadEnd,
        TraceOutcome::Incomplete,
    ];

    pub fn code(self) -> char {
        match self {
            TraceOutcome::Goal => 'G',
            TraceOutcome::DeadEnd => 'D',
            TraceOutcome::Incomplete => 'I',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code.trim() {
            "G" => Some(TraceOutcome::Goal),
            "D" => Some(TraceOutcome::DeadEnd),
            "I" => Some(TraceOutcome::Incomplete),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TraceOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Drops consecutive repetitions of the same label.
pub fn compress(trace: &SymbolicTrace) -> SymbolicTrace {
    let mut steps = trace.steps.clone();
    steps.dedup();
    SymbolicTrace::new(steps)
}

fn outcome_and_rest(line: &str, lineno: usize) -> Result<(TraceOutcome, &str)> {
    let (code, rest) = line
        .split_once(';')
        .ok_or_else(|| Error::parse(lineno, "missing `;` after outcome"))?;
    let outcome = TraceOutcome::from_code(code)
        .ok_or_else(|| Error::parse(lineno, format!("unknown outcome `{code}`")))?;
    Ok((outcome, rest))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn with_line<T>(r: Result<T>, lineno: usize) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { msg, .. } => Error::parse(lineno, msg),
        other => Error::parse(lineno, other.to_string()),
    })
}

pub fn format_noisy_line(outcome: TraceOutcome, trace: &NoisyTrace, alphabet: &Alphabet) -> String {
    format!("{};{}", outcome.code(), trace.format(alphabet))
}

pub fn format_symbolic_line(
    outcome: TraceOutcome,
    trace: &SymbolicTrace,
    alphabet: &Alphabet,
) -> String {
    format!("{};{}", outcome.code(), trace.format(alphabet))
}

pub fn parse_noisy_traces(text: &str, alphabet: &Alphabet) -> Result<Vec<(TraceOutcome, NoisyTrace)>> {
    content_lines(text)
        .map(|(n, line)| {
            let (outcome, rest) = outcome_and_rest(line, n)?;
            Ok((outcome, with_line(NoisyTrace::parse(rest, alphabet), n)?))
        })
        .collect()
}

pub fn parse_symbolic_traces(
    text: &str,
    alphabet: &Alphabet,
) -> Result<Vec<(TraceOutcome, SymbolicTrace)>> {
    content_lines(text)
        .map(|(n, line)| {
            let (outcome, rest) = outcome_and_rest(line, n)?;
            Ok((outcome, with_line(SymbolicTrace::parse(rest, alphabet), n)?))
        })
        .collect()
}

pub fn write_symbolic_traces(
    traces: &[(TraceOutcome, SymbolicTrace)],
    alphabet: &Alphabet,
) -> String {
    let mut out = alphabet.header();
    out.push('\n');
    for (o, t) in traces {
        out.push_str(&format_symbolic_line(*o, t, alphabet));
        out.push('\n');
    }
    out
}

pub fn write_noisy_traces(traces: &[(TraceOutcome, NoisyTrace)], alphabet: &Alphabet) -> String {
    let mut out = alphabet.header();
    out.push('\n');
    for (o, t) in traces {
        out.push_str(&format_noisy_line(*o, t, alphabet));
        out.push('\n');
    }
    out
}
