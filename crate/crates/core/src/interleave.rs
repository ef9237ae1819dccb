//! The learning loop: episodes under the current hypothesis machine, example
//! collection, conformance tracking and relearning.
//!
//! `step_cnt` counts episodes since the last relearn.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{Agent, QTable, Transition};
use crate::error::{Error, Result};
use crate::events::{Alphabet, NoisyTrace, TraceOutcome};
use crate::examples::{consolidate, format_pool, incomplete_prefixes, parse_pool, sample_example, Subsample, WeightedExample};
use crate::induction::{induce, EdgeCost, InductionTask};
use crate::machine::{
    belief_step, is_terminal_belief, most_likely_state, threshold_step, BeliefVector, RewardMachine, Shaping,
};
use crate::worlds::{Action, OfficeWorld, Pos};

const CE_CLAMP: f64 = 1e-10;

/// Which side of β triggers a relearn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RelearnWhen {
    #[default]
    Above,
    Below,
}

impl FromStr for RelearnWhen {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "above" => Ok(RelearnWhen::Above),
            "below" => Ok(RelearnWhen::Below),
            other => Err(Error::config("relearn_when", format!("expected `above` or `below`, got `{other}`"))),
        }
    }
}

/// How the machine state is tracked during an episode.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum LabelMode {
    /// Full belief propagation.
    #[default]
    Belief,
    /// Crisp tracking on the propositions above the threshold.
    Threshold(f64),
}

#[derive(Clone, Debug)]
pub struct Params {
    pub beta: f64,
    pub warmup: u64,
    pub max_ep_len: usize,
    /// Complete examples sampled per finished episode.
    pub samples_per_trace: usize,
    pub prefixes: Subsample,
    /// Intermediate-state budget of the first induction.
    pub max_states: usize,
    /// Escalation never goes beyond this.
    pub max_states_cap: usize,
    pub edge_cost: EdgeCost,
    pub budget: Option<Duration>,
    pub relearn_when: RelearnWhen,
    pub shaping: bool,
    /// Lowest shaped reward; `None` means `-10 |U|` of the machine in use.
    pub shaping_floor: Option<f64>,
    pub label_mode: LabelMode,
    /// Keep the Q-table when a relearn returns the machine already in use.
    pub keep_q_if_unchanged: bool,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            beta: 0.1,
            warmup: 50,
            max_ep_len: 500,
            samples_per_trace: 1,
            prefixes: Subsample::default(),
            max_states: 1,
            max_states_cap: 4,
            edge_cost: EdgeCost::default(),
            budget: Some(Duration::from_secs(60)),
            relearn_when: RelearnWhen::default(),
            shaping: true,
            shaping_floor: None,
            label_mode: LabelMode::default(),
            keep_q_if_unchanged: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub rm: RewardMachine,
    /// Raw examples; consolidated on every relearn.
    pub pool: Vec<WeightedExample>,
    pub step_cnt: u64,
    pub ce_sum: f64,
    /// Current intermediate-state budget.
    pub max_states: usize,
    /// False for the fixed-machine baseline.
    pub learning: bool,
    pub relearns: u64,
    /// Relearns whose induction ran out of budget.
    pub suboptimal: u64,
}

impl RunState {
    /// Starts from the loop machine and learns.
    pub fn learner(params: &Params) -> Self {
        RunState {
            rm: RewardMachine::trivial(),
            pool: Vec::new(),
            step_cnt: 0,
            ce_sum: 0.0,
            max_states: params.max_states,
            learning: true,
            relearns: 0,
            suboptimal: 0,
        }
    }

    /// Fixed machine, no examples, no relearning.
    pub fn fixed(rm: RewardMachine) -> Self {
        RunState {
            rm,
            pool: Vec::new(),
            step_cnt: 0,
            ce_sum: 0.0,
            max_states: 0,
            learning: false,
            relearns: 0,
            suboptimal: 0,
        }
    }
}

/// Cross-entropy between the outcome the belief predicts,
/// `(b[uA], b[uR], 1 - b[uA] - b[uR])`, and the observed one.
pub fn recognize_belief(rm: &RewardMachine, outcome: TraceOutcome, belief: &BeliefVector) -> f64 {
    let acc = belief.get(rm.accepting());
    let rej = belief.get(rm.rejecting());
    let p = match outcome {
        TraceOutcome::Goal => acc,
        TraceOutcome::DeadEnd => rej,
        TraceOutcome::Incomplete => 1.0 - acc - rej,
    };
    -p.clamp(CE_CLAMP, 1.0).ln()
}

pub fn should_relearn(state: &RunState, params: &Params) -> bool {
    if !state.learning || state.step_cnt < params.warmup || state.step_cnt == 0 {
        return false;
    }
    let avg = state.ce_sum / state.step_cnt as f64;
    match params.relearn_when {
        RelearnWhen::Above => avg > params.beta,
        RelearnWhen::Below => avg < params.beta,
    }
}

/// What a relearn did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Relearned {
    pub changed: bool,
    pub escalated: bool,
    pub suboptimal: bool,
}

/// Induces a new machine from the consolidated pool. When the result equals
/// the machine in use (and this is not the first learn), the state budget
/// grows by one for a single retry.
pub fn relearn(state: &mut RunState, params: &Params, alphabet: &Alphabet) -> Result<Relearned> {
    if state.pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut task = InductionTask {
        alphabet: alphabet.clone(),
        examples: consolidate(&state.pool),
        max_intermediate_states: state.max_states,
        edge_cost: params.edge_cost,
        budget: params.budget,
        hint: Some(state.rm.clone()),
    };
    let mut h = induce(&task)?;
    let mut escalated = false;
    let same = |a: &RewardMachine, b: &RewardMachine| a.format(alphabet) == b.format(alphabet);
    if state.relearns > 0 && same(&h.machine, &state.rm) && state.max_states < params.max_states_cap {
        state.max_states += 1;
        task.max_intermediate_states = state.max_states;
        h = induce(&task)?;
        escalated = true;
    }
    let changed = !same(&h.machine, &state.rm);
    state.rm = h.machine;
    state.step_cnt = 0;
    state.ce_sum = 0.0;
    state.relearns += 1;
    if h.suboptimal {
        state.suboptimal += 1;
    }
    Ok(Relearned {
        changed,
        escalated,
        suboptimal: h.suboptimal,
    })
}

/// The three random streams of a replica.
#[derive(Clone, Debug, PartialEq)]
pub struct Streams {
    /// Sensor noise.
    pub env: ChaCha8Rng,
    /// Exploration and tie-breaks.
    pub agent: ChaCha8Rng,
    /// Example sampling.
    pub sample: ChaCha8Rng,
}

impl Streams {
    /// Streams `3i`, `3i + 1`, `3i + 2` of the generator keyed by `seed`,
    /// for replica `i`.
    pub fn derive(seed: u64, replica: u64) -> Self {
        let make = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(replica * 3 + k);
            rng
        };
        Streams {
            env: make(0),
            agent: make(1),
            sample: make(2),
        }
    }
}

/// One finished episode.
#[derive(Clone, Debug)]
pub struct Episode {
    pub trace: NoisyTrace,
    pub outcome: TraceOutcome,
    /// Undiscounted environment return.
    pub ret: f64,
    pub final_belief: BeliefVector,
    pub steps: usize,
}

/// Runs one episode under `rm`, updating the agent after every step. Ends on
/// environment termination, when the most likely machine state is a sink, or
/// after `max_ep_len` steps.
pub fn run_episode(
    rm: &RewardMachine,
    params: &Params,
    world: &mut OfficeWorld,
    agent: &mut Agent,
    streams: &mut Streams,
) -> Result<Episode> {
    drive(rm, params, world, agent, streams, &mut |agent, pos, b, rng| agent.act(pos, b, rng))
}

type Policy<'a> = dyn FnMut(&Agent, Pos, &BeliefVector, &mut ChaCha8Rng) -> Action + 'a;

fn drive(
    rm: &RewardMachine,
    params: &Params,
    world: &mut OfficeWorld,
    agent: &mut Agent,
    streams: &mut Streams,
    policy: &mut Policy<'_>,
) -> Result<Episode> {
    world.reset();
    let shaping = params.shaping.then(|| match params.shaping_floor {
        Some(f) => Shaping::with_floor(rm, f),
        None => Shaping::new(rm),
    });
    let mut belief = BeliefVector::initial(rm);
    let mut trace = NoisyTrace::new(Vec::new());
    let mut ret = 0.0;
    for _ in 0..params.max_ep_len {
        let pos = world.pos();
        let action = policy(agent, pos, &belief, &mut streams.agent);
        let r = world.step(action, &mut streams.env)?;
        let next = match params.label_mode {
            LabelMode::Belief => belief_step(rm, &belief, &r.prob_label),
            LabelMode::Threshold(th) => {
                let u = threshold_step(rm, most_likely_state(&belief), &r.prob_label, th)?;
                BeliefVector::one_hot(rm.n_states(), u)
            }
        };
        trace.push(r.prob_label);
        let shaped = shaping.as_ref().map_or(0.0, |s| s.reward(&belief, &next, agent.gamma));
        let terminal = r.terminal || is_terminal_belief(rm, &next);
        agent.learn(&Transition {
            pos,
            belief: &belief,
            action,
            reward: r.reward + shaped,
            next_pos: r.pos,
            next_belief: &next,
            terminal,
        });
        ret += r.reward;
        belief = next;
        if terminal {
            break;
        }
    }
    let monitor = world.monitor();
    let outcome = if monitor.is_goal() {
        TraceOutcome::Goal
    } else if monitor.is_terminal() {
        TraceOutcome::DeadEnd
    } else {
        TraceOutcome::Incomplete
    };
    Ok(Episode {
        steps: trace.len(),
        trace,
        outcome,
        ret,
        final_belief: belief,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub ret: f64,
    pub outcome: TraceOutcome,
    pub steps: usize,
    pub relearned: bool,
    /// States of the machine in use after the episode.
    pub rm_states: usize,
    pub wall: Duration,
}

/// World, agent, streams and run state of one experiment replica.
#[derive(Clone, Debug)]
pub struct Replica {
    pub world: OfficeWorld,
    pub agent: Agent,
    pub params: Params,
    pub state: RunState,
    pub streams: Streams,
    pub alphabet: Alphabet,
    /// Episodes completed.
    pub episode: u64,
}

impl Replica {
    pub fn new(world: OfficeWorld, agent: Agent, params: Params, state: RunState, streams: Streams) -> Self {
        Replica {
            world,
            agent,
            params,
            state,
            streams,
            alphabet: Alphabet::office_world(),
            episode: 0,
        }
    }

    /// One episode, its examples, the conformance update and a relearn if due.
    pub fn step(&mut self) -> Result<EpisodeRecord> {
        let start = Instant::now();
        let ep = run_episode(&self.state.rm, &self.params, &mut self.world, &mut self.agent, &mut self.streams)?;
        let mut relearned = false;
        if self.state.learning {
            let rng = &mut self.streams.sample;
            for _ in 0..self.params.samples_per_trace {
                self.state.pool.push(sample_example(&ep.trace, ep.outcome, rng));
            }
            self.state.pool.extend(incomplete_prefixes(&ep.trace, self.params.prefixes, rng));
            self.state.ce_sum += recognize_belief(&self.state.rm, ep.outcome, &ep.final_belief);
            self.state.step_cnt += 1;
            if should_relearn(&self.state, &self.params) {
                let r = relearn(&mut self.state, &self.params, &self.alphabet)?;
                if r.changed || !self.params.keep_q_if_unchanged {
                    self.agent.reset_q();
                }
                relearned = true;
            }
        }
        let record = EpisodeRecord {
            episode: self.episode,
            ret: ep.ret,
            outcome: ep.outcome,
            steps: ep.steps,
            relearned,
            rm_states: self.state.rm.n_states(),
            wall: start.elapsed(),
        };
        self.episode += 1;
        Ok(record)
    }

    /// Everything that changes between episodes, losslessly: counters, the
    /// three generator positions, the machine, the raw pool and the Q-table.
    pub fn checkpoint(&self) -> String {
        let s = &self.state;
        let mut out = String::from("checkpoint 1\n");
        let _ = writeln!(out, "episode {}", self.episode);
        let _ = writeln!(out, "agent_steps {}", self.agent.steps);
        let _ = writeln!(out, "step_cnt {}", s.step_cnt);
        let _ = writeln!(out, "ce_sum {:016x}", s.ce_sum.to_bits());
        let _ = writeln!(out, "max_states {}", s.max_states);
        let _ = writeln!(out, "learning {}", s.learning as u8);
        let _ = writeln!(out, "relearns {}", s.relearns);
        let _ = writeln!(out, "suboptimal {}", s.suboptimal);
        for (name, rng) in [("env", &self.streams.env), ("agent", &self.streams.agent), ("sample", &self.streams.sample)] {
            let seed: String = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
            let _ = writeln!(out, "rng {name} {seed} {} {}", rng.get_stream(), rng.get_word_pos());
        }
        out.push_str("[rm]\n");
        out.push_str(&s.rm.format(&self.alphabet));
        out.push_str("[pool]\n");
        out.push_str(&format_pool(&s.pool, &self.alphabet));
        out.push_str("[q]\n");
        out.push_str(&self.agent.q.dump());
        out
    }

    /// Inverse of [`Replica::checkpoint`]; world, parameters and agent
    /// hyperparameters stay as configured.
    pub fn restore(&mut self, text: &str) -> Result<()> {
        let mut head = Vec::new();
        let mut sections: Vec<(String, String)> = Vec::new();
        for line in text.lines() {
            if line.starts_with('[') && line.ends_with(']') {
                sections.push((line.to_string(), String::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push_str(line);
                body.push('\n');
            } else {
                head.push(line);
            }
        }
        let section = |name: &str| {
            sections
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, b)| b.as_str())
                .ok_or_else(|| Error::parse(0, format!("checkpoint lacks {name}")))
        };
        let rm = RewardMachine::parse(section("[rm]")?, &self.alphabet)?;
        let (_, pool) = parse_pool(section("[pool]")?, Some(&self.alphabet))?;
        let q = QTable::load(section("[q]")?)?;

        let field = |key: &str| -> Result<&str> {
            head.iter()
                .enumerate()
                .find_map(|(i, l)| {
                    l.strip_prefix(key)
                        .and_then(|r| r.strip_prefix(' '))
                        .map(|r| (i, r.trim()))
                })
                .map(|(_, r)| r)
                .ok_or_else(|| Error::parse(0, format!("checkpoint lacks `{key}`")))
        };
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::parse(0, format!("bad `{key}` value `{v}`")))
        }
        let rng_of = |name: &str| -> Result<ChaCha8Rng> {
            let v = field(&format!("rng {name}"))?;
            let parts: Vec<&str> = v.split_whitespace().collect();
            let [seed, stream, word] = parts.as_slice() else {
                return Err(Error::parse(0, format!("bad rng line for {name}")));
            };
            if seed.len() != 64 {
                return Err(Error::parse(0, "rng seed must be 32 bytes"));
            }
            let mut bytes = [0u8; 32];
            for (i, b) in bytes.iter_mut().enumerate() {
                *b = u8::from_str_radix(&seed[2 * i..2 * i + 2], 16)
                    .map_err(|_| Error::parse(0, "bad rng seed"))?;
            }
            let mut rng = ChaCha8Rng::from_seed(bytes);
            rng.set_stream(num("stream", stream)?);
            rng.set_word_pos(num("word position", word)?);
            Ok(rng)
        };
        let ce_bits = u64::from_str_radix(field("ce_sum")?, 16).map_err(|_| Error::parse(0, "bad ce_sum"))?;

        self.episode = num("episode", field("episode")?)?;
        self.agent.steps = num("agent_steps", field("agent_steps")?)?;
        self.agent.q = q;
        self.streams = Streams {
            env: rng_of("env")?,
            agent: rng_of("agent")?,
            sample: rng_of("sample")?,
        };
        self.state = RunState {
            rm,
            pool,
            step_cnt: num("step_cnt", field("step_cnt")?)?,
            ce_sum: f64::from_bits(ce_bits),
            max_states: num("max_states", field("max_states")?)?,
            learning: field("learning")? == "1",
            relearns: num("relearns", field("relearns")?)?,
            suboptimal: num("suboptimal", field("suboptimal")?)?,
        };
        Ok(())
    }
}
