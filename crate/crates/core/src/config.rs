//! Experiment configuration: sectioned `key = value` text.
//!
//! ```text
//! [experiment]
//! task = coffee
//! maps = canonical
//! seeds = 0, 1, 2
//! episodes = 5000
//!
//! [noise]
//! targets = first
//! posterior = 0.9
//! ```
//!
//! Every key is optional; unknown sections or keys are errors. See
//! `docs/example.ini` for the full list with defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{Agent, ExplorationSchedule};
use crate::error::{Error, Result};
use crate::events::{Alphabet, Label};
use crate::examples::Subsample;
use crate::induction::EdgeCost;
use crate::interleave::{LabelMode, Params, RelearnWhen};
use crate::sensors::{SensorBank, SensorSpec};
use crate::worlds::{random_map, GridMap, Task};

/// Raw `section.key -> value` pairs.
fn parse_sections(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let lno = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(lno, format!("expected `key = value`, got `{line}`")))?;
        if section.is_empty() {
            return Err(Error::parse(lno, "key outside of any section"));
        }
        let full = format!("{section}.{}", key.trim());
        if out.insert(full.clone(), (lno, value.trim().to_string())).is_some() {
            return Err(Error::parse(lno, format!("duplicate key `{full}`")));
        }
    }
    Ok(out)
}

/// Which maps the replicas run on.
#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    Canonical,
    /// `n` random layouts drawn from `seed`.
    Random { n: usize, seed: u64 },
    Files(Vec<PathBuf>),
}

impl MapSpec {
    pub fn count(&self) -> usize {
        match self {
            MapSpec::Canonical => 1,
            MapSpec::Random { n, .. } => *n,
            MapSpec::Files(f) => f.len(),
        }
    }

    pub fn build(&self, base: &Path) -> Result<Vec<GridMap>> {
        match self {
            MapSpec::Canonical => Ok(vec![GridMap::canonical()]),
            MapSpec::Random { n, seed } => Ok((0..*n)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    rng.set_stream(i as u64);
                    random_map(&mut rng)
                })
                .collect()),
            MapSpec::Files(files) => files
                .iter()
                .map(|f| GridMap::parse(&std::fs::read_to_string(base.join(f))?))
                .collect(),
        }
    }
}

/// Which sensors are noisy.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseTargets {
    First,
    All,
    List(Vec<String>),
}

/// How noisy sensors are specified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Noise {
    /// Detection posterior.
    Posterior(f64),
    /// Sensitivity = specificity.
    Confidence(f64),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub task: Task,
    pub maps: MapSpec,
    pub seeds: Vec<u64>,
    pub episodes: u64,
    pub workers: usize,
    pub checkpoint_every: u64,
    /// Budget exhaustion during induction is an error.
    pub strict: bool,
    pub targets: NoiseTargets,
    pub noise: Noise,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: ExplorationSchedule,
    pub decimals: u32,
    pub params: Params,
    /// Directory relative paths resolve against.
    pub base: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Coffee,
            maps: MapSpec::Canonical,
            seeds: vec![0],
            episodes: 5000,
            workers: 0,
            checkpoint_every: 0,
            strict: false,
            targets: NoiseTargets::First,
            noise: Noise::Posterior(0.9),
            gamma: 0.99,
            alpha: 0.1,
            epsilon: ExplorationSchedule::default(),
            decimals: 2,
            params: Params::default(),
            base: PathBuf::from("."),
        }
    }
}

fn field<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected on/off, got `{value}`"))),
    }
}

fn probability(key: &str, value: &str) -> Result<f64> {
    let p: f64 = field(key, value)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(key, format!("{p} is not a probability")));
    }
    Ok(p)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::parse(&text)?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut eps = (cfg.epsilon.start, cfg.epsilon.end, cfg.epsilon.decay_steps);
        for (key, (_, v)) in parse_sections(text)? {
            let v = v.as_str();
            let p = &mut cfg.params;
            match key.as_str() {
                "experiment.task" => cfg.task = v.parse()?,
                "experiment.maps" => cfg.maps = parse_maps(v)?,
                "experiment.seeds" => {
                    cfg.seeds = v
                        .split(',')
                        .map(|s| field("seeds", s.trim()))
                        .collect::<Result<_>>()?
                }
                "experiment.episodes" => cfg.episodes = field(&key, v)?,
                "experiment.max_ep_len" => p.max_ep_len = field(&key, v)?,
                "experiment.workers" => cfg.workers = field(&key, v)?,
                "experiment.checkpoint_every" => cfg.checkpoint_every = field(&key, v)?,
                "experiment.strict" => cfg.strict = flag(&key, v)?,
                "noise.targets" => {
                    cfg.targets = match v {
                        "first" => NoiseTargets::First,
                        "all" => NoiseTargets::All,
                        list => NoiseTargets::List(list.split(',').map(|s| s.trim().to_string()).collect()),
                    }
                }
                "noise.posterior" => cfg.noise = Noise::Posterior(probability(&key, v)?),
                "noise.confidence" => cfg.noise = Noise::Confidence(probability(&key, v)?),
                "agent.gamma" => cfg.gamma = field(&key, v)?,
                "agent.alpha" => cfg.alpha = field(&key, v)?,
                "agent.epsilon_start" => eps.0 = probability(&key, v)?,
                "agent.epsilon_end" => eps.1 = probability(&key, v)?,
                "agent.epsilon_decay" => eps.2 = field(&key, v)?,
                "agent.decimals" => cfg.decimals = field(&key, v)?,
                "agent.shaping" => p.shaping = flag(&key, v)?,
                "agent.shaping_floor" => {
                    p.shaping_floor = match v {
                        "default" => None,
                        f => Some(field(&key, f)?),
                    }
                }
                "agent.threshold" => {
                    p.label_mode = match v {
                        "off" => LabelMode::Belief,
                        t => LabelMode::Threshold(probability(&key, t)?),
                    }
                }
                "learning.beta" => p.beta = field(&key, v)?,
                "learning.warmup" => p.warmup = field(&key, v)?,
                "learning.relearn_when" => p.relearn_when = v.parse::<RelearnWhen>()?,
                "learning.samples_per_trace" => p.samples_per_trace = field(&key, v)?,
                "learning.prefixes" => p.prefixes = v.parse::<Subsample>()?,
                "learning.max_states" => p.max_states = field(&key, v)?,
                "learning.max_states_cap" => p.max_states_cap = field(&key, v)?,
                "learning.edge_cost" => p.edge_cost = v.parse::<EdgeCost>()?,
                "learning.budget" => {
                    p.budget = match v {
                        "none" => None,
                        secs => Some(Duration::from_secs_f64(field(&key, secs)?)),
                    }
                }
                "learning.keep_q_if_unchanged" => p.keep_q_if_unchanged = flag(&key, v)?,
                other => return Err(Error::config(other, "unknown key")),
            }
        }
        cfg.epsilon = ExplorationSchedule::new(eps.0, eps.1, eps.2)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "at least one seed is required"));
        }
        if self.maps.count() == 0 {
            return Err(Error::config("experiment.maps", "at least one map is required"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("agent.alpha", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("agent.gamma", "must lie in [0, 1)"));
        }
        if self.params.max_states > self.params.max_states_cap {
            return Err(Error::config("learning.max_states", "exceeds max_states_cap"));
        }
        let (Noise::Posterior(p) | Noise::Confidence(p)) = self.noise;
        if p <= 0.0 {
            return Err(Error::config("noise", "must be positive"));
        }
        self.noisy()?;
        Ok(())
    }

    /// Propositions whose sensors are noisy.
    pub fn noisy(&self) -> Result<Label> {
        match &self.targets {
            NoiseTargets::First => Ok(self.task.noise_first()),
            NoiseTargets::All => Ok(self.task.noise_all()),
            NoiseTargets::List(names) => {
                let a = Alphabet::office_world();
                names
                    .iter()
                    .try_fold(Label::EMPTY, |l, n| Ok(l.with(a.lookup(n)?)))
                    .map_err(|e: Error| Error::config("noise.targets", e.to_string()))
            }
        }
    }

    pub fn bank(&self, map: &GridMap) -> Result<SensorBank> {
        let priors = map.priors(Alphabet::office_world().len());
        let noisy = self.noisy()?;
        match self.noise {
            Noise::Posterior(t) => SensorBank::targeted(&priors, noisy, t),
            Noise::Confidence(c) => SensorBank::new(
                priors
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        if noisy.contains(i as u8) {
                            SensorSpec::with_confidence(c, p)
                        } else {
                            SensorSpec::perfect(p)
                        }
                    })
                    .collect::<Result<_>>()?,
            ),
        }
    }

    pub fn agent(&self) -> Result<Agent> {
        Agent::new(self.decimals, self.epsilon, self.alpha, self.gamma)
    }
}

fn parse_maps(v: &str) -> Result<MapSpec> {
    if v == "canonical" {
        return Ok(MapSpec::Canonical);
    }
    if let Some(rest) = v.strip_prefix("random") {
        // `random N` or `random N seed S`
        let parts: Vec<&str> = rest.split_whitespace().collect();
        return match parts.as_slice() {
            [n] => Ok(MapSpec::Random {
                n: field("experiment.maps", n)?,
                seed: 0,
            }),
            [n, "seed", s] => Ok(MapSpec::Random {
                n: field("experiment.maps", n)?,
                seed: field("experiment.maps", s)?,
            }),
            _ => Err(Error::config("experiment.maps", "expected `random N [seed S]`")),
        };
    }
    Ok(MapSpec::Files(v.split(',').map(|s| PathBuf::from(s.trim())).collect()))
}
