//! Multi-replica experiments: one replica per (seed, map), run in parallel,
//! with per-replica CSVs and a smoothed aggregate.
//!
//! Output layout under the run directory:
//!
//! ```text
//! raw/<replica>.csv     episode,return,outcome,steps,relearned,rm_states
//! wall/<replica>.csv    episode,wall_us
//! checkpoints/<replica>.ckpt
//! aggregate.csv         episode,mean_return,std_return,smoothed_mean,smoothed_std
//! ```
//!
//! Returns are printed in shortest round-trip form, so [`curves`] rebuilds
//! `aggregate.csv` bit for bit from `raw/`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::events::TraceOutcome;
use crate::interleave::{EpisodeRecord, Replica, RunState, Streams};
use crate::worlds::{GridMap, OfficeWorld};

/// Moving-average window of the aggregate.
pub const WINDOW: usize = 100;

pub const RAW_HEADER: &str = "episode,return,outcome,steps,relearned,rm_states";
pub const AGGREGATE_HEADER: &str = "episode,mean_return,std_return,smoothed_mean,smoothed_std";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Learn the machine while learning the policy.
    Learn,
    /// Fixed task machine, no examples.
    Baseline,
}

/// One row of a raw CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRow {
    pub episode: u64,
    pub ret: f64,
    pub outcome: TraceOutcome,
    pub steps: usize,
    pub relearned: bool,
    pub rm_states: usize,
}

impl From<&EpisodeRecord> for RawRow {
    fn from(r: &EpisodeRecord) -> Self {
        RawRow {
            episode: r.episode,
            ret: r.ret,
            outcome: r.outcome,
            steps: r.steps,
            relearned: r.relearned,
            rm_states: r.rm_states,
        }
    }
}

impl RawRow {
    fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{}\n",
            self.episode,
            self.ret,
            self.outcome.code(),
            self.steps,
            self.relearned as u8,
            self.rm_states
        )
    }
}

pub fn format_raw(rows: &[RawRow]) -> String {
    let mut out = format!("{RAW_HEADER}\n");
    for r in rows {
        out.push_str(&r.line());
    }
    out
}

pub fn parse_raw(text: &str) -> Result<Vec<RawRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RAW_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{RAW_HEADER}`"))),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |what: &str| Error::parse(i + 1, format!("bad {what} in `{l}`"));
            let f: Vec<&str> = l.trim().split(',').collect();
            if f.len() != 6 {
                return Err(bad("column count"));
            }
            Ok(RawRow {
                episode: f[0].parse().map_err(|_| bad("episode"))?,
                ret: f[1].parse().map_err(|_| bad("return"))?,
                outcome: TraceOutcome::from_code(f[2]).ok_or_else(|| bad("outcome"))?,
                steps: f[3].parse().map_err(|_| bad("steps"))?,
                relearned: match f[4] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("relearned flag")),
                },
                rm_states: f[5].parse().map_err(|_| bad("rm_states"))?,
            })
        })
        .collect()
}

/// Trailing moving average; the first `window - 1` entries average what is
/// available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    for e in 0..xs.len() {
        let lo = (e + 1).saturating_sub(window);
        let w = &xs[lo..=e];
        out.push(w.iter().sum::<f64>() / w.len() as f64);
    }
    out
}

/// Population mean and standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub episode: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub smoothed_mean: f64,
    pub smoothed_std: f64,
}

/// Per-episode statistics across replicas. Smoothed columns are the mean and
/// spread of each replica's own window average. Rows stop at the shortest
/// replica.
pub fn aggregate(returns: &[Vec<f64>]) -> Vec<AggregateRow> {
    if returns.is_empty() {
        return Vec::new();
    }
    let len = returns.iter().map(Vec::len).min().unwrap_or(0);
    let smoothed: Vec<Vec<f64>> = returns.iter().map(|r| moving_average(&r[..len], WINDOW)).collect();
    (0..len)
        .map(|e| {
            let raw: Vec<f64> = returns.iter().map(|r| r[e]).collect();
            let sm: Vec<f64> = smoothed.iter().map(|s| s[e]).collect();
            let (mean_return, std_return) = mean_std(&raw);
            let (smoothed_mean, smoothed_std) = mean_std(&sm);
            AggregateRow {
                episode: e as u64,
                mean_return,
                std_return,
                smoothed_mean,
                smoothed_std,
            }
        })
        .collect()
}

pub fn format_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.episode, r.mean_return, r.std_return, r.smoothed_mean, r.smoothed_std
        );
    }
    out
}

/// First episode whose full-window average reaches `level`. Partial windows
/// at the start are skipped so one early success does not count.
pub fn episodes_to(returns: &[f64], level: f64) -> Option<u64> {
    moving_average(returns, WINDOW)
        .iter()
        .enumerate()
        .skip(WINDOW - 1)
        .find(|(_, &m)| m >= level)
        .map(|(e, _)| e as u64)
}

/// Final window average, or 0 for an empty run.
pub fn final_smoothed(returns: &[f64]) -> f64 {
    moving_average(returns, WINDOW).last().copied().unwrap_or(0.0)
}

/// Name of the replica for `seed` on map `map_idx`; also its file stem.
pub fn replica_name(seed: u64, map_idx: usize) -> String {
    format!("seed{seed}_map{map_idx}")
}

/// Fresh replica: sensors from the noise settings, streams keyed by
/// `(seed, map_idx)`.
pub fn build_replica(cfg: &ExperimentConfig, mode: Mode, seed: u64, map_idx: usize, map: &GridMap) -> Result<Replica> {
    let task_rm = cfg.task.machine();
    let world = OfficeWorld::new(map.clone(), cfg.bank(map)?, task_rm.clone());
    let state = match mode {
        Mode::Learn => RunState::learner(&cfg.params),
        Mode::Baseline => RunState::fixed(task_rm),
    };
    Ok(Replica::new(
        world,
        cfg.agent()?,
        cfg.params.clone(),
        state,
        Streams::derive(seed, map_idx as u64),
    ))
}

#[derive(Clone, Debug)]
pub struct ReplicaRun {
    pub name: String,
    pub seed: u64,
    pub map_idx: usize,
    pub rows: Vec<RawRow>,
    pub wall_us: Vec<u128>,
    pub relearns: u64,
    pub suboptimal: u64,
}

impl ReplicaRun {
    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ret).collect()
    }
}

/// Where and how often a replica persists itself.
#[derive(Clone, Debug, Default)]
pub struct Persist {
    pub out: Option<PathBuf>,
    pub checkpoint_every: u64,
    /// Continue from an existing checkpoint when one is found.
    pub resume: bool,
}

impl Persist {
    fn path(&self, dir: &str, name: &str, ext: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|o| o.join(dir).join(format!("{name}.{ext}")))
    }
}

fn write_wall(path: &Path, wall_us: &[u128]) -> Result<()> {
    let mut s = String::from("episode,wall_us\n");
    for (e, w) in wall_us.iter().enumerate() {
        let _ = writeln!(s, "{e},{w}");
    }
    fs::write(path, s)?;
    Ok(())
}

fn parse_wall(text: &str) -> Vec<u128> {
    text.lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1)?.trim().parse().ok())
        .collect()
}

fn save(run: &ReplicaRun, replica: &Replica, persist: &Persist) -> Result<()> {
    if let Some(p) = persist.path("raw", &run.name, "csv") {
        fs::write(p, format_raw(&run.rows))?;
    }
    if let Some(p) = persist.path("wall", &run.name, "csv") {
        write_wall(&p, &run.wall_us)?;
    }
    if persist.checkpoint_every > 0 {
        if let Some(p) = persist.path("checkpoints", &run.name, "ckpt") {
            fs::write(p, replica.checkpoint())?;
        }
    }
    Ok(())
}

/// Runs one replica to `cfg.episodes`, resuming from its checkpoint if asked.
pub fn run_replica(
    cfg: &ExperimentConfig,
    mode: Mode,
    seed: u64,
    map_idx: usize,
    map: &GridMap,
    persist: &Persist,
    progress: &AtomicU64,
) -> Result<ReplicaRun> {
    let name = replica_name(seed, map_idx);
    let mut replica = build_replica(cfg, mode, seed, map_idx, map)?;
    let mut run = ReplicaRun {
        name: name.clone(),
        seed,
        map_idx,
        rows: Vec::new(),
        wall_us: Vec::new(),
        relearns: 0,
        suboptimal: 0,
    };
    if persist.resume {
        if let Some(ckpt) = persist.path("checkpoints", &name, "ckpt").filter(|p| p.exists()) {
            replica.restore(&fs::read_to_string(ckpt)?)?;
            let done = replica.episode as usize;
            let raw = persist.path("raw", &name, "csv").expect("out is set");
            run.rows = parse_raw(&fs::read_to_string(raw)?)?;
            if run.rows.len() < done {
                return Err(Error::parse(0, format!("{name}: raw CSV shorter than its checkpoint")));
            }
            run.rows.truncate(done);
            if let Some(w) = persist.path("wall", &name, "csv").filter(|p| p.exists()) {
                run.wall_us = parse_wall(&fs::read_to_string(w)?);
            }
            run.wall_us.resize(done, 0);
            progress.fetch_add(done as u64, Ordering::Relaxed);
        }
    }
    while replica.episode < cfg.episodes {
        let rec = replica.step()?;
        if cfg.strict && replica.state.suboptimal > 0 {
            return Err(Error::BudgetExhausted(format!("{name}, episode {}", rec.episode)));
        }
        run.rows.push(RawRow::from(&rec));
        run.wall_us.push(rec.wall.as_micros());
        progress.fetch_add(1, Ordering::Relaxed);
        if persist.checkpoint_every > 0 && replica.episode % persist.checkpoint_every == 0 {
            save(&run, &replica, persist)?;
        }
    }
    run.relearns = replica.state.relearns;
    run.suboptimal = replica.state.suboptimal;
    save(&run, &replica, persist)?;
    Ok(run)
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub runs: Vec<ReplicaRun>,
    pub aggregate: Vec<AggregateRow>,
}

impl Summary {
    pub fn suboptimal(&self) -> u64 {
        self.runs.iter().map(|r| r.suboptimal).sum()
    }

    pub fn final_smoothed_mean(&self) -> f64 {
        self.aggregate.last().map(|r| r.smoothed_mean).unwrap_or(0.0)
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{}: final smoothed return {:.3}, relearns {}, budget-limited {}",
                r.name,
                final_smoothed(&r.returns()),
                r.relearns,
                r.suboptimal
            );
        }
        let _ = writeln!(s, "mean final smoothed return {:.3}", self.final_smoothed_mean());
        s
    }
}

/// Every (seed, map) replica of `cfg`, at most `cfg.workers` at a time
/// (0 = one per core). Replicas are reported in (seed, map) order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    mode: Mode,
    persist: &Persist,
    progress: &AtomicU64,
) -> Result<Summary> {
    let maps = cfg.maps.build(&cfg.base)?;
    if let Some(out) = &persist.out {
        for dir in ["raw", "wall", "checkpoints"] {
            fs::create_dir_all(out.join(dir))?;
        }
    }
    let jobs: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| (0..maps.len()).map(move |m| (s, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("experiment.workers", e.to_string()))?;
    let runs = pool.install(|| {
        jobs.par_iter()
            .map(|&(seed, m)| run_replica(cfg, mode, seed, m, &maps[m], persist, progress))
            .collect::<Result<Vec<_>>>()
    })?;
    let aggregate = aggregate(&runs.iter().map(ReplicaRun::returns).collect::<Vec<_>>());
    if let Some(out) = &persist.out {
        fs::write(out.join("aggregate.csv"), format_aggregate(&aggregate))?;
    }
    Ok(Summary { runs, aggregate })
}

/// Baseline with the task's own machine.
pub fn run_baseline(cfg: &ExperimentConfig, persist: &Persist, progress: &AtomicU64) -> Result<Summary> {
    run_experiment(cfg, Mode::Baseline, persist, progress)
}

/// Rebuilds the aggregate from the raw CSVs in `dir/raw`, in file-name order
/// matching the order [`run_experiment`] uses.
pub fn curves(dir: &Path) -> Result<Vec<AggregateRow>> {
    let mut files: Vec<(u64, usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir.join("raw"))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            let key = parse_replica_name(stem)
                .ok_or_else(|| Error::parse(0, format!("unexpected raw file `{}`", path.display())))?;
            files.push((key.0, key.1, path));
        }
    }
    files.sort();
    let returns = files
        .iter()
        .map(|(_, _, p)| Ok(parse_raw(&fs::read_to_string(p)?)?.iter().map(|r| r.ret).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(aggregate(&returns))
}

fn parse_replica_name(stem: &str) -> Option<(u64, usize)> {
    let (s, m) = stem.strip_prefix("seed")?.split_once("_map")?;
    Some((s.parse().ok()?, m.parse().ok()?))
}
