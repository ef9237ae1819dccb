//! Cheapest guard family for one state.
//!
//! A state's *pattern* assigns every label observed there to a group: group 0
//! means the label must satisfy no guard (self-loop), every other group is one
//! successor. A family is a set of pairwise exclusive cubes, each cube tagged
//! with a group, such that every label of a non-zero group satisfies a cube of
//! its own group and no label satisfies a cube of another group.
//!
//! Cubes only need literals over propositions seen in some label of the
//! pattern, and a cube covering the first uncovered label can be chosen among
//! all cubes over that universe that cover it, so the depth-first search below
//! is exhaustive.

use std::collections::HashMap;
use std::rc::Rc;

/// Pattern key: labels (as bits) sorted ascending with canonical groups.
pub(crate) type PatternKey = Vec<(u16, u8)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Cube {
    pub pos: u16,
    pub neg: u16,
    pub group: u8,
}

impl Cube {
    pub fn literals(&self) -> u32 {
        self.pos.count_ones() + self.neg.count_ones()
    }

    pub fn covers(&self, label: u16) -> bool {
        self.pos & label == self.pos && self.neg & label == 0
    }

    pub fn exclusive(&self, other: &Cube) -> bool {
        self.pos & other.neg != 0 || self.neg & other.pos != 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Family {
    /// Total cost in units of `base + literals` per cube.
    pub cost: u32,
    pub cubes: Vec<Cube>,
}

/// Memoised solver; `base` is the per-edge charge added to literal counts.
#[derive(Debug)]
pub(crate) struct GuardSolver {
    base: u32,
    memo: HashMap<PatternKey, Rc<Family>>,
}

impl GuardSolver {
    pub fn new(base: u32) -> Self {
        GuardSolver {
            base,
            memo: HashMap::new(),
        }
    }

    pub fn solve(&mut self, key: &PatternKey) -> Rc<Family> {
        if let Some(f) = self.memo.get(key) {
            return Rc::clone(f);
        }
        let f = Rc::new(solve(self.base, key));
        self.memo.insert(key.clone(), Rc::clone(&f));
        f
    }
}

/// Submasks of `mask`, including 0 and `mask` itself.
fn submasks(mask: u16) -> impl Iterator<Item = u16> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

struct Dfs<'a> {
    base: u32,
    labels: &'a [u16],
    groups: &'a [u8],
    targets: Vec<usize>,
    candidates: Vec<Vec<Cube>>,
    min_cost: Vec<u32>,
    chosen: Vec<Cube>,
    best: Family,
}

impl Dfs<'_> {
    fn covered(&self, i: usize) -> bool {
        self.chosen.iter().any(|c| c.covers(self.labels[i]))
    }

    fn run(&mut self, cost: u32) {
        let uncovered: Vec<usize> = self
            .targets
            .iter()
            .copied()
            .filter(|&i| !self.covered(i))
            .collect();
        let Some(&first) = uncovered.first() else {
            if cost < self.best.cost {
                self.best = Family {
                    cost,
                    cubes: self.chosen.clone(),
                };
            }
            return;
        };
        // Every group with an uncovered label needs at least one more cube.
        let mut need: Vec<(u8, u32)> = Vec::new();
        for &i in &uncovered {
            let g = self.groups[i];
            match need.iter_mut().find(|(h, _)| *h == g) {
                Some((_, c)) => *c = (*c).min(self.min_cost[i]),
                None => need.push((g, self.min_cost[i])),
            }
        }
        let bound: u32 = need.iter().map(|(_, c)| c).sum();
        if cost + bound >= self.best.cost {
            return;
        }
        let rest = bound - need.iter().find(|(g, _)| *g == self.groups[first]).unwrap().1;
        for ci in 0..self.candidates[first].len() {
            let cube = self.candidates[first][ci];
            let c = self.base + cube.literals();
            if cost + c + rest >= self.best.cost {
                break;
            }
            if self.chosen.iter().all(|d| d.exclusive(&cube)) {
                self.chosen.push(cube);
                self.run(cost + c);
                self.chosen.pop();
            }
        }
    }
}

pub(crate) fn solve(base: u32, key: &PatternKey) -> Family {
    let labels: Vec<u16> = key.iter().map(|&(l, _)| l).collect();
    let groups: Vec<u8> = key.iter().map(|&(_, g)| g).collect();
    let universe = labels.iter().fold(0u16, |a, &l| a | l);
    let targets: Vec<usize> = (0..labels.len()).filter(|&i| groups[i] != 0).collect();
    if targets.is_empty() {
        return Family {
            cost: 0,
            cubes: Vec::new(),
        };
    }
    let mut candidates = vec![Vec::new(); labels.len()];
    let mut min_cost = vec![0; labels.len()];
    for &i in &targets {
        let l = labels[i];
        let mut cands = Vec::new();
        for pos in submasks(l) {
            for neg in submasks(universe & !l) {
                let cube = Cube {
                    pos,
                    neg,
                    group: groups[i],
                };
                let clean = (0..labels.len())
                    .all(|j| groups[j] == groups[i] || !cube.covers(labels[j]));
                if clean {
                    cands.push(cube);
                }
            }
        }
        cands.sort_by_key(|c| (c.literals(), c.neg.count_ones(), c.pos, c.neg));
        min_cost[i] = base + cands[0].literals();
        candidates[i] = cands;
    }
    // Full minterms always form a valid family; the search looks for cheaper.
    let minterms = Family {
        cost: targets.len() as u32 * (base + universe.count_ones()),
        cubes: targets
            .iter()
            .map(|&i| Cube {
                pos: labels[i],
                neg: universe & !labels[i],
                group: groups[i],
            })
            .collect(),
    };
    let mut dfs = Dfs {
        base,
        labels: &labels,
        groups: &groups,
        targets,
        candidates,
        min_cost,
        chosen: Vec::new(),
        best: minterms,
    };
    dfs.run(0);
    dfs.best
}
