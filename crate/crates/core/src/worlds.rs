//! OfficeWorld: a 12x9 grid of four-by-three rooms with special locations,
//! the Coffee / CoffeeMail / VisitABCD tasks as ground-truth reward machines,
//! a deterministic task monitor and random map generation.
//!
//! Map text format: nine rows of twelve characters, top row `y = 8` first,
//! followed by one `wall x1 y1 x2 y2` line per blocked pair of adjacent cells.
//! Cell characters: `.` empty, `@` start, `c` coffee, `m` mail, `o` office,
//! `A`..`D`, `*` decoration.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::events::{Alphabet, Label, ProbLabel, PropId};
use crate::machine::{RewardMachine, StateId};
use crate::sensors::{sense_detailed, SensorBank};

pub const WIDTH: usize = 12;
pub const HEIGHT: usize = 9;
pub const N_CELLS: usize = WIDTH * HEIGHT;

pub const COFFEE: PropId = 0;
pub const MAIL: PropId = 1;
pub const OFFICE: PropId = 2;
pub const PROP_A: PropId = 3;
pub const PROP_B: PropId = 4;
pub const PROP_C: PropId = 5;
pub const PROP_D: PropId = 6;
pub const DECORATION: PropId = 7;

const CELL_CHARS: [char; 8] = ['c', 'm', 'o', 'A', 'B', 'C', 'D', '*'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub x: u8,
    pub y: u8,
}

impl Pos {
    pub const fn new(x: u8, y: u8) -> Self {
        Pos { x, y }
    }

    fn index(self) -> usize {
        self.y as usize * WIDTH + self.x as usize
    }

    fn from_index(i: usize) -> Self {
        Pos::new((i % WIDTH) as u8, (i / WIDTH) as u8)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }
}

/// Grid layout: walls between adjacent cells, one label per cell, start cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    walls: BTreeSet<(Pos, Pos)>,
    labels: Vec<Label>,
    start: Pos,
    moves: Vec<[Pos; 4]>,
}

fn wall_key(a: Pos, b: Pos) -> (Pos, Pos) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn office_walls() -> BTreeSet<(Pos, Pos)> {
    let mut walls = BTreeSet::new();
    for x in [2u8, 5, 8] {
        for y in 0..HEIGHT as u8 {
            if y != 1 && y != 7 {
                walls.insert(wall_key(Pos::new(x, y), Pos::new(x + 1, y)));
            }
        }
    }
    for (y, doors) in [(2u8, &[1u8, 10][..]), (5, &[1, 4, 7, 10][..])] {
        for x in 0..WIDTH as u8 {
            if !doors.contains(&x) {
                walls.insert(wall_key(Pos::new(x, y), Pos::new(x, y + 1)));
            }
        }
    }
    walls
}

/// Special locations of the canonical layout, in the fixed placement order
/// used by [`random_map`].
const CANONICAL_PLACEMENTS: [(PropId, Pos); 14] = [
    (COFFEE, Pos::new(3, 6)),
    (COFFEE, Pos::new(8, 2)),
    (MAIL, Pos::new(7, 4)),
    (OFFICE, Pos::new(4, 4)),
    (PROP_A, Pos::new(1, 1)),
    (PROP_B, Pos::new(10, 1)),
    (PROP_C, Pos::new(10, 7)),
    (PROP_D, Pos::new(1, 7)),
    (DECORATION, Pos::new(4, 7)),
    (DECORATION, Pos::new(7, 7)),
    (DECORATION, Pos::new(1, 4)),
    (DECORATION, Pos::new(10, 4)),
    (DECORATION, Pos::new(4, 1)),
    (DECORATION, Pos::new(7, 1)),
];

const CANONICAL_START: Pos = Pos::new(4, 6);

impl GridMap {
    pub fn new(walls: BTreeSet<(Pos, Pos)>, labels: Vec<Label>, start: Pos) -> Result<Self> {
        if labels.len() != N_CELLS {
            return Err(Error::config("map", format!("expected {N_CELLS} cells")));
        }
        if start.x as usize >= WIDTH || start.y as usize >= HEIGHT {
            return Err(Error::config("map", format!("start {start} outside the grid")));
        }
        for &(a, b) in &walls {
            let adjacent = (a.x.abs_diff(b.x) + a.y.abs_diff(b.y)) == 1;
            if !adjacent || b.x as usize >= WIDTH || b.y as usize >= HEIGHT {
                return Err(Error::config("map", format!("wall {a}-{b} is not between adjacent cells")));
            }
        }
        let walls: BTreeSet<_> = walls.into_iter().map(|(a, b)| wall_key(a, b)).collect();
        let moves = (0..N_CELLS)
            .map(|i| {
                let p = Pos::from_index(i);
                Action::ALL.map(|a| {
                    let (dx, dy) = a.delta();
                    let (nx, ny) = (p.x as i32 + dx, p.y as i32 + dy);
                    if nx < 0 || ny < 0 || nx >= WIDTH as i32 || ny >= HEIGHT as i32 {
                        return p;
                    }
                    let q = Pos::new(nx as u8, ny as u8);
                    if walls.contains(&wall_key(p, q)) {
                        p
                    } else {
                        q
                    }
                })
            })
            .collect();
        Ok(GridMap {
            walls,
            labels,
            start,
            moves,
        })
    }

    fn with_placements(placements: &[(PropId, Pos)], start: Pos) -> Self {
        let mut labels = vec![Label::EMPTY; N_CELLS];
        for &(prop, pos) in placements {
            labels[pos.index()] = labels[pos.index()].with(prop);
        }
        GridMap::new(office_walls(), labels, start).expect("office layout is valid")
    }

    /// The reference layout.
    pub fn canonical() -> Self {
        GridMap::with_placements(&CANONICAL_PLACEMENTS, CANONICAL_START)
    }

    pub fn start(&self) -> Pos {
        self.start
    }

    pub fn label_at(&self, pos: Pos) -> Label {
        self.labels[pos.index()]
    }

    pub fn walls(&self) -> &BTreeSet<(Pos, Pos)> {
        &self.walls
    }

    /// Deterministic movement; bumping into a wall or the border stays put.
    pub fn move_from(&self, pos: Pos, action: Action) -> Pos {
        self.moves[pos.index()][action.index()]
    }

    pub fn cells_with(&self, prop: PropId) -> Vec<Pos> {
        (0..N_CELLS)
            .filter(|&i| self.labels[i].contains(prop))
            .map(Pos::from_index)
            .collect()
    }

    /// Per-proposition prior: the share of cells where it holds.
    pub fn priors(&self, n_props: usize) -> Vec<f64> {
        (0..n_props)
            .map(|id| self.cells_with(id as PropId).len() as f64 / N_CELLS as f64)
            .collect()
    }

    /// Cells reachable from `from` without entering a decoration.
    fn safe_reachable(&self, from: Pos) -> Vec<bool> {
        let mut seen = vec![false; N_CELLS];
        seen[from.index()] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(p) = queue.pop_front() {
            for a in Action::ALL {
                let q = self.move_from(p, a);
                if !seen[q.index()] {
                    seen[q.index()] = true;
                    if !self.label_at(q).contains(DECORATION) {
                        queue.push_back(q);
                    }
                }
            }
        }
        seen
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for y in (0..HEIGHT).rev() {
            for x in 0..WIDTH {
                let p = Pos::new(x as u8, y as u8);
                let l = self.label_at(p);
                let c = match l.ids().next() {
                    Some(id) => CELL_CHARS[id as usize],
                    None if p == self.start => '@',
                    None => '.',
                };
                out.push(c);
            }
            out.push('\n');
        }
        for (a, b) in &self.walls {
            out.push_str(&format!("wall {} {} {} {}\n", a.x, a.y, b.x, b.y));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut walls = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            let lno = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("wall ") {
                let v: Vec<u8> = rest
                    .split_whitespace()
                    .map(|t| t.parse::<u8>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(lno, "expected `wall x1 y1 x2 y2`"))?;
                if v.len() != 4 {
                    return Err(Error::parse(lno, "expected `wall x1 y1 x2 y2`"));
                }
                walls.insert((Pos::new(v[0], v[1]), Pos::new(v[2], v[3])));
            } else {
                rows.push((lno, line));
            }
        }
        if rows.len() != HEIGHT {
            return Err(Error::parse(0, format!("expected {HEIGHT} grid rows, found {}", rows.len())));
        }
        let mut labels = vec![Label::EMPTY; N_CELLS];
        let mut start = None;
        for (r, (lno, row)) in rows.iter().enumerate() {
            let chars: Vec<char> = row.chars().collect();
            if chars.len() != WIDTH {
                return Err(Error::parse(*lno, format!("expected {WIDTH} cells")));
            }
            let y = (HEIGHT - 1 - r) as u8;
            for (x, c) in chars.into_iter().enumerate() {
                let p = Pos::new(x as u8, y);
                match c {
                    '.' => {}
                    '@' => start = Some(p),
                    _ => {
                        let id = CELL_CHARS
                            .iter()
                            .position(|&k| k == c)
                            .ok_or_else(|| Error::parse(*lno, format!("unknown cell `{c}`")))?;
                        labels[p.index()] = Label::from_ids([id as PropId]);
                    }
                }
            }
        }
        let start = start.ok_or_else(|| Error::parse(0, "no `@` start cell"))?;
        GridMap::new(walls, labels, start)
    }
}

/// Resamples the fourteen special locations of the canonical layout over the
/// fixed walls, then the start among the remaining cells. Layouts where a
/// non-decoration location cannot be reached without crossing a decoration
/// are redrawn.
pub fn random_map<R: Rng + ?Sized>(rng: &mut R) -> GridMap {
    loop {
        let cells = index::sample(rng, N_CELLS, CANONICAL_PLACEMENTS.len() + 1);
        let cells: Vec<Pos> = cells.iter().map(Pos::from_index).collect();
        let placements: Vec<(PropId, Pos)> = CANONICAL_PLACEMENTS
            .iter()
            .zip(&cells)
            .map(|(&(prop, _), &pos)| (prop, pos))
            .collect();
        let start = cells[CANONICAL_PLACEMENTS.len()];
        let map = GridMap::with_placements(&placements, start);
        let reach = map.safe_reachable(start);
        let ok = placements
            .iter()
            .filter(|(prop, _)| *prop != DECORATION)
            .all(|(_, pos)| reach[pos.index()]);
        if ok {
            return map;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Coffee,
    CoffeeMail,
    VisitAbcd,
}

const COFFEE_RM: &str = "\
states 4 0 2 3
0 1 0 coffee,!office,!decoration
0 3 0 decoration
0 2 1 coffee,office,!decoration
1 3 0 decoration
1 2 1 office,!decoration
";

const COFFEE_MAIL_RM: &str = "\
states 6 0 4 5
0 5 0 decoration
0 1 0 coffee,!mail,!decoration
0 2 0 !coffee,mail,!decoration
0 3 0 coffee,mail,!office,!decoration
0 4 1 coffee,mail,office,!decoration
1 5 0 decoration
1 3 0 mail,!office,!decoration
1 4 1 mail,office,!decoration
2 5 0 decoration
2 3 0 coffee,!office,!decoration
2 4 1 coffee,office,!decoration
3 5 0 decoration
3 4 1 office,!decoration
";

const VISIT_ABCD_RM: &str = "\
states 6 0 4 5
0 5 0 decoration
0 1 0 A,!decoration
1 5 0 decoration
1 2 0 B,!decoration
2 5 0 decoration
2 3 0 C,!decoration
3 5 0 decoration
3 4 1 D,!decoration
";

impl Task {
    pub const ALL: [Task; 3] = [Task::Coffee, Task::CoffeeMail, Task::VisitAbcd];

    pub fn name(self) -> &'static str {
        match self {
            Task::Coffee => "coffee",
            Task::CoffeeMail => "coffeemail",
            Task::VisitAbcd => "visitabcd",
        }
    }

    pub fn machine(self) -> RewardMachine {
        let text = match self {
            Task::Coffee => COFFEE_RM,
            Task::CoffeeMail => COFFEE_MAIL_RM,
            Task::VisitAbcd => VISIT_ABCD_RM,
        };
        RewardMachine::parse(text, &Alphabet::office_world()).expect("task machines are valid")
    }

    /// Sensors made noisy in the noise-first setting: those of the first
    /// location(s) the task needs.
    pub fn noise_first(self) -> Label {
        match self {
            Task::Coffee => Label::from_ids([COFFEE]),
            Task::CoffeeMail => Label::from_ids([COFFEE, MAIL]),
            Task::VisitAbcd => Label::from_ids([PROP_A]),
        }
    }

    /// Sensors made noisy in the noise-all setting: every proposition the
    /// task machine reads.
    pub fn noise_all(self) -> Label {
        self.machine().relevant_props()
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

pub fn make_task(name: &str) -> Result<RewardMachine> {
    Ok(name.parse::<Task>()?.machine())
}

pub fn coffee_machine() -> RewardMachine {
    Task::Coffee.machine()
}

/// Tracks the ground-truth machine state; decides termination and reward.
#[derive(Clone, Debug)]
pub struct TaskMonitor {
    rm: RewardMachine,
    state: StateId,
}

impl TaskMonitor {
    pub fn new(rm: RewardMachine) -> Self {
        let state = rm.initial();
        TaskMonitor { rm, state }
    }

    pub fn machine(&self) -> &RewardMachine {
        &self.rm
    }

    pub fn state(&self) -> StateId {
        self.state
    }

    pub fn reset(&mut self) {
        self.state = self.rm.initial();
    }

    pub fn is_terminal(&self) -> bool {
        self.rm.is_sink(self.state)
    }

    pub fn is_goal(&self) -> bool {
        self.state == self.rm.accepting()
    }

    pub fn advance(&mut self, label: Label) -> Result<()> {
        if self.is_terminal() {
            return Err(Error::EpisodeTerminated);
        }
        self.state = self.rm.step(self.state, label)?.0;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub pos: Pos,
    /// Propositions that actually hold at the destination.
    pub ground_truth: Label,
    /// Raw sensor detections.
    pub detections: Label,
    pub prob_label: ProbLabel,
    pub reward: f64,
    pub terminal: bool,
    pub goal: bool,
}

/// One environment transition: move, label the destination, sense, advance
/// the monitor.
pub fn env_step<R: Rng + ?Sized>(
    map: &GridMap,
    pos: Pos,
    action: Action,
    bank: &SensorBank,
    monitor: &mut TaskMonitor,
    rng: &mut R,
) -> Result<StepResult> {
    if monitor.is_terminal() {
        return Err(Error::EpisodeTerminated);
    }
    let next = map.move_from(pos, action);
    let ground_truth = map.label_at(next);
    monitor.advance(ground_truth)?;
    let (detections, prob_label) = sense_detailed(bank, ground_truth, rng);
    let terminal = monitor.is_terminal();
    let goal = monitor.is_goal();
    Ok(StepResult {
        pos: next,
        ground_truth,
        detections,
        prob_label,
        reward: if goal { 1.0 } else { 0.0 },
        terminal,
        goal,
    })
}

/// Map, sensors and monitor bundled with the agent position.
#[derive(Clone, Debug)]
pub struct OfficeWorld {
    pub map: GridMap,
    pub bank: SensorBank,
    monitor: TaskMonitor,
    pos: Pos,
}

impl OfficeWorld {
    pub fn new(map: GridMap, bank: SensorBank, task_rm: RewardMachine) -> Self {
        let pos = map.start();
        OfficeWorld {
            map,
            bank,
            monitor: TaskMonitor::new(task_rm),
            pos,
        }
    }

    pub fn reset(&mut self) {
        self.pos = self.map.start();
        self.monitor.reset();
    }

    pub fn pos(&self) -> Pos {
        self.pos
    }

    pub fn monitor(&self) -> &TaskMonitor {
        &self.monitor
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: Action, rng: &mut R) -> Result<StepResult> {
        let r = env_step(&self.map, self.pos, action, &self.bank, &mut self.monitor, rng)?;
        self.pos = r.pos;
        Ok(r)
    }
}
