//! Ancilla routing for lattice-surgery CNOTs and the throughput experiment.
//!
//! Routing works on a coarse tile grid: for an `R x C` patch grid there are
//! `(2R+1) x (2C+1)` tiles, patches at odd/odd positions, horizontal channel
//! segments at even/odd, vertical ones at odd/even and junctions at
//! even/even. A tile carries an ancilla when its free width is at least `d`,
//! and one ancilla per tile per step.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Mutex;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{build_rotated_code, Extent, LatticeCoord};
use crate::deform::{deform_patch, DefectSet};
use crate::error::{Error, Result};
use crate::layout::{area_sites, q3de_growth, sample_layout_events, CellRect, DefectEvent, DefectModel, Growth, Layout, LayoutKind};

pub const TASKS_FORMAT: &str = "surfdeform-tasks/1";

/// CNOT between two patches. The control joins the ancilla on a Z_L edge
/// (top or bottom), the target on an X_L edge (left or right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoutingRequest {
    pub control: usize,
    pub target: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TileKind {
    Patch(usize),
    Horizontal,
    Vertical,
    Junction,
}

pub type Tile = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub rows: usize,
    pub cols: usize,
    pub d: usize,
    kinds: Vec<TileKind>,
    widths: Vec<usize>,
}

fn band(index: usize, d: usize, spacing: usize) -> (i64, i64) {
    let pitch = (d + spacing) as i64;
    let k = (index / 2) as i64;
    if index % 2 == 0 {
        (k * pitch, k * pitch + spacing as i64)
    } else {
        let s = spacing as i64 + k * pitch;
        (s, s + d as i64)
    }
}

impl TileGrid {
    pub fn new(layout: &Layout) -> TileGrid {
        let rows = 2 * layout.grid_rows + 1;
        let cols = 2 * layout.grid_cols + 1;
        let map = layout.channel_map();
        let mut kinds = Vec::with_capacity(rows * cols);
        let mut widths = Vec::with_capacity(rows * cols);
        for a in 0..rows {
            for b in 0..cols {
                let (r0, r1) = band(a, layout.d, layout.spacing);
                let (c0, c1) = band(b, layout.d, layout.spacing);
                let rect = CellRect { r0, r1, c0, c1 };
                let patch = (a % 2 == 1 && b % 2 == 1)
                    .then(|| layout.patch_at(a / 2, b / 2))
                    .flatten();
                let (kind, width) = match (patch, a % 2, b % 2) {
                    (Some(id), _, _) => (TileKind::Patch(id), 0),
                    (None, 0, 1) => (TileKind::Horizontal, map.free_rows(rect)),
                    (None, 1, 0) => (TileKind::Vertical, map.free_cols(rect)),
                    _ => (TileKind::Junction, map.free_rows(rect).min(map.free_cols(rect))),
                };
                kinds.push(kind);
                widths.push(width);
            }
        }
        TileGrid {
            rows,
            cols,
            d: layout.d,
            kinds,
            widths,
        }
    }

    pub fn kind(&self, t: Tile) -> TileKind {
        self.kinds[t.0 * self.cols + t.1]
    }

    pub fn width(&self, t: Tile) -> usize {
        self.widths[t.0 * self.cols + t.1]
    }

    pub fn passable(&self, t: Tile) -> bool {
        !matches!(self.kind(t), TileKind::Patch(_)) && self.width(t) >= self.d
    }

    fn patch_tile(&self, layout: &Layout, id: usize) -> Tile {
        let p = &layout.patches[id];
        (2 * p.grid_row + 1, 2 * p.grid_col + 1)
    }

    /// Channel tiles on the Z_L edges (top, bottom) of a patch.
    pub fn z_faces(&self, layout: &Layout, id: usize) -> [Tile; 2] {
        let (a, b) = self.patch_tile(layout, id);
        [(a - 1, b), (a + 1, b)]
    }

    /// Channel tiles on the X_L edges (left, right) of a patch.
    pub fn x_faces(&self, layout: &Layout, id: usize) -> [Tile; 2] {
        let (a, b) = self.patch_tile(layout, id);
        [(a, b - 1), (a, b + 1)]
    }

    fn neighbours(&self, t: Tile) -> impl Iterator<Item = Tile> + '_ {
        let (a, b) = (t.0 as i64, t.1 as i64);
        [(a - 1, b), (a + 1, b), (a, b - 1), (a, b + 1)]
            .into_iter()
            .filter(|&(x, y)| x >= 0 && y >= 0 && (x as usize) < self.rows && (y as usize) < self.cols)
            .map(|(x, y)| (x as usize, y as usize))
    }
}

/// Tiles already carrying an ancilla in the current step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Occupancy {
    pub tiles: BTreeSet<Tile>,
    pub patches: BTreeSet<usize>,
}

/// Shortest chain of free channel tiles from a Z_L face of the control to an
/// X_L face of the target, or `None` when blocked.
pub fn route(layout: &Layout, tiles: &TileGrid, req: &RoutingRequest, occ: &Occupancy) -> Option<Vec<Tile>> {
    if req.control == req.target || occ.patches.contains(&req.control) || occ.patches.contains(&req.target) {
        return None;
    }
    let free = |t: Tile| tiles.passable(t) && !occ.tiles.contains(&t);
    let goals: Vec<Tile> = tiles.x_faces(layout, req.target).into_iter().filter(|t| free(*t)).collect();
    if goals.is_empty() {
        return None;
    }
    let mut prev: HashMap<Tile, Option<Tile>> = HashMap::new();
    let mut queue = VecDeque::new();
    for s in tiles.z_faces(layout, req.control) {
        if free(s) && !prev.contains_key(&s) {
            prev.insert(s, None);
            queue.push_back(s);
        }
    }
    while let Some(t) = queue.pop_front() {
        if goals.contains(&t) {
            let mut path = vec![t];
            let mut cur = t;
            while let Some(Some(p)) = prev.get(&cur) {
                path.push(*p);
                cur = *p;
            }
            path.reverse();
            return Some(path);
        }
        for n in tiles.neighbours(t) {
            if free(n) && !prev.contains_key(&n) {
                prev.insert(n, Some(t));
                queue.push_back(n);
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    /// Indices into `pending` executed this step, with their paths.
    pub executed: Vec<(usize, Vec<Tile>)>,
    pub occupancy: Occupancy,
}

/// Greedily commits tile-disjoint routes, shortest first, until no pending
/// request can be routed.
pub fn schedule_step(layout: &Layout, tiles: &TileGrid, pending: &[RoutingRequest]) -> StepResult {
    let mut occ = Occupancy::default();
    let mut done = vec![false; pending.len()];
    let mut executed = Vec::new();
    loop {
        let best = pending
            .iter()
            .enumerate()
            .filter(|(i, _)| !done[*i])
            .filter_map(|(i, r)| route(layout, tiles, r, &occ).map(|p| (p.len(), i, p)))
            .min_by_key(|(len, i, _)| (*len, *i));
        let Some((_, i, path)) = best else { break };
        done[i] = true;
        occ.tiles.extend(path.iter().copied());
        occ.patches.insert(pending[i].control);
        occ.patches.insert(pending[i].target);
        executed.push((i, path));
    }
    executed.sort_by_key(|e| e.0);
    StepResult { executed, occupancy: occ }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub ops_total: usize,
    pub ops_completed: usize,
    pub steps_used: usize,
    /// Completed operations per step.
    pub throughput: f64,
    /// Operations still pending when the horizon ran out.
    pub blocked_ops: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TasksFile {
    pub format: String,
    pub tasks: Vec<Vec<RoutingRequest>>,
}

impl TasksFile {
    pub fn new(tasks: Vec<Vec<RoutingRequest>>) -> Self {
        TasksFile {
            format: TASKS_FORMAT.to_string(),
            tasks,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tasks serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: TasksFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if f.format != TASKS_FORMAT {
            return Err(Error::Parse(format!("expected format {TASKS_FORMAT}, found {:?}", f.format)));
        }
        Ok(f)
    }

    pub fn validate(&self, n_logical: usize) -> Result<()> {
        for r in self.tasks.iter().flatten() {
            if r.control == r.target || r.control >= n_logical || r.target >= n_logical {
                return Err(Error::Argument(format!("bad CNOT {} -> {}", r.control, r.target)));
            }
        }
        Ok(())
    }
}

/// `n_tasks` tasks of `cnots` CNOTs on `2 * cnots` distinct patches each.
/// Partners are drawn within grid distance `radius` when one is left,
/// otherwise the nearest free patch; `None` pairs uniformly.
pub fn generate_tasks(layout: &Layout, n_tasks: usize, cnots: usize, radius: Option<usize>, seed: u64) -> Result<Vec<Vec<RoutingRequest>>> {
    let n = layout.n_logical;
    if 2 * cnots > n {
        return Err(Error::Infeasible(format!("{cnots} CNOTs need {} patches, layout has {n}", 2 * cnots)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = |a: usize, b: usize| {
        let (pa, pb) = (&layout.patches[a], &layout.patches[b]);
        pa.grid_row.abs_diff(pb.grid_row) + pa.grid_col.abs_diff(pb.grid_col)
    };
    let mut tasks = Vec::with_capacity(n_tasks);
    for _ in 0..n_tasks {
        let mut free: Vec<usize> = (0..n).collect();
        free.shuffle(&mut rng);
        let mut task = Vec::with_capacity(cnots);
        while task.len() < cnots {
            let a = free.swap_remove(0);
            let near: Vec<usize> = match radius {
                Some(r) => (0..free.len()).filter(|&i| dist(a, free[i]) <= r).collect(),
                None => (0..free.len()).collect(),
            };
            let pick = if near.is_empty() {
                (0..free.len()).min_by_key(|&i| (dist(a, free[i]), free[i])).expect("free patches remain")
            } else {
                near[rng.gen_range(0..near.len())]
            };
            let b = free.swap_remove(pick);
            let (control, target) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            task.push(RoutingRequest { control, target });
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// Growth of a patch under a given set of defective sites, memoized.
pub struct DeformCache {
    d: usize,
    delta_d: usize,
    map: Mutex<HashMap<Vec<LatticeCoord>, (Growth, bool)>>,
}

impl DeformCache {
    pub fn new(d: usize, delta_d: usize) -> Self {
        DeformCache {
            d,
            delta_d,
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Removal followed by enlargement toward `d` within the budget. A
    /// deformation that cannot complete uses the whole budget on every side.
    pub fn growth(&self, defects: &BTreeSet<LatticeCoord>) -> (Growth, bool) {
        if defects.is_empty() {
            return (Growth::default(), false);
        }
        let key: Vec<LatticeCoord> = defects.iter().copied().collect();
        if let Some(g) = self.map.lock().expect("cache lock").get(&key) {
            return *g;
        }
        let pristine = build_rotated_code(self.d).expect("d >= 2");
        let ds: DefectSet = key.iter().copied().collect();
        let value = match deform_patch(&pristine, &ds, self.d, self.delta_d) {
            Ok(r) => (Growth::of_extent(&r.patch.home, &r.patch.extent), r.budget_exceeded),
            Err(_) => {
                let b = self.delta_d;
                (Growth { top: b, bottom: b, left: b, right: b }, true)
            }
        };
        self.map.lock().expect("cache lock").insert(key, value);
        value
    }
}

/// Defective sites per patch at `cycle`, in patch-local coordinates.
pub fn active_defects(layout: &Layout, events: &[DefectEvent], cycle: u64) -> Vec<BTreeSet<LatticeCoord>> {
    let local: BTreeSet<LatticeCoord> = area_sites(&Extent::square(layout.d)).into_iter().collect();
    let mut out = vec![BTreeSet::new(); layout.patches.len()];
    for e in events.iter().filter(|e| e.active_at(cycle)) {
        match e.patch {
            Some(id) if id < out.len() => {
                out[id].extend(e.region.iter().filter(|c| local.contains(c)).copied());
            }
            Some(_) => {}
            None => {
                for p in &layout.patches {
                    let (r0, c0) = (2 * p.origin.0 as i32, 2 * p.origin.1 as i32);
                    out[p.id].extend(
                        e.region
                            .iter()
                            .map(|c| LatticeCoord::new(c.row - r0, c.col - c0))
                            .filter(|c| local.contains(c)),
                    );
                }
            }
        }
    }
    out
}

/// Applies each scheme's response to the active defects.
pub fn apply_defects(layout: &mut Layout, defects: &[BTreeSet<LatticeCoord>], cache: &DeformCache) {
    layout.reset_growth();
    for (id, ds) in defects.iter().enumerate() {
        let (g, exceeded) = match layout.kind {
            LayoutKind::LatticeSurgery => (Growth::default(), false),
            LayoutKind::Q3de | LayoutKind::RevisedQ3de => (q3de_growth(layout.d, !ds.is_empty()), false),
            LayoutKind::Ours => cache.growth(ds),
        };
        layout.patches[id].growth = g;
        layout.patches[id].budget_exceeded = exceeded;
    }
    layout.refresh_overlaps();
}

/// Runs the tasks in order, each one finishing before the next starts. Step
/// `s` happens at cycle `start_cycle + s * d`, and the layout follows the
/// defects active then.
pub fn run_tasks(
    layout: &Layout,
    tasks: &[Vec<RoutingRequest>],
    events: &[DefectEvent],
    start_cycle: u64,
    horizon: usize,
    cache: &DeformCache,
) -> ThroughputReport {
    let ops_total: usize = tasks.iter().map(|t| t.len()).sum();
    let mut current = layout.clone();
    let mut state: Option<Vec<BTreeSet<LatticeCoord>>> = None;
    let mut tiles = TileGrid::new(&current);
    let mut completed = 0;
    let mut steps = 0;
    let mut task_iter = tasks.iter();
    let mut pending: Vec<RoutingRequest> = Vec::new();
    loop {
        while pending.is_empty() {
            match task_iter.next() {
                Some(t) => pending = t.clone(),
                None => break,
            }
        }
        if pending.is_empty() || steps >= horizon {
            break;
        }
        let cycle = start_cycle + (steps * layout.d) as u64;
        let active = active_defects(layout, events, cycle);
        if state.as_ref() != Some(&active) {
            apply_defects(&mut current, &active, cache);
            tiles = TileGrid::new(&current);
            state = Some(active);
        }
        let res = schedule_step(&current, &tiles, &pending);
        completed += res.executed.len();
        let done: BTreeSet<usize> = res.executed.iter().map(|e| e.0).collect();
        pending = pending
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !done.contains(i))
            .map(|(_, r)| r)
            .collect();
        steps += 1;
    }
    ThroughputReport {
        ops_total,
        ops_completed: completed,
        steps_used: steps,
        throughput: if steps == 0 { 0.0 } else { completed as f64 / steps as f64 },
        blocked_ops: ops_total - completed,
    }
}

/// One scheme on one event stream. The run starts once a full defect
/// lifetime of events has accumulated, so the defect population is
/// stationary.
pub fn throughput_experiment(
    layout: &Layout,
    tasks: &[Vec<RoutingRequest>],
    events: &[DefectEvent],
    start_cycle: u64,
    horizon: usize,
    cache: &DeformCache,
) -> ThroughputReport {
    run_tasks(layout, tasks, events, start_cycle, horizon, cache)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub report: ThroughputReport,
}

/// Runs `layout` over one sampled event stream per seed. Seeds share event
/// streams across layouts of the same patch count and distance, which makes
/// comparisons between schemes paired.
pub fn throughput_sweep<T: Float + Sync>(
    layout: &Layout,
    tasks: &[Vec<RoutingRequest>],
    model: &DefectModel<T>,
    seeds: &[u64],
    horizon: usize,
    cache: &DeformCache,
) -> Vec<SeedRow> {
    let lifetime = model.duration_cycles();
    let window = lifetime + (horizon * layout.d) as u64;
    let mut rows: Vec<SeedRow> = seeds
        .par_iter()
        .map(|&seed| {
            let events = if layout.kind == LayoutKind::LatticeSurgery {
                Vec::new()
            } else {
                sample_layout_events(layout, model, window, seed)
            };
            SeedRow {
                seed,
                report: throughput_experiment(layout, tasks, &events, lifetime, horizon, cache),
            }
        })
        .collect();
    rows.sort_by_key(|r| r.seed);
    rows
}

pub fn mean_throughput(rows: &[SeedRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|r| r.report.throughput).sum::<f64>() / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(c: usize, t: usize) -> RoutingRequest {
        RoutingRequest { control: c, target: t }
    }

    #[test]
    fn adjacent_patches_route_directly() {
        let l = Layout::grid(4, 3, 0, LayoutKind::LatticeSurgery);
        let tiles = TileGrid::new(&l);
        let p = route(&l, &tiles, &req(0, 1), &Occupancy::default()).unwrap();
        assert_eq!(p, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn doubled_patch_blocks_at_pitch_d() {
        let mut l = Layout::grid(9, 5, 0, LayoutKind::Q3de);
        let tiles = TileGrid::new(&l);
        assert!(route(&l, &tiles, &req(3, 5), &Occupancy::default()).is_some());
        l.set_growth(4, q3de_growth(5, true));
        l.set_growth(3, q3de_growth(5, true));
        let tiles = TileGrid::new(&l);
        assert!(route(&l, &tiles, &req(3, 5), &Occupancy::default()).is_none());
    }

    #[test]
    fn spare_room_keeps_channels_open() {
        let mut l = Layout::grid(9, 5, 4, LayoutKind::Ours);
        for id in [3, 4] {
            l.set_growth(id, Growth { top: 4, bottom: 4, left: 4, right: 4 });
        }
        let tiles = TileGrid::new(&l);
        // 3 and 4 face each other across one channel; both grew into it.
        assert!(route(&l, &tiles, &req(4, 5), &Occupancy::default()).is_some());
        assert!(route(&l, &tiles, &req(0, 8), &Occupancy::default()).is_some());
    }

    #[test]
    fn disjoint_requests_share_a_step() {
        let l = Layout::grid(16, 3, 0, LayoutKind::LatticeSurgery);
        let tiles = TileGrid::new(&l);
        let s = schedule_step(&l, &tiles, &[req(0, 1), req(14, 15)]);
        assert_eq!(s.executed.len(), 2);
    }

    #[test]
    fn shared_channel_defers_one() {
        let mut l = Layout::grid(4, 3, 0, LayoutKind::Ours);
        l.set_growth(0, Growth { top: 3, right: 3, ..Growth::default() });
        l.set_growth(2, Growth { bottom: 3, ..Growth::default() });
        let tiles = TileGrid::new(&l);
        // Both controls can only leave through the channel between 0 and 2.
        assert!(!tiles.passable((0, 1)) && !tiles.passable((4, 1)));
        let s = schedule_step(&l, &tiles, &[req(0, 1), req(2, 3)]);
        assert_eq!(s.executed.len(), 1);
        assert_eq!(s.executed[0].0, 1);
        let both = schedule_step(&Layout::grid(4, 3, 0, LayoutKind::Ours), &TileGrid::new(&Layout::grid(4, 3, 0, LayoutKind::Ours)), &[req(0, 1), req(2, 3)]);
        assert_eq!(both.executed.len(), 2);
    }

    #[test]
    fn no_defects_means_ls_behaviour() {
        let ours = Layout::grid(16, 5, 0, LayoutKind::Ours);
        let ls = Layout::grid(16, 5, 0, LayoutKind::LatticeSurgery);
        let tasks = generate_tasks(&ls, 3, 8, None, 4).unwrap();
        let cache = DeformCache::new(5, 0);
        let a = run_tasks(&ours, &tasks, &[], 0, 500, &cache);
        let b = run_tasks(&ls, &tasks, &[], 0, 500, &cache);
        assert_eq!(a, b);
        assert_eq!(a.ops_completed, 24);
    }

    #[test]
    fn generated_tasks_use_distinct_patches() {
        let l = Layout::grid(100, 3, 0, LayoutKind::LatticeSurgery);
        for radius in [Some(1), Some(3), None] {
            for t in generate_tasks(&l, 5, 25, radius, 9).unwrap() {
                let qs: BTreeSet<usize> = t.iter().flat_map(|r| [r.control, r.target]).collect();
                assert_eq!(qs.len(), 50);
            }
        }
    }

    #[test]
    fn tasks_json_round_trip() {
        let l = Layout::grid(9, 3, 0, LayoutKind::LatticeSurgery);
        let f = TasksFile::new(generate_tasks(&l, 2, 3, Some(1), 1).unwrap());
        assert_eq!(TasksFile::from_json(&f.to_json()).unwrap(), f);
    }
}
