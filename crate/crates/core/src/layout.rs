//! Layout planning for grids of logical patches and the dynamic-defect event
//! sampler.
//!
//! Lengths are in lattice units (one data-qubit spacing). The `spacing` of a
//! layout is the width of the channel between facing patch boundaries, so a
//! grid cell is `d + spacing` wide.

use std::collections::BTreeSet;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::code::{Extent, LatticeCoord};
use crate::deform::DefectSet;
use crate::error::{Error, Result};

pub const LAYOUT_FORMAT: &str = "surfdeform-layout/1";
pub const EVENTS_FORMAT: &str = "surfdeform-events/1";

/// Seconds per QEC cycle.
pub const CYCLE_TIME: f64 = 1e-6;

fn lit<T: Float>(x: f64) -> T {
    T::from(x).expect("literal fits the scalar type")
}

/// Poisson defect arrivals on every physical qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectModel<T> {
    /// Event rate per physical qubit, in Hz.
    pub rho: T,
    /// Defect lifetime in seconds.
    pub duration: T,
    /// Span of one defect region in patch-growth units.
    pub span: usize,
    /// Error rate of qubits inside an untreated region.
    pub p_defect: T,
}

impl<T: Float> DefectModel<T> {
    pub fn new(rho: T, duration: T, span: usize, p_defect: T) -> Result<Self> {
        let m = DefectModel { rho, duration, span, p_defect };
        m.validate()?;
        Ok(m)
    }

    /// One event per qubit every 260 s, 25 ms lifetime, span 4, error rate 0.5.
    pub fn nominal() -> Self {
        DefectModel {
            rho: lit(1.0 / 260.0),
            duration: lit(0.025),
            span: 4,
            p_defect: lit(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero()) {
            return Err(Error::Argument("rho must be positive".into()));
        }
        if !(self.duration > T::zero()) {
            return Err(Error::Argument("duration must be positive".into()));
        }
        if self.span < 1 {
            return Err(Error::Argument("defect span must be at least 1".into()));
        }
        if !(self.p_defect > T::zero() && self.p_defect <= lit(0.5)) {
            return Err(Error::Argument("p_defect must lie in (0, 0.5]".into()));
        }
        Ok(())
    }

    pub fn duration_cycles(&self) -> u64 {
        (self.duration / lit(CYCLE_TIME)).round().to_u64().unwrap_or(0)
    }

    pub fn with_rate_scale(&self, k: T) -> Self {
        DefectModel { rho: self.rho * k, ..*self }
    }
}

fn ln_factorial<T: Float>(k: u32) -> T {
    (2..=k).fold(T::zero(), |acc, i| acc + lit::<T>(i as f64).ln())
}

pub fn poisson_pmf<T: Float>(lambda: T, k: u32) -> T {
    if lambda == T::zero() {
        return if k == 0 { T::one() } else { T::zero() };
    }
    (lit::<T>(k as f64) * lambda.ln() - lambda - ln_factorial::<T>(k)).exp()
}

/// `P(X > k)`, summed over the upper tail so small values stay accurate.
pub fn poisson_tail<T: Float>(lambda: T, k: u32) -> T {
    if lambda == T::zero() {
        return T::zero();
    }
    let mut term = poisson_pmf(lambda, k + 1);
    let mut sum = T::zero();
    let mut j = k + 1;
    while term > T::zero() {
        sum = sum + term;
        j += 1;
        term = term * lambda / lit(j as f64);
        if term < sum * T::epsilon() && lit::<T>(j as f64) > lambda {
            break;
        }
    }
    sum
}

/// Mean number of events a distance-`d` patch sees within one defect
/// lifetime, counting `2 d^2` physical qubits.
pub fn event_intensity<T: Float>(d: usize, model: &DefectModel<T>) -> T {
    lit::<T>(2.0 * (d * d) as f64) * model.rho * model.duration
}

/// Probability that more defects arrive than `delta_d` of spare room absorbs.
pub fn block_probability<T: Float>(d: usize, delta_d: usize, model: &DefectModel<T>) -> T {
    let k = (delta_d / model.span.max(1)) as u32;
    poisson_tail(event_intensity(d, model), k)
}

/// Smallest spare width whose block probability is below `alpha_block`.
pub fn choose_delta_d<T: Float>(d: usize, model: &DefectModel<T>, alpha_block: T) -> Result<usize> {
    if !(alpha_block > T::zero() && alpha_block < T::one()) {
        return Err(Error::Argument("alpha_block must lie in (0, 1)".into()));
    }
    let mut dd = 0;
    while block_probability(d, dd, model) >= alpha_block {
        dd += 1;
        if dd > 100_000 {
            return Err(Error::Infeasible("no spare width reaches the block threshold".into()));
        }
    }
    Ok(dd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgramProfile<T> {
    pub n_logical: usize,
    pub cx_count: usize,
    pub t_count: usize,
    pub alpha_fail: T,
    pub alpha_block: T,
}

impl<T: Float> ProgramProfile<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha_fail", self.alpha_fail), ("alpha_block", self.alpha_block)] {
            if !(v > T::zero() && v < T::one()) {
                return Err(Error::Argument(format!("{name} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Logical error per operation `A (p / p_th)^ceil(d / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit<T> {
    pub a: T,
    pub p_th: T,
}

impl<T: Float> Default for ScalingFit<T> {
    fn default() -> Self {
        ScalingFit { a: lit(0.1), p_th: lit(0.01) }
    }
}

impl<T: Float> ScalingFit<T> {
    pub fn logical_rate(&self, p_phys: T, d: usize) -> T {
        self.a * (p_phys / self.p_th).powi(d.div_ceil(2) as i32)
    }
}

/// Smallest odd `d >= 3` whose total logical failure over all gates stays
/// within `alpha_fail`.
pub fn choose_distance<T: Float>(profile: &ProgramProfile<T>, p_phys: T, fit: &ScalingFit<T>) -> Result<usize> {
    let gates = lit::<T>((profile.cx_count + profile.t_count).max(1) as f64);
    let slack = lit::<T>(1.0 + 1e-9);
    for d in (3..=1001).step_by(2) {
        if gates * fit.logical_rate(p_phys, d) <= profile.alpha_fail * slack {
            return Ok(d);
        }
        if p_phys >= fit.p_th {
            break;
        }
    }
    Err(Error::Infeasible(format!(
        "no distance meets alpha_fail = {:.4e} at p = {:.4e} (threshold {:.4e})",
        profile.alpha_fail.to_f64().unwrap_or(f64::NAN),
        p_phys.to_f64().unwrap_or(f64::NAN),
        fit.p_th.to_f64().unwrap_or(f64::NAN)
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    /// Channels `d + delta_d` wide, patches deform in place.
    Ours,
    /// Channels `d` wide, defective patches double in size.
    Q3de,
    /// Channels `2d` wide so doubled patches never block.
    RevisedQ3de,
    /// Channels `d` wide, no deformation.
    LatticeSurgery,
}

impl LayoutKind {
    pub fn spacing(self, d: usize, delta_d: usize) -> usize {
        match self {
            LayoutKind::Ours => d + delta_d,
            LayoutKind::Q3de | LayoutKind::LatticeSurgery => d,
            LayoutKind::RevisedQ3de => 2 * d,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(LayoutKind::Ours),
            "q3de" => Ok(LayoutKind::Q3de),
            "revised-q3de" => Ok(LayoutKind::RevisedQ3de),
            "ls" | "lattice-surgery" => Ok(LayoutKind::LatticeSurgery),
            _ => Err(Error::Argument(format!("unknown layout kind {s:?}"))),
        }
    }
}

/// Rows or columns a patch has grown by on each side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Growth {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Growth {
    pub fn is_zero(&self) -> bool {
        *self == Growth::default()
    }

    /// Growth of a deformed patch relative to its home footprint.
    pub fn of_extent(home: &Extent, now: &Extent) -> Growth {
        Growth {
            top: (home.top - now.top).max(0) as usize,
            bottom: (now.bottom - home.bottom).max(0) as usize,
            left: (home.left - now.left).max(0) as usize,
            right: (now.right - home.right).max(0) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSlot {
    pub id: usize,
    pub grid_row: usize,
    pub grid_col: usize,
    /// Top-left data cell of the undeformed footprint.
    pub origin: (usize, usize),
    pub growth: Growth,
    /// Enlarged footprint intersects another patch.
    pub overlap: bool,
    pub budget_exceeded: bool,
}

/// Half-open cell rectangle `[r0, r1) x [c0, c1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub r0: i64,
    pub r1: i64,
    pub c0: i64,
    pub c1: i64,
}

impl CellRect {
    pub fn intersects(&self, o: &CellRect) -> bool {
        self.r0 < o.r1 && o.r0 < self.r1 && self.c0 < o.c1 && o.c0 < self.c1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub format: String,
    pub kind: LayoutKind,
    pub n_logical: usize,
    pub d: usize,
    pub delta_d: usize,
    pub spacing: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub height: usize,
    pub width: usize,
    pub patches: Vec<PatchSlot>,
}

/// Free/occupied state of every lattice cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMap {
    pub height: usize,
    pub width: usize,
    occupied: Vec<bool>,
}

impl ChannelMap {
    pub fn is_free(&self, r: usize, c: usize) -> bool {
        !self.occupied[r * self.width + c]
    }

    pub fn num_occupied(&self) -> usize {
        self.occupied.iter().filter(|b| **b).count()
    }

    fn clip(&self, rect: CellRect) -> (usize, usize, usize, usize) {
        let r0 = rect.r0.clamp(0, self.height as i64) as usize;
        let r1 = rect.r1.clamp(0, self.height as i64) as usize;
        let c0 = rect.c0.clamp(0, self.width as i64) as usize;
        let c1 = rect.c1.clamp(0, self.width as i64) as usize;
        (r0, r1, c0, c1)
    }

    /// Rows of `rect` that are free along its whole width.
    pub fn free_rows(&self, rect: CellRect) -> usize {
        let (r0, r1, c0, c1) = self.clip(rect);
        (r0..r1).filter(|&r| (c0..c1).all(|c| self.is_free(r, c))).count()
    }

    pub fn free_cols(&self, rect: CellRect) -> usize {
        let (r0, r1, c0, c1) = self.clip(rect);
        (c0..c1).filter(|&c| (r0..r1).all(|r| self.is_free(r, c))).count()
    }
}

impl Layout {
    /// Square-ish grid of `n` patches, row-major ids.
    pub fn grid(n: usize, d: usize, delta_d: usize, kind: LayoutKind) -> Layout {
        let spacing = kind.spacing(d, delta_d);
        let grid_cols = ((n as f64).sqrt().ceil() as usize).max(1);
        let grid_rows = n.div_ceil(grid_cols).max(1);
        let pitch = d + spacing;
        let patches = (0..n)
            .map(|id| {
                let (gr, gc) = (id / grid_cols, id % grid_cols);
                PatchSlot {
                    id,
                    grid_row: gr,
                    grid_col: gc,
                    origin: (spacing + gr * pitch, spacing + gc * pitch),
                    growth: Growth::default(),
                    overlap: false,
                    budget_exceeded: false,
                }
            })
            .collect();
        Layout {
            format: LAYOUT_FORMAT.to_string(),
            kind,
            n_logical: n,
            d,
            delta_d: if kind == LayoutKind::Ours { delta_d } else { 0 },
            spacing,
            grid_rows,
            grid_cols,
            height: grid_rows * pitch + spacing,
            width: grid_cols * pitch + spacing,
            patches,
        }
    }

    pub fn pitch(&self) -> usize {
        self.d + self.spacing
    }

    pub fn patch_at(&self, grid_row: usize, grid_col: usize) -> Option<usize> {
        if grid_row >= self.grid_rows || grid_col >= self.grid_cols {
            return None;
        }
        let id = grid_row * self.grid_cols + grid_col;
        (id < self.patches.len()).then_some(id)
    }

    pub fn home_rect(&self, id: usize) -> CellRect {
        let (r, c) = self.patches[id].origin;
        let d = self.d as i64;
        CellRect {
            r0: r as i64,
            r1: r as i64 + d,
            c0: c as i64,
            c1: c as i64 + d,
        }
    }

    /// Footprint including enlargement.
    pub fn footprint(&self, id: usize) -> CellRect {
        let h = self.home_rect(id);
        let g = self.patches[id].growth;
        CellRect {
            r0: h.r0 - g.top as i64,
            r1: h.r1 + g.bottom as i64,
            c0: h.c0 - g.left as i64,
            c1: h.c1 + g.right as i64,
        }
    }

    pub fn channel_map(&self) -> ChannelMap {
        let mut occupied = vec![false; self.height * self.width];
        let mut map = ChannelMap {
            height: self.height,
            width: self.width,
            occupied: Vec::new(),
        };
        for p in &self.patches {
            let (r0, r1, c0, c1) = map.clip(self.footprint(p.id));
            for r in r0..r1 {
                for c in c0..c1 {
                    occupied[r * self.width + c] = true;
                }
            }
        }
        map.occupied = occupied;
        map
    }

    /// Sets the growth of a patch and refreshes every overlap flag.
    pub fn set_growth(&mut self, id: usize, growth: Growth) {
        self.patches[id].growth = growth;
        self.refresh_overlaps();
    }

    pub fn reset_growth(&mut self) {
        for p in &mut self.patches {
            p.growth = Growth::default();
            p.overlap = false;
            p.budget_exceeded = false;
        }
    }

    pub fn refresh_overlaps(&mut self) {
        let rects: Vec<CellRect> = (0..self.patches.len()).map(|i| self.footprint(i)).collect();
        for i in 0..rects.len() {
            self.patches[i].overlap = (0..rects.len()).any(|j| j != i && rects[i].intersects(&rects[j]));
        }
    }

    /// Physical qubits of the whole plane, two per lattice cell.
    pub fn physical_qubits(&self) -> usize {
        2 * self.height * self.width
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn from_json(s: &str) -> Result<Layout> {
        let l: Layout = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if l.format != LAYOUT_FORMAT {
            return Err(Error::Parse(format!("expected format {LAYOUT_FORMAT}, found {:?}", l.format)));
        }
        if l.patches.len() != l.n_logical || l.patches.iter().enumerate().any(|(i, p)| p.id != i) {
            return Err(Error::Parse("patch ids must be 0..n_logical in order".into()));
        }
        Ok(l)
    }
}

pub fn generate_layout<T: Float>(profile: &ProgramProfile<T>, d: usize, delta_d: usize, kind: LayoutKind) -> Layout {
    Layout::grid(profile.n_logical, d, delta_d, kind)
}

/// Q3DE response to a defect: the patch doubles to `2d` whatever the defect
/// pattern, defective qubits stay in the code, and neighbouring channels
/// absorb the growth. A defect-free patch is restored to its home footprint.
pub fn baseline_q3de(layout: &Layout, patch_id: usize, defects: &DefectSet) -> Result<Layout> {
    if patch_id >= layout.patches.len() {
        return Err(Error::Index {
            index: patch_id,
            len: layout.patches.len(),
        });
    }
    let mut out = layout.clone();
    out.set_growth(patch_id, q3de_growth(layout.d, !defects.is_empty()));
    Ok(out)
}

pub fn q3de_growth(d: usize, defective: bool) -> Growth {
    if !defective {
        return Growth::default();
    }
    Growth {
        top: d / 2,
        bottom: d - d / 2,
        left: d / 2,
        right: d - d / 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectEvent {
    /// Patch the event was sampled on, if sampled per patch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<usize>,
    pub epicenter: LatticeCoord,
    /// Affected physical sites, epicenter included, sorted.
    pub region: Vec<LatticeCoord>,
    pub start_cycle: u64,
    pub duration_cycles: u64,
    pub p_defect: f64,
}

impl DefectEvent {
    pub fn active_at(&self, cycle: u64) -> bool {
        self.start_cycle <= cycle && cycle < self.start_cycle + self.duration_cycles
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsFile {
    pub format: String,
    pub events: Vec<DefectEvent>,
}

impl EventsFile {
    pub fn new(events: Vec<DefectEvent>) -> Self {
        EventsFile {
            format: EVENTS_FORMAT.to_string(),
            events,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("events serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: EventsFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if f.format != EVENTS_FORMAT {
            return Err(Error::Parse(format!("expected format {EVENTS_FORMAT}, found {:?}", f.format)));
        }
        Ok(f)
    }
}

/// Physical sites (data and syndrome) of a pristine code on `area`.
pub fn area_sites(area: &Extent) -> Vec<LatticeCoord> {
    let mut v: Vec<LatticeCoord> = (area.top..=area.bottom)
        .flat_map(|r| (area.left..=area.right).map(move |c| LatticeCoord::data(r, c)))
        .collect();
    v.extend(area.plaquettes().into_iter().map(|(s, _, _)| s));
    v.sort();
    v
}

/// Sites of the 5x5 block of the hardware grid centred on `epicenter`.
/// Hardware neighbours are diagonal in doubled coordinates, so the block is
/// a diamond there.
pub fn event_region(epicenter: LatticeCoord, radius: i32) -> Vec<LatticeCoord> {
    let mut v = Vec::new();
    for du in -radius..=radius {
        for dv in -radius..=radius {
            v.push(LatticeCoord::new(epicenter.row + du + dv, epicenter.col + du - dv));
        }
    }
    v.sort();
    v
}

/// Events on `area` over `n_cycles`, from stream 0 of `seed`.
pub fn sample_defect_events<T: Float>(model: &DefectModel<T>, n_cycles: u64, area: &Extent, seed: u64) -> Vec<DefectEvent> {
    sample_defect_events_stream(model, n_cycles, area, seed, 0)
}

/// Independent arrivals on every physical site of `area`; each event covers
/// the clipped 5x5 block around its epicenter for the model's lifetime.
/// Different `stream`s of one seed are independent.
pub fn sample_defect_events_stream<T: Float>(
    model: &DefectModel<T>,
    n_cycles: u64,
    area: &Extent,
    seed: u64,
    stream: u64,
) -> Vec<DefectEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let sites = area_sites(area);
    let inside: BTreeSet<LatticeCoord> = sites.iter().copied().collect();
    let per_cycle = model.rho.to_f64().unwrap_or(0.0) * CYCLE_TIME;
    let mean = per_cycle * sites.len() as f64 * n_cycles as f64;
    if !(mean > 0.0) || n_cycles == 0 {
        return Vec::new();
    }
    let count = Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize;
    let duration = model.duration_cycles();
    let p_defect = model.p_defect.to_f64().unwrap_or(0.5);
    let radius = 2;
    let mut events: Vec<DefectEvent> = (0..count)
        .map(|_| {
            let epicenter = sites[rng.gen_range(0..sites.len())];
            let start_cycle = rng.gen_range(0..n_cycles);
            DefectEvent {
                patch: None,
                epicenter,
                region: event_region(epicenter, radius).into_iter().filter(|c| inside.contains(c)).collect(),
                start_cycle,
                duration_cycles: duration,
                p_defect,
            }
        })
        .collect();
    events.sort_by(|a, b| (a.start_cycle, a.epicenter).cmp(&(b.start_cycle, b.epicenter)));
    events
}

/// Per-patch events for a whole layout: patch `i` uses stream `i`, and
/// coordinates are relative to a pristine patch on `Extent::square(d)`.
pub fn sample_layout_events<T: Float>(layout: &Layout, model: &DefectModel<T>, n_cycles: u64, seed: u64) -> Vec<DefectEvent> {
    let area = Extent::square(layout.d);
    let mut out = Vec::new();
    for p in &layout.patches {
        for mut e in sample_defect_events_stream(model, n_cycles, &area, seed, p.id as u64) {
            e.patch = Some(p.id);
            out.push(e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_model() -> DefectModel<f64> {
        DefectModel::new(0.1 / 26.0, 0.025, 4, 0.5).unwrap()
    }

    #[test]
    fn pmf_values() {
        assert_eq!(poisson_pmf(0.0f64, 0), 1.0);
        assert!((poisson_pmf(0.14f64, 0) - (-0.14f64).exp()).abs() < 1e-15);
        for lam in [0.1f64, 1.0, 2.5, 5.0] {
            let s: f64 = (0..=50).map(|k| poisson_pmf(lam, k)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_matches_complement() {
        for lam in [0.05f64, 0.7, 3.0] {
            for k in 0..6 {
                let c: f64 = 1.0 - (0..=k).map(|j| poisson_pmf(lam, j)).sum::<f64>();
                assert!((poisson_tail(lam, k) - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn worked_example() {
        let m = worked_model();
        assert!((event_intensity(27, &m) - 0.14).abs() < 1e-3);
        let pb = block_probability(27, 4, &m);
        assert!((pb - 0.0089).abs() < 2e-4, "{pb}");
        assert_eq!(choose_delta_d(27, &m, 0.01).unwrap(), 4);
        let p0 = poisson_pmf(event_intensity(27, &m), 0);
        assert!((block_probability(27, 0, &m) - (1.0 - p0)).abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let m: DefectModel<f32> = DefectModel::nominal();
        assert_eq!(choose_delta_d(27, &m, 0.01f32).unwrap(), 4);
    }

    #[test]
    fn loose_threshold_needs_no_room() {
        assert_eq!(choose_delta_d(27, &worked_model(), 0.999).unwrap(), 0);
    }

    #[test]
    fn distance_choice() {
        let fit = ScalingFit { a: 0.1, p_th: 0.01 };
        let mut prof = ProgramProfile {
            n_logical: 1,
            cx_count: 1,
            t_count: 0,
            alpha_fail: 1e-12,
            alpha_block: 0.01,
        };
        // 0.1 * 0.1^11 = 1e-12 first holds at ceil(d/2) = 11.
        assert_eq!(choose_distance(&prof, 0.001, &fit).unwrap(), 21);
        prof.alpha_fail = 0.999;
        assert_eq!(choose_distance(&prof, 0.001, &fit).unwrap(), 3);
        prof.alpha_fail = 1e-6;
        assert!(matches!(choose_distance(&prof, 0.02, &fit), Err(Error::Infeasible(_))));
    }

    #[test]
    fn grid_geometry() {
        let l = Layout::grid(4, 3, 1, LayoutKind::Ours);
        assert_eq!((l.grid_rows, l.grid_cols, l.spacing, l.pitch()), (2, 2, 4, 7));
        let a = l.home_rect(0);
        let b = l.home_rect(1);
        assert_eq!(b.c0 - a.c1, 4);
        assert_eq!(Layout::grid(4, 3, 1, LayoutKind::Q3de).spacing, 3);
        assert_eq!(Layout::grid(4, 3, 1, LayoutKind::RevisedQ3de).spacing, 6);
        assert_eq!(l.channel_map().num_occupied(), 4 * 9);
    }

    #[test]
    fn layout_json_round_trip() {
        let mut l = Layout::grid(5, 5, 2, LayoutKind::Ours);
        l.set_growth(2, Growth { top: 1, bottom: 0, left: 2, right: 0 });
        assert_eq!(Layout::from_json(&l.to_json()).unwrap(), l);
    }

    #[test]
    fn q3de_doubles_and_blocks() {
        let l = Layout::grid(9, 5, 0, LayoutKind::Q3de);
        let ds: DefectSet = [LatticeCoord::data(2, 2)].into_iter().collect();
        let q = baseline_q3de(&l, 4, &ds).unwrap();
        let f = q.footprint(4);
        assert_eq!((f.r1 - f.r0, f.c1 - f.c0), (10, 10));
        let map = q.channel_map();
        let h = q.home_rect(4);
        let above = CellRect { r0: h.r0 - 5, r1: h.r0, c0: h.c0, c1: h.c1 };
        assert!(map.free_rows(above) < q.d);
        assert!(!q.patches[4].overlap);
        assert_eq!(baseline_q3de(&q, 4, &DefectSet::new()).unwrap().footprint(4), h);
    }

    #[test]
    fn region_is_a_clipped_five_by_five_block() {
        let r = event_region(LatticeCoord::data(5, 5), 2);
        assert_eq!(r.len(), 25);
        let area = Extent::square(9);
        let inside: BTreeSet<_> = area_sites(&area).into_iter().collect();
        assert_eq!(area_sites(&area).len(), 2 * 81 - 1);
        let corner = event_region(LatticeCoord::data(0, 0), 2);
        let kept = corner.iter().filter(|c| inside.contains(c)).count();
        assert!(kept < 25 && kept > 0);
    }

    #[test]
    fn sampler_is_reproducible() {
        let m = worked_model().with_rate_scale(1e3);
        let a = sample_defect_events(&m, 100_000, &Extent::square(9), 7);
        let b = sample_defect_events(&m, 100_000, &Extent::square(9), 7);
        assert!(!a.is_empty());
        assert_eq!(a, b);
        let c = sample_defect_events(&m, 100_000, &Extent::square(9), 8);
        assert_ne!(a, c);
    }

    #[test]
    fn events_json_round_trip() {
        let m = worked_model().with_rate_scale(1e3);
        let f = EventsFile::new(sample_defect_events(&m, 50_000, &Extent::square(5), 3));
        assert_eq!(EventsFile::from_json(&f.to_json()).unwrap(), f);
    }
}
