//! The code deformation unit: defect removal with boundary balancing,
//! adaptive enlargement, and the ASC-S removal baseline.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{CodePatch, LatticeCoord, Side};
use crate::distance::distance;
use crate::error::{Error, Result};
use crate::instructions::{
    dataq_rm, layer_sites, patchq_add, patchq_rm, syndromeq_rm, CompositeInstruction, RemovalOption, ScheduleStep,
    SiteRole,
};
use crate::pauli::Pauli;

/// Where a defective site sits relative to the patch boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectClass {
    InteriorData,
    InteriorSyndrome,
    /// Touches exactly one side.
    Edge(Side),
    /// Touches two sides of different boundary types.
    Corner(Side, Side),
    /// Not part of the patch, or already disabled.
    Outside,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectSet {
    pub qubits: BTreeSet<LatticeCoord>,
}

impl DefectSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn insert(&mut self, c: LatticeCoord) -> bool {
        self.qubits.insert(c)
    }

    pub fn contains(&self, c: &LatticeCoord) -> bool {
        self.qubits.contains(c)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LatticeCoord> {
        self.qubits.iter()
    }

    pub fn classify(&self, patch: &CodePatch) -> Vec<(LatticeCoord, DefectClass)> {
        self.qubits.iter().map(|c| (*c, classify(patch, *c))).collect()
    }
}

impl FromIterator<LatticeCoord> for DefectSet {
    fn from_iter<I: IntoIterator<Item = LatticeCoord>>(iter: I) -> Self {
        DefectSet {
            qubits: iter.into_iter().collect(),
        }
    }
}

fn sides_class(sides: &[Side]) -> DefectClass {
    let x = sides.iter().find(|s| s.check_kind() == Pauli::X);
    let z = sides.iter().find(|s| s.check_kind() == Pauli::Z);
    match (x, z) {
        (Some(a), Some(b)) => DefectClass::Corner(*a, *b),
        (Some(a), None) | (None, Some(a)) => DefectClass::Edge(*a),
        (None, None) => unreachable!("caller passes a non-empty side list"),
    }
}

pub fn classify(patch: &CodePatch, c: LatticeCoord) -> DefectClass {
    if patch.disabled.contains(&c) {
        return DefectClass::Outside;
    }
    if c.is_data() {
        if !patch.has_data(c) {
            return DefectClass::Outside;
        }
        let sides = patch.sides_of(c);
        if sides.is_empty() {
            DefectClass::InteriorData
        } else {
            sides_class(&sides)
        }
    } else {
        if !patch.syndromes.contains_key(&c) {
            return DefectClass::Outside;
        }
        if patch.is_interior_syndrome(c) {
            return DefectClass::InteriorSyndrome;
        }
        let mut sides: Vec<Side> = Vec::new();
        for q in c.plaquette_corners() {
            if patch.has_data(q) {
                for s in patch.sides_of(q) {
                    if !sides.contains(&s) {
                        sides.push(s);
                    }
                }
            }
        }
        if sides.is_empty() {
            return DefectClass::Outside;
        }
        sides_class(&sides)
    }
}

/// One entry of a deformation schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleEntry {
    Instruction(CompositeInstruction),
    /// A bare step outside any composite (retiring an idle syndrome qubit).
    Step(ScheduleStep),
}

impl ScheduleEntry {
    pub fn steps(&self) -> &[ScheduleStep] {
        match self {
            ScheduleEntry::Instruction(i) => &i.expansion,
            ScheduleEntry::Step(s) => std::slice::from_ref(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeformationSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl DeformationSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn push(&mut self, ins: CompositeInstruction) {
        self.entries.push(ScheduleEntry::Instruction(ins));
    }

    pub fn extend(&mut self, other: DeformationSchedule) {
        self.entries.extend(other.entries);
    }

    /// All atomic-level steps in order.
    pub fn steps(&self) -> impl Iterator<Item = &ScheduleStep> {
        self.entries.iter().flat_map(|e| e.steps().iter())
    }

    pub fn instructions(&self) -> impl Iterator<Item = &CompositeInstruction> {
        self.entries.iter().filter_map(|e| match e {
            ScheduleEntry::Instruction(i) => Some(i),
            ScheduleEntry::Step(_) => None,
        })
    }

    pub fn replay(&self, patch: &CodePatch) -> Result<CodePatch> {
        let mut p = patch.clone();
        for s in self.steps() {
            p.apply_step(s)?;
        }
        Ok(p)
    }
}

impl fmt::Display for DeformationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            match e {
                ScheduleEntry::Instruction(i) => write!(f, "{i}")?,
                ScheduleEntry::Step(s) => writeln!(f, "{s}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DeformationResult {
    pub patch: CodePatch,
    pub schedule: DeformationSchedule,
    pub distance_before: (usize, usize),
    pub distance_after: (usize, usize),
    /// Defects met in newly added layers and removed after the growth.
    pub deferred_defects: DefectSet,
    /// Defects that are not part of the patch and were left alone.
    pub skipped: DefectSet,
    /// Enlargement stopped at the growth budget before reaching the target.
    pub budget_exceeded: bool,
}

impl DeformationResult {
    pub fn distance_loss(&self) -> (isize, isize) {
        (
            self.distance_before.0 as isize - self.distance_after.0 as isize,
            self.distance_before.1 as isize - self.distance_after.1 as isize,
        )
    }

    pub fn min_distance(&self) -> usize {
        self.distance_after.0.min(self.distance_after.1)
    }
}

/// Distances, with a broken code counted as zero.
pub fn distance_or_zero(patch: &CodePatch) -> (usize, usize) {
    distance(patch).unwrap_or((0, 0))
}

/// Ways of taking one defective site out of the code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Removal {
    DataQRm(LatticeCoord),
    SyndromeQRm(LatticeCoord),
    PatchQRm(Side, LatticeCoord, RemovalOption),
    /// Removes every data qubit of a syndrome's check, then retires the
    /// syndrome qubit (how ASC-S treats syndrome defects).
    Support(LatticeCoord),
}

impl Removal {
    pub fn apply(&self, patch: &CodePatch) -> Result<(CodePatch, Vec<ScheduleEntry>)> {
        let one = |r: Result<(CodePatch, CompositeInstruction)>| {
            r.map(|(p, i)| (p, vec![ScheduleEntry::Instruction(i)]))
        };
        match *self {
            Removal::DataQRm(c) => one(dataq_rm(patch, c)),
            Removal::SyndromeQRm(c) => one(syndromeq_rm(patch, c)),
            // a data qubit whose single-site operator has become a logical is
            // taken out with the other fix
            Removal::PatchQRm(side, c, RemovalOption::Fix(p)) => match patchq_rm(patch, side, c, RemovalOption::Fix(p)) {
                Err(Error::LogicalCorruption(_)) => one(patchq_rm(patch, side, c, RemovalOption::Fix(p.conjugate()))),
                r => one(r),
            },
            Removal::PatchQRm(side, c, opt) => one(patchq_rm(patch, side, c, opt)),
            Removal::Support(c) => {
                let mut p = patch.clone();
                let mut entries = Vec::new();
                for q in p.syndrome_support(c) {
                    let (np, e) = ascs_removal(&p, q)?.apply(&p)?;
                    p = np;
                    entries.extend(e);
                }
                let step = ScheduleStep::DisableSyndrome { coord: c };
                p.apply_step(&step)?;
                entries.push(ScheduleEntry::Step(step));
                Ok((p, entries))
            }
        }
    }
}

/// Single-site operator fixed when a data qubit leaves through `side`: the
/// conjugate of the side's check type, which merges the checks along it.
fn natural_fix(side: Side) -> Pauli {
    side.check_kind().conjugate()
}

/// Options considered for one defect, most preferred first.
pub fn removal_candidates(patch: &CodePatch, c: LatticeCoord) -> Vec<Removal> {
    match classify(patch, c) {
        DefectClass::Outside => vec![],
        DefectClass::InteriorData => vec![Removal::DataQRm(c)],
        DefectClass::InteriorSyndrome => vec![Removal::SyndromeQRm(c)],
        DefectClass::Edge(side) if c.is_data() => {
            vec![Removal::PatchQRm(side, c, RemovalOption::Fix(natural_fix(side)))]
        }
        DefectClass::Corner(sx, sz) if c.is_data() => vec![
            Removal::PatchQRm(sz, c, RemovalOption::Fix(Pauli::X)),
            Removal::PatchQRm(sx, c, RemovalOption::Fix(Pauli::Z)),
        ],
        DefectClass::Edge(side) | DefectClass::Corner(side, _) => vec![
            Removal::PatchQRm(side, c, RemovalOption::GaugeKeep),
            Removal::PatchQRm(side, c, RemovalOption::FixSupport),
            Removal::Support(c),
        ],
    }
}

/// The single choice ASC-S makes for a defect.
pub fn ascs_removal(patch: &CodePatch, c: LatticeCoord) -> Result<Removal> {
    Ok(match classify(patch, c) {
        DefectClass::Outside => return Err(Error::Geometry(format!("{c} is not an active site of the patch"))),
        DefectClass::InteriorData => Removal::DataQRm(c),
        DefectClass::Edge(side) if c.is_data() => Removal::PatchQRm(side, c, RemovalOption::Fix(natural_fix(side))),
        DefectClass::Corner(sx, _) if c.is_data() => Removal::PatchQRm(sx, c, RemovalOption::Fix(Pauli::Z)),
        _ => Removal::Support(c),
    })
}

/// Applies each candidate and keeps the one with the largest
/// `min(d_X, d_Z)`, then the largest sum; earlier candidates win ties.
/// Candidates that fail to apply are skipped.
pub fn balancing(patch: &CodePatch, candidates: &[Removal]) -> Result<(Removal, CodePatch, Vec<ScheduleEntry>, (usize, usize))> {
    let mut best: Option<(Removal, CodePatch, Vec<ScheduleEntry>, (usize, usize))> = None;
    let mut last_err = None;
    for cand in candidates {
        match cand.apply(patch) {
            Ok((p, e)) => {
                let d = distance_or_zero(&p);
                let better = match &best {
                    None => true,
                    Some((_, _, _, b)) => (d.0.min(d.1), d.0 + d.1) > (b.0.min(b.1), b.0 + b.1),
                };
                if better {
                    best = Some((*cand, p, e, d));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Geometry("no removal candidate".into())))
}

fn remove_with<F>(patch: &CodePatch, defects: &DefectSet, mut choose: F) -> Result<DeformationResult>
where
    F: FnMut(&CodePatch, LatticeCoord) -> Result<Option<(CodePatch, Vec<ScheduleEntry>)>>,
{
    let before = distance_or_zero(patch);
    let mut p = patch.clone();
    let mut schedule = DeformationSchedule::new();
    let mut skipped = DefectSet::new();
    for &c in defects.iter() {
        if !c.is_data() && !c.is_syndrome() {
            return Err(Error::Geometry(format!("{c} is not a lattice site")));
        }
        if p.disabled.contains(&c) {
            continue;
        }
        let chosen = choose(&p, c).map_err(|e| match e {
            Error::LogicalCorruption(op) => Error::CodeBroken(format!("removing {c} would measure the logical qubit ({op})")),
            e => e,
        })?;
        match chosen {
            Some((np, entries)) => {
                p = np;
                schedule.entries.extend(entries);
            }
            None => {
                skipped.insert(c);
            }
        }
    }
    let after = if schedule.is_empty() { before } else { distance_or_zero(&p) };
    Ok(DeformationResult {
        patch: p,
        schedule,
        distance_before: before,
        distance_after: after,
        deferred_defects: DefectSet::new(),
        skipped,
        budget_exceeded: false,
    })
}

/// Defect removal: interior sites by DataQ_RM / SyndromeQ_RM, boundary sites
/// by PatchQ_RM. Boundary options are balanced on the final code: the plan
/// that picks each option by [`balancing`] as it goes is compared with the
/// plan that takes every boundary site out with the fewest disabled qubits,
/// and the one with the larger `(min, sum)` distance pair is kept.
pub fn remove_defects(patch: &CodePatch, defects: &DefectSet) -> Result<DeformationResult> {
    let greedy = remove_with(patch, defects, |p, c| {
        let cands = removal_candidates(p, c);
        if cands.is_empty() {
            return Ok(None);
        }
        let (_, np, entries, _) = balancing(p, &cands)?;
        Ok(Some((np, entries)))
    });
    let any_boundary = defects
        .iter()
        .any(|c| matches!(classify(patch, *c), DefectClass::Edge(_) | DefectClass::Corner(..)));
    if !any_boundary {
        return greedy;
    }
    let uniform = remove_with(patch, defects, |p, c| match classify(p, c) {
        DefectClass::Outside => Ok(None),
        DefectClass::InteriorData | DefectClass::InteriorSyndrome => {
            removal_candidates(p, c)[0].apply(p).map(Some)
        }
        _ => ascs_removal(p, c)?.apply(p).map(Some),
    });
    let key = |r: &DeformationResult| (r.min_distance(), r.distance_after.0 + r.distance_after.1);
    match (greedy, uniform) {
        (Ok(g), Ok(u)) => Ok(if key(&u) > key(&g) { u } else { g }),
        (Ok(r), Err(_)) | (Err(_), Ok(r)) => Ok(r),
        (Err(e), Err(_)) => Err(e),
    }
}

/// ASC-S: super-stabilizers around removed data qubits only; syndrome
/// defects take their whole check with them; no enlargement.
pub fn baseline_ascs(patch: &CodePatch, defects: &DefectSet) -> Result<DeformationResult> {
    remove_with(patch, defects, |p, c| {
        if classify(p, c) == DefectClass::Outside {
            return Ok(None);
        }
        ascs_removal(p, c)?.apply(p).map(Some)
    })
}

/// A candidate scale layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub side: Side,
    pub sites: Vec<(LatticeCoord, SiteRole, Option<Pauli>)>,
    /// False when growing past `side` would exceed the budget.
    pub within_budget: bool,
}

impl Layer {
    pub fn num_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn data(&self) -> impl Iterator<Item = LatticeCoord> + '_ {
        self.sites.iter().filter(|s| s.1 == SiteRole::Data).map(|s| s.0)
    }
}

/// How far the patch has grown past its home extent on `side`.
pub fn growth(patch: &CodePatch, side: Side) -> i32 {
    let (e, h) = (patch.extent, patch.home);
    match side {
        Side::Top => h.top - e.top,
        Side::Bottom => e.bottom - h.bottom,
        Side::Left => h.left - e.left,
        Side::Right => e.right - h.right,
    }
}

/// The scale layer beyond `side`: one full row or column of data qubits with
/// the syndrome qubits that complete its checks. Empty when the budget of
/// `delta_d` layers per side is used up.
pub fn find_layer(patch: &CodePatch, side: Side, delta_d: usize) -> Layer {
    if growth(patch, side) >= delta_d as i32 {
        return Layer {
            side,
            sites: Vec::new(),
            within_budget: false,
        };
    }
    Layer {
        side,
        sites: layer_sites(patch, side),
        within_budget: true,
    }
}

/// Adds the layer and removes the defects that land in it.
fn grow(patch: &CodePatch, layer: &Layer, defects: &DefectSet) -> Result<(CodePatch, DeformationSchedule, DefectSet)> {
    let (p, ins) = patchq_add(patch, layer.side, &layer.sites)?;
    let mut schedule = DeformationSchedule::new();
    schedule.push(ins);
    let hit: DefectSet = layer
        .sites
        .iter()
        .map(|s| s.0)
        .filter(|c| defects.contains(c))
        .collect();
    if hit.is_empty() {
        return Ok((p, schedule, hit));
    }
    let r = remove_defects(&p, &hit)?;
    schedule.extend(r.schedule);
    Ok((r.patch, schedule, hit))
}

/// Adaptive enlargement: while a distance is below `target`, try one scale
/// layer on each side that raises it, keep the one that gains the most
/// (fewest added qubits on ties) and remove any defects it contains. Layers
/// that would lower either distance are skipped.
/// Growth per side is capped at `delta_d` layers beyond the home extent.
pub fn adaptive_enlarge(patch: &CodePatch, defects: &DefectSet, target: usize, delta_d: usize) -> Result<DeformationResult> {
    let before = distance_or_zero(patch);
    let mut p = patch.clone();
    let mut d = before;
    let mut schedule = DeformationSchedule::new();
    let mut deferred = DefectSet::new();
    let mut budget_exceeded = false;
    while d.0 < target || d.1 < target {
        let kinds = [(d.0, Pauli::X), (d.1, Pauli::Z)];
        let mut best: Option<((usize, usize, usize), usize, CodePatch, DeformationSchedule, DefectSet)> = None;
        for (cur, kind) in kinds.into_iter().filter(|k| k.0 < target) {
            let sides: Vec<Side> = Side::ALL.into_iter().filter(|s| s.distance_kind() == kind).collect();
            for side in sides {
                let layer = find_layer(&p, side, delta_d);
                if !layer.within_budget || layer.sites.is_empty() {
                    continue;
                }
                let Ok((np, s, hit)) = grow(&p, &layer, defects) else {
                    continue;
                };
                let nd = distance_or_zero(&np);
                let (gain, other) = if kind == Pauli::X { (nd.0, nd.1) } else { (nd.1, nd.0) };
                let other_before = if kind == Pauli::X { d.1 } else { d.0 };
                // a layer next to a qubit removed for this boundary can cost
                // distance; such layers are never taken
                if gain < cur || other < other_before.min(target) {
                    continue;
                }
                let key = (usize::from(gain > cur), gain - cur, nd.0.min(nd.1));
                let better = match &best {
                    None => true,
                    Some((bk, bn, ..)) => key > *bk || (key == *bk && layer.num_qubits() < *bn),
                };
                if better {
                    best = Some((key, layer.num_qubits(), np, s, hit));
                }
            }
        }
        let Some((_, _, np, s, hit)) = best else {
            budget_exceeded = true;
            break;
        };
        p = np;
        schedule.extend(s);
        deferred.qubits.extend(hit.qubits);
        d = distance_or_zero(&p);
    }
    Ok(DeformationResult {
        patch: p,
        schedule,
        distance_before: before,
        distance_after: d,
        deferred_defects: deferred,
        skipped: DefectSet::new(),
        budget_exceeded,
    })
}

/// Removal followed by enlargement back to `target`.
pub fn deform_patch(patch: &CodePatch, defects: &DefectSet, target: usize, delta_d: usize) -> Result<DeformationResult> {
    let removed = remove_defects(patch, defects)?;
    let grown = adaptive_enlarge(&removed.patch, &removed.skipped, target, delta_d)?;
    let mut schedule = removed.schedule;
    schedule.extend(grown.schedule);
    Ok(DeformationResult {
        patch: grown.patch,
        schedule,
        distance_before: removed.distance_before,
        distance_after: grown.distance_after,
        deferred_defects: grown.deferred_defects,
        skipped: removed.skipped,
        budget_exceeded: grown.budget_exceeded,
    })
}

/// One deformation round over several patches, keyed by patch id. Patches
/// are processed in parallel; results come back in id order.
pub fn deform_cycle(
    patches: &[(usize, CodePatch)],
    new_defects: &[(usize, DefectSet)],
    target: usize,
    delta_d: usize,
) -> Result<Vec<(usize, DeformationResult)>> {
    let mut work: Vec<(usize, &CodePatch, DefectSet)> = patches
        .iter()
        .map(|(id, p)| {
            let mut ds = DefectSet::new();
            for (j, d) in new_defects {
                if j == id {
                    ds.qubits.extend(d.qubits.iter().copied());
                }
            }
            (*id, p, ds)
        })
        .collect();
    work.sort_by_key(|w| w.0);
    work.into_par_iter()
        .map(|(id, p, ds)| deform_patch(p, &ds, target, delta_d).map(|r| (id, r)))
        .collect()
}

/// All physical sites of the patch that are still in use: active data
/// qubits and syndrome qubits.
pub fn physical_sites(patch: &CodePatch) -> Vec<LatticeCoord> {
    let mut v: Vec<LatticeCoord> = patch.active_data().map(|(_, c)| c).collect();
    v.extend(patch.syndromes.keys().filter(|c| !patch.disabled.contains(c)));
    v.sort();
    v
}

/// `k` distinct defective sites drawn uniformly from [`physical_sites`].
pub fn random_defects<R: rand::Rng + ?Sized>(patch: &CodePatch, k: usize, rng: &mut R) -> DefectSet {
    let sites = physical_sites(patch);
    rand::seq::index::sample(rng, sites.len(), k.min(sites.len()))
        .into_iter()
        .map(|i| sites[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{build_rotated_code, validate_generators, validate_meas};
    use crate::distance::brute_force_distance;

    fn valid(p: &CodePatch) {
        let a = validate_generators(p);
        assert!(a.ok, "{a:?}");
        let b = validate_meas(p);
        assert!(b.ok, "{b:?}");
    }

    fn set(cs: &[LatticeCoord]) -> DefectSet {
        cs.iter().copied().collect()
    }

    #[test]
    fn classification() {
        let p = build_rotated_code(5).unwrap();
        assert_eq!(classify(&p, LatticeCoord::data(2, 2)), DefectClass::InteriorData);
        assert_eq!(classify(&p, LatticeCoord::plaquette(1, 1)), DefectClass::InteriorSyndrome);
        assert_eq!(classify(&p, LatticeCoord::data(0, 2)), DefectClass::Edge(Side::Top));
        assert_eq!(classify(&p, LatticeCoord::data(0, 4)), DefectClass::Corner(Side::Right, Side::Top));
        assert_eq!(classify(&p, LatticeCoord::data(7, 7)), DefectClass::Outside);
    }

    #[test]
    fn empty_set_changes_nothing() {
        let p = build_rotated_code(5).unwrap();
        let r = remove_defects(&p, &DefectSet::new()).unwrap();
        assert_eq!(r.patch, p);
        assert!(r.schedule.is_empty());
        assert_eq!(r.distance_loss(), (0, 0));
    }

    #[test]
    fn center_syndrome_costs_two_in_x() {
        let p = build_rotated_code(5).unwrap();
        let ds = set(&[LatticeCoord::plaquette(1, 1)]);
        let r = remove_defects(&p, &ds).unwrap();
        assert_eq!(r.distance_loss(), (2, 0));
        let a = baseline_ascs(&p, &ds).unwrap();
        assert_eq!(a.distance_after, (3, 3));
        valid(&a.patch);
    }

    #[test]
    fn corner_prefers_balanced_option() {
        let p = build_rotated_code(5).unwrap();
        let q = LatticeCoord::data(0, 4);
        let (choice, _, _, d) = balancing(&p, &removal_candidates(&p, q)).unwrap();
        assert_eq!(choice, Removal::PatchQRm(Side::Top, q, RemovalOption::Fix(Pauli::X)));
        let a = baseline_ascs(&p, &set(&[q])).unwrap();
        assert!(d.0.min(d.1) >= a.min_distance());
    }

    #[test]
    fn schedules_replay() {
        let p = build_rotated_code(5).unwrap();
        let ds = set(&[
            LatticeCoord::data(2, 2),
            LatticeCoord::data(0, 1),
            LatticeCoord::plaquette(-1, 2),
            LatticeCoord::plaquette(2, 0),
        ]);
        for r in [remove_defects(&p, &ds).unwrap(), baseline_ascs(&p, &ds).unwrap()] {
            valid(&r.patch);
            assert_eq!(r.schedule.replay(&p).unwrap(), r.patch);
            let (dx, dz) = r.distance_after;
            assert_eq!(brute_force_distance(&r.patch, 5), (Some(dx), Some(dz)));
        }
    }

    #[test]
    fn one_layer_restores_one_unit() {
        let p = CodePatch::rectangle(crate::code::Extent {
            top: 0,
            bottom: 2,
            left: 0,
            right: 1,
        });
        assert_eq!(distance(&p).unwrap(), (2, 3));
        let r = adaptive_enlarge(&p, &DefectSet::new(), 3, 2).unwrap();
        assert_eq!(r.distance_after, (3, 3));
        assert_eq!(r.schedule.len(), 1);
        valid(&r.patch);
    }

    #[test]
    fn enlargement_restores_after_removal() {
        let p = build_rotated_code(5).unwrap();
        let ds = set(&[LatticeCoord::plaquette(1, 1), LatticeCoord::data(0, 3)]);
        let r = deform_patch(&p, &ds, 5, 4).unwrap();
        assert!(!r.budget_exceeded);
        assert_eq!(r.distance_after, (5, 5));
        valid(&r.patch);
        assert_eq!(r.schedule.replay(&p).unwrap(), r.patch);
    }

    #[test]
    fn defect_in_new_layer_is_removed_after_growth() {
        let p = build_rotated_code(3).unwrap();
        let removed = remove_defects(&p, &set(&[LatticeCoord::data(1, 2)])).unwrap();
        let outside = set(&[LatticeCoord::data(1, 3)]);
        let r = adaptive_enlarge(&removed.patch, &outside, 3, 4).unwrap();
        assert!(!r.budget_exceeded);
        assert!(r.distance_after.0 >= 3 && r.distance_after.1 >= 3);
        valid(&r.patch);
        if r.deferred_defects.contains(&LatticeCoord::data(1, 3)) {
            assert!(r.patch.disabled.contains(&LatticeCoord::data(1, 3)));
        }
    }

    #[test]
    fn zero_budget_is_reported() {
        let p = build_rotated_code(5).unwrap();
        let removed = remove_defects(&p, &set(&[LatticeCoord::plaquette(1, 1)])).unwrap();
        let layer = find_layer(&removed.patch, Side::Left, 0);
        assert!(layer.sites.is_empty() && !layer.within_budget);
        let r = adaptive_enlarge(&removed.patch, &DefectSet::new(), 5, 0).unwrap();
        assert!(r.budget_exceeded);
    }

    #[test]
    fn straight_layer_size() {
        let p = build_rotated_code(3).unwrap();
        let l = find_layer(&p, Side::Right, 1);
        assert_eq!(l.data().count(), 3);
    }

    #[test]
    fn idle_cycle_is_identity() {
        let p = build_rotated_code(5).unwrap();
        let r = deform_cycle(&[(0, p.clone()), (1, p.clone())], &[], 5, 4).unwrap();
        for (_, res) in r {
            assert_eq!(res.patch, p);
            assert!(res.schedule.is_empty());
        }
    }

    fn sites(cs: &[(i32, i32)]) -> DefectSet {
        cs.iter().map(|&(row, col)| LatticeCoord { row, col }).collect()
    }

    #[test]
    fn corner_qubit_carrying_a_logical_takes_the_other_fix() {
        let p = build_rotated_code(5).unwrap();
        let ds = sites(&[(1, 9), (3, 7), (7, 7)]);
        for r in [remove_defects(&p, &ds).unwrap(), baseline_ascs(&p, &ds).unwrap()] {
            valid(&r.patch);
            assert!(r.patch.disabled.contains(&LatticeCoord::data(4, 4)));
            assert_eq!(r.schedule.replay(&p).unwrap(), r.patch);
        }
    }

    #[test]
    fn single_site_stabilizer_is_measured_before_removal() {
        let p = build_rotated_code(3).unwrap();
        let r = baseline_ascs(&p, &sites(&[(0, 0), (1, 5), (3, 1)])).unwrap();
        valid(&r.patch);
        assert_eq!(r.distance_after, (1, 1));
    }

    #[test]
    fn losing_the_logical_is_reported() {
        let p = build_rotated_code(3).unwrap();
        let ds = sites(&[(0, 2), (1, 1), (2, 0), (3, -1), (3, 3), (4, 0)]);
        assert!(matches!(baseline_ascs(&p, &ds), Err(Error::CodeBroken(_))));
        assert!(remove_defects(&p, &ds).is_ok());
    }
}
