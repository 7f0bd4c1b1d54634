//! Rotated surface-code patches, their generator representation and the two
//! validity checkers.
//!
//! Coordinates use the doubled-integer convention: data qubit `(r, c)` of the
//! lattice sits at `(2r, 2c)`, and the plaquette whose top-left data qubit is
//! `(i, j)` has its syndrome qubit at `(2i+1, 2j+1)`. Plaquette `(i, j)` is an
//! X-check when `i + j` is even. Top and bottom sides carry weight-2 Z-checks,
//! left and right sides weight-2 X-checks, so the logical X runs along the top
//! row and the logical Z along the left column.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::Span;
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeCoord {
    pub row: i32,
    pub col: i32,
}

impl LatticeCoord {
    pub const fn new(row: i32, col: i32) -> Self {
        LatticeCoord { row, col }
    }

    /// Doubled coordinate of data qubit `(r, c)`.
    pub const fn data(r: i32, c: i32) -> Self {
        LatticeCoord::new(2 * r, 2 * c)
    }

    /// Doubled coordinate of the syndrome qubit of plaquette `(i, j)`.
    pub const fn plaquette(i: i32, j: i32) -> Self {
        LatticeCoord::new(2 * i + 1, 2 * j + 1)
    }

    pub fn is_data(self) -> bool {
        self.row.rem_euclid(2) == 0 && self.col.rem_euclid(2) == 0
    }

    pub fn is_syndrome(self) -> bool {
        self.row.rem_euclid(2) == 1 && self.col.rem_euclid(2) == 1
    }

    /// Lattice (undoubled) data indices.
    pub fn data_rc(self) -> (i32, i32) {
        (self.row.div_euclid(2), self.col.div_euclid(2))
    }

    /// Plaquette indices of a syndrome coordinate.
    pub fn plaquette_ij(self) -> (i32, i32) {
        ((self.row - 1).div_euclid(2), (self.col - 1).div_euclid(2))
    }

    /// The four data sites a plaquette touches on an unbounded lattice.
    pub fn plaquette_corners(self) -> [LatticeCoord; 4] {
        let (i, j) = self.plaquette_ij();
        [
            LatticeCoord::data(i, j),
            LatticeCoord::data(i, j + 1),
            LatticeCoord::data(i + 1, j),
            LatticeCoord::data(i + 1, j + 1),
        ]
    }

    /// The four plaquettes around a data site.
    pub fn adjacent_plaquettes(self) -> [LatticeCoord; 4] {
        let (r, c) = self.data_rc();
        [
            LatticeCoord::plaquette(r - 1, c - 1),
            LatticeCoord::plaquette(r - 1, c),
            LatticeCoord::plaquette(r, c - 1),
            LatticeCoord::plaquette(r, c),
        ]
    }

    pub fn manhattan(self, other: LatticeCoord) -> i32 {
        (self.row - other.row).abs() + (self.col - other.col).abs()
    }
}

impl fmt::Display for LatticeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Check type of plaquette `(i, j)` in the global checkerboard.
pub fn plaquette_kind(i: i32, j: i32) -> Pauli {
    if (i + j).rem_euclid(2) == 0 {
        Pauli::X
    } else {
        Pauli::Z
    }
}

/// Inclusive rectangle of data rows and columns, in undoubled units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Extent {
    pub top: i32,
    pub bottom: i32,
    pub left: i32,
    pub right: i32,
}

impl Extent {
    pub fn square(d: usize) -> Self {
        let d = d as i32;
        Extent {
            top: 0,
            bottom: d - 1,
            left: 0,
            right: d - 1,
        }
    }

    pub fn height(&self) -> usize {
        (self.bottom - self.top + 1) as usize
    }

    pub fn width(&self) -> usize {
        (self.right - self.left + 1) as usize
    }

    pub fn contains_data(&self, c: LatticeCoord) -> bool {
        let (r, k) = c.data_rc();
        c.is_data() && (self.top..=self.bottom).contains(&r) && (self.left..=self.right).contains(&k)
    }

    pub fn grown(&self, side: Side, by: i32) -> Extent {
        let mut e = *self;
        match side {
            Side::Top => e.top -= by,
            Side::Bottom => e.bottom += by,
            Side::Left => e.left -= by,
            Side::Right => e.right += by,
        }
        e
    }

    /// Plaquettes of a pristine rotated code on this rectangle: syndrome
    /// coordinate, check type and data support.
    pub fn plaquettes(&self) -> Vec<(LatticeCoord, Pauli, Vec<LatticeCoord>)> {
        let mut out = Vec::new();
        for i in self.top - 1..=self.bottom {
            for j in self.left - 1..=self.right {
                let kind = plaquette_kind(i, j);
                let on_top = i == self.top - 1;
                let on_bottom = i == self.bottom;
                let on_left = j == self.left - 1;
                let on_right = j == self.right;
                let keep = match (on_top || on_bottom, on_left || on_right) {
                    (false, false) => true,
                    (true, false) => kind == Pauli::Z,
                    (false, true) => kind == Pauli::X,
                    (true, true) => false,
                };
                if !keep {
                    continue;
                }
                let site = LatticeCoord::plaquette(i, j);
                let support: Vec<_> = site
                    .plaquette_corners()
                    .into_iter()
                    .filter(|c| self.contains_data(*c))
                    .collect();
                out.push((site, kind, support));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Top,
    Right,
    Bottom,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Top, Side::Right, Side::Bottom, Side::Left];

    /// Type of the weight-2 checks living on this side.
    pub fn check_kind(self) -> Pauli {
        match self {
            Side::Top | Side::Bottom => Pauli::Z,
            Side::Left | Side::Right => Pauli::X,
        }
    }

    /// Boundary identifier: `XL1`/`XL2` are where the logical X terminates
    /// (left/right), `ZL1`/`ZL2` where the logical Z terminates (top/bottom).
    pub fn id(self) -> &'static str {
        match self {
            Side::Left => "XL1",
            Side::Right => "XL2",
            Side::Top => "ZL1",
            Side::Bottom => "ZL2",
        }
    }

    pub fn from_id(s: &str) -> Result<Side> {
        match s {
            "XL1" => Ok(Side::Left),
            "XL2" => Ok(Side::Right),
            "ZL1" => Ok(Side::Top),
            "ZL2" => Ok(Side::Bottom),
            _ => Err(Error::Parse(format!("unknown boundary id `{s}`"))),
        }
    }

    /// Growing on this side raises the distance against this error type.
    pub fn distance_kind(self) -> Pauli {
        self.check_kind()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Boundary {
    pub side: Side,
    pub kind: Pauli,
    pub qubits: Vec<LatticeCoord>,
}

/// Generator representation of a `k = 1` subsystem code: independent
/// stabilizer generators plus anticommuting gauge pairs. The logical pair is
/// stored on the patch itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorRep {
    pub stabilizers: Vec<PauliString>,
    pub gauge_pairs: Vec<(PauliString, PauliString)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodePatch {
    pub(crate) sites: Vec<LatticeCoord>,
    pub(crate) index: HashMap<LatticeCoord, usize>,
    /// Syndrome sites with their nominal check type.
    pub syndromes: BTreeMap<LatticeCoord, Pauli>,
    pub stab_set: Vec<PauliString>,
    pub gauge_set: Vec<PauliString>,
    pub logical_x: PauliString,
    pub logical_z: PauliString,
    pub generators: GeneratorRep,
    pub disabled: BTreeSet<LatticeCoord>,
    /// Current rectangle the lattice may occupy.
    pub extent: Extent,
    /// Footprint at construction; enlargement budgets are measured from it.
    pub home: Extent,
}

pub fn build_rotated_code(d: usize) -> Result<CodePatch> {
    if d < 2 {
        return Err(Error::Argument(format!("distance must be at least 2, got {d}")));
    }
    Ok(CodePatch::rectangle(Extent::square(d)))
}

impl CodePatch {
    /// Pristine rotated code filling `extent`.
    pub fn rectangle(extent: Extent) -> CodePatch {
        let mut sites = Vec::new();
        for r in extent.top..=extent.bottom {
            for c in extent.left..=extent.right {
                sites.push(LatticeCoord::data(r, c));
            }
        }
        let index: HashMap<_, _> = sites.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let n = sites.len();
        let mut syndromes = BTreeMap::new();
        let mut stabs = Vec::new();
        for (site, kind, support) in extent.plaquettes() {
            syndromes.insert(site, kind);
            stabs.push(PauliString::uniform(n, kind, support.iter().map(|c| index[c])));
        }
        let logical_x = PauliString::uniform(
            n,
            Pauli::X,
            (extent.left..=extent.right).map(|c| index[&LatticeCoord::data(extent.top, c)]),
        );
        let logical_z = PauliString::uniform(
            n,
            Pauli::Z,
            (extent.top..=extent.bottom).map(|r| index[&LatticeCoord::data(r, extent.left)]),
        );
        CodePatch {
            sites,
            index,
            syndromes,
            stab_set: stabs.clone(),
            gauge_set: Vec::new(),
            logical_x,
            logical_z,
            generators: GeneratorRep {
                stabilizers: stabs,
                gauge_pairs: Vec::new(),
            },
            disabled: BTreeSet::new(),
            extent,
            home: extent,
        }
    }

    /// Number of qubit slots, including disabled ones.
    pub fn num_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[LatticeCoord] {
        &self.sites
    }

    pub fn index_of(&self, c: LatticeCoord) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn coord_of(&self, q: usize) -> LatticeCoord {
        self.sites[q]
    }

    pub fn has_data(&self, c: LatticeCoord) -> bool {
        self.index.contains_key(&c)
    }

    pub fn is_active(&self, c: LatticeCoord) -> bool {
        self.has_data(c) && !self.disabled.contains(&c)
    }

    pub fn active_data(&self) -> impl Iterator<Item = (usize, LatticeCoord)> + '_ {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, c)| !self.disabled.contains(c))
            .map(|(i, c)| (i, *c))
    }

    pub fn num_active(&self) -> usize {
        self.sites.len() - self.disabled.iter().filter(|c| self.has_data(**c)).count()
    }

    pub fn single(&self, c: LatticeCoord, p: Pauli) -> Result<PauliString> {
        let q = self
            .index_of(c)
            .ok_or_else(|| Error::Geometry(format!("no data qubit at {c}")))?;
        Ok(PauliString::single(self.num_qubits(), q, p))
    }

    /// Operator of one type on the active subset of `coords`.
    pub fn op_on(&self, kind: Pauli, coords: &[LatticeCoord]) -> PauliString {
        PauliString::uniform(
            self.num_qubits(),
            kind,
            coords
                .iter()
                .filter(|c| self.is_active(**c))
                .filter_map(|c| self.index_of(*c)),
        )
    }

    /// Measured operator set `Stab ∪ Gauge`.
    pub fn meas(&self) -> impl Iterator<Item = &PauliString> {
        self.stab_set.iter().chain(&self.gauge_set)
    }

    pub fn num_gauge_qubits(&self) -> usize {
        self.generators.gauge_pairs.len()
    }

    /// All generator-representation operators, logical pair included.
    pub fn all_generators(&self) -> impl Iterator<Item = &PauliString> {
        self.generators
            .stabilizers
            .iter()
            .chain([&self.logical_x, &self.logical_z])
            .chain(self.generators.gauge_pairs.iter().flat_map(|(a, b)| [a, b]))
    }

    pub fn stabilizer_span(&self) -> Span {
        Span::from_ops(&self.generators.stabilizers)
    }

    /// Span of stabilizer generators and gauge pairs (the gauge group).
    pub fn gauge_group_span(&self) -> Span {
        Span::from_ops(
            self.generators
                .stabilizers
                .iter()
                .chain(self.generators.gauge_pairs.iter().flat_map(|(a, b)| [a, b])),
        )
    }

    /// The four boundaries of the current extent, each listing its active
    /// perimeter data qubits in order.
    pub fn boundaries(&self) -> Vec<Boundary> {
        let e = self.extent;
        Side::ALL
            .iter()
            .map(|&side| {
                let coords: Vec<LatticeCoord> = match side {
                    Side::Top => (e.left..=e.right).map(|c| LatticeCoord::data(e.top, c)).collect(),
                    Side::Bottom => (e.left..=e.right).map(|c| LatticeCoord::data(e.bottom, c)).collect(),
                    Side::Left => (e.top..=e.bottom).map(|r| LatticeCoord::data(r, e.left)).collect(),
                    Side::Right => (e.top..=e.bottom).map(|r| LatticeCoord::data(r, e.right)).collect(),
                };
                Boundary {
                    side,
                    kind: side.check_kind(),
                    qubits: coords.into_iter().filter(|c| self.is_active(*c)).collect(),
                }
            })
            .collect()
    }

    /// Appends fresh qubit slots, extending every operator with identity.
    pub(crate) fn add_sites(&mut self, coords: &[LatticeCoord]) -> Result<()> {
        for c in coords {
            if !c.is_data() {
                return Err(Error::QubitType {
                    coord: *c,
                    found: "syndrome",
                    expected: "data",
                });
            }
            if self.index.contains_key(c) {
                return Err(Error::Geometry(format!("data qubit {c} already present")));
            }
        }
        for c in coords {
            self.index.insert(*c, self.sites.len());
            self.sites.push(*c);
        }
        let extra = coords.len();
        for op in self
            .stab_set
            .iter_mut()
            .chain(self.gauge_set.iter_mut())
            .chain(self.generators.stabilizers.iter_mut())
            .chain(self.generators.gauge_pairs.iter_mut().flat_map(|(a, b)| [a, b]))
            .chain([&mut self.logical_x, &mut self.logical_z])
        {
            op.extend(extra);
        }
        Ok(())
    }

    /// Operators as text over lattice coordinates, e.g. `+X(0,0) Z(2,2)`.
    pub fn describe(&self, op: &PauliString) -> String {
        let mut s = String::from(match op.sign_power() {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        });
        if op.is_identity() {
            s.push('I');
        }
        let mut first = true;
        let mut terms: Vec<_> = op.support().map(|q| (self.sites[q], op.get(q))).collect();
        terms.sort();
        for (c, p) in terms {
            if !first {
                s.push(' ');
            }
            first = false;
            s.push_str(&format!("{p}{c}"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub description: String,
    pub operators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        ValidityReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, condition: &str) -> bool {
        self.violations.iter().any(|v| v.condition == condition)
    }
}

fn violation(condition: &str, description: String, ops: &[&PauliString], patch: &CodePatch) -> Violation {
    Violation {
        condition: condition.to_string(),
        description,
        operators: ops.iter().map(|o| patch.describe(o)).collect(),
    }
}

/// Checks the generator representation: independence (1), paired
/// anticommutation (2), commutation of every other pair (3). Also reports
/// operators touching disabled qubits and a generator count that does not
/// match the number of active qubits.
pub fn validate_generators(patch: &CodePatch) -> ValidityReport {
    let mut v = Vec::new();
    let gens: Vec<&PauliString> = patch.all_generators().collect();
    let n_stab = patch.generators.stabilizers.len();

    let mut span = Span::new();
    for (i, g) in gens.iter().enumerate() {
        if !span.insert(g) {
            v.push(violation(
                "independence",
                format!("generator {i} is a product of earlier generators"),
                &[g],
                patch,
            ));
        }
    }

    // index pairs: logical pair at (n_stab, n_stab+1), gauge pairs after.
    let paired = |a: usize, b: usize| {
        let (lo, hi) = (a.min(b), a.max(b));
        lo >= n_stab && (lo - n_stab) % 2 == 0 && hi == lo + 1
    };
    for a in 0..gens.len() {
        for b in a + 1..gens.len() {
            let anti = gens[a].symplectic(gens[b]);
            if paired(a, b) && !anti {
                v.push(violation(
                    "pair-anticommute",
                    format!("paired operators {a} and {b} commute"),
                    &[gens[a], gens[b]],
                    patch,
                ));
            } else if !paired(a, b) && anti {
                v.push(violation(
                    "commute",
                    format!("unpaired operators {a} and {b} anticommute"),
                    &[gens[a], gens[b]],
                    patch,
                ));
            }
        }
    }

    for g in &gens {
        if !g.is_hermitian() {
            v.push(violation("hermitian", "generator has an imaginary sign".into(), &[g], patch));
        }
        if patch.disabled.iter().filter_map(|c| patch.index_of(*c)).any(|q| g.touches(q)) {
            v.push(violation("support", "generator acts on a disabled qubit".into(), &[g], patch));
        }
    }

    let expected = patch.num_active() as i64 - patch.num_gauge_qubits() as i64 - 1;
    if n_stab as i64 != expected {
        v.push(Violation {
            condition: "count".into(),
            description: format!(
                "{n_stab} stabilizer generators, expected {expected} for {} active qubits and {} gauge qubits",
                patch.num_active(),
                patch.num_gauge_qubits()
            ),
            operators: vec![],
        });
    }
    ValidityReport::from_violations(v)
}

/// Checks the measured set: (1) every measured stabilizer lies in the
/// stabilizer group, (2) every measured gauge lies in the gauge group but not
/// the stabilizer group, (3) every stabilizer generator is recoverable from
/// the measured set.
pub fn validate_meas(patch: &CodePatch) -> ValidityReport {
    let mut v = Vec::new();
    let stab_span = patch.stabilizer_span();
    let gauge_span = patch.gauge_group_span();
    for s in &patch.stab_set {
        if !stab_span.contains(s) {
            v.push(violation("stab-in-group", "measured stabilizer outside the stabilizer group".into(), &[s], patch));
        }
    }
    for g in &patch.gauge_set {
        if !gauge_span.contains(g) {
            v.push(violation("gauge-in-group", "measured gauge outside the gauge group".into(), &[g], patch));
        } else if stab_span.contains(g) {
            v.push(violation("gauge-in-group", "measured gauge lies in the stabilizer group".into(), &[g], patch));
        }
    }
    let meas_span = Span::from_ops(patch.meas());
    for s in &patch.generators.stabilizers {
        if !meas_span.contains(s) {
            v.push(violation("recoverable", "stabilizer generator not recoverable from measurements".into(), &[s], patch));
        }
    }
    for op in patch.meas() {
        if patch.disabled.iter().filter_map(|c| patch.index_of(*c)).any(|q| op.touches(q)) {
            v.push(violation("support", "measured operator acts on a disabled qubit".into(), &[op], patch));
        }
    }
    ValidityReport::from_violations(v)
}

/// GF(2) membership of `p` in the span of `generators`, phases ignored.
pub fn group_contains(generators: &[PauliString], p: &PauliString) -> Result<bool> {
    if let Some(g) = generators.iter().find(|g| g.num_qubits() != p.num_qubits()) {
        return Err(Error::Dimension(g.num_qubits(), p.num_qubits()));
    }
    Ok(Span::from_ops(generators).contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pristine_counts() {
        for d in 2..=7 {
            let p = build_rotated_code(d).unwrap();
            assert_eq!(p.num_qubits(), d * d);
            assert_eq!(p.stab_set.len(), d * d - 1, "d={d}");
            assert_eq!(p.logical_x.weight(), d);
            assert_eq!(p.logical_z.weight(), d);
        }
        assert!(build_rotated_code(1).is_err());
    }

    #[test]
    fn pristine_checks_weights() {
        let p = build_rotated_code(5).unwrap();
        let w4 = p.stab_set.iter().filter(|s| s.weight() == 4).count();
        let w2 = p.stab_set.iter().filter(|s| s.weight() == 2).count();
        assert_eq!((w4, w2), (16, 8));
    }

    #[test]
    fn pristine_is_valid() {
        for d in 2..=5 {
            let p = build_rotated_code(d).unwrap();
            assert!(validate_generators(&p).ok, "{:?}", validate_generators(&p));
            assert!(validate_meas(&p).ok);
        }
        // rectangles are valid codes as well
        let r = CodePatch::rectangle(Extent { top: 0, bottom: 2, left: -1, right: 3 });
        assert!(validate_generators(&r).ok, "{:?}", validate_generators(&r));
    }

    #[test]
    fn duplicated_stabilizer_breaks_independence() {
        let mut p = build_rotated_code(3).unwrap();
        let s = p.generators.stabilizers[0].clone();
        p.generators.stabilizers.push(s);
        let r = validate_generators(&p);
        assert!(!r.ok);
        assert!(r.has("independence"));
    }

    #[test]
    fn membership() {
        let p = build_rotated_code(3).unwrap();
        let s = &p.stab_set;
        assert!(group_contains(s, &PauliString::identity(9)).unwrap());
        assert!(group_contains(s, &s[0].multiply(&s[1]).unwrap()).unwrap());
        assert!(!group_contains(s, &p.logical_z).unwrap());
        assert!(group_contains(s, &PauliString::identity(4)).is_err());
    }

    #[test]
    fn missing_recovery_is_reported() {
        let mut p = build_rotated_code(3).unwrap();
        p.stab_set.remove(0);
        let r = validate_meas(&p);
        assert!(r.has("recoverable"));
    }

    #[test]
    fn boundaries_partition_the_perimeter() {
        let p = build_rotated_code(5).unwrap();
        let b = p.boundaries();
        assert_eq!(b.len(), 4);
        assert!(b.iter().all(|x| x.qubits.len() == 5));
        let kinds: Vec<_> = b.iter().map(|x| x.kind).collect();
        assert_eq!(kinds, vec![Pauli::Z, Pauli::X, Pauli::Z, Pauli::X]);
    }
}
