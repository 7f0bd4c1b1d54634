//! Composite deformation instructions and the schedule format.
//!
//! Every composite is recorded as a list of [`ScheduleStep`]s; replaying the
//! steps on the pre-state with [`CodePatch::apply_step`] reproduces the
//! post-state exactly.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::code::{CodePatch, Extent, LatticeCoord, Side};
use crate::error::{Error, Result};
use crate::gauge::{AppendMode, AtomicInstruction, MeasRef};
use crate::gf2::decompose;
use crate::pauli::{Pauli, PauliString};


#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleStep {
    Atomic(AtomicInstruction),
    /// Fresh data qubit prepared in the +1 eigenstate of `basis` (Z: |0>, X: |+>).
    AddQubit { coord: LatticeCoord, basis: Pauli },
    /// Removes a data qubit. With `fixed` set, the single-site stabilizer is
    /// multiplied off every operator; otherwise `X_q`, `Z_q` are dropped as a
    /// gauge pair.
    DisableQubit { coord: LatticeCoord, fixed: Option<PauliString> },
    /// Marks a syndrome qubit unused.
    DisableSyndrome { coord: LatticeCoord },
    /// Registers a new syndrome qubit with its check type.
    AddSyndrome { coord: LatticeCoord, kind: Pauli },
    /// Stops measuring an operator that is recoverable from the rest.
    Discard { op: PauliString },
    /// Records a new patch extent.
    SetExtent { extent: Extent },
}

impl fmt::Display for ScheduleStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleStep::Atomic(a) => write!(f, "{a}"),
            ScheduleStep::AddQubit { coord, basis } => {
                write!(f, "ADD Q{coord} {}", if *basis == Pauli::X { "plus" } else { "zero" })
            }
            ScheduleStep::DisableQubit { coord, fixed } => match fixed {
                Some(p) => write!(f, "DISABLE Q{coord} fixed {p}"),
                None => write!(f, "DISABLE Q{coord}"),
            },
            ScheduleStep::DisableSyndrome { coord } => write!(f, "DISABLE S{coord}"),
            ScheduleStep::AddSyndrome { coord, kind } => write!(f, "ADD S{coord} {kind}"),
            ScheduleStep::Discard { op } => write!(f, "DISCARD {op}"),
            ScheduleStep::SetExtent { extent: e } => {
                write!(f, "EXTENT rows {}..{} cols {}..{}", e.top, e.bottom, e.left, e.right)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstructionName {
    DataQRm,
    SyndromeQRm,
    PatchQRm,
    PatchQAdd,
}

impl InstructionName {
    pub fn as_str(self) -> &'static str {
        match self {
            InstructionName::DataQRm => "DataQ_RM",
            InstructionName::SyndromeQRm => "SyndromeQ_RM",
            InstructionName::PatchQRm => "PatchQ_RM",
            InstructionName::PatchQAdd => "PatchQ_ADD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteRole {
    Data,
    Syndrome,
}

/// How a boundary defect is taken out of the code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RemovalOption {
    /// Data qubit: fix the single-site operator of this type, then drop it.
    Fix(Pauli),
    /// Syndrome qubit: single-site gauges on its support, check dropped.
    GaugeKeep,
    /// Syndrome qubit: fix the single-site operators of the check's own type
    /// on its support and drop those qubits.
    FixSupport,
}

impl fmt::Display for RemovalOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemovalOption::Fix(p) => write!(f, "fix={p}"),
            RemovalOption::GaugeKeep => f.write_str("gauge"),
            RemovalOption::FixSupport => f.write_str("fix-support"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstructionArgs {
    Qubit(LatticeCoord),
    Boundary {
        side: Side,
        target: LatticeCoord,
        option: RemovalOption,
    },
    Add {
        side: Side,
        sites: Vec<(LatticeCoord, SiteRole, Option<Pauli>)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeInstruction {
    pub name: InstructionName,
    pub args: InstructionArgs,
    pub expansion: Vec<ScheduleStep>,
}

impl CompositeInstruction {
    /// Header line, e.g. `DataQ_RM Q(4,4)`.
    pub fn header(&self) -> String {
        match &self.args {
            InstructionArgs::Qubit(c) => format!("{} Q{c}", self.name.as_str()),
            InstructionArgs::Boundary { side, target, option } => {
                format!("{} {} Q{target} {option}", self.name.as_str(), side.id())
            }
            InstructionArgs::Add { side, sites } => {
                let items: Vec<String> = sites
                    .iter()
                    .map(|(c, role, basis)| {
                        let role = match role {
                            SiteRole::Data => "data",
                            SiteRole::Syndrome => "syndrome",
                        };
                        let basis = match basis {
                            Some(Pauli::X) => "plus",
                            Some(_) => "zero",
                            None => "-",
                        };
                        format!("({},{},{role},{basis})", c.row, c.col)
                    })
                    .collect();
                format!("{} {} [{}]", self.name.as_str(), side.id(), items.join(", "))
            }
        }
    }
}

impl fmt::Display for CompositeInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.header())?;
        for s in &self.expansion {
            writeln!(f, "  {s}")?;
        }
        Ok(())
    }
}

/// Instruction request parsed from its header text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionRequest {
    pub name: InstructionName,
    pub args: InstructionArgs,
}

fn parse_coord(s: &str) -> Result<LatticeCoord> {
    let t = s.trim().trim_start_matches('Q').trim_start_matches('S');
    let inner = t
        .strip_prefix('(')
        .and_then(|x| x.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("expected (row,col), got `{s}`")))?;
    let mut it = inner.split(',');
    let r = it.next().and_then(|x| x.trim().parse().ok());
    let c = it.next().and_then(|x| x.trim().parse().ok());
    match (r, c, it.next()) {
        (Some(r), Some(c), None) => Ok(LatticeCoord::new(r, c)),
        _ => Err(Error::Parse(format!("expected (row,col), got `{s}`"))),
    }
}

impl FromStr for InstructionRequest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(' ').unwrap_or((s, ""));
        let rest = rest.trim();
        match name {
            "DataQ_RM" | "SyndromeQ_RM" => Ok(InstructionRequest {
                name: if name == "DataQ_RM" {
                    InstructionName::DataQRm
                } else {
                    InstructionName::SyndromeQRm
                },
                args: InstructionArgs::Qubit(parse_coord(rest)?),
            }),
            "PatchQ_RM" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() < 2 || parts.len() > 3 {
                    return Err(Error::Parse(format!("PatchQ_RM needs a boundary and a qubit: `{s}`")));
                }
                let side = Side::from_id(parts[0])?;
                let target = parse_coord(parts[1])?;
                let option = match parts.get(2).copied() {
                    None => RemovalOption::Fix(side.check_kind().conjugate()),
                    Some("fix=X") => RemovalOption::Fix(Pauli::X),
                    Some("fix=Z") => RemovalOption::Fix(Pauli::Z),
                    Some("gauge") => RemovalOption::GaugeKeep,
                    Some("fix-support") => RemovalOption::FixSupport,
                    Some(o) => return Err(Error::Parse(format!("unknown removal option `{o}`"))),
                };
                Ok(InstructionRequest {
                    name: InstructionName::PatchQRm,
                    args: InstructionArgs::Boundary { side, target, option },
                })
            }
            "PatchQ_ADD" => {
                let (side, list) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::Parse(format!("PatchQ_ADD needs a boundary and a site list: `{s}`")))?;
                let side = Side::from_id(side)?;
                let list = list
                    .trim()
                    .strip_prefix('[')
                    .and_then(|x| x.strip_suffix(']'))
                    .ok_or_else(|| Error::Parse("site list must be bracketed".into()))?;
                let mut sites = Vec::new();
                for item in list.split(')').map(str::trim).filter(|x| !x.is_empty()) {
                    let item = item.trim_start_matches(',').trim().trim_start_matches('(');
                    let f: Vec<&str> = item.split(',').map(str::trim).collect();
                    if f.len() != 4 {
                        return Err(Error::Parse(format!("bad site `{item}`")));
                    }
                    let (r, c): (i32, i32) = (
                        f[0].parse().map_err(|_| Error::Parse(format!("bad row `{}`", f[0])))?,
                        f[1].parse().map_err(|_| Error::Parse(format!("bad col `{}`", f[1])))?,
                    );
                    let role = match f[2] {
                        "data" => SiteRole::Data,
                        "syndrome" => SiteRole::Syndrome,
                        o => return Err(Error::Parse(format!("bad role `{o}`"))),
                    };
                    let basis = match f[3] {
                        "plus" => Some(Pauli::X),
                        "zero" => Some(Pauli::Z),
                        "-" => None,
                        o => return Err(Error::Parse(format!("bad basis `{o}`"))),
                    };
                    sites.push((LatticeCoord::new(r, c), role, basis));
                }
                Ok(InstructionRequest {
                    name: InstructionName::PatchQAdd,
                    args: InstructionArgs::Add { side, sites },
                })
            }
            _ => Err(Error::Parse(format!("unknown instruction `{name}`"))),
        }
    }
}

/// Applies a parsed request.
pub fn execute(patch: &CodePatch, req: &InstructionRequest) -> Result<(CodePatch, CompositeInstruction)> {
    match (&req.name, &req.args) {
        (InstructionName::DataQRm, InstructionArgs::Qubit(q)) => dataq_rm(patch, *q),
        (InstructionName::SyndromeQRm, InstructionArgs::Qubit(q)) => syndromeq_rm(patch, *q),
        (InstructionName::PatchQRm, InstructionArgs::Boundary { side, target, option }) => {
            patchq_rm(patch, *side, *target, *option)
        }
        (InstructionName::PatchQAdd, InstructionArgs::Add { side, sites }) => patchq_add(patch, *side, sites),
        _ => Err(Error::Argument("instruction arguments do not match its name".into())),
    }
}

impl CodePatch {
    /// Replays one recorded step.
    pub fn apply_step(&mut self, step: &ScheduleStep) -> Result<()> {
        match step {
            ScheduleStep::Atomic(a) => {
                self.apply_atomic(a)?;
            }
            ScheduleStep::AddQubit { coord, basis } => {
                self.add_sites(&[*coord])?;
                let op = self.single(*coord, *basis)?;
                self.generators.stabilizers.push(op.clone());
                self.stab_set.push(op);
            }
            ScheduleStep::DisableQubit { coord, fixed } => {
                let q = self
                    .index_of(*coord)
                    .ok_or_else(|| Error::Geometry(format!("no data qubit at {coord}")))?;
                match fixed {
                    Some(p) => self.disable_fixed(q, p)?,
                    None => self.disable_as_gauge(q)?,
                }
                self.promote_central_gauges();
            }
            ScheduleStep::DisableSyndrome { coord } => {
                self.disabled.insert(*coord);
            }
            ScheduleStep::AddSyndrome { coord, kind } => {
                self.syndromes.insert(*coord, *kind);
            }
            ScheduleStep::Discard { op } => {
                if let Some(i) = self.stab_set.iter().position(|s| s.same_support_bits(op)) {
                    self.stab_set.remove(i);
                } else if let Some(i) = self.gauge_set.iter().position(|s| s.same_support_bits(op)) {
                    self.gauge_set.remove(i);
                } else {
                    return Err(Error::Operand(format!("{} is not measured", self.describe(op))));
                }
            }
            ScheduleStep::SetExtent { extent } => self.extent = *extent,
        }
        Ok(())
    }

    pub fn apply_steps(&mut self, steps: &[ScheduleStep]) -> Result<()> {
        steps.iter().try_for_each(|s| self.apply_step(s))
    }

    /// True when the data qubit lies strictly inside the current extent.
    pub fn is_interior_data(&self, c: LatticeCoord) -> bool {
        let (r, k) = c.data_rc();
        let e = self.extent;
        r > e.top && r < e.bottom && k > e.left && k < e.right
    }

    /// Sides of the extent a data coordinate sits on.
    pub fn sides_of(&self, c: LatticeCoord) -> Vec<Side> {
        let (r, k) = c.data_rc();
        let e = self.extent;
        let mut v = Vec::new();
        if r == e.top {
            v.push(Side::Top);
        }
        if k == e.right {
            v.push(Side::Right);
        }
        if r == e.bottom {
            v.push(Side::Bottom);
        }
        if k == e.left {
            v.push(Side::Left);
        }
        v
    }

    /// Active data qubits a syndrome site's check acts on.
    pub fn syndrome_support(&self, c: LatticeCoord) -> Vec<LatticeCoord> {
        c.plaquette_corners()
            .into_iter()
            .filter(|q| self.is_active(*q))
            .collect()
    }

    pub fn is_interior_syndrome(&self, c: LatticeCoord) -> bool {
        let corners = c.plaquette_corners();
        corners.iter().all(|q| self.has_data(*q) && self.is_interior_data(*q))
    }
}

/// Accumulates steps while mutating a working copy.
struct Builder {
    patch: CodePatch,
    steps: Vec<ScheduleStep>,
}

impl Builder {
    fn new(patch: &CodePatch) -> Self {
        Builder {
            patch: patch.clone(),
            steps: Vec::new(),
        }
    }

    fn step(&mut self, s: ScheduleStep) -> Result<()> {
        self.patch.apply_step(&s)?;
        self.steps.push(s);
        Ok(())
    }

    /// Records only the G2S; its replay redoes the preparatory merges.
    fn g2s(&mut self, g: &PauliString) -> Result<()> {
        let mut v = self.patch.apply_g2s(g, 1)?;
        self.steps.push(ScheduleStep::Atomic(v.pop().expect("g2s emits its own instruction")));
        Ok(())
    }

    fn s2s(&mut self, a: usize, b: usize, mode: AppendMode) -> Result<()> {
        let ins = self.patch.apply_s2s(a, b, mode)?;
        self.steps.push(ScheduleStep::Atomic(ins));
        Ok(())
    }

    /// Makes `g` a measured gauge unless it already is one or is a stabilizer.
    fn ensure_gauge(&mut self, g: &PauliString) -> Result<()> {
        if self.patch.find_meas(g).is_some() {
            return Ok(());
        }
        match self.patch.apply_s2g(g) {
            Ok(ins) => {
                self.steps.push(ScheduleStep::Atomic(ins));
                Ok(())
            }
            Err(Error::NotValidS2g(_)) => Ok(()),
            Err(e) => Err(e),
        }
    }

    /// Makes `p` an element of the stabilizer group (S2G then G2S as needed).
    fn ensure_fixed(&mut self, p: &PauliString) -> Result<()> {
        if matches!(self.patch.find_meas(p), Some(MeasRef::Stab(_))) {
            return Ok(());
        }
        self.ensure_gauge(p)?;
        if self.patch.gauge_set.iter().any(|s| s.same_support_bits(p)) {
            self.g2s(p)?;
        }
        Ok(())
    }

    /// Makes a stabilizer-group element that is not measured on its own an
    /// explicit member of the measured stabilizers, built up by S2S.
    fn ensure_measured(&mut self, op: &PauliString) -> Result<()> {
        if self.patch.find_meas(op).is_some() || !self.patch.stabilizer_span().contains(op) {
            return Ok(());
        }
        let idx = decompose(&self.patch.stab_set, op)
            .ok_or_else(|| Error::Structural(format!("{} is not generated by the measured stabilizers", self.patch.describe(op))))?;
        let [a, b, rest @ ..] = idx.as_slice() else {
            return Err(Error::Structural(format!("{} is measured up to sign only", self.patch.describe(op))));
        };
        self.s2s(*a, *b, AppendMode::Append)?;
        let acc = self.patch.stab_set.len() - 1;
        for &c in rest {
            self.s2s(acc, c, AppendMode::Replace)?;
        }
        Ok(())
    }

    /// Multiplies every measured gauge touching `q` by the single-site
    /// gauges so that only `X_q`, `Z_q` act on it.
    fn isolate(&mut self, q: usize) -> Result<()> {
        let n = self.patch.num_qubits();
        let xq = PauliString::single(n, q, Pauli::X);
        let zq = PauliString::single(n, q, Pauli::Z);
        loop {
            let target = self.patch.gauge_set.iter().position(|g| {
                g.touches(q) && !g.same_support_bits(&xq) && !g.same_support_bits(&zq)
            });
            let Some(gi) = target else { break };
            let g = self.patch.gauge_set[gi].clone();
            let m = if g.x_bit(q) { &xq } else { &zq };
            let r = self
                .patch
                .find_meas(m)
                .ok_or_else(|| Error::Structural("single-site gauge missing".into()))?;
            let ins = match self.patch.apply_g2g(gi, r) {
                Err(Error::DegenerateGauge) => self.patch.apply_g2g_merge(gi, r)?,
                r => r?,
            };
            self.steps.push(ScheduleStep::Atomic(ins));
        }
        Ok(())
    }

    fn finish(self, name: InstructionName, args: InstructionArgs) -> (CodePatch, CompositeInstruction) {
        (
            self.patch,
            CompositeInstruction {
                name,
                args,
                expansion: self.steps,
            },
        )
    }
}

impl CodePatch {
    /// Swaps in `op` (a stabilizer-group element) as an explicit generator,
    /// replacing one generator it depends on.
    pub(crate) fn replace_stabilizer_generator(&mut self, op: &PauliString) -> Result<()> {
        let gens = &self.generators.stabilizers;
        // solve op = prod of gens; replace any generator with coefficient 1
        let mut rows: Vec<(Vec<u64>, Vec<bool>)> = gens
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut tag = vec![false; gens.len()];
                tag[i] = true;
                (g.symplectic_row(), tag)
            })
            .collect();
        let mut target = (op.symplectic_row(), vec![false; gens.len()]);
        let lowest = |v: &[u64]| v.iter().enumerate().find(|(_, w)| **w != 0).map(|(i, w)| i * 64 + w.trailing_zeros() as usize);
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        for i in 0..rows.len() {
            for &(p, j) in &pivots {
                if rows[i].0[p / 64] >> (p % 64) & 1 == 1 {
                    let (a, b) = (rows[j].0.clone(), rows[j].1.clone());
                    for (x, y) in rows[i].0.iter_mut().zip(&a) {
                        *x ^= y;
                    }
                    for (x, y) in rows[i].1.iter_mut().zip(&b) {
                        *x ^= y;
                    }
                }
            }
            if let Some(p) = lowest(&rows[i].0) {
                pivots.push((p, i));
            }
        }
        for &(p, j) in &pivots {
            if target.0[p / 64] >> (p % 64) & 1 == 1 {
                for (x, y) in target.0.iter_mut().zip(&rows[j].0) {
                    *x ^= y;
                }
                for (x, y) in target.1.iter_mut().zip(&rows[j].1) {
                    *x ^= y;
                }
            }
        }
        if lowest(&target.0).is_some() {
            return Err(Error::Structural(format!(
                "{} is not in the stabilizer group",
                self.describe(op)
            )));
        }
        let k = target
            .1
            .iter()
            .position(|x| *x)
            .ok_or_else(|| Error::Structural("identity cannot be a generator".into()))?;
        self.generators.stabilizers[k] = op.clone();
        Ok(())
    }
}

fn require_data(patch: &CodePatch, q: LatticeCoord) -> Result<usize> {
    if q.is_syndrome() {
        return Err(Error::QubitType {
            coord: q,
            found: "syndrome",
            expected: "data",
        });
    }
    if !q.is_data() {
        return Err(Error::Geometry(format!("{q} is not a lattice site")));
    }
    let idx = patch
        .index_of(q)
        .ok_or_else(|| Error::Geometry(format!("no data qubit at {q}")))?;
    if patch.disabled.contains(&q) {
        return Err(Error::Geometry(format!("data qubit {q} is already disabled")));
    }
    Ok(idx)
}

fn require_syndrome(patch: &CodePatch, q: LatticeCoord) -> Result<Pauli> {
    if q.is_data() {
        return Err(Error::QubitType {
            coord: q,
            found: "data",
            expected: "syndrome",
        });
    }
    let kind = patch
        .syndromes
        .get(&q)
        .copied()
        .ok_or_else(|| Error::Geometry(format!("no syndrome qubit at {q}")))?;
    if patch.disabled.contains(&q) {
        return Err(Error::Geometry(format!("syndrome qubit {q} is already disabled")));
    }
    Ok(kind)
}

fn remove_data_as_gauge(b: &mut Builder, q: usize) -> Result<()> {
    let n = b.patch.num_qubits();
    let zq = PauliString::single(n, q, Pauli::Z);
    let xq = PauliString::single(n, q, Pauli::X);
    // a single-site stabilizer must be measured before the other S2G demotes it
    for op in [&zq, &xq] {
        b.ensure_measured(op)?;
    }
    b.ensure_gauge(&zq)?;
    b.ensure_gauge(&xq)?;
    b.isolate(q)?;
    let coord = b.patch.coord_of(q);
    b.step(ScheduleStep::DisableQubit { coord, fixed: None })
}

fn remove_data_fixed(b: &mut Builder, q: usize, p: Pauli) -> Result<()> {
    let n = b.patch.num_qubits();
    let op = PauliString::single(n, q, p);
    b.ensure_fixed(&op)?;
    let coord = b.patch.coord_of(q);
    b.step(ScheduleStep::DisableQubit { coord, fixed: Some(op) })
}

/// Introduces single-site gauges of the check's type on its support and
/// stops measuring the check.
fn remove_check_gauge_keep(b: &mut Builder, c: LatticeCoord, kind: Pauli) -> Result<()> {
    let support = b.patch.syndrome_support(c);
    let n = b.patch.num_qubits();
    let idx: Vec<usize> = support.iter().map(|q| b.patch.index_of(*q).unwrap()).collect();
    for &q in &idx {
        b.ensure_gauge(&PauliString::single(n, q, kind))?;
    }
    discard_inside(b, &idx, kind)?;
    b.step(ScheduleStep::DisableSyndrome { coord: c })
}

/// Drops measured operators of `kind` supported inside `idx`, other than the
/// single-site ones, which make them redundant.
fn discard_inside(b: &mut Builder, idx: &[usize], kind: Pauli) -> Result<()> {
    let inside = |op: &PauliString| {
        op.weight() > 1
            && op.support().all(|q| idx.contains(&q))
            && match kind {
                Pauli::X => !op.has_z(),
                _ => !op.has_x(),
            }
    };
    let n = b.patch.num_qubits();
    let singles_measured = idx
        .iter()
        .all(|&q| b.patch.find_meas(&PauliString::single(n, q, kind)).is_some());
    loop {
        let victim = b.patch.meas().find(|m| inside(m)).cloned();
        let Some(op) = victim else { break };
        if !singles_measured {
            return Err(Error::Structural("check not recoverable from single-site gauges".into()));
        }
        b.step(ScheduleStep::Discard { op })?;
    }
    Ok(())
}

pub fn dataq_rm(patch: &CodePatch, q: LatticeCoord) -> Result<(CodePatch, CompositeInstruction)> {
    let idx = require_data(patch, q)?;
    if !patch.is_interior_data(q) {
        return Err(Error::WrongInstruction {
            coord: q,
            hint: "boundary data qubit, use PatchQ_RM".into(),
        });
    }
    let mut b = Builder::new(patch);
    remove_data_as_gauge(&mut b, idx)?;
    Ok(b.finish(InstructionName::DataQRm, InstructionArgs::Qubit(q)))
}

pub fn syndromeq_rm(patch: &CodePatch, q: LatticeCoord) -> Result<(CodePatch, CompositeInstruction)> {
    let kind = require_syndrome(patch, q)?;
    if !patch.is_interior_syndrome(q) {
        return Err(Error::WrongInstruction {
            coord: q,
            hint: "boundary syndrome qubit, use PatchQ_RM".into(),
        });
    }
    let mut b = Builder::new(patch);
    remove_check_gauge_keep(&mut b, q, kind)?;
    Ok(b.finish(InstructionName::SyndromeQRm, InstructionArgs::Qubit(q)))
}

/// True when a syndrome site touches a data qubit on `side`.
fn syndrome_on_side(patch: &CodePatch, c: LatticeCoord, side: Side) -> bool {
    c.plaquette_corners()
        .iter()
        .any(|q| patch.has_data(*q) && patch.sides_of(*q).contains(&side))
}

pub fn patchq_rm(
    patch: &CodePatch,
    side: Side,
    target: LatticeCoord,
    option: RemovalOption,
) -> Result<(CodePatch, CompositeInstruction)> {
    let args = InstructionArgs::Boundary { side, target, option };
    let mut b = Builder::new(patch);
    if target.is_data() {
        let idx = require_data(patch, target)?;
        if !patch.sides_of(target).contains(&side) {
            return Err(Error::WrongInstruction {
                coord: target,
                hint: format!("not on boundary {}", side.id()),
            });
        }
        let RemovalOption::Fix(p) = option else {
            return Err(Error::Argument("data qubits are removed with fix=X or fix=Z".into()));
        };
        remove_data_fixed(&mut b, idx, p)?;
    } else {
        let kind = require_syndrome(patch, target)?;
        if !syndrome_on_side(patch, target, side) {
            return Err(Error::WrongInstruction {
                coord: target,
                hint: format!("not adjacent to boundary {}", side.id()),
            });
        }
        match option {
            RemovalOption::GaugeKeep => remove_check_gauge_keep(&mut b, target, kind)?,
            RemovalOption::FixSupport => {
                let support = b.patch.syndrome_support(target);
                for q in support {
                    let i = b.patch.index_of(q).unwrap();
                    remove_data_fixed(&mut b, i, kind)?;
                }
                b.step(ScheduleStep::DisableSyndrome { coord: target })?;
            }
            RemovalOption::Fix(_) => {
                return Err(Error::Argument("syndrome qubits use gauge or fix-support".into()));
            }
        }
    }
    Ok(b.finish(InstructionName::PatchQRm, args))
}

/// Data and syndrome sites of one scale layer beyond `side`.
pub fn layer_sites(patch: &CodePatch, side: Side) -> Vec<(LatticeCoord, SiteRole, Option<Pauli>)> {
    let grown = patch.extent.grown(side, 1);
    let basis = side.check_kind();
    let mut out = Vec::new();
    for r in grown.top..=grown.bottom {
        for c in grown.left..=grown.right {
            let q = LatticeCoord::data(r, c);
            if !patch.extent.contains_data(q) {
                out.push((q, SiteRole::Data, Some(basis)));
            }
        }
    }
    for (site, _, _) in grown.plaquettes() {
        if !patch.syndromes.contains_key(&site) {
            out.push((site, SiteRole::Syndrome, None));
        }
    }
    out
}

pub fn patchq_add(
    patch: &CodePatch,
    side: Side,
    sites: &[(LatticeCoord, SiteRole, Option<Pauli>)],
) -> Result<(CodePatch, CompositeInstruction)> {
    let args = InstructionArgs::Add {
        side,
        sites: sites.to_vec(),
    };
    let mut b = Builder::new(patch);
    if sites.is_empty() {
        return Ok(b.finish(InstructionName::PatchQAdd, args));
    }
    let grown = patch.extent.grown(side, 1);
    let basis = side.check_kind();
    let mut new_data = BTreeSet::new();
    for (c, role, init) in sites {
        match role {
            SiteRole::Data => {
                if !c.is_data() {
                    return Err(Error::QubitType {
                        coord: *c,
                        found: "syndrome",
                        expected: "data",
                    });
                }
                if !grown.contains_data(*c) || patch.extent.contains_data(*c) {
                    return Err(Error::Geometry(format!("{c} is not in the layer beyond {}", side.id())));
                }
                match init {
                    Some(p) if *p == basis => {}
                    _ => {
                        return Err(Error::Orientation(format!(
                            "sites beyond {} start in the {} basis",
                            side.id(),
                            if basis == Pauli::X { "plus" } else { "zero" }
                        )))
                    }
                }
                new_data.insert(*c);
            }
            SiteRole::Syndrome => {
                if !c.is_syndrome() {
                    return Err(Error::QubitType {
                        coord: *c,
                        found: "data",
                        expected: "syndrome",
                    });
                }
            }
        }
    }
    let targets = grown.plaquettes();
    let new_syndromes: BTreeSet<LatticeCoord> = sites
        .iter()
        .filter(|s| s.1 == SiteRole::Syndrome)
        .map(|s| s.0)
        .collect();
    for (site, _, _) in &targets {
        let touches_new = site.plaquette_corners().iter().any(|q| new_data.contains(q));
        if touches_new && !patch.syndromes.contains_key(site) && !new_syndromes.contains(site) {
            return Err(Error::Geometry(format!("layer needs a syndrome qubit at {site}")));
        }
        if new_syndromes.contains(site) && patch.syndromes.contains_key(site) {
            return Err(Error::Geometry(format!("syndrome qubit {site} already exists")));
        }
    }

    for c in &new_data {
        b.step(ScheduleStep::AddQubit { coord: *c, basis })?;
    }
    for (site, kind, _) in &targets {
        if new_syndromes.contains(site) {
            b.step(ScheduleStep::AddSyndrome { coord: *site, kind: *kind })?;
        }
    }
    b.step(ScheduleStep::SetExtent { extent: grown })?;

    // extend same-type checks while the single-site stabilizers are intact
    let mut ordered: Vec<&(LatticeCoord, Pauli, Vec<LatticeCoord>)> = targets.iter().collect();
    ordered.sort_by_key(|t| t.1 != basis);
    let others: Vec<PauliString> = targets
        .iter()
        .filter(|(site, kind, support)| {
            *kind != basis && support.iter().any(|q| new_data.contains(q)) && !b.patch.disabled.contains(site)
        })
        .map(|(_, kind, support)| b.patch.op_on(*kind, support))
        .collect();
    let mut installed = Vec::new();
    for (site, kind, support) in ordered {
        if !support.iter().any(|q| new_data.contains(q)) || b.patch.disabled.contains(site) {
            continue;
        }
        let op = b.patch.op_on(*kind, support);
        if op.is_identity() {
            continue;
        }
        let done = install_check(&mut b, &op, *kind == basis, &new_data, &others)?;
        installed.push(done);
    }
    // stray products of the single-site stabilizers left by the merges, and
    // second copies of installed checks
    let touched: Vec<PauliString> = b
        .patch
        .meas()
        .filter(|m| m.support().any(|q| new_data.contains(&b.patch.coord_of(q))))
        .cloned()
        .collect();
    for op in touched {
        let copies = b.patch.meas().filter(|m| m.same_support_bits(&op)).count();
        if copies > 1 {
            b.step(ScheduleStep::Discard { op })?;
            continue;
        }
        if installed.iter().any(|t| t.same_support_bits(&op)) {
            continue;
        }
        let rest: Vec<&PauliString> = b.patch.meas().filter(|m| !m.same_support_bits(&op)).collect();
        if crate::gf2::Span::from_ops(rest).contains(&op) {
            b.step(ScheduleStep::Discard { op })?;
        }
    }
    Ok(b.finish(InstructionName::PatchQAdd, args))
}

/// Installs the check `op` and returns what ended up measured. Same-type
/// checks extend an existing measured check (or the merged check that
/// absorbed a removed qubit) with new single-site stabilizers by S2S; the
/// others are measured in (S2G) and fixed (G2S).
fn install_check(
    b: &mut Builder,
    op: &PauliString,
    same_type: bool,
    new_data: &BTreeSet<LatticeCoord>,
    others: &[PauliString],
) -> Result<PauliString> {
    if b.patch.find_meas(op).is_some() {
        return Ok(op.clone());
    }
    if same_type {
        let n = b.patch.num_qubits();
        let mut old = op.clone();
        let mut singles = Vec::new();
        for q in op.support().collect::<Vec<_>>() {
            if new_data.contains(&b.patch.coord_of(q)) {
                old.clear(q);
                singles.push(PauliString::single(n, q, op.get(q)));
            }
        }
        let base = if old.is_identity() {
            None
        } else {
            // exact match, or the merged check around a removed boundary qubit
            b.patch
                .stab_set
                .iter()
                .position(|s| s.same_support_bits(&old))
                .or_else(|| {
                    b.patch
                        .stab_set
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| {
                            s.is_x_type() == old.is_x_type()
                                && s.is_z_type() == old.is_z_type()
                                && old.support().all(|q| s.touches(q))
                                && !s.support().any(|q| new_data.contains(&b.patch.coord_of(q)))
                                && others.iter().all(|o| {
                                    let mut ext = (*s).clone();
                                    ext.mul_assign_right(&old);
                                    ext.mul_assign_right(op);
                                    ext.commutes_with(o)
                                })
                        })
                        .min_by_key(|(_, s)| s.weight())
                        .map(|(i, _)| i)
                })
        };
        let single_idx: Option<Vec<usize>> = singles
            .iter()
            .map(|s| b.patch.stab_set.iter().position(|x| x.same_support_bits(s)))
            .collect();
        if let (Some(si), true) = (single_idx, old.is_identity() || base.is_some()) {
            // extend the old check in place, or build a fresh product of singles
            let (acc, rest) = match base {
                Some(bi) => (bi, &si[..]),
                None => {
                    b.s2s(si[0], si[1], AppendMode::Append)?;
                    (b.patch.stab_set.len() - 1, &si[2..])
                }
            };
            for &j in rest {
                b.s2s(acc, j, AppendMode::Replace)?;
            }
            return Ok(b.patch.stab_set[acc].clone());
        }
    }
    b.ensure_gauge(op)?;
    if b.patch.gauge_set.iter().any(|g| g.same_support_bits(op)) {
        b.g2s(op)?;
    }
    Ok(op.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{build_rotated_code, validate_generators, validate_meas};
    use crate::distance::{brute_force_distance, distance};
    use crate::gauge::AtomicKind;

    fn valid(p: &CodePatch) {
        let a = validate_generators(p);
        assert!(a.ok, "{a:?}");
        let b = validate_meas(p);
        assert!(b.ok, "{b:?}");
    }

    fn isolated(p: &CodePatch, q: LatticeCoord) -> bool {
        let i = p.index_of(q).unwrap();
        p.meas().all(|m| !m.touches(i)) && p.all_generators().all(|g| !g.touches(i))
    }

    #[test]
    fn dataq_rm_center_of_d3() {
        let p = build_rotated_code(3).unwrap();
        let q = LatticeCoord::data(1, 1);
        let (r, ins) = dataq_rm(&p, q).unwrap();
        valid(&r);
        assert!(isolated(&r, q));
        assert!(r.disabled.contains(&q));
        assert_eq!(ins.expansion.iter().filter(|s| matches!(s, ScheduleStep::Atomic(a) if a.kind == AtomicKind::S2G)).count(), 2);
        assert_eq!(ins.expansion.iter().filter(|s| matches!(s, ScheduleStep::Atomic(a) if a.kind == AtomicKind::G2G)).count(), 4);
        let (dx, dz) = distance(&r).unwrap();
        assert_eq!(brute_force_distance(&r, 3), (Some(dx), Some(dz)));
    }

    #[test]
    fn dataq_rm_rejects_boundary_and_syndrome() {
        let p = build_rotated_code(3).unwrap();
        assert!(matches!(dataq_rm(&p, LatticeCoord::data(0, 1)), Err(Error::WrongInstruction { .. })));
        assert!(matches!(dataq_rm(&p, LatticeCoord::plaquette(0, 0)), Err(Error::QubitType { .. })));
    }

    #[test]
    fn expansion_replays_exactly() {
        let p = build_rotated_code(5).unwrap();
        let (r, ins) = syndromeq_rm(&p, LatticeCoord::plaquette(1, 1)).unwrap();
        let mut again = p.clone();
        again.apply_steps(&ins.expansion).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn every_instruction_replays_exactly() {
        let p = build_rotated_code(3).unwrap();
        let mut cases = vec![
            dataq_rm(&p, LatticeCoord::data(1, 1)).unwrap(),
            patchq_rm(&p, Side::Right, LatticeCoord::data(1, 2), RemovalOption::Fix(Pauli::Z)).unwrap(),
            patchq_rm(&p, Side::Top, LatticeCoord::data(0, 0), RemovalOption::Fix(Pauli::X)).unwrap(),
            patchq_rm(&p, Side::Top, LatticeCoord::plaquette(-1, 0), RemovalOption::GaugeKeep).unwrap(),
            patchq_rm(&p, Side::Top, LatticeCoord::plaquette(-1, 0), RemovalOption::FixSupport).unwrap(),
        ];
        for side in Side::ALL {
            cases.push(patchq_add(&p, side, &layer_sites(&p, side)).unwrap());
        }
        for (post, ins) in cases {
            valid(&post);
            let mut again = p.clone();
            again.apply_steps(&ins.expansion).unwrap();
            assert_eq!(again, post, "{}", ins.header());
        }
    }

    #[test]
    fn syndromeq_rm_center_of_d5() {
        let p = build_rotated_code(5).unwrap();
        let (r, _) = syndromeq_rm(&p, LatticeCoord::plaquette(1, 1)).unwrap();
        valid(&r);
        assert_eq!(distance(&r).unwrap(), (3, 5));
    }

    #[test]
    fn adjacent_dataq_rm_commute() {
        let p = build_rotated_code(5).unwrap();
        let a = LatticeCoord::data(2, 1);
        let b = LatticeCoord::data(2, 3);
        let (p1, _) = dataq_rm(&p, a).unwrap();
        let (p1, _) = dataq_rm(&p1, b).unwrap();
        let (p2, _) = dataq_rm(&p, b).unwrap();
        let (p2, _) = dataq_rm(&p2, a).unwrap();
        valid(&p1);
        valid(&p2);
        assert_eq!(distance(&p1).unwrap(), distance(&p2).unwrap());
        let s1 = crate::gf2::Span::from_ops(p1.meas());
        assert!(p2.meas().all(|m| s1.contains(m)));
    }

    #[test]
    fn boundary_removal_fixes_single_site() {
        let p = build_rotated_code(3).unwrap();
        let q = LatticeCoord::data(1, 2);
        let (r, ins) = patchq_rm(&p, Side::Right, q, RemovalOption::Fix(Pauli::Z)).unwrap();
        valid(&r);
        assert!(isolated(&r, q));
        assert!(ins.expansion.iter().any(|s| matches!(s, ScheduleStep::Atomic(a) if a.kind == AtomicKind::G2S)));
        let (dx, dz) = distance(&r).unwrap();
        assert_eq!(brute_force_distance(&r, 3), (Some(dx), Some(dz)));
        assert!(matches!(
            patchq_rm(&p, Side::Left, q, RemovalOption::Fix(Pauli::Z)),
            Err(Error::WrongInstruction { .. })
        ));
    }

    #[test]
    fn boundary_syndrome_options() {
        let p = build_rotated_code(5).unwrap();
        let c = LatticeCoord::plaquette(-1, 0);
        for opt in [RemovalOption::GaugeKeep, RemovalOption::FixSupport] {
            let (r, _) = patchq_rm(&p, Side::Top, c, opt).unwrap();
            valid(&r);
            let (dx, dz) = distance(&r).unwrap();
            assert_eq!(brute_force_distance(&r, 5), (Some(dx), Some(dz)), "{opt}");
        }
    }

    #[test]
    fn grow_one_layer() {
        let p = build_rotated_code(3).unwrap();
        let sites = layer_sites(&p, Side::Right);
        assert_eq!(sites.iter().filter(|s| s.1 == SiteRole::Data).count(), 3);
        let (r, _) = patchq_add(&p, Side::Right, &sites).unwrap();
        valid(&r);
        assert_eq!(distance(&r).unwrap(), (4, 3));
        assert_eq!(r.stab_set.len(), 11);
        let sites = layer_sites(&p, Side::Top);
        let (r, _) = patchq_add(&p, Side::Top, &sites).unwrap();
        valid(&r);
        assert_eq!(distance(&r).unwrap(), (3, 4));
        assert_eq!(patchq_add(&p, Side::Top, &[]).unwrap().0, p);
    }

    #[test]
    fn add_rejects_wrong_basis() {
        let p = build_rotated_code(3).unwrap();
        let mut sites = layer_sites(&p, Side::Right);
        sites[0].2 = Some(Pauli::Z);
        assert!(matches!(patchq_add(&p, Side::Right, &sites), Err(Error::Orientation(_))));
        let far = vec![(LatticeCoord::data(0, 9), SiteRole::Data, Some(Pauli::X))];
        assert!(matches!(patchq_add(&p, Side::Right, &far), Err(Error::Geometry(_))));
    }

    #[test]
    fn header_round_trip() {
        for s in [
            "DataQ_RM Q(4,4)",
            "SyndromeQ_RM Q(3,3)",
            "PatchQ_RM XL2 Q(2,4) fix=Z",
            "PatchQ_ADD XL2 [(0,6,data,plus), (1,5,syndrome,-)]",
        ] {
            let r: InstructionRequest = s.parse().unwrap();
            let c = CompositeInstruction {
                name: r.name,
                args: r.args.clone(),
                expansion: vec![],
            };
            assert_eq!(c.header(), s);
        }
        assert!("Bogus Q(1,1)".parse::<InstructionRequest>().is_err());
    }
}
