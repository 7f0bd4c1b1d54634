//! The four atomic gauge transformations.
//!
//! Each transformation updates both the measured sets (`stab_set`,
//! `gauge_set`) and the generator representation. The pure entry points clone
//! the patch; the `apply_*` methods mutate in place and are what the composite
//! instructions use.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::code::CodePatch;
use crate::error::{Error, Result};
use crate::pauli::PauliString;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AtomicKind {
    S2G,
    G2S,
    S2S,
    G2G,
}

impl fmt::Display for AtomicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AtomicKind::S2G => "S2G",
            AtomicKind::G2S => "G2S",
            AtomicKind::S2S => "S2S",
            AtomicKind::G2G => "G2G",
        })
    }
}

/// Reference to an element of the measured set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasRef {
    Stab(usize),
    Gauge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AppendMode {
    Replace,
    Append,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicInstruction {
    pub kind: AtomicKind,
    /// New gauge (S2G), fixed gauge (G2S) or the formed product (S2S/G2G).
    pub operator: PauliString,
    /// S2G: demoted stab indices. S2S: `[a, b]`. G2G: `[g]`.
    pub operands: Vec<usize>,
    /// G2G: the measured operator multiplied in.
    pub factor: Option<MeasRef>,
    pub mode: Option<AppendMode>,
    /// Stabilizers demoted by an S2G, by value.
    pub demoted: Vec<PauliString>,
    /// G2S: the unique anticommuting gauge after reduction.
    pub partner: Option<PauliString>,
    /// G2S: supplied outcome.
    pub outcome: Option<i8>,
    /// G2S with outcome -1: correction to apply.
    pub byproduct: Option<PauliString>,
}

impl AtomicInstruction {
    fn new(kind: AtomicKind, operator: PauliString) -> Self {
        AtomicInstruction {
            kind,
            operator,
            operands: Vec::new(),
            factor: None,
            mode: None,
            demoted: Vec::new(),
            partner: None,
            outcome: None,
            byproduct: None,
        }
    }
}

impl fmt::Display for AtomicInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind, self.operator)?;
        match self.kind {
            AtomicKind::S2G => {
                let ids: Vec<String> = self.operands.iter().map(|i| format!("s{i}")).collect();
                write!(f, " | demoted: {}", ids.join(","))
            }
            AtomicKind::G2S => {
                write!(f, " | outcome: {}", if self.outcome == Some(-1) { "-1" } else { "+1" })?;
                if let Some(p) = &self.partner {
                    write!(f, " | partner: {p}")?;
                }
                Ok(())
            }
            AtomicKind::S2S => write!(
                f,
                " | s{},s{} {}",
                self.operands[0],
                self.operands[1],
                if self.mode == Some(AppendMode::Append) { "append" } else { "replace" }
            ),
            AtomicKind::G2G => match self.factor {
                Some(MeasRef::Stab(i)) => write!(f, " | g{} * s{i}", self.operands[0]),
                Some(MeasRef::Gauge(i)) => write!(f, " | g{} * g{i}", self.operands[0]),
                None => Ok(()),
            },
        }
    }
}

/// Position of an operator in the generator representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum GenRef {
    Stab(usize),
    LogicalX,
    LogicalZ,
    Pair(usize, usize),
}

impl CodePatch {
    pub(crate) fn gen_refs(&self) -> Vec<GenRef> {
        let mut v: Vec<GenRef> = (0..self.generators.stabilizers.len()).map(GenRef::Stab).collect();
        v.push(GenRef::LogicalX);
        v.push(GenRef::LogicalZ);
        for i in 0..self.generators.gauge_pairs.len() {
            v.push(GenRef::Pair(i, 0));
            v.push(GenRef::Pair(i, 1));
        }
        v
    }

    pub(crate) fn gen(&self, r: GenRef) -> &PauliString {
        match r {
            GenRef::Stab(i) => &self.generators.stabilizers[i],
            GenRef::LogicalX => &self.logical_x,
            GenRef::LogicalZ => &self.logical_z,
            GenRef::Pair(i, 0) => &self.generators.gauge_pairs[i].0,
            GenRef::Pair(i, _) => &self.generators.gauge_pairs[i].1,
        }
    }

    pub(crate) fn gen_mut(&mut self, r: GenRef) -> &mut PauliString {
        match r {
            GenRef::Stab(i) => &mut self.generators.stabilizers[i],
            GenRef::LogicalX => &mut self.logical_x,
            GenRef::LogicalZ => &mut self.logical_z,
            GenRef::Pair(i, 0) => &mut self.generators.gauge_pairs[i].0,
            GenRef::Pair(i, _) => &mut self.generators.gauge_pairs[i].1,
        }
    }

    /// True when `op` (assumed to be in the gauge group) is a stabilizer:
    /// the stabilizer group is the centre of the gauge group.
    pub fn is_stabilizer_element(&self, op: &PauliString) -> bool {
        self.generators
            .gauge_pairs
            .iter()
            .all(|(a, b)| a.commutes_with(op) && b.commutes_with(op))
    }

    /// Multiplies every generator (except those in `skip`) that anticommutes
    /// with `probe` by `by`.
    fn clear_against(&mut self, probe: &PauliString, by: &PauliString, skip: &[GenRef]) {
        for r in self.gen_refs() {
            if skip.contains(&r) {
                continue;
            }
            if self.gen(r).symplectic(probe) {
                self.gen_mut(r).mul_assign_right(by);
            }
        }
    }

    /// Rewrites the generator representation so that `g` is one member of a
    /// gauge pair and every other generator commutes with it. Returns the
    /// pair index; `g` occupies slot 1.
    fn pair_with(&mut self, g: &PauliString) -> Result<usize> {
        let (pi, slot) = self
            .generators
            .gauge_pairs
            .iter()
            .enumerate()
            .find_map(|(i, (a, b))| {
                if a.symplectic(g) {
                    Some((i, 0))
                } else if b.symplectic(g) {
                    Some((i, 1))
                } else {
                    None
                }
            })
            .ok_or_else(|| Error::Structural("operator commutes with every gauge pair".into()))?;
        let h = self.gen(GenRef::Pair(pi, slot)).clone();
        let skip = [GenRef::Pair(pi, 0), GenRef::Pair(pi, 1)];
        self.clear_against(g, &h, &skip);
        let pair = &mut self.generators.gauge_pairs[pi];
        *pair = (h, g.clone());
        Ok(pi)
    }

    /// Generator-level S2G. Returns the generator `s_k` now paired with `g`,
    /// or `None` when `g` already lies in the gauge group.
    fn s2g_generators(&mut self, g: &PauliString) -> Result<Option<PauliString>> {
        let k = self.generators.stabilizers.iter().position(|s| s.symplectic(g));
        match k {
            Some(k) => {
                let sk = self.generators.stabilizers[k].clone();
                self.clear_against(g, &sk, &[GenRef::Stab(k)]);
                self.generators.stabilizers.remove(k);
                self.generators.gauge_pairs.push((sk.clone(), g.clone()));
                Ok(Some(sk))
            }
            None => {
                if self.logical_x.symplectic(g) || self.logical_z.symplectic(g) {
                    return Err(Error::LogicalCorruption(self.describe(g)));
                }
                if self.is_stabilizer_element(g) {
                    return Err(Error::NotValidS2g(format!(
                        "{} already lies in the stabilizer group",
                        self.describe(g)
                    )));
                }
                Ok(None)
            }
        }
    }

    fn check_operator(&self, g: &PauliString) -> Result<()> {
        if g.num_qubits() != self.num_qubits() {
            return Err(Error::Dimension(g.num_qubits(), self.num_qubits()));
        }
        if !g.is_hermitian() {
            return Err(Error::Operand("operator must have a real sign".into()));
        }
        if g.is_identity() {
            return Err(Error::Operand("identity is not a valid gauge".into()));
        }
        if self
            .disabled
            .iter()
            .filter_map(|c| self.index_of(*c))
            .any(|q| g.touches(q))
        {
            return Err(Error::Operand(format!("{} acts on a disabled qubit", self.describe(g))));
        }
        Ok(())
    }

    pub fn apply_s2g(&mut self, g: &PauliString) -> Result<AtomicInstruction> {
        self.check_operator(g)?;
        let anti: Vec<usize> = (0..self.stab_set.len())
            .filter(|&i| self.stab_set[i].symplectic(g))
            .collect();
        self.s2g_generators(g)?;
        let mut ins = AtomicInstruction::new(AtomicKind::S2G, g.clone());
        ins.demoted = anti.iter().map(|&i| self.stab_set[i].clone()).collect();
        ins.operands = anti;
        let mut i = 0;
        self.stab_set.retain(|_| {
            i += 1;
            !ins.operands.contains(&(i - 1))
        });
        self.gauge_set.extend(ins.demoted.iter().cloned());
        self.gauge_set.push(g.clone());
        Ok(ins)
    }

    /// G2S with the supplied measurement outcome. Anticommuting gauges are
    /// first merged pairwise (G2G) until a single partner remains; the extra
    /// G2G steps are returned ahead of the G2S itself.
    pub fn apply_g2s(&mut self, g: &PauliString, outcome: i8) -> Result<Vec<AtomicInstruction>> {
        if outcome != 1 && outcome != -1 {
            return Err(Error::Argument(format!("outcome must be +1 or -1, got {outcome}")));
        }
        let gi = self
            .gauge_set
            .iter()
            .position(|x| x.same_support_bits(g))
            .ok_or_else(|| Error::Operand(format!("{} is not in the gauge set", self.describe(g))))?;
        let anti: Vec<usize> = (0..self.gauge_set.len())
            .filter(|&i| self.gauge_set[i].symplectic(g))
            .collect();
        if anti.is_empty() {
            return Err(Error::Structural(format!(
                "no measured gauge anticommutes with {}",
                self.describe(g)
            )));
        }
        let mut out = Vec::new();
        let a = anti[0];
        for &j in &anti[1..] {
            let mut prod = self.gauge_set[j].clone();
            prod.mul_assign_right(&self.gauge_set[a]);
            // a product landing in the stabilizer group is promoted after the fix
            let mut ins = AtomicInstruction::new(AtomicKind::G2G, prod.clone());
            ins.operands = vec![j];
            ins.factor = Some(MeasRef::Gauge(a));
            self.gauge_set[j] = prod;
            out.push(ins);
        }
        let fixed = self.gauge_set[gi].clone();
        let pi = self.pair_with(&fixed)?;
        self.generators.gauge_pairs.remove(pi);
        self.generators.stabilizers.push(fixed.clone());

        let partner = self.gauge_set[a].clone();
        let (hi, lo) = if gi > a { (gi, a) } else { (a, gi) };
        self.gauge_set.remove(hi);
        self.gauge_set.remove(lo);
        self.stab_set.push(fixed.clone());
        self.promote_central_gauges();

        let mut ins = AtomicInstruction::new(AtomicKind::G2S, fixed);
        ins.operands = vec![gi];
        ins.outcome = Some(outcome);
        if outcome == -1 {
            ins.byproduct = Some(partner.clone());
        }
        ins.partner = Some(partner);
        out.push(ins);
        Ok(out)
    }

    /// Moves measured gauges that have become stabilizers into `stab_set`.
    pub(crate) fn promote_central_gauges(&mut self) {
        let mut i = 0;
        while i < self.gauge_set.len() {
            if self.is_stabilizer_element(&self.gauge_set[i]) {
                let s = self.gauge_set.remove(i);
                self.stab_set.push(s);
            } else {
                i += 1;
            }
        }
    }

    pub fn apply_s2s(&mut self, a: usize, b: usize, mode: AppendMode) -> Result<AtomicInstruction> {
        let len = self.stab_set.len();
        for i in [a, b] {
            if i >= len {
                return Err(Error::Index { index: i, len });
            }
        }
        if a == b {
            return Err(Error::Operand("S2S needs two distinct stabilizers".into()));
        }
        let mut prod = self.stab_set[a].clone();
        prod.mul_assign_right(&self.stab_set[b]);
        match mode {
            AppendMode::Replace => self.stab_set[a] = prod.clone(),
            AppendMode::Append => self.stab_set.push(prod.clone()),
        }
        let mut ins = AtomicInstruction::new(AtomicKind::S2S, prod);
        ins.operands = vec![a, b];
        ins.mode = Some(mode);
        Ok(ins)
    }

    pub fn meas_op(&self, r: MeasRef) -> Result<&PauliString> {
        match r {
            MeasRef::Stab(i) => self.stab_set.get(i).ok_or(Error::Index {
                index: i,
                len: self.stab_set.len(),
            }),
            MeasRef::Gauge(i) => self.gauge_set.get(i).ok_or(Error::Index {
                index: i,
                len: self.gauge_set.len(),
            }),
        }
    }

    pub fn apply_g2g(&mut self, g: usize, m: MeasRef) -> Result<AtomicInstruction> {
        if g >= self.gauge_set.len() {
            return Err(Error::Index {
                index: g,
                len: self.gauge_set.len(),
            });
        }
        if m == MeasRef::Gauge(g) {
            return Err(Error::Operand("G2G needs a different measured operator".into()));
        }
        let mut prod = self.gauge_set[g].clone();
        prod.mul_assign_right(self.meas_op(m)?);
        if prod.is_identity() || self.is_stabilizer_element(&prod) {
            return Err(Error::DegenerateGauge);
        }
        self.gauge_set[g] = prod.clone();
        let mut ins = AtomicInstruction::new(AtomicKind::G2G, prod);
        ins.operands = vec![g];
        ins.factor = Some(m);
        Ok(ins)
    }

    /// G2G that also accepts a product in the stabilizer group; the product is
    /// then measured as a stabilizer. Used when isolating a removed qubit.
    pub(crate) fn apply_g2g_merge(&mut self, g: usize, m: MeasRef) -> Result<AtomicInstruction> {
        if g >= self.gauge_set.len() {
            return Err(Error::Index {
                index: g,
                len: self.gauge_set.len(),
            });
        }
        let mut prod = self.gauge_set[g].clone();
        prod.mul_assign_right(self.meas_op(m)?);
        if prod.is_identity() {
            return Err(Error::DegenerateGauge);
        }
        self.gauge_set[g] = prod.clone();
        self.promote_central_gauges();
        let mut ins = AtomicInstruction::new(AtomicKind::G2G, prod);
        ins.operands = vec![g];
        ins.factor = Some(m);
        Ok(ins)
    }

    /// Locates `op` in the measured set by its bits.
    pub fn find_meas(&self, op: &PauliString) -> Option<MeasRef> {
        if let Some(i) = self.stab_set.iter().position(|s| s.same_support_bits(op)) {
            return Some(MeasRef::Stab(i));
        }
        self.gauge_set
            .iter()
            .position(|s| s.same_support_bits(op))
            .map(MeasRef::Gauge)
    }

    /// Re-executes a recorded instruction.
    pub fn apply_atomic(&mut self, ins: &AtomicInstruction) -> Result<Vec<AtomicInstruction>> {
        match ins.kind {
            AtomicKind::S2G => Ok(vec![self.apply_s2g(&ins.operator)?]),
            AtomicKind::G2S => self.apply_g2s(&ins.operator, ins.outcome.unwrap_or(1)),
            AtomicKind::S2S => {
                let mode = ins.mode.unwrap_or(AppendMode::Replace);
                Ok(vec![self.apply_s2s(ins.operands[0], ins.operands[1], mode)?])
            }
            AtomicKind::G2G => {
                let m = ins
                    .factor
                    .ok_or_else(|| Error::Operand("G2G without a factor".into()))?;
                match self.apply_g2g(ins.operands[0], m) {
                    Err(Error::DegenerateGauge) => Ok(vec![self.apply_g2g_merge(ins.operands[0], m)?]),
                    r => Ok(vec![r?]),
                }
            }
        }
    }

    /// Generator-level removal of qubit `q` once `X_q` and `Z_q` are in the
    /// gauge group: makes them a gauge pair, drops it and marks `q` disabled.
    pub(crate) fn disable_as_gauge(&mut self, q: usize) -> Result<()> {
        let n = self.num_qubits();
        let xq = PauliString::single(n, q, crate::pauli::Pauli::X);
        let zq = PauliString::single(n, q, crate::pauli::Pauli::Z);
        let pi = self.pair_with(&xq)?;
        // the pair is now (h, X_q); h equals Z_q up to stabilizers and X_q
        // once the rest commute with Z_q
        let skip = [GenRef::Pair(pi, 0), GenRef::Pair(pi, 1)];
        self.clear_against(&zq, &xq, &skip);
        self.generators.gauge_pairs.remove(pi);
        for r in self.gen_refs() {
            if self.gen(r).touches(q) {
                return Err(Error::Structural(format!(
                    "qubit {} still carried by {}",
                    self.coord_of(q),
                    self.describe(self.gen(r))
                )));
            }
        }
        self.gauge_set.retain(|g| !(g.same_support_bits(&xq) || g.same_support_bits(&zq)));
        if self.meas().any(|m| m.touches(q)) {
            return Err(Error::Structural(format!(
                "qubit {} still measured",
                self.coord_of(q)
            )));
        }
        self.disabled.insert(self.coord_of(q));
        Ok(())
    }

    /// Generator-level removal of qubit `q` once the single-site operator
    /// `p` on it lies in the stabilizer group: makes it a generator, multiplies it off every other
    /// operator, drops it and marks `q` disabled.
    pub(crate) fn disable_fixed(&mut self, q: usize, p: &PauliString) -> Result<()> {
        if !self.generators.stabilizers.iter().any(|s| s.same_support_bits(p)) {
            self.replace_stabilizer_generator(p)?;
        }
        let k = self
            .generators
            .stabilizers
            .iter()
            .position(|s| s.same_support_bits(p))
            .expect("generator was just installed");
        for r in self.gen_refs() {
            if r != GenRef::Stab(k) && self.gen(r).touches(q) {
                self.gen_mut(r).mul_assign_right(p);
            }
        }
        self.generators.stabilizers.remove(k);
        for m in self.stab_set.iter_mut().chain(self.gauge_set.iter_mut()) {
            if m.touches(q) {
                m.mul_assign_right(p);
            }
        }
        self.stab_set.retain(|s| !s.is_identity());
        self.gauge_set.retain(|s| !s.is_identity());
        self.disabled.insert(self.coord_of(q));
        Ok(())
    }
}

pub fn s2g(patch: &CodePatch, new_gauge: &PauliString) -> Result<(CodePatch, AtomicInstruction)> {
    let mut p = patch.clone();
    let ins = p.apply_s2g(new_gauge)?;
    Ok((p, ins))
}

/// Returns the post-state and the G2S instruction; preparatory G2G steps are
/// folded into the returned patch.
pub fn g2s(patch: &CodePatch, gauge: &PauliString, outcome: i8) -> Result<(CodePatch, AtomicInstruction)> {
    let mut p = patch.clone();
    let mut v = p.apply_g2s(gauge, outcome)?;
    Ok((p, v.pop().expect("g2s emits its own instruction")))
}

pub fn s2s(patch: &CodePatch, a: usize, b: usize, mode: AppendMode) -> Result<(CodePatch, AtomicInstruction)> {
    let mut p = patch.clone();
    let ins = p.apply_s2s(a, b, mode)?;
    Ok((p, ins))
}

/// G2G with `m` given by value; it must be a measured operator.
pub fn g2g(patch: &CodePatch, g: usize, m: &PauliString) -> Result<(CodePatch, AtomicInstruction)> {
    let r = patch
        .find_meas(m)
        .ok_or_else(|| Error::Operand(format!("{} is not a measured operator", patch.describe(m))))?;
    let mut p = patch.clone();
    let ins = p.apply_g2g(g, r)?;
    Ok((p, ins))
}
