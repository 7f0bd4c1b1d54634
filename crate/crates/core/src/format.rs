//! JSON form of a patch (`"format": "surfdeform-patch/1"`).
//!
//! Coordinates are `[row, col]` pairs in the doubled lattice convention.
//! Operators are written as `{"phase": k, "factors": {"r,c": "X", ...}}`
//! where `phase` is the raw `i^k` prefactor of the symplectic form (so a
//! Hermitian operator with `m` Y factors and sign `s` has `k = m + 2s`).
//! Qubit slots keep their order, so parsing what was written gives back an
//! identical patch.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::code::{CodePatch, Extent, GeneratorRep, LatticeCoord};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

pub const PATCH_FORMAT: &str = "surfdeform-patch/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub phase: u8,
    pub factors: BTreeMap<String, Pauli>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyndromeJson {
    pub coord: [i32; 2],
    #[serde(rename = "type")]
    pub kind: Pauli,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryJson {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: Pauli,
    pub qubits: Vec<[i32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorsJson {
    pub stabilizers: Vec<OperatorJson>,
    pub gauge_pairs: Vec<[OperatorJson; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchJson {
    pub format: String,
    pub extent: Extent,
    pub home: Extent,
    pub data_qubits: Vec<[i32; 2]>,
    pub syndrome_qubits: Vec<SyndromeJson>,
    pub disabled: Vec<[i32; 2]>,
    pub stab_set: Vec<OperatorJson>,
    pub gauge_set: Vec<OperatorJson>,
    pub logical_x: OperatorJson,
    pub logical_z: OperatorJson,
    pub generators: GeneratorsJson,
    /// Written for readers; ignored when parsing (derived from the rest).
    #[serde(default)]
    pub boundaries: Vec<BoundaryJson>,
}

fn pair(c: LatticeCoord) -> [i32; 2] {
    [c.row, c.col]
}

fn coord(p: [i32; 2]) -> LatticeCoord {
    LatticeCoord::new(p[0], p[1])
}

fn site_key(c: LatticeCoord) -> String {
    format!("{},{}", c.row, c.col)
}

fn parse_site_key(s: &str) -> Result<LatticeCoord> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("bad site key {s:?}")))?;
    let r = a.trim().parse().map_err(|_| Error::Parse(format!("bad site key {s:?}")))?;
    let c = b.trim().parse().map_err(|_| Error::Parse(format!("bad site key {s:?}")))?;
    Ok(LatticeCoord::new(r, c))
}

fn op_to_json(patch: &CodePatch, op: &PauliString) -> OperatorJson {
    OperatorJson {
        phase: op.phase(),
        factors: op.support().map(|q| (site_key(patch.coord_of(q)), op.get(q))).collect(),
    }
}

fn op_from_json(n: usize, index: &HashMap<LatticeCoord, usize>, j: &OperatorJson) -> Result<PauliString> {
    let mut op = PauliString::identity(n);
    for (k, p) in &j.factors {
        let c = parse_site_key(k)?;
        let q = *index
            .get(&c)
            .ok_or_else(|| Error::Parse(format!("operator acts on unknown qubit {c}")))?;
        if *p == Pauli::I {
            continue;
        }
        op.set(q, *p);
    }
    if j.phase > 3 {
        return Err(Error::Parse(format!("phase {} out of range", j.phase)));
    }
    op.set_raw_phase(j.phase);
    Ok(op)
}

impl CodePatch {
    pub fn to_json_value(&self) -> PatchJson {
        let op = |o: &PauliString| op_to_json(self, o);
        PatchJson {
            format: PATCH_FORMAT.to_string(),
            extent: self.extent,
            home: self.home,
            data_qubits: self.sites.iter().map(|c| pair(*c)).collect(),
            syndrome_qubits: self
                .syndromes
                .iter()
                .map(|(c, k)| SyndromeJson { coord: pair(*c), kind: *k })
                .collect(),
            disabled: self.disabled.iter().map(|c| pair(*c)).collect(),
            stab_set: self.stab_set.iter().map(op).collect(),
            gauge_set: self.gauge_set.iter().map(op).collect(),
            logical_x: op(&self.logical_x),
            logical_z: op(&self.logical_z),
            generators: GeneratorsJson {
                stabilizers: self.generators.stabilizers.iter().map(op).collect(),
                gauge_pairs: self.generators.gauge_pairs.iter().map(|(a, b)| [op(a), op(b)]).collect(),
            },
            boundaries: self
                .boundaries()
                .into_iter()
                .map(|b| BoundaryJson {
                    id: b.side.id().to_string(),
                    kind: b.kind,
                    qubits: b.qubits.into_iter().map(pair).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json_value(j: &PatchJson) -> Result<CodePatch> {
        if j.format != PATCH_FORMAT {
            return Err(Error::Parse(format!("expected format {PATCH_FORMAT}, found {:?}", j.format)));
        }
        let sites: Vec<LatticeCoord> = j.data_qubits.iter().map(|p| coord(*p)).collect();
        let mut index = HashMap::new();
        for (i, c) in sites.iter().enumerate() {
            if !c.is_data() {
                return Err(Error::Parse(format!("{c} is not a data site")));
            }
            if index.insert(*c, i).is_some() {
                return Err(Error::Parse(format!("data qubit {c} listed twice")));
            }
        }
        let n = sites.len();
        let op = |o: &OperatorJson| op_from_json(n, &index, o);
        let mut syndromes = BTreeMap::new();
        for s in &j.syndrome_qubits {
            let c = coord(s.coord);
            if !c.is_syndrome() {
                return Err(Error::Parse(format!("{c} is not a syndrome site")));
            }
            syndromes.insert(c, s.kind);
        }
        let disabled: BTreeSet<LatticeCoord> = j.disabled.iter().map(|p| coord(*p)).collect();
        let generators = GeneratorRep {
            stabilizers: j.generators.stabilizers.iter().map(op).collect::<Result<_>>()?,
            gauge_pairs: j
                .generators
                .gauge_pairs
                .iter()
                .map(|[a, b]| Ok((op(a)?, op(b)?)))
                .collect::<Result<_>>()?,
        };
        Ok(CodePatch {
            stab_set: j.stab_set.iter().map(op).collect::<Result<_>>()?,
            gauge_set: j.gauge_set.iter().map(op).collect::<Result<_>>()?,
            logical_x: op(&j.logical_x)?,
            logical_z: op(&j.logical_z)?,
            generators,
            sites,
            index,
            syndromes,
            disabled,
            extent: j.extent,
            home: j.home,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("patch serializes")
    }

    pub fn from_json(s: &str) -> Result<CodePatch> {
        let j: PatchJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(&j)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_rotated_code;
    use crate::instructions::syndromeq_rm;

    #[test]
    fn round_trip_is_exact() {
        let p = build_rotated_code(5).unwrap();
        let (q, _) = syndromeq_rm(&p, LatticeCoord::plaquette(1, 1)).unwrap();
        for patch in [p, q] {
            let s = patch.to_json();
            let back = CodePatch::from_json(&s).unwrap();
            assert_eq!(back, patch);
            assert_eq!(back.to_json(), s);
        }
    }

    #[test]
    fn signs_survive() {
        let mut p = build_rotated_code(2).unwrap();
        p.stab_set[0].negate();
        let back = CodePatch::from_json(&p.to_json()).unwrap();
        assert_eq!(back.stab_set[0].phase(), 2);
    }

    #[test]
    fn wrong_format_is_rejected() {
        let p = build_rotated_code(2).unwrap();
        let s = p.to_json().replace(PATCH_FORMAT, "other/1");
        assert!(matches!(CodePatch::from_json(&s), Err(Error::Parse(_))));
    }
}
