//! Code distances of deformed patches.
//!
//! The matching graph for X errors has one vertex per element of a local
//! basis of the Z-type stabilizer group and one shared boundary vertex; every
//! active data qubit is an edge between the (at most two) basis elements it
//! touches, padded with the boundary vertex. Edges carry their overlap parity
//! with the conjugate bare logical, so a minimal logical is a shortest walk
//! from the boundary back to itself with odd parity.

use std::collections::VecDeque;

use crate::code::CodePatch;
use crate::error::{Error, Result};
use crate::gf2::Span;
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub qubit: usize,
    pub u: usize,
    pub v: usize,
    /// Overlap with the conjugate logical.
    pub parity: bool,
}

#[derive(Debug, Clone)]
pub struct MatchingGraph {
    /// Error type the graph detects (X errors are caught by Z checks).
    pub error_type: Pauli,
    /// Check operators, one per vertex except the boundary.
    pub checks: Vec<PauliString>,
    pub edges: Vec<Edge>,
    /// Edge ids incident to each vertex, boundary last.
    pub adjacency: Vec<Vec<usize>>,
    /// Edge id per data qubit, `None` for disabled qubits.
    pub edge_of_qubit: Vec<Option<usize>>,
}

impl MatchingGraph {
    pub fn num_vertices(&self) -> usize {
        self.checks.len() + 1
    }

    pub fn boundary(&self) -> usize {
        self.checks.len()
    }

    /// Flagged checks for an error of the graph's type.
    pub fn syndrome(&self, error: &PauliString) -> Vec<bool> {
        self.checks.iter().map(|c| c.symplectic(error)).collect()
    }

    /// Shortest odd walk from the boundary back to it.
    fn odd_boundary_cycle(&self) -> Option<usize> {
        let nv = self.num_vertices();
        let b = self.boundary();
        let mut dist = vec![usize::MAX; 2 * nv];
        let mut queue = VecDeque::new();
        dist[2 * b] = 0;
        queue.push_back((b, false));
        while let Some((u, par)) = queue.pop_front() {
            let du = dist[2 * u + par as usize];
            for &e in &self.adjacency[u] {
                let ed = self.edges[e];
                let w = if ed.u == u { ed.v } else { ed.u };
                let np = par ^ ed.parity;
                let slot = 2 * w + np as usize;
                if dist[slot] == usize::MAX {
                    dist[slot] = du + 1;
                    if w == b && np {
                        return Some(du + 1);
                    }
                    queue.push_back((w, np));
                }
            }
        }
        None
    }
}

fn kind_of(op: &PauliString) -> Option<Pauli> {
    match (op.has_x(), op.has_z()) {
        (true, false) => Some(Pauli::X),
        (false, true) => Some(Pauli::Z),
        _ => None,
    }
}

/// Stabilizer elements of type `kind` that are products of measured
/// operators: measured stabilizers plus, for each connected cluster of
/// anticommuting gauges, the products of its `kind`-gauges that commute with
/// the cluster. Sorted by weight.
pub fn local_stabilizers(patch: &CodePatch, kind: Pauli) -> Vec<PauliString> {
    let mut out: Vec<PauliString> = patch
        .stab_set
        .iter()
        .filter(|s| kind_of(s) == Some(kind))
        .cloned()
        .collect();

    let same: Vec<&PauliString> = patch.gauge_set.iter().filter(|g| kind_of(g) == Some(kind)).collect();
    let other: Vec<&PauliString> = patch.gauge_set.iter().filter(|g| kind_of(g) != Some(kind)).collect();
    let (a, b) = (same.len(), other.len());
    let mut parent: Vec<usize> = (0..a + b).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..a {
        for j in 0..b {
            if same[i].symplectic(other[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, a + j));
                parent[ri] = rj;
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for i in 0..a {
        let r = find(&mut parent, i);
        clusters.entry(r).or_default().0.push(i);
    }
    for j in 0..b {
        let r = find(&mut parent, a + j);
        clusters.entry(r).or_default().1.push(j);
    }
    for (zs, xs) in clusters.values() {
        if zs.is_empty() {
            continue;
        }
        let rows: Vec<Vec<bool>> = zs
            .iter()
            .map(|&i| xs.iter().map(|&j| same[i].symplectic(other[j])).collect())
            .collect();
        for combo in kernel_basis(&rows, xs.len()) {
            let mut op = PauliString::identity(patch.num_qubits());
            for (t, &i) in zs.iter().enumerate() {
                if combo[t] {
                    op.mul_assign_right(same[i]);
                }
            }
            if !op.is_identity() {
                out.push(op);
            }
        }
    }
    out.sort_by_key(|o| o.weight());
    out
}

/// Basis of `{c : Σ c_i rows_i = 0}`, preferring combinations that use few rows.
fn kernel_basis(rows: &[Vec<bool>], ncols: usize) -> Vec<Vec<bool>> {
    let m = rows.len();
    // eliminate [rows | identity]
    let mut aug: Vec<(Vec<bool>, Vec<bool>)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut id = vec![false; m];
            id[i] = true;
            (r.clone(), id)
        })
        .collect();
    let mut rank = 0;
    for col in 0..ncols {
        if let Some(p) = (rank..m).find(|&i| aug[i].0[col]) {
            aug.swap(rank, p);
            let pivot = aug[rank].clone();
            for (i, row) in aug.iter_mut().enumerate() {
                if i != rank && row.0[col] {
                    for k in 0..ncols {
                        row.0[k] ^= pivot.0[k];
                    }
                    for k in 0..m {
                        row.1[k] ^= pivot.1[k];
                    }
                }
            }
            rank += 1;
        }
    }
    let mut basis: Vec<Vec<bool>> = aug[rank..].iter().map(|r| r.1.clone()).collect();
    let dim = basis.len();
    if (1..=12).contains(&dim) {
        // enumerate the kernel and pick a sparse basis greedily
        let mut all: Vec<Vec<bool>> = (1u32..(1 << dim))
            .map(|mask| {
                let mut v = vec![false; m];
                for (t, b) in basis.iter().enumerate() {
                    if mask >> t & 1 == 1 {
                        for k in 0..m {
                            v[k] ^= b[k];
                        }
                    }
                }
                v
            })
            .collect();
        all.sort_by_key(|v| v.iter().filter(|x| **x).count());
        let mut chosen: Vec<Vec<bool>> = Vec::new();
        let mut echelon: Vec<(usize, Vec<bool>)> = Vec::new();
        for v in all {
            let mut r = v.clone();
            for (p, row) in &echelon {
                if r[*p] {
                    for k in 0..m {
                        r[k] ^= row[k];
                    }
                }
            }
            if let Some(p) = r.iter().position(|x| *x) {
                echelon.push((p, r));
                chosen.push(v);
                if chosen.len() == dim {
                    break;
                }
            }
        }
        basis = chosen;
    }
    basis
}

/// Matching graph for errors of type `error_type` (X or Z).
pub fn matching_graph(patch: &CodePatch, error_type: Pauli) -> Result<MatchingGraph> {
    let check_kind = match error_type {
        Pauli::X => Pauli::Z,
        Pauli::Z => Pauli::X,
        _ => return Err(Error::Argument("error type must be X or Z".into())),
    };
    let conj = match error_type {
        Pauli::X => &patch.logical_z,
        _ => &patch.logical_x,
    };
    let mut span = Span::new();
    let mut checks = Vec::new();
    for s in local_stabilizers(patch, check_kind) {
        if span.insert(&s) {
            checks.push(s);
        }
    }
    let n = patch.num_qubits();
    let b = checks.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in checks.iter().enumerate() {
        for q in c.support() {
            incident[q].push(ci);
        }
    }
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); b + 1];
    let mut edge_of_qubit = vec![None; n];
    for (q, c) in patch.active_data() {
        let (u, v) = match incident[q].as_slice() {
            [] => (b, b),
            [u] => (*u, b),
            [u, v] => (*u, *v),
            _ => {
                return Err(Error::Structural(format!(
                    "data qubit {c} lies in {} checks of one type",
                    incident[q].len()
                )))
            }
        };
        let parity = match error_type {
            Pauli::X => conj.z_bit(q),
            _ => conj.x_bit(q),
        };
        let id = edges.len();
        edges.push(Edge { qubit: q, u, v, parity });
        adjacency[u].push(id);
        if v != u {
            adjacency[v].push(id);
        }
        edge_of_qubit[q] = Some(id);
    }
    Ok(MatchingGraph {
        error_type,
        checks,
        edges,
        adjacency,
        edge_of_qubit,
    })
}

/// Dressed distances `(d_X, d_Z)`.
pub fn distance(patch: &CodePatch) -> Result<(usize, usize)> {
    let dx = matching_graph(patch, Pauli::X)?
        .odd_boundary_cycle()
        .ok_or_else(|| Error::CodeBroken("no logical X path".into()))?;
    let dz = matching_graph(patch, Pauli::Z)?
        .odd_boundary_cycle()
        .ok_or_else(|| Error::CodeBroken("no logical Z path".into()))?;
    Ok((dx, dz))
}

pub fn min_distance(patch: &CodePatch) -> Result<usize> {
    distance(patch).map(|(a, b)| a.min(b))
}

/// Exhaustive search by weight up to `w_max`. `None` means no logical of
/// that type was found within the budget. With `dressed` false the operator
/// must commute with the whole gauge group (bare distance).
pub fn brute_force_distance_with(patch: &CodePatch, w_max: usize, dressed: bool) -> (Option<usize>, Option<usize>) {
    let mut group: Vec<&PauliString> = patch.generators.stabilizers.iter().collect();
    if !dressed {
        group.extend(patch.generators.gauge_pairs.iter().flat_map(|(a, b)| [a, b]));
    }
    let active: Vec<usize> = patch.active_data().map(|(q, _)| q).collect();
    let search = |kind: Pauli, conj: &PauliString| -> Option<usize> {
        // per-qubit syndrome bits against the group, then the conjugate logical
        let words = (group.len() + 1).div_ceil(64);
        let n = patch.num_qubits();
        let sig: Vec<Vec<u64>> = active
            .iter()
            .map(|&q| {
                let e = PauliString::single(n, q, kind);
                let mut v = vec![0u64; words];
                for (i, g) in group.iter().chain([&conj]).enumerate() {
                    if g.symplectic(&e) {
                        v[i / 64] |= 1 << (i % 64);
                    }
                }
                v
            })
            .collect();
        let last = group.len();
        for w in 1..=w_max.min(active.len()) {
            let mut idx: Vec<usize> = (0..w).collect();
            loop {
                let mut acc = vec![0u64; words];
                for &i in &idx {
                    for (a, s) in acc.iter_mut().zip(&sig[i]) {
                        *a ^= s;
                    }
                }
                let logical_bit = acc[last / 64] >> (last % 64) & 1 == 1;
                acc[last / 64] &= !(1 << (last % 64));
                if logical_bit && acc.iter().all(|x| *x == 0) {
                    return Some(w);
                }
                // next combination in lexicographic order
                let k = active.len();
                let mut advanced = false;
                let mut i = w;
                while i > 0 {
                    i -= 1;
                    if idx[i] < k - w + i {
                        idx[i] += 1;
                        for j in i + 1..w {
                            idx[j] = idx[j - 1] + 1;
                        }
                        advanced = true;
                        break;
                    }
                }
                if !advanced {
                    break;
                }
            }
        }
        None
    };
    (search(Pauli::X, &patch.logical_z), search(Pauli::Z, &patch.logical_x))
}

pub fn brute_force_distance(patch: &CodePatch, w_max: usize) -> (Option<usize>, Option<usize>) {
    brute_force_distance_with(patch, w_max, true)
}
