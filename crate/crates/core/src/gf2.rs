//! Incremental GF(2) row spans over symplectic vectors.

use crate::pauli::PauliString;

#[derive(Debug, Clone, Default)]
pub struct Span {
    rows: Vec<(usize, Vec<u64>)>,
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

fn bit(v: &[u64], b: usize) -> bool {
    v[b / 64] >> (b % 64) & 1 == 1
}

fn xor(a: &mut [u64], b: &[u64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= *y;
    }
}

impl Span {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ops<'a, I: IntoIterator<Item = &'a PauliString>>(ops: I) -> Self {
        let mut s = Span::new();
        for op in ops {
            s.insert(op);
        }
        s
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, mut v: Vec<u64>) -> Vec<u64> {
        for (pivot, row) in &self.rows {
            if bit(&v, *pivot) {
                xor(&mut v, row);
            }
        }
        v
    }

    /// Adds `op` to the span; returns false if it was already dependent.
    pub fn insert(&mut self, op: &PauliString) -> bool {
        self.insert_row(op.symplectic_row())
    }

    pub fn insert_row(&mut self, row: Vec<u64>) -> bool {
        let v = self.reduce(row);
        match lowest_bit(&v) {
            Some(p) => {
                self.rows.push((p, v));
                true
            }
            None => false,
        }
    }

    /// Membership ignoring phase.
    pub fn contains(&self, op: &PauliString) -> bool {
        lowest_bit(&self.reduce(op.symplectic_row())).is_none()
    }
}

/// GF(2) rank of a list of operators (phases ignored).
pub fn rank<'a, I: IntoIterator<Item = &'a PauliString>>(ops: I) -> usize {
    Span::from_ops(ops).rank()
}

/// Indices of operators in `ops` whose product equals `target` up to phase,
/// or `None` when `target` is outside their span.
pub fn decompose(ops: &[PauliString], target: &PauliString) -> Option<Vec<usize>> {
    let mut rows: Vec<(usize, Vec<u64>, Vec<bool>)> = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        let mut v = op.symplectic_row();
        let mut tag = vec![false; ops.len()];
        tag[i] = true;
        for (p, row, t) in &rows {
            if bit(&v, *p) {
                xor(&mut v, row);
                tag.iter_mut().zip(t).for_each(|(a, b)| *a ^= *b);
            }
        }
        if let Some(p) = lowest_bit(&v) {
            rows.push((p, v, tag));
        }
    }
    let mut v = target.symplectic_row();
    let mut tag = vec![false; ops.len()];
    for (p, row, t) in &rows {
        if bit(&v, *p) {
            xor(&mut v, row);
            tag.iter_mut().zip(t).for_each(|(a, b)| *a ^= *b);
        }
    }
    if lowest_bit(&v).is_some() {
        return None;
    }
    Some((0..ops.len()).filter(|&i| tag[i]).collect())
}
