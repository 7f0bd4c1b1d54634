//! Signed Pauli strings in symplectic form.
//!
//! An operator is stored as `i^phase · X^x · Z^z`, where `X^x` and `Z^z` are
//! tensor products over the qubits selected by the two bit vectors. With this
//! convention a site carrying both bits is `XZ = -iY`, and the phase is
//! adjusted when printing so that the text form reads naturally.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

/// Single-qubit Pauli factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// The other CSS type: X <-> Z.
    pub fn conjugate(self) -> Pauli {
        match self {
            Pauli::X => Pauli::Z,
            Pauli::Z => Pauli::X,
            p => p,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            n,
            x: vec![0; words_for(n)],
            z: vec![0; words_for(n)],
            phase: 0,
        }
    }

    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(qubit, p);
        s
    }

    /// Builds a Hermitian operator with sign +1 from `(qubit, factor)` pairs.
    pub fn from_sites<I: IntoIterator<Item = (usize, Pauli)>>(n: usize, sites: I) -> Self {
        let mut s = Self::identity(n);
        for (q, p) in sites {
            s.set(q, p);
        }
        s
    }

    /// A pure X-type (or Z-type) operator on the given qubits.
    pub fn uniform<I: IntoIterator<Item = usize>>(n: usize, kind: Pauli, qubits: I) -> Self {
        Self::from_sites(n, qubits.into_iter().map(|q| (q, kind)))
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn x_bit(&self, q: usize) -> bool {
        self.x[q / WORD] >> (q % WORD) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        self.z[q / WORD] >> (q % WORD) & 1 == 1
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x_bit(q), self.z_bit(q))
    }

    /// Sets the factor on `q`, keeping the operator Hermitian with its current sign.
    pub fn set(&mut self, q: usize, p: Pauli) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let was_y = self.get(q) == Pauli::Y;
        let (xb, zb) = p.bits();
        let (w, b) = (q / WORD, q % WORD);
        self.x[w] = (self.x[w] & !(1 << b)) | ((xb as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((zb as u64) << b);
        // Y = i·XZ, so each Y factor contributes one unit of phase.
        let is_y = p == Pauli::Y;
        if was_y != is_y {
            self.phase = (self.phase + if is_y { 1 } else { 3 }) % 4;
        }
    }

    /// Overwrites the stored `i^phase` factor.
    pub(crate) fn set_raw_phase(&mut self, phase: u8) {
        self.phase = phase % 4;
    }

    pub fn negate(&mut self) {
        self.phase = (self.phase + 2) % 4;
    }

    pub fn negated(mut self) -> Self {
        self.negate();
        self
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    /// Number of Y factors.
    fn y_count(&self) -> u32 {
        self.x.iter().zip(&self.z).map(|(a, b)| (a & b).count_ones()).sum()
    }

    /// Overall sign as a power of i, with Y factors written as Y rather than XZ.
    pub fn sign_power(&self) -> u8 {
        ((self.phase as u32 + 4 * self.n as u32 - self.y_count()) % 4) as u8
    }

    /// True when the operator is Hermitian (real sign).
    pub fn is_hermitian(&self) -> bool {
        self.sign_power() % 2 == 0
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&q| self.x_bit(q) || self.z_bit(q))
    }

    pub fn x_support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&q| self.x_bit(q))
    }

    pub fn z_support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&q| self.z_bit(q))
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn has_x(&self) -> bool {
        self.x.iter().any(|&w| w != 0)
    }

    pub fn has_z(&self) -> bool {
        self.z.iter().any(|&w| w != 0)
    }

    /// Pure X-type: no Z component (identity counts as both types).
    pub fn is_x_type(&self) -> bool {
        !self.has_z()
    }

    pub fn is_z_type(&self) -> bool {
        !self.has_x()
    }

    pub fn touches(&self, q: usize) -> bool {
        self.x_bit(q) || self.z_bit(q)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension(self.n, other.n));
        }
        Ok(())
    }

    /// Symplectic inner product mod 2.
    pub fn symplectic(&self, other: &Self) -> bool {
        debug_assert_eq!(self.n, other.n);
        let mut acc = 0u32;
        for i in 0..self.x.len() {
            acc += ((self.x[i] & other.z[i]) ^ (self.z[i] & other.x[i])).count_ones();
        }
        acc % 2 == 1
    }

    pub fn commutes(&self, other: &Self) -> Result<bool> {
        self.check_dim(other)?;
        Ok(!self.symplectic(other))
    }

    /// Commutation check for operators already known to share a qubit count.
    pub fn commutes_with(&self, other: &Self) -> bool {
        !self.symplectic(other)
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        out.mul_assign_right(other);
        Ok(out)
    }

    /// `self <- self · other`.
    pub fn mul_assign_right(&mut self, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        // X^a Z^b X^c Z^d = (-1)^{b·c} X^{a+c} Z^{b+d}
        let mut swaps = 0u32;
        for i in 0..self.x.len() {
            swaps += (self.z[i] & other.x[i]).count_ones();
            self.x[i] ^= other.x[i];
            self.z[i] ^= other.z[i];
        }
        self.phase = ((self.phase as u32 + other.phase as u32 + 2 * swaps) % 4) as u8;
    }

    pub fn inverse(&self) -> Self {
        let xz: u32 = self.y_count();
        let mut out = self.clone();
        out.phase = ((4 - self.phase as u32 + 2 * xz) % 4) as u8;
        out
    }

    /// Same bit vectors, ignoring phase.
    pub fn same_support_bits(&self, other: &Self) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    /// Extends the operator with identity on `extra` new qubits.
    pub fn extend(&mut self, extra: usize) {
        self.n += extra;
        self.x.resize(words_for(self.n), 0);
        self.z.resize(words_for(self.n), 0);
    }

    /// Removes the factor on `q` (used when a qubit leaves the code).
    pub fn clear(&mut self, q: usize) {
        self.set(q, Pauli::I);
    }

    /// Concatenated `x | z` words, the symplectic row vector.
    pub fn symplectic_row(&self) -> Vec<u64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.z);
        v
    }

    pub fn kind_label(&self) -> &'static str {
        match (self.has_x(), self.has_z()) {
            (false, false) => "I",
            (true, false) => "X",
            (false, true) => "Z",
            (true, true) => "mixed",
        }
    }
}

impl fmt::Display for PauliString {
    /// `+X0 X1 Z4`; identity prints as `+I`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.sign_power() {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{sign}")?;
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for q in self.support() {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{}{}", self.get(q), q)?;
        }
        Ok(())
    }
}

/// Parses the text form with an explicit qubit count: `"+X0 X1 Z4"`.
pub fn parse_pauli(n: usize, s: &str) -> Result<PauliString> {
    let s = s.trim();
    let (sign, rest) = if let Some(r) = s.strip_prefix("+i") {
        (1u8, r)
    } else if let Some(r) = s.strip_prefix("-i") {
        (3, r)
    } else if let Some(r) = s.strip_prefix('+') {
        (0, r)
    } else if let Some(r) = s.strip_prefix('-') {
        (2, r)
    } else {
        (0, s)
    };
    let mut p = PauliString::identity(n);
    for tok in rest.split_whitespace() {
        if tok == "I" {
            continue;
        }
        let (head, idx) = tok.split_at(1);
        let kind = match head {
            "X" => Pauli::X,
            "Y" => Pauli::Y,
            "Z" => Pauli::Z,
            _ => return Err(Error::Parse(format!("bad Pauli factor `{tok}`"))),
        };
        let q: usize = idx
            .parse()
            .map_err(|_| Error::Parse(format!("bad qubit index in `{tok}`")))?;
        if q >= n {
            return Err(Error::Parse(format!("qubit {q} out of range for {n} qubits")));
        }
        if p.touches(q) {
            return Err(Error::Parse(format!("qubit {q} listed twice")));
        }
        p.set(q, kind);
    }
    p.phase = (p.phase + sign) % 4;
    Ok(p)
}

/// Text form without an explicit size; the qubit count is one past the largest index.
impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let max = s
            .split_whitespace()
            .filter_map(|t| t.trim_start_matches(['+', '-', 'i']).get(1..))
            .filter_map(|i| i.parse::<usize>().ok())
            .max()
            .map_or(0, |m| m + 1);
        parse_pauli(max, s)
    }
}

pub fn multiply(p: &PauliString, q: &PauliString) -> Result<PauliString> {
    p.multiply(q)
}

pub fn commutes(p: &PauliString, q: &PauliString) -> Result<bool> {
    p.commutes(q)
}

pub fn weight(p: &PauliString) -> usize {
    p.weight()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, qs: &[usize]) -> PauliString {
        PauliString::uniform(n, Pauli::X, qs.iter().copied())
    }

    fn z(n: usize, qs: &[usize]) -> PauliString {
        PauliString::uniform(n, Pauli::Z, qs.iter().copied())
    }

    #[test]
    fn x_squared_is_identity() {
        let p = x(3, &[0]);
        let r = multiply(&p, &p).unwrap();
        assert!(r.is_identity());
        assert_eq!(r.phase(), 0);
    }

    #[test]
    fn xz_and_zx_differ_by_sign() {
        let a = multiply(&x(1, &[0]), &z(1, &[0])).unwrap();
        let b = multiply(&z(1, &[0]), &x(1, &[0])).unwrap();
        assert!(a.x_bit(0) && a.z_bit(0));
        assert!(a.same_support_bits(&b));
        assert_eq!((b.phase() + 4 - a.phase()) % 4, 2);
    }

    #[test]
    fn overlapping_products_cancel() {
        let r = multiply(&x(3, &[0, 1]), &x(3, &[1, 2])).unwrap();
        assert_eq!(r, x(3, &[0, 2]));
        assert_eq!(r.phase(), 0);
    }

    #[test]
    fn commutation_examples() {
        assert!(!commutes(&x(2, &[0]), &z(2, &[0])).unwrap());
        assert!(commutes(&x(2, &[0]), &z(2, &[1])).unwrap());
        assert!(commutes(&x(2, &[0, 1]), &z(2, &[0, 1])).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert_eq!(multiply(&x(2, &[0]), &x(3, &[0])), Err(Error::Dimension(2, 3)));
        assert!(commutes(&x(2, &[0]), &x(3, &[0])).is_err());
    }

    #[test]
    fn weights() {
        assert_eq!(weight(&PauliString::identity(4)), 0);
        let y = multiply(&x(1, &[0]), &z(1, &[0])).unwrap();
        assert_eq!(weight(&y), 1);
        assert_eq!(weight(&z(25, &[0, 1, 2, 3, 4])), 5);
    }

    #[test]
    fn text_form() {
        let p = PauliString::from_sites(5, [(0, Pauli::X), (1, Pauli::X), (4, Pauli::Z)]);
        assert_eq!(p.to_string(), "+X0 X1 Z4");
        assert_eq!(parse_pauli(5, "+X0 X1 Z4").unwrap(), p);
        let y = PauliString::single(2, 1, Pauli::Y).negated();
        assert_eq!(y.to_string(), "-Y1");
        assert_eq!(parse_pauli(2, "-Y1").unwrap(), y);
        assert!(y.is_hermitian());
        assert!(parse_pauli(2, "X5").is_err());
    }

    #[test]
    fn extend_and_clear() {
        let mut p = x(3, &[0, 2]);
        p.extend(70);
        assert_eq!(p.num_qubits(), 73);
        assert_eq!(p.weight(), 2);
        p.clear(2);
        assert_eq!(p, x(73, &[0]));
    }
}
