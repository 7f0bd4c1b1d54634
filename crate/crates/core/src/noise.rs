//! Code-capacity Monte Carlo: independent X and Z flips on data qubits,
//! perfect syndrome extraction, minimum-weight matching decoding.

use std::collections::VecDeque;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{build_rotated_code, CodePatch};
use crate::deform::{baseline_ascs, random_defects, remove_defects, DefectSet};
use crate::distance::{matching_graph, MatchingGraph};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Largest flagged set decoded by exact dynamic programming.
pub const EXACT_LIMIT: usize = 20;

const TRIAL_CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorSample {
    pub x_errors: PauliString,
    pub z_errors: PauliString,
}

/// Per-slot error rates: `p` on active data qubits, `p_defect` on the data
/// qubits listed in `untreated`, zero on disabled slots.
pub fn qubit_rates<T: Float>(patch: &CodePatch, p: T, untreated: &DefectSet, p_defect: T) -> Vec<T> {
    let mut rates = vec![T::zero(); patch.num_qubits()];
    for (q, c) in patch.active_data() {
        rates[q] = if untreated.contains(&c) { p_defect } else { p };
    }
    rates
}

pub fn sample_errors<T: Float, R: Rng + ?Sized>(patch: &CodePatch, rates: &[T], rng: &mut R) -> ErrorSample {
    let n = patch.num_qubits();
    let mut x_errors = PauliString::identity(n);
    let mut z_errors = PauliString::identity(n);
    for (q, _) in patch.active_data() {
        let p = rates[q].to_f64().unwrap_or(0.0);
        if p > 0.0 {
            if rng.gen::<f64>() < p {
                x_errors.set(q, Pauli::X);
            }
            if rng.gen::<f64>() < p {
                z_errors.set(q, Pauli::Z);
            }
        }
    }
    ErrorSample { x_errors, z_errors }
}

/// Matching graph with all-pairs shortest paths.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub graph: MatchingGraph,
    dist: Vec<Vec<u32>>,
    /// Edge used to reach each vertex on the BFS tree rooted at each source.
    via: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub correction: PauliString,
    /// Total length of the matched paths.
    pub weight: u32,
    /// False when the greedy fallback was used.
    pub exact: bool,
}

/// Pairs of flagged positions, or `(i, None)` for a boundary match.
pub type Matching = Vec<(usize, Option<usize>)>;

impl Decoder {
    pub fn new(patch: &CodePatch, error_type: Pauli) -> Result<Decoder> {
        let graph = matching_graph(patch, error_type)?;
        let nv = graph.num_vertices();
        let mut dist = vec![vec![u32::MAX; nv]; nv];
        let mut via = vec![vec![None; nv]; nv];
        for s in 0..nv {
            let (ds, vs) = (&mut dist[s], &mut via[s]);
            ds[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &graph.adjacency[u] {
                    let ed = graph.edges[e];
                    let w = if ed.u == u { ed.v } else { ed.u };
                    if ds[w] == u32::MAX {
                        ds[w] = ds[u] + 1;
                        vs[w] = Some(e);
                        queue.push_back(w);
                    }
                }
            }
        }
        Ok(Decoder { graph, dist, via })
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.dist[a][b]
    }

    fn path_into(&self, a: usize, b: usize, out: &mut PauliString) {
        let kind = self.graph.error_type;
        let mut cur = b;
        while cur != a {
            let e = self.via[a][cur].expect("connected");
            let ed = self.graph.edges[e];
            let q = ed.qubit;
            let flipped = out.get(q) != Pauli::I;
            if flipped {
                out.clear(q);
            } else {
                out.set(q, kind);
            }
            cur = if ed.u == cur { ed.v } else { ed.u };
        }
    }

    /// Flagged vertices of an error of the graph's type.
    pub fn flagged(&self, error: &PauliString) -> Vec<usize> {
        self.graph
            .syndrome(error)
            .into_iter()
            .enumerate()
            .filter_map(|(i, f)| f.then_some(i))
            .collect()
    }

    /// Minimum-weight matching of `flagged` where any vertex may instead
    /// match the boundary.
    pub fn decode(&self, flagged: &[usize]) -> Result<Decoded> {
        let b = self.graph.boundary();
        if flagged.iter().any(|&v| v >= b) {
            return Err(Error::DecoderInput("flagged set names a non-check vertex".into()));
        }
        let (matching, weight, exact) = if flagged.len() <= EXACT_LIMIT {
            let (m, w) = self.exact_matching(flagged)?;
            (m, w, true)
        } else {
            let (m, w) = self.greedy_matching(flagged)?;
            (m, w, false)
        };
        let mut correction = PauliString::identity(self.graph.edge_of_qubit.len());
        for (i, j) in matching {
            let a = flagged[i];
            self.path_into(a, j.map_or(b, |j| flagged[j]), &mut correction);
        }
        Ok(Decoded { correction, weight, exact })
    }

    fn unresolvable() -> Error {
        Error::DecoderInput("flagged checks cannot be paired: odd parity with no reachable boundary".into())
    }

    /// Bitmask dynamic program, `O(n 2^n)`.
    pub fn exact_matching(&self, flagged: &[usize]) -> Result<(Matching, u32)> {
        let n = flagged.len();
        let b = self.graph.boundary();
        let full = (1usize << n) - 1;
        let inf = u32::MAX;
        let mut best = vec![inf; 1 << n];
        let mut choice = vec![(0u8, u8::MAX); 1 << n];
        best[0] = 0;
        for mask in 1..=full {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << i);
            let to_b = self.dist[flagged[i]][b];
            if to_b != inf && best[rest] != inf {
                best[mask] = to_b + best[rest];
                choice[mask] = (i as u8, u8::MAX);
            }
            let mut others = rest;
            while others != 0 {
                let j = others.trailing_zeros() as usize;
                others &= others - 1;
                let dij = self.dist[flagged[i]][flagged[j]];
                let sub = rest & !(1 << j);
                if dij != inf && best[sub] != inf && dij + best[sub] < best[mask] {
                    best[mask] = dij + best[sub];
                    choice[mask] = (i as u8, j as u8);
                }
            }
        }
        if best[full] == inf {
            return Err(Self::unresolvable());
        }
        let mut out = Vec::new();
        let mut mask = full;
        while mask != 0 {
            let (i, j) = choice[mask];
            mask &= !(1 << i);
            if j == u8::MAX {
                out.push((i as usize, None));
            } else {
                mask &= !(1 << j);
                out.push((i as usize, Some(j as usize)));
            }
        }
        Ok((out, best[full]))
    }

    /// Repeatedly commits the globally shortest pair or boundary match.
    pub fn greedy_matching(&self, flagged: &[usize]) -> Result<(Matching, u32)> {
        let n = flagged.len();
        let b = self.graph.boundary();
        let mut left = vec![true; n];
        let mut out = Vec::new();
        let mut weight = 0;
        for _ in 0..n {
            let mut best: Option<(u32, usize, Option<usize>)> = None;
            for i in (0..n).filter(|&i| left[i]) {
                let mut consider = |w: u32, j: Option<usize>| {
                    if w != u32::MAX && best.map_or(true, |bw| w < bw.0) {
                        best = Some((w, i, j));
                    }
                };
                consider(self.dist[flagged[i]][b], None);
                for j in (i + 1..n).filter(|&j| left[j]) {
                    consider(self.dist[flagged[i]][flagged[j]], Some(j));
                }
            }
            let Some((w, i, j)) = best else { break };
            left[i] = false;
            if let Some(j) = j {
                left[j] = false;
            }
            weight += w;
            out.push((i, j));
            if left.iter().all(|l| !l) {
                break;
            }
        }
        if left.iter().any(|l| *l) {
            return Err(Self::unresolvable());
        }
        Ok((out, weight))
    }
}

/// Decoders for both error types plus the logicals that detect failure.
#[derive(Debug, Clone)]
pub struct PatchDecoder {
    pub x: Decoder,
    pub z: Decoder,
    logical_x: PauliString,
    logical_z: PauliString,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub failed: bool,
    pub exact: bool,
}

impl PatchDecoder {
    pub fn new(patch: &CodePatch) -> Result<Self> {
        Ok(PatchDecoder {
            x: Decoder::new(patch, Pauli::X)?,
            z: Decoder::new(patch, Pauli::Z)?,
            logical_x: patch.logical_x.clone(),
            logical_z: patch.logical_z.clone(),
        })
    }

    /// Decodes both components; fails when a residual flips a logical.
    pub fn run(&self, e: &ErrorSample) -> Result<TrialOutcome> {
        let dx = self.x.decode(&self.x.flagged(&e.x_errors))?;
        let dz = self.z.decode(&self.z.flagged(&e.z_errors))?;
        let rx = e.x_errors.multiply(&dx.correction)?;
        let rz = e.z_errors.multiply(&dz.correction)?;
        Ok(TrialOutcome {
            failed: rx.symplectic(&self.logical_z) || rz.symplectic(&self.logical_x),
            exact: dx.exact && dz.exact,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    /// Wilson 95% interval.
    pub lo: f64,
    pub hi: f64,
    /// Every decode used the exact matcher.
    pub exact: bool,
}

impl McEstimate {
    pub fn new(trials: u64, failures: u64, exact: bool) -> Self {
        let (lo, hi) = wilson_interval(failures, trials, 1.959963984540054);
        McEstimate {
            trials,
            failures,
            rate: if trials == 0 { 0.0 } else { failures as f64 / trials as f64 },
            lo,
            hi,
            exact,
        }
    }

    pub fn separated_below(&self, other: &McEstimate) -> bool {
        self.hi < other.lo
    }
}

pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    // rounding can push a bound past the point estimate at k = 0 or k = n
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

/// Trials run in fixed chunks, each on its own stream of `seed`, so the
/// estimate does not depend on the thread count.
pub fn logical_error_rate<T: Float + Sync>(patch: &CodePatch, rates: &[T], trials: u64, seed: u64) -> Result<McEstimate> {
    let dec = PatchDecoder::new(patch)?;
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let parts: Vec<Result<(u64, bool)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = TRIAL_CHUNK.min(trials - c * TRIAL_CHUNK);
            let mut fails = 0;
            let mut exact = true;
            for _ in 0..len {
                let o = dec.run(&sample_errors(patch, rates, &mut rng))?;
                fails += o.failed as u64;
                exact &= o.exact;
            }
            Ok((fails, exact))
        })
        .collect();
    let mut failures = 0;
    let mut exact = true;
    for p in parts {
        let (f, e) = p?;
        failures += f;
        exact &= e;
    }
    Ok(McEstimate::new(trials, failures, exact))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldReport {
    pub l: usize,
    pub n_faulty: usize,
    pub target: usize,
    pub samples: usize,
    pub surf_successes: usize,
    pub ascs_successes: usize,
}

impl YieldReport {
    pub fn surf_yield(&self) -> f64 {
        self.surf_successes as f64 / self.samples.max(1) as f64
    }

    pub fn ascs_yield(&self) -> f64 {
        self.ascs_successes as f64 / self.samples.max(1) as f64
    }
}

/// Min distances `(surf, ascs)` after removing `n_faulty` uniformly placed
/// faulty sites (data and syndrome) from a pristine `l x l` patch.
pub fn yield_sample(pristine: &CodePatch, n_faulty: usize, seed: u64, index: u64) -> Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let defects = random_defects(pristine, n_faulty, &mut rng);
    let min = |r: Result<crate::deform::DeformationResult>| match r {
        Ok(r) => Ok(r.min_distance()),
        Err(Error::CodeBroken(_)) => Ok(0),
        Err(e) => Err(e),
    };
    Ok((min(remove_defects(pristine, &defects))?, min(baseline_ascs(pristine, &defects))?))
}

/// Fraction of samples whose deformed patch keeps min distance `>= target`,
/// per strategy.
pub fn yield_experiment(l: usize, n_faulty: usize, target: usize, samples: usize, seed: u64) -> Result<YieldReport> {
    let pristine = build_rotated_code(l)?;
    let results: Vec<Result<(usize, usize)>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| yield_sample(&pristine, n_faulty, seed, i))
        .collect();
    let mut report = YieldReport {
        l,
        n_faulty,
        target,
        samples,
        surf_successes: 0,
        ascs_successes: 0,
    };
    for r in results {
        let (s, a) = r?;
        report.surf_successes += (s >= target) as usize;
        report.ascs_successes += (a >= target) as usize;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::LatticeCoord;
    use crate::instructions::syndromeq_rm;

    #[test]
    fn zero_rate_gives_empty_sample() {
        let p = build_rotated_code(5).unwrap();
        let rates = vec![0.0f64; p.num_qubits()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = sample_errors(&p, &rates, &mut rng);
        assert!(e.x_errors.is_identity() && e.z_errors.is_identity());
        let est = logical_error_rate(&p, &rates, 1000, 3).unwrap();
        assert_eq!(est.failures, 0);
    }

    #[test]
    fn single_interior_error_is_corrected() {
        let p = build_rotated_code(5).unwrap();
        let dec = Decoder::new(&p, Pauli::X).unwrap();
        let q = p.index_of(LatticeCoord::data(2, 2)).unwrap();
        let e = PauliString::single(p.num_qubits(), q, Pauli::X);
        let f = dec.flagged(&e);
        assert_eq!(f.len(), 2);
        let d = dec.decode(&f).unwrap();
        assert_eq!(d.correction, e);
        assert_eq!(d.weight, 1);
    }

    #[test]
    fn boundary_error_matches_to_boundary() {
        let p = build_rotated_code(5).unwrap();
        let dec = Decoder::new(&p, Pauli::X).unwrap();
        let q = p.index_of(LatticeCoord::data(2, 0)).unwrap();
        let e = PauliString::single(p.num_qubits(), q, Pauli::X);
        let f = dec.flagged(&e);
        assert_eq!(f.len(), 1);
        let d = dec.decode(&f).unwrap();
        assert_eq!(d.weight, 1);
        assert!(!d.correction.multiply(&e).unwrap().symplectic(&p.logical_z));
    }

    #[test]
    fn decoding_works_on_super_stabilizers() {
        let p = build_rotated_code(5).unwrap();
        let (q, _) = syndromeq_rm(&p, LatticeCoord::plaquette(1, 1)).unwrap();
        let dec = PatchDecoder::new(&q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rates = qubit_rates(&q, 0.03f64, &DefectSet::new(), 0.5);
        for _ in 0..200 {
            let e = sample_errors(&q, &rates, &mut rng);
            dec.run(&e).unwrap();
        }
    }

    #[test]
    fn greedy_agrees_when_obvious() {
        let p = build_rotated_code(7).unwrap();
        let dec = Decoder::new(&p, Pauli::Z).unwrap();
        let q = p.index_of(LatticeCoord::data(3, 3)).unwrap();
        let e = PauliString::single(p.num_qubits(), q, Pauli::Z);
        let f = dec.flagged(&e);
        assert_eq!(dec.greedy_matching(&f).unwrap().1, dec.exact_matching(&f).unwrap().1);
    }

    #[test]
    fn wilson_contains_rate() {
        let (lo, hi) = wilson_interval(30, 1000, 1.96);
        assert!(lo < 0.03 && 0.03 < hi);
        assert_eq!(wilson_interval(0, 100, 1.96).0, 0.0);
    }

    #[test]
    fn estimate_is_deterministic() {
        let p = build_rotated_code(3).unwrap();
        let rates = qubit_rates(&p, 0.05f64, &DefectSet::new(), 0.5);
        let a = logical_error_rate(&p, &rates, 5000, 11).unwrap();
        let b = logical_error_rate(&p, &rates, 5000, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.failures > 0);
    }

    #[test]
    fn no_faults_full_yield() {
        let r = yield_experiment(5, 0, 5, 4, 1).unwrap();
        assert_eq!((r.surf_yield(), r.ascs_yield()), (1.0, 1.0));
    }
}
