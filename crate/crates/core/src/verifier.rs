//! Statevector check that deformation schedules preserve the encoded
//! logical state.
//!
//! Only data qubits are simulated; measuring a check is a Pauli projection.
//! Qubit slot `q` of the patch is bit `q` of the amplitude index.

use std::fmt;

use num_complex::Complex;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::code::CodePatch;
use crate::deform::{DeformationSchedule, ScheduleEntry};
use crate::error::{Error, Result};
use crate::gauge::{AtomicInstruction, AtomicKind};
use crate::instructions::ScheduleStep;
use crate::pauli::{Pauli, PauliString};

/// Largest number of qubit slots simulated.
pub const MAX_QUBITS: usize = 20;
/// Outcome-branch count up to which every branch is replayed.
pub const EXHAUSTIVE_BRANCHES: usize = 256;
/// Branches sampled when there are more.
pub const SAMPLED_BRANCHES: usize = 64;

const MIN_PROBABILITY: f64 = 1e-12;

fn lit<T: Float>(x: f64) -> T {
    T::from(x).expect("literal fits the scalar type")
}

/// Pauli operator as bit masks, `i^phase X^x Z^z`.
#[derive(Debug, Clone, Copy)]
struct Masks {
    x: u64,
    z: u64,
    phase: u8,
}

impl Masks {
    fn of(p: &PauliString) -> Masks {
        let word = |w: &[u64]| w.first().copied().unwrap_or(0);
        Masks {
            x: word(p.x_words()),
            z: word(p.z_words()),
            phase: p.phase(),
        }
    }
}

fn i_pow<T: Float>(k: u8) -> Complex<T> {
    match k % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalState<T> {
    pub n: usize,
    pub amplitudes: Vec<Complex<T>>,
    /// Product of the corrections applied so far.
    pub frame: PauliString,
    pub alpha: Complex<T>,
    pub beta: Complex<T>,
}

impl<T: Float> LogicalState<T> {
    pub fn norm(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |a, c| a + c.norm_sqr()).sqrt()
    }

    fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > lit(1e-150)) {
            return Err(Error::Contradiction);
        }
        for a in &mut self.amplitudes {
            *a = *a / n;
        }
        Ok(())
    }

    fn check_width(&self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::Dimension(p.num_qubits(), self.n));
        }
        Ok(())
    }

    /// `P |psi>`.
    pub fn apply(&mut self, p: &PauliString) -> Result<()> {
        self.check_width(p)?;
        let m = Masks::of(p);
        let ph = i_pow::<T>(m.phase);
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.amplitudes.len()];
        for (b, a) in self.amplitudes.iter().enumerate() {
            let sign = if ((b as u64) & m.z).count_ones() % 2 == 1 { -T::one() } else { T::one() };
            out[b ^ m.x as usize] = *a * ph * sign;
        }
        self.amplitudes = out;
        self.frame.mul_assign_right(p);
        Ok(())
    }

    /// `<psi| P |psi>`, real part; `P` must be Hermitian.
    pub fn expectation(&self, p: &PauliString) -> Result<T> {
        self.check_width(p)?;
        let m = Masks::of(p);
        let ph = i_pow::<T>(m.phase);
        let mut acc = Complex::new(T::zero(), T::zero());
        for (b, a) in self.amplitudes.iter().enumerate() {
            let sign = if ((b as u64) & m.z).count_ones() % 2 == 1 { -T::one() } else { T::one() };
            acc = acc + self.amplitudes[b ^ m.x as usize].conj() * *a * ph * sign;
        }
        Ok(acc.re)
    }

    /// Projects onto the `s`-eigenspace of `P` without renormalizing.
    fn project(&mut self, p: &PauliString, s: i8) {
        let m = Masks::of(p);
        let ph = i_pow::<T>(m.phase);
        let half = lit::<T>(0.5);
        let sgn = if s < 0 { -T::one() } else { T::one() };
        let old = self.amplitudes.clone();
        for (b, a) in self.amplitudes.iter_mut().enumerate() {
            // (P psi)[b] = ph * (-1)^{|c & z|} psi[c] with c = b ^ x
            let c = b ^ m.x as usize;
            let sign = if ((c as u64) & m.z).count_ones() % 2 == 1 { -T::one() } else { T::one() };
            *a = (old[b] + old[c] * ph * sign * sgn) * half;
        }
    }

    /// Probability of outcome +1.
    pub fn prob_plus(&self, p: &PauliString) -> Result<T> {
        Ok(((T::one() + self.expectation(p)?) * lit(0.5)).max(T::zero()).min(T::one()))
    }

    /// Tensors in a fresh qubit as the new highest slot, in the +1
    /// eigenstate of `basis`.
    pub fn add_qubit(&mut self, basis: Pauli) -> Result<()> {
        if self.n + 1 > MAX_QUBITS {
            return Err(Error::Argument(format!("more than {MAX_QUBITS} qubits")));
        }
        let len = self.amplitudes.len();
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; 2 * len];
        let r = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
        for (b, a) in self.amplitudes.iter().enumerate() {
            match basis {
                Pauli::Z => out[b] = *a,
                Pauli::X => {
                    out[b] = *a * r;
                    out[b + len] = *a * r;
                }
                _ => return Err(Error::Argument("fresh qubits are prepared in the Z or X basis".into())),
            }
        }
        self.amplitudes = out;
        self.n += 1;
        self.frame.extend(1);
        Ok(())
    }
}

/// Born-rule measurement of `p`. A `forced` outcome is used when its
/// probability exceeds `1e-12`.
pub fn measure_operator<T: Float, R: Rng + ?Sized>(
    state: &LogicalState<T>,
    p: &PauliString,
    forced: Option<i8>,
    rng: &mut R,
) -> Result<(i8, LogicalState<T>)> {
    if !p.is_hermitian() {
        return Err(Error::Operand("measured operator must be Hermitian".into()));
    }
    let pp = state.prob_plus(p)?.to_f64().unwrap_or(0.5);
    let outcome = match forced {
        Some(s) if s != 1 && s != -1 => return Err(Error::Argument(format!("outcome must be +1 or -1, got {s}"))),
        Some(s) => {
            let prob = if s == 1 { pp } else { 1.0 - pp };
            if prob <= MIN_PROBABILITY {
                return Err(Error::Contradiction);
            }
            s
        }
        None => {
            if rng.gen::<f64>() < pp {
                1
            } else {
                -1
            }
        }
    };
    let mut out = state.clone();
    out.project(p, outcome);
    out.normalize()?;
    Ok((outcome, out))
}

/// Encodes `alpha |0_L> + beta |1_L>` (normalized) on the patch: a seeded
/// random state projected onto the stabilizer space and onto `Z_L = +1`
/// gives `|0_L>`, and `X_L |0_L>` gives `|1_L>`.
pub fn encode<T: Float>(patch: &CodePatch, alpha: Complex<T>, beta: Complex<T>) -> Result<LogicalState<T>> {
    let n = patch.num_qubits();
    if n > MAX_QUBITS {
        return Err(Error::Argument(format!("{n} qubit slots exceed the limit of {MAX_QUBITS}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let amplitudes = (0..1usize << n)
        .map(|_| Complex::new(lit::<T>(rng.gen::<f64>() - 0.5), lit::<T>(rng.gen::<f64>() - 0.5)))
        .collect();
    let mut zero = LogicalState {
        n,
        amplitudes,
        frame: PauliString::identity(n),
        alpha,
        beta,
    };
    zero.normalize().map_err(|_| Error::Encoding("empty fiducial state".into()))?;
    for s in patch.generators.stabilizers.iter().chain(&patch.stab_set).chain([&patch.logical_z]) {
        zero.project(s, 1);
        zero.normalize()
            .map_err(|_| Error::Encoding(format!("inconsistent stabilizer {}", patch.describe(s))))?;
    }
    let mut one = zero.clone();
    one.apply(&patch.logical_x)?;
    let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if !(norm > T::zero()) {
        return Err(Error::Encoding("alpha and beta are both zero".into()));
    }
    let (a, b) = (alpha / norm, beta / norm);
    let amplitudes = zero
        .amplitudes
        .iter()
        .zip(&one.amplitudes)
        .map(|(z, o)| *z * a + *o * b)
        .collect();
    Ok(LogicalState {
        n,
        amplitudes,
        frame: PauliString::identity(n),
        alpha: a,
        beta: b,
    })
}

/// `Y_L = i X_L Z_L`.
pub fn logical_y(patch: &CodePatch) -> PauliString {
    let mut y = patch.logical_x.clone();
    y.mul_assign_right(&patch.logical_z);
    let ph = y.phase();
    y.set_raw_phase(ph + 1);
    y
}

/// Expected `(<X_L>, <Y_L>, <Z_L>)` for amplitudes `(alpha, beta)`.
pub fn bloch<T: Float>(alpha: Complex<T>, beta: Complex<T>) -> [T; 3] {
    let c = alpha.conj() * beta;
    let two = lit::<T>(2.0);
    [two * c.re, two * c.im, alpha.norm_sqr() - beta.norm_sqr()]
}

/// How measurement outcomes are chosen during replay.
pub trait OutcomeSource {
    /// Called only when both outcomes are possible.
    fn choose(&mut self, p_plus: f64) -> i8;
}

/// Follows a fixed outcome sequence, then +1.
#[derive(Debug, Clone, Default)]
pub struct FixedOutcomes {
    pub outcomes: Vec<i8>,
    pub used: usize,
}

impl OutcomeSource for FixedOutcomes {
    fn choose(&mut self, _: f64) -> i8 {
        let o = self.outcomes.get(self.used).copied().unwrap_or(1);
        self.used += 1;
        o
    }
}

/// Born-rule outcomes from a seeded generator.
pub struct SampledOutcomes(pub ChaCha8Rng);

impl OutcomeSource for SampledOutcomes {
    fn choose(&mut self, p_plus: f64) -> i8 {
        if self.0.gen::<f64>() < p_plus {
            1
        } else {
            -1
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayOptions {
    /// Negative control: leave -1 outcomes uncorrected.
    pub skip_byproducts: bool,
}

/// Where in a schedule a check failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSite {
    pub entry: usize,
    pub label: String,
    pub reason: String,
}

impl fmt::Display for FailureSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entry {} ({}): {}", self.entry, self.label, self.reason)
    }
}

struct Replay<'a, T, S> {
    patch: CodePatch,
    state: LogicalState<T>,
    source: &'a mut S,
    options: ReplayOptions,
    random_outcomes: usize,
}

impl<T: Float, S: OutcomeSource> Replay<'_, T, S> {
    fn measure(&mut self, p: &PauliString) -> Result<i8> {
        let pp = self.state.prob_plus(p)?.to_f64().unwrap_or(0.5);
        let s = if pp >= 1.0 - MIN_PROBABILITY {
            1
        } else if pp <= MIN_PROBABILITY {
            -1
        } else {
            self.random_outcomes += 1;
            self.source.choose(pp)
        };
        self.state.project(p, s);
        self.state.normalize()?;
        Ok(s)
    }

    fn correct(&mut self, by: &PauliString) -> Result<()> {
        if !self.options.skip_byproducts {
            self.state.apply(by)?;
        }
        Ok(())
    }

    fn atomic(&mut self, ins: &AtomicInstruction) -> Result<()> {
        match ins.kind {
            AtomicKind::S2G => {
                let done = self.patch.apply_atomic(ins)?;
                let g = &done[0].operator;
                if self.measure(g)? == -1 {
                    if let Some(d) = done[0].demoted.first().cloned() {
                        self.correct(&d)?;
                    }
                }
            }
            AtomicKind::G2S => {
                let g = ins.operator.clone();
                let before = self.patch.clone();
                // merges first, as the transformation performs them
                let mut probe = before.clone();
                let steps = probe.apply_g2s(&g, 1)?;
                for m in &steps[..steps.len() - 1] {
                    self.measure(&m.operator)?;
                }
                let s = self.measure(&g)?;
                let done = self.patch.apply_g2s(&g, s)?;
                if let Some(b) = done.last().and_then(|i| i.byproduct.clone()) {
                    self.correct(&b)?;
                }
            }
            AtomicKind::G2G => {
                let done = self.patch.apply_atomic(ins)?;
                self.measure(&done[0].operator)?;
            }
            AtomicKind::S2S => {
                self.patch.apply_atomic(ins)?;
            }
        }
        Ok(())
    }

    fn step(&mut self, step: &ScheduleStep) -> Result<()> {
        match step {
            ScheduleStep::Atomic(a) => self.atomic(a),
            ScheduleStep::AddQubit { basis, .. } => {
                self.patch.apply_step(step)?;
                self.state.add_qubit(*basis)
            }
            _ => self.patch.apply_step(step),
        }
    }

    /// Measured stabilizers read +1 and the logical Bloch vector is intact.
    fn check(&self, tol: T) -> std::result::Result<(), String> {
        let norm = self.state.norm();
        if (norm - T::one()).abs() > lit(1e-12) {
            return Err(format!("norm drifted to {:.3e}", norm.to_f64().unwrap_or(f64::NAN)));
        }
        for s in &self.patch.stab_set {
            let e = self.state.expectation(s).map_err(|e| e.to_string())?;
            if (e - T::one()).abs() > tol {
                return Err(format!(
                    "stabilizer {} reads {:.6}",
                    self.patch.describe(s),
                    e.to_f64().unwrap_or(f64::NAN)
                ));
            }
        }
        let want = bloch(self.state.alpha, self.state.beta);
        let ops = [self.patch.logical_x.clone(), logical_y(&self.patch), self.patch.logical_z.clone()];
        for ((name, op), w) in ["X_L", "Y_L", "Z_L"].iter().zip(&ops).zip(want) {
            let e = self.state.expectation(op).map_err(|e| e.to_string())?;
            if (e - w).abs() > tol {
                return Err(format!(
                    "<{name}> = {:.6}, expected {:.6}",
                    e.to_f64().unwrap_or(f64::NAN),
                    w.to_f64().unwrap_or(f64::NAN)
                ));
            }
        }
        Ok(())
    }
}

fn entries_of(schedule: &DeformationSchedule) -> Vec<(String, Vec<ScheduleStep>)> {
    schedule
        .entries
        .iter()
        .map(|e| match e {
            ScheduleEntry::Instruction(ins) => (ins.header(), ins.expansion.clone()),
            ScheduleEntry::Step(s) => (s.to_string(), vec![s.clone()]),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome<T> {
    pub patch: CodePatch,
    pub state: LogicalState<T>,
    /// Number of measurements whose outcome was random.
    pub random_outcomes: usize,
    pub failure: Option<FailureSite>,
}

/// Replays `entries` from `state`, checking after each one.
fn replay_entries<T: Float, S: OutcomeSource>(
    patch: &CodePatch,
    state: LogicalState<T>,
    entries: &[(String, Vec<ScheduleStep>)],
    source: &mut S,
    options: ReplayOptions,
    tol: T,
) -> Result<ReplayOutcome<T>> {
    let mut r = Replay {
        patch: patch.clone(),
        state,
        source,
        options,
        random_outcomes: 0,
    };
    let mut failure = None;
    for (i, (label, steps)) in entries.iter().enumerate() {
        for s in steps {
            r.step(s)?;
        }
        if let Err(reason) = r.check(tol) {
            failure = Some(FailureSite {
                entry: i,
                label: label.clone(),
                reason,
            });
            break;
        }
    }
    Ok(ReplayOutcome {
        patch: r.patch,
        state: r.state,
        random_outcomes: r.random_outcomes,
        failure,
    })
}

/// Replays a schedule with Born-rule outcomes; returns the final state and
/// the accumulated correction frame.
pub fn replay_schedule<T: Float, R: Rng>(
    patch: &CodePatch,
    state: &LogicalState<T>,
    schedule: &DeformationSchedule,
    rng: &mut R,
) -> Result<(LogicalState<T>, PauliString)> {
    let mut src = SampledOutcomes(ChaCha8Rng::seed_from_u64(rng.gen()));
    let out = replay_entries(patch, state.clone(), &entries_of(schedule), &mut src, ReplayOptions::default(), T::infinity())?;
    let frame = out.state.frame.clone();
    Ok((out.state, frame))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub ok: bool,
    pub branches: usize,
    pub exhaustive: bool,
    /// Seed of the sampled branches when not exhaustive.
    pub seed: Option<u64>,
    pub states: usize,
    pub failure: Option<FailureSite>,
}

impl fmt::Display for PreservationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.exhaustive {
            "exhaustive".to_string()
        } else {
            format!("sampled, seed {}", self.seed.unwrap_or(0))
        };
        write!(
            f,
            "{} over {} states x {} branches ({mode})",
            if self.ok { "PASS" } else { "FAIL" },
            self.states,
            self.branches
        )?;
        if let Some(x) = &self.failure {
            write!(f, ": {x}")?;
        }
        Ok(())
    }
}

fn input_states<T: Float>(seed: u64) -> Vec<(Complex<T>, Complex<T>)> {
    let z = T::zero();
    let o = T::one();
    let r = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let mut v = vec![
        (Complex::new(o, z), Complex::new(z, z)),
        (Complex::new(z, z), Complex::new(o, z)),
        (Complex::new(r, z), Complex::new(r, z)),
        (Complex::new(r, z), Complex::new(-r, z)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        let a = Complex::new(lit::<T>(rng.gen::<f64>() - 0.5), lit::<T>(rng.gen::<f64>() - 0.5));
        let b = Complex::new(lit::<T>(rng.gen::<f64>() - 0.5), lit::<T>(rng.gen::<f64>() - 0.5));
        v.push((a, b));
    }
    v
}

/// Replays every outcome branch, depth first, up to `limit` leaves. Returns
/// the leaves (outcome sequences) or `None` when there are more.
fn enumerate_branches<T: Float>(
    patch: &CodePatch,
    state: &LogicalState<T>,
    entries: &[(String, Vec<ScheduleStep>)],
    options: ReplayOptions,
    limit: usize,
) -> Result<Option<Vec<Vec<i8>>>> {
    let mut leaves = Vec::new();
    let mut stack: Vec<Vec<i8>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let mut src = FixedOutcomes {
            outcomes: prefix.clone(),
            used: 0,
        };
        replay_entries(patch, state.clone(), entries, &mut src, options, T::infinity())?;
        if src.used > prefix.len() {
            // the prefix ran out: branch on the next random outcome
            let mut minus = prefix.clone();
            minus.push(-1);
            let mut plus = prefix;
            plus.push(1);
            stack.push(minus);
            stack.push(plus);
        } else {
            leaves.push(prefix);
            if leaves.len() > limit {
                return Ok(None);
            }
        }
    }
    Ok(Some(leaves))
}

/// Certifies that `schedule` keeps `alpha |0_L> + beta |1_L>` encoded on
/// the evolving logicals, for the four cardinal states and eight random
/// ones, over every measurement branch (or 64 sampled branches when there
/// are more than 256).
pub fn check_preservation<T: Float>(patch: &CodePatch, schedule: &DeformationSchedule, tol: T) -> Result<PreservationReport> {
    check_preservation_with(patch, schedule, tol, ReplayOptions::default(), 0x5eed)
}

pub fn check_preservation_with<T: Float>(
    patch: &CodePatch,
    schedule: &DeformationSchedule,
    tol: T,
    options: ReplayOptions,
    seed: u64,
) -> Result<PreservationReport> {
    let entries = entries_of(schedule);
    let inputs = input_states::<T>(seed);
    let probe = encode(patch, inputs[0].0, inputs[0].1)?;
    let exhaustive = enumerate_branches(patch, &probe, &entries, options, EXHAUSTIVE_BRANCHES)?;
    let mut report = PreservationReport {
        ok: true,
        branches: 0,
        exhaustive: exhaustive.is_some(),
        seed: if exhaustive.is_some() { None } else { Some(seed) },
        states: inputs.len(),
        failure: None,
    };
    for (a, b) in inputs {
        let state = encode(patch, a, b)?;
        let runs: Vec<ReplayOutcome<T>> = match &exhaustive {
            Some(leaves) => leaves
                .iter()
                .map(|l| {
                    let mut src = FixedOutcomes {
                        outcomes: l.clone(),
                        used: 0,
                    };
                    replay_entries(patch, state.clone(), &entries, &mut src, options, tol)
                })
                .collect::<Result<_>>()?,
            None => (0..SAMPLED_BRANCHES as u64)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i + 1);
                    replay_entries(patch, state.clone(), &entries, &mut SampledOutcomes(rng), options, tol)
                })
                .collect::<Result<_>>()?,
        };
        report.branches = runs.len();
        if let Some(f) = runs.into_iter().find_map(|r| r.failure) {
            report.ok = false;
            report.failure = Some(f);
            return Ok(report);
        }
    }
    Ok(report)
}

/// Schedule of bare steps, one check per step.
pub fn schedule_of_steps(steps: &[ScheduleStep]) -> DeformationSchedule {
    let mut s = DeformationSchedule::new();
    for st in steps {
        s.entries.push(ScheduleEntry::Step(st.clone()));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{build_rotated_code, LatticeCoord};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn encoded_expectations() {
        let p = build_rotated_code(2).unwrap();
        let s = encode(&p, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!((s.expectation(&p.logical_z).unwrap() - 1.0).abs() < 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = encode(&p, c(r, 0.0), c(r, 0.0)).unwrap();
        assert!((s.expectation(&p.logical_x).unwrap() - 1.0).abs() < 1e-12);
        for st in &p.stab_set {
            assert!((s.expectation(st).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn born_statistics_of_logical_z() {
        let p = build_rotated_code(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let (a, b) = (c(rng.gen(), rng.gen()), c(rng.gen(), rng.gen()));
            let s = encode(&p, a, b).unwrap();
            let pa = s.alpha.norm_sqr();
            assert!((s.prob_plus(&p.logical_z).unwrap() - pa).abs() < 1e-9);
        }
    }

    #[test]
    fn measurement_is_idempotent() {
        let p = build_rotated_code(3).unwrap();
        let s = encode(&p, c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = p.single(LatticeCoord::data(1, 1), Pauli::X).unwrap();
        let (o, s1) = measure_operator(&s, &x0, None, &mut rng).unwrap();
        let (o2, s2) = measure_operator(&s1, &x0, None, &mut rng).unwrap();
        assert_eq!(o, o2);
        let diff: f64 = s1.amplitudes.iter().zip(&s2.amplitudes).map(|(a, b)| (a - b).norm()).sum();
        assert!(diff < 1e-12);
        assert!((s2.norm() - 1.0).abs() < 1e-12);
        let (so, _) = measure_operator(&s, &p.stab_set[0], None, &mut rng).unwrap();
        assert_eq!(so, 1);
        assert!(matches!(measure_operator(&s, &p.stab_set[0], Some(-1), &mut rng), Err(Error::Contradiction)));
    }

    #[test]
    fn new_gauge_outcome_is_even() {
        let p = build_rotated_code(3).unwrap();
        let s = encode(&p, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let z = p.single(LatticeCoord::data(1, 1), Pauli::Z).unwrap();
        assert!((s.prob_plus(&z).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn empty_schedule_is_identity() {
        let p = build_rotated_code(3).unwrap();
        let r = check_preservation(&p, &DeformationSchedule::new(), 1e-9).unwrap();
        assert!(r.ok && r.exhaustive && r.branches == 1, "{r}");
    }

    #[test]
    fn single_precision_encodes() {
        let p = build_rotated_code(2).unwrap();
        let s: LogicalState<f32> = encode(&p, Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)).unwrap();
        assert!((s.expectation(&p.logical_z).unwrap() - 1.0).abs() < 1e-5);
    }

    fn schedule_of(ins: crate::instructions::CompositeInstruction) -> DeformationSchedule {
        let mut s = DeformationSchedule::new();
        s.push(ins);
        s
    }

    #[test]
    fn composite_instructions_preserve_the_logical() {
        use crate::code::Side;
        use crate::instructions::{dataq_rm, layer_sites, patchq_add, patchq_rm, syndromeq_rm, RemovalOption};
        let p = build_rotated_code(3).unwrap();
        let cases = [
            dataq_rm(&p, LatticeCoord::data(1, 1)).unwrap().1,
            patchq_rm(&p, Side::Left, LatticeCoord::data(1, 0), RemovalOption::Fix(Pauli::X)).unwrap().1,
            patchq_add(&p, Side::Right, &layer_sites(&p, Side::Right)).unwrap().1,
        ];
        for ins in cases {
            let label = ins.header();
            let r = check_preservation(&p, &schedule_of(ins), 1e-9).unwrap();
            assert!(r.ok, "{label}: {r}");
        }
        let p4 = build_rotated_code(4).unwrap();
        let ins = syndromeq_rm(&p4, LatticeCoord::plaquette(1, 1)).unwrap().1;
        let r = check_preservation(&p4, &schedule_of(ins), 1e-9).unwrap();
        assert!(r.ok, "{r}");
    }

    #[test]
    fn atomic_transformations_preserve_the_logical() {
        let p = build_rotated_code(3).unwrap();
        let z = p.single(LatticeCoord::data(1, 1), Pauli::Z).unwrap();
        let (p1, a) = crate::gauge::s2g(&p, &z).unwrap();
        let x = p1.single(LatticeCoord::data(1, 1), Pauli::X).unwrap();
        let mut p2 = p1.clone();
        let s2g_x = p2.apply_s2g(&x).unwrap();
        let mut p3 = p2.clone();
        let g2s = p3.apply_g2s(&z, 1).unwrap().pop().unwrap();
        let steps: Vec<ScheduleStep> = [a, s2g_x, g2s].into_iter().map(ScheduleStep::Atomic).collect();
        let r = check_preservation(&p, &schedule_of_steps(&steps), 1e-9).unwrap();
        assert!(r.ok, "{r}");
        assert!(r.exhaustive && r.branches > 1);

        let (_, s2s) = crate::gauge::s2s(&p, 0, 1, crate::gauge::AppendMode::Append).unwrap();
        let r = check_preservation(&p, &schedule_of_steps(&[ScheduleStep::Atomic(s2s)]), 1e-9).unwrap();
        assert!(r.ok, "{r}");
    }

    #[test]
    fn skipped_byproduct_is_located() {
        let p = build_rotated_code(3).unwrap();
        let ins = crate::instructions::patchq_rm(
            &p,
            crate::code::Side::Left,
            LatticeCoord::data(1, 0),
            crate::instructions::RemovalOption::Fix(Pauli::X),
        )
        .unwrap()
        .1;
        let opts = ReplayOptions { skip_byproducts: true };
        let r = check_preservation_with(&p, &schedule_of(ins), 1e-9, opts, 1).unwrap();
        assert!(!r.ok);
        let f = r.failure.unwrap();
        assert_eq!(f.entry, 0);
        assert!(f.label.starts_with("PatchQ_RM"), "{f}");
    }

    #[test]
    fn logical_corrupting_step_fails() {
        // a schedule that measures the bare logical is caught
        let p = build_rotated_code(3).unwrap();
        let mut bad = crate::gauge::AtomicInstruction::clone(&crate::gauge::s2g(&p, &p.single(LatticeCoord::data(1, 1), Pauli::Z).unwrap()).unwrap().1);
        bad.operator = p.logical_z.clone();
        let steps = [ScheduleStep::Atomic(bad)];
        assert!(check_preservation(&p, &schedule_of_steps(&steps), 1e-9).is_err());
    }
}
