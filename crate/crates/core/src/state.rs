//! Execution state: the quantum state as a product of tangles and the
//! classical outcome/input maps.
//!
//! Inside a tangle the k-th listed qubit is the k-th most significant bit of
//! the amplitude index.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::command::QubitRef;
use crate::sexpr::SExpr;

pub type Amplitude = Complex64;

pub const DEFAULT_TOL: f64 = 1e-9;
/// Outcomes with probability below this are treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn plus_state() -> [Amplitude; 2] {
    [Amplitude::new(FRAC_1_SQRT_2, 0.0), Amplitude::new(FRAC_1_SQRT_2, 0.0)]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("qubit {0} is already allocated")]
    DuplicateQubit(QubitRef),
    #[error("initial state for {qubits:?} has squared norm {norm_sqr}")]
    NonNormalizedInput { qubits: Vec<QubitRef>, norm_sqr: f64 },
    #[error("qubit {0} is not allocated")]
    UnknownQubit(QubitRef),
    #[error("qubit {0} used twice in one operation")]
    SameQubit(QubitRef),
    #[error("qubit {0} has already been measured")]
    AlreadyMeasured(QubitRef),
    #[error("outcome {outcome} of qubit {qubit} has probability {probability:e}")]
    ZeroProbabilityBranch {
        qubit: QubitRef,
        outcome: bool,
        probability: f64,
    },
    #[error("qubit order {given:?} does not match the allocated qubits {allocated:?}")]
    OrderMismatch {
        given: Vec<QubitRef>,
        allocated: Vec<QubitRef>,
    },
    #[error("vectors of length {0} and {1} cannot be compared")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tangle {
    qubits: Vec<QubitRef>,
    amplitudes: Vec<Amplitude>,
}

impl Tangle {
    pub fn qubits(&self) -> &[QubitRef] {
        &self.qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn position(&self, q: QubitRef) -> Option<usize> {
        self.qubits.iter().position(|&x| x == q)
    }

    /// Bit mask of the qubit at list position `pos`.
    fn mask(&self, pos: usize) -> usize {
        1 << (self.qubits.len() - 1 - pos)
    }

    fn to_sexpr(&self) -> SExpr {
        SExpr::list([
            SExpr::atom("tangle"),
            SExpr::list(self.qubits.iter().map(|q| SExpr::atom(q.to_string()))),
            SExpr::list(
                self.amplitudes
                    .iter()
                    .flat_map(|a| [SExpr::atom(format_sig(a.re)), SExpr::atom(format_sig(a.im))]),
            ),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Z,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuantumState {
    tangles: Vec<Tangle>,
    measured: BTreeSet<QubitRef>,
}

impl QuantumState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tangles(&self) -> &[Tangle] {
        &self.tangles
    }

    pub fn measured(&self) -> &BTreeSet<QubitRef> {
        &self.measured
    }

    pub fn contains(&self, q: QubitRef) -> bool {
        self.tangles.iter().any(|t| t.qubits.contains(&q))
    }

    /// All live qubits, ascending.
    pub fn qubits(&self) -> Vec<QubitRef> {
        let mut qs: Vec<_> = self.tangles.iter().flat_map(|t| t.qubits.iter().copied()).collect();
        qs.sort();
        qs
    }

    pub fn tangle_of(&self, q: QubitRef) -> Option<&Tangle> {
        self.tangles.iter().find(|t| t.qubits.contains(&q))
    }

    fn locate(&self, q: QubitRef) -> Result<(usize, usize), StateError> {
        for (i, t) in self.tangles.iter().enumerate() {
            if let Some(p) = t.position(q) {
                return Ok((i, p));
            }
        }
        if self.measured.contains(&q) {
            Err(StateError::AlreadyMeasured(q))
        } else {
            Err(StateError::UnknownQubit(q))
        }
    }

    pub fn init_qubit(&mut self, q: QubitRef, amplitudes: [Amplitude; 2]) -> Result<(), StateError> {
        self.init_tangle(vec![q], amplitudes.to_vec())
    }

    /// Adds a joint (possibly entangled) state over fresh qubits.
    pub fn init_tangle(&mut self, qubits: Vec<QubitRef>, amplitudes: Vec<Amplitude>) -> Result<(), StateError> {
        let mut seen = BTreeSet::new();
        for &q in &qubits {
            if self.contains(q) || self.measured.contains(&q) || !seen.insert(q) {
                return Err(StateError::DuplicateQubit(q));
            }
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if amplitudes.len() != 1 << qubits.len() || (norm_sqr - 1.0).abs() > DEFAULT_TOL {
            return Err(StateError::NonNormalizedInput { qubits, norm_sqr });
        }
        if !qubits.is_empty() {
            self.tangles.push(Tangle { qubits, amplitudes });
        }
        Ok(())
    }

    /// Adds every tangle of `other`, whose qubits must be new here.
    pub fn absorb(&mut self, other: QuantumState) -> Result<(), StateError> {
        for t in &other.tangles {
            for &q in &t.qubits {
                if self.contains(q) || self.measured.contains(&q) {
                    return Err(StateError::DuplicateQubit(q));
                }
            }
        }
        self.tangles.extend(other.tangles);
        self.measured.extend(other.measured);
        Ok(())
    }

    /// Puts `q1` and `q2` into one tangle, returning its index.
    pub fn merge_tangles(&mut self, q1: QubitRef, q2: QubitRef) -> Result<usize, StateError> {
        let (i, _) = self.locate(q1)?;
        let (j, _) = self.locate(q2)?;
        if i == j {
            return Ok(i);
        }
        let (first, second) = if i < j {
            let b = self.tangles.remove(j);
            (self.tangles.remove(i), b)
        } else {
            let a = self.tangles.remove(i);
            (a, self.tangles.remove(j))
        };
        let mut amplitudes = Vec::with_capacity(first.amplitudes.len() * second.amplitudes.len());
        for a in &first.amplitudes {
            for b in &second.amplitudes {
                amplitudes.push(a * b);
            }
        }
        let mut qubits = first.qubits;
        qubits.extend(second.qubits);
        self.tangles.push(Tangle { qubits, amplitudes });
        Ok(self.tangles.len() - 1)
    }

    pub fn apply_cz(&mut self, q1: QubitRef, q2: QubitRef) -> Result<(), StateError> {
        if q1 == q2 {
            return Err(StateError::SameQubit(q1));
        }
        let ti = self.merge_tangles(q1, q2)?;
        let t = &mut self.tangles[ti];
        let both = t.mask(t.position(q1).unwrap()) | t.mask(t.position(q2).unwrap());
        for (idx, a) in t.amplitudes.iter_mut().enumerate() {
            if idx & both == both {
                *a = -*a;
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, q: QubitRef, which: Pauli) -> Result<(), StateError> {
        let (ti, pos) = self.locate(q)?;
        let t = &mut self.tangles[ti];
        let m = t.mask(pos);
        match which {
            Pauli::X => {
                for idx in 0..t.amplitudes.len() {
                    if idx & m == 0 {
                        t.amplitudes.swap(idx, idx | m);
                    }
                }
            }
            Pauli::Z => {
                for (idx, a) in t.amplitudes.iter_mut().enumerate() {
                    if idx & m != 0 {
                        *a = -*a;
                    }
                }
            }
        }
        Ok(())
    }

    /// Unnormalized amplitudes of the remaining qubits after projecting `q`
    /// onto `(|0> + (-1)^outcome e^{i angle}|1>)/sqrt 2`.
    fn projected(t: &Tangle, pos: usize, angle: f64, outcome: bool) -> Vec<Amplitude> {
        let m = t.mask(pos);
        let low = m - 1;
        let sign = if outcome { -1.0 } else { 1.0 };
        let phase = Amplitude::from_polar(sign * FRAC_1_SQRT_2, -angle);
        let half = t.amplitudes.len() / 2;
        (0..half)
            .map(|r| {
                let i0 = ((r & !low) << 1) | (r & low);
                FRAC_1_SQRT_2 * t.amplitudes[i0] + phase * t.amplitudes[i0 | m]
            })
            .collect()
    }

    /// Probabilities of outcomes 0 and 1 for measuring `q` in the XY-plane
    /// basis at `angle`.
    pub fn outcome_probabilities(&self, q: QubitRef, angle: f64) -> Result<(f64, f64), StateError> {
        let (ti, pos) = self.locate(q)?;
        let t = &self.tangles[ti];
        let total = t.norm_sqr();
        let p0: f64 = Self::projected(t, pos, angle, false).iter().map(|a| a.norm_sqr()).sum::<f64>() / total;
        Ok((p0, (1.0 - p0).max(0.0)))
    }

    /// Destructively measures `q`, keeping the branch for `outcome`.
    /// Returns the probability of that outcome; the remaining state is
    /// renormalized.
    pub fn project_measure(&mut self, q: QubitRef, angle: f64, outcome: bool) -> Result<f64, StateError> {
        let (ti, pos) = self.locate(q)?;
        let t = &self.tangles[ti];
        let total = t.norm_sqr();
        let mut rest = Self::projected(t, pos, angle, outcome);
        let weight: f64 = rest.iter().map(|a| a.norm_sqr()).sum();
        let probability = weight / total;
        if probability < ZERO_PROBABILITY {
            return Err(StateError::ZeroProbabilityBranch {
                qubit: q,
                outcome,
                probability,
            });
        }
        let scale = 1.0 / weight.sqrt();
        rest.iter_mut().for_each(|a| *a *= scale);
        let t = &mut self.tangles[ti];
        if t.qubits.len() == 1 {
            self.tangles.remove(ti);
        } else {
            t.qubits.remove(pos);
            t.amplitudes = rest;
        }
        self.measured.insert(q);
        Ok(probability)
    }

    /// Dense tensor product of every tangle, laid out in `order`.
    pub fn reference_full_state(&self, order: &[QubitRef]) -> Result<Vec<Amplitude>, StateError> {
        let mut given = order.to_vec();
        given.sort();
        let allocated = self.qubits();
        if given != allocated || given.windows(2).any(|w| w[0] == w[1]) {
            return Err(StateError::OrderMismatch {
                given: order.to_vec(),
                allocated,
            });
        }
        let mut qubits: Vec<QubitRef> = Vec::new();
        let mut amps = vec![Amplitude::new(1.0, 0.0)];
        for t in &self.tangles {
            amps = amps
                .iter()
                .flat_map(|a| t.amplitudes.iter().map(move |b| a * b))
                .collect();
            qubits.extend(&t.qubits);
        }
        Ok(permute(&amps, &qubits, order))
    }

    /// Joint amplitudes of `subset`, which must be a union of whole tangles.
    pub fn subsystem(&self, subset: &[QubitRef]) -> Result<Vec<Amplitude>, StateError> {
        let members: BTreeSet<QubitRef> = subset.iter().copied().collect();
        let mut part = QuantumState::new();
        for t in &self.tangles {
            let inside = t.qubits.iter().filter(|q| members.contains(q)).count();
            if inside == t.qubits.len() {
                part.tangles.push(t.clone());
            } else if inside > 0 {
                return Err(StateError::OrderMismatch {
                    given: subset.to_vec(),
                    allocated: t.qubits.clone(),
                });
            }
        }
        part.reference_full_state(subset)
    }

    /// Checks tangle disjointness, vector lengths and normalization.
    pub fn check_invariants(&self, tol: f64) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for t in &self.tangles {
            if t.amplitudes.len() != 1 << t.qubits.len() {
                return Err(format!("tangle {:?} has {} amplitudes", t.qubits, t.amplitudes.len()));
            }
            if (t.norm_sqr() - 1.0).abs() > tol {
                return Err(format!("tangle {:?} has squared norm {}", t.qubits, t.norm_sqr()));
            }
            for q in &t.qubits {
                if !seen.insert(*q) {
                    return Err(format!("qubit {q} appears in two tangles"));
                }
                if self.measured.contains(q) {
                    return Err(format!("measured qubit {q} is still allocated"));
                }
            }
        }
        Ok(())
    }

    /// `(state (tangle (q ...) (re im ...)) ...)`, tangles ordered by their
    /// smallest qubit.
    pub fn to_sexpr(&self) -> SExpr {
        let mut ts: Vec<&Tangle> = self.tangles.iter().collect();
        ts.sort_by_key(|t| t.qubits.iter().min().copied());
        SExpr::list(std::iter::once(SExpr::atom("state")).chain(ts.into_iter().map(Tangle::to_sexpr)))
    }
}

/// Reorders a dense vector laid out over `from` into the layout over `to`
/// (same qubit set).
pub fn permute(amps: &[Amplitude], from: &[QubitRef], to: &[QubitRef]) -> Vec<Amplitude> {
    let n = from.len();
    let src_bit: Vec<usize> = to
        .iter()
        .map(|q| n - 1 - from.iter().position(|x| x == q).expect("same qubit set"))
        .collect();
    (0..amps.len())
        .map(|idx| {
            let mut src = 0;
            for (k, &b) in src_bit.iter().enumerate() {
                if idx & (1 << (n - 1 - k)) != 0 {
                    src |= 1 << b;
                }
            }
            amps[src]
        })
        .collect()
}

/// True iff some unit phase brings `b` within `tol` of `a` in max-norm. The
/// phase is read off the largest-magnitude entry of `b`.
pub fn state_equal_up_to_phase(a: &[Amplitude], b: &[Amplitude], tol: f64) -> Result<bool, StateError> {
    if a.len() != b.len() {
        return Err(StateError::LengthMismatch(a.len(), b.len()));
    }
    let Some(k) = (0..b.len()).max_by(|&i, &j| b[i].norm_sqr().total_cmp(&b[j].norm_sqr())) else {
        return Ok(true);
    };
    let phase = if a[k].norm() > 0.0 && b[k].norm() > 0.0 {
        (a[k] / a[k].norm()) / (b[k] / b[k].norm())
    } else {
        Amplitude::new(1.0, 0.0)
    };
    Ok(a.iter().zip(b).all(|(x, y)| (x - phase * y).norm() <= tol))
}

/// `%.12g`-style formatting.
pub fn format_sig(x: f64) -> String {
    format_sig_digits(x, 12)
}

pub fn format_sig_digits(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x.is_infinite() { format!("{x}") } else { "0".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let out = if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    };
    if out == "-0" {
        "0".into()
    } else {
        out
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassicalState {
    pub outcomes: BTreeMap<QubitRef, bool>,
    pub inputs: BTreeMap<String, bool>,
}

impl ClassicalState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn to_sexpr(&self) -> SExpr {
        let bit = |b: &bool| SExpr::atom(if *b { "1" } else { "0" });
        SExpr::list([
            SExpr::list(
                std::iter::once(SExpr::atom("outcomes")).chain(
                    self.outcomes
                        .iter()
                        .map(|(q, b)| SExpr::list([SExpr::atom(q.to_string()), bit(b)])),
                ),
            ),
            SExpr::list(
                std::iter::once(SExpr::atom("inputs")).chain(
                    self.inputs
                        .iter()
                        .map(|(n, b)| SExpr::list([SExpr::atom(n.clone()), bit(b)])),
                ),
            ),
        ])
    }
}

/// Renders a dense vector as `(re im re im ...)`-free text, used by reports.
pub fn format_vector(v: &[Amplitude]) -> String {
    let mut s = String::new();
    for (i, a) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{} {}", format_sig(a.re), format_sig(a.im));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use dmc_oracle::{self as oracle, gates, states, DenseSim};
    use proptest::prelude::*;

    fn q(n: u32) -> QubitRef {
        QubitRef(n)
    }

    fn c(re: f64) -> Amplitude {
        Amplitude::new(re, 0.0)
    }

    fn close(a: &[Amplitude], b: &[Amplitude]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-12)
    }

    #[test]
    fn init_adds_singleton_tangles() {
        let mut s = QuantumState::new();
        s.init_qubit(q(5), plus_state()).unwrap();
        s.init_qubit(q(1), [c(1.0), c(0.0)]).unwrap();
        assert_eq!(s.tangles().len(), 2);
        assert_eq!(s.tangle_of(q(5)).unwrap().amplitudes(), &plus_state());
        assert_eq!(s.init_qubit(q(1), plus_state()), Err(StateError::DuplicateQubit(q(1))));
        assert!(matches!(
            s.init_qubit(q(2), [c(1.0), c(1.0)]),
            Err(StateError::NonNormalizedInput { .. })
        ));
    }

    #[test]
    fn merge_orders_first_then_second() {
        let mut s = QuantumState::new();
        s.init_qubit(q(1), [c(1.0), c(0.0)]).unwrap();
        s.init_qubit(q(2), [c(0.0), c(1.0)]).unwrap();
        s.merge_tangles(q(1), q(2)).unwrap();
        assert_eq!(s.tangles().len(), 1);
        let t = &s.tangles()[0];
        assert_eq!(t.qubits(), &[q(1), q(2)]);
        assert!(close(t.amplitudes(), &[c(0.0), c(1.0), c(0.0), c(0.0)]));
        let before = s.clone();
        s.merge_tangles(q(2), q(1)).unwrap();
        assert_eq!(s, before);
        assert_eq!(s.merge_tangles(q(1), q(9)), Err(StateError::UnknownQubit(q(9))));
    }

    #[test]
    fn merge_of_plus_states_is_uniform() {
        let mut s = QuantumState::new();
        s.init_qubit(q(1), plus_state()).unwrap();
        s.init_qubit(q(2), plus_state()).unwrap();
        s.merge_tangles(q(1), q(2)).unwrap();
        assert!(close(s.tangles()[0].amplitudes(), &[c(0.5); 4]));
    }

    #[test]
    fn cz_negates_the_11_amplitude() {
        let mut s = QuantumState::new();
        s.init_qubit(q(1), plus_state()).unwrap();
        s.init_qubit(q(2), plus_state()).unwrap();
        s.apply_cz(q(1), q(2)).unwrap();
        assert!(close(s.tangles()[0].amplitudes(), &[c(0.5), c(0.5), c(0.5), c(-0.5)]));
        s.apply_cz(q(2), q(1)).unwrap();
        assert!(close(s.tangles()[0].amplitudes(), &[c(0.5); 4]));
        assert_eq!(s.apply_cz(q(1), q(1)), Err(StateError::SameQubit(q(1))));

        let mut zero = QuantumState::new();
        zero.init_tangle(vec![q(1), q(2)], states::basis(2, 0)).unwrap();
        zero.apply_cz(q(1), q(2)).unwrap();
        assert!(close(zero.tangles()[0].amplitudes(), &states::basis(2, 0)));
    }

    #[test]
    fn paulis() {
        let mut s = QuantumState::new();
        s.init_qubit(q(1), [c(1.0), c(0.0)]).unwrap();
        s.apply_pauli(q(1), Pauli::X).unwrap();
        assert!(close(s.tangles()[0].amplitudes(), &[c(0.0), c(1.0)]));

        let mut p = QuantumState::new();
        p.init_qubit(q(1), plus_state()).unwrap();
        p.apply_pauli(q(1), Pauli::Z).unwrap();
        assert!(close(p.tangles()[0].amplitudes(), &states::minus()));
        p.apply_pauli(q(1), Pauli::Z).unwrap();
        assert!(close(p.tangles()[0].amplitudes(), &states::plus()));
    }

    #[test]
    fn measurement_probabilities() {
        let mut s = QuantumState::new();
        s.init_qubit(q(1), plus_state()).unwrap();
        assert!((s.project_measure(q(1), 0.0, false).unwrap() - 1.0).abs() < 1e-12);
        assert!(s.tangles().is_empty());
        assert_eq!(s.project_measure(q(1), 0.0, false), Err(StateError::AlreadyMeasured(q(1))));

        let mut z = QuantumState::new();
        z.init_qubit(q(1), [c(1.0), c(0.0)]).unwrap();
        assert!((z.project_measure(q(1), 0.0, false).unwrap() - 0.5).abs() < 1e-12);

        let mut p = QuantumState::new();
        p.init_qubit(q(1), plus_state()).unwrap();
        assert!(matches!(
            p.project_measure(q(1), 0.0, true),
            Err(StateError::ZeroProbabilityBranch { .. })
        ));
        // a failed projection leaves the state untouched
        assert_eq!(p.tangles().len(), 1);
    }

    #[test]
    fn bell_measurement_matches_dense_projection() {
        let bell = oracle::normalized(&[c(1.0), c(0.0), c(0.0), c(1.0)]);
        let mut s = QuantumState::new();
        s.init_tangle(vec![q(1), q(2)], bell.clone()).unwrap();
        let p = s.project_measure(q(1), 0.0, true).unwrap();

        let mut dense = DenseSim::new();
        dense.add(&[1, 2], &bell);
        let expected_p = dense.project(1, 0.0, 1);
        dense.contract(1, gates::xy_basis(0.0, 1));
        let rest = oracle::normalized(dense.amplitudes());

        assert!((p - expected_p).abs() < 1e-12);
        assert!((p - 0.5).abs() < 1e-12);
        let remaining = s.tangle_of(q(2)).unwrap().amplitudes();
        assert!(state_equal_up_to_phase(remaining, &rest, 1e-12).unwrap());
        assert!(state_equal_up_to_phase(remaining, &states::minus(), 1e-12).unwrap());
    }

    #[test]
    fn full_state_in_requested_order() {
        let mut s = QuantumState::new();
        s.init_qubit(q(1), [c(1.0), c(0.0)]).unwrap();
        s.init_qubit(q(2), [c(0.0), c(1.0)]).unwrap();
        // |q1 q2> = |01>, read in order (2,1) gives |10>
        assert!(close(&s.reference_full_state(&[q(2), q(1)]).unwrap(), &states::basis(2, 2)));
        assert!(close(&s.reference_full_state(&[q(1), q(2)]).unwrap(), &states::basis(2, 1)));
        assert!(matches!(s.reference_full_state(&[q(1)]), Err(StateError::OrderMismatch { .. })));

        let mut three = QuantumState::new();
        for n in 0..3 {
            three.init_qubit(q(n), plus_state()).unwrap();
        }
        let full = three.reference_full_state(&[q(0), q(1), q(2)]).unwrap();
        assert!(full.iter().all(|a| (a - c(1.0 / 8f64.sqrt())).norm() < 1e-12));
    }

    #[test]
    fn phase_equality() {
        assert!(state_equal_up_to_phase(&[c(1.0), c(0.0)], &[c(-1.0), c(0.0)], 1e-9).unwrap());
        assert!(!state_equal_up_to_phase(&[c(1.0), c(0.0)], &[c(0.0), c(1.0)], 1e-9).unwrap());
        let v = states::plus();
        assert!(state_equal_up_to_phase(&v, &v, 0.0).unwrap());
        assert_eq!(
            state_equal_up_to_phase(&v, &[c(1.0)], 1e-9),
            Err(StateError::LengthMismatch(2, 1))
        );
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.5), "0.5");
        assert_eq!(format_sig(std::f64::consts::FRAC_1_SQRT_2), "0.707106781187");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(1e-20), "1e-20");
        assert_eq!(format_sig(-2.5e-7), "-2.5e-7");
        assert_eq!(format_sig(123456.0), "123456");
    }

    #[test]
    fn state_dump() {
        let mut s = QuantumState::new();
        s.init_qubit(q(3), [c(0.0), c(1.0)]).unwrap();
        s.init_qubit(q(1), plus_state()).unwrap();
        assert_eq!(
            s.to_sexpr().to_string(),
            "(state (tangle (1) (0.707106781187 0 0.707106781187 0)) (tangle (3) (0 0 1 0)))"
        );
    }

    #[derive(Debug, Clone)]
    enum Op {
        E(u32, u32),
        X(u32),
        Z(u32),
        M(u32, f64, bool),
    }

    fn arb_ops() -> impl Strategy<Value = (usize, Vec<Op>)> {
        (2usize..=8).prop_flat_map(|n| {
            let n32 = n as u32;
            let op = prop_oneof![
                (0..n32, 0..n32).prop_filter("distinct", |(a, b)| a != b).prop_map(|(a, b)| Op::E(a, b)),
                (0..n32).prop_map(Op::X),
                (0..n32).prop_map(Op::Z),
                (0..n32, 0.0..std::f64::consts::TAU, any::<bool>()).prop_map(|(a, t, o)| Op::M(a, t, o)),
            ];
            (Just(n), prop::collection::vec(op, 0..24))
        })
    }

    proptest! {
        #[test]
        fn tangles_agree_with_dense_simulation((n, ops) in arb_ops()) {
            let mut s = QuantumState::new();
            let mut dense = DenseSim::new();
            for k in 0..n as u32 {
                s.init_qubit(q(k), plus_state()).unwrap();
                dense.add(&[k], &states::plus());
            }
            let mut live: BTreeSet<u32> = (0..n as u32).collect();
            for op in ops {
                match op {
                    Op::E(a, b) if live.contains(&a) && live.contains(&b) => {
                        s.apply_cz(q(a), q(b)).unwrap();
                        dense.cz(a, b);
                    }
                    Op::X(a) if live.contains(&a) => {
                        let before = s.tangle_of(q(a)).unwrap().norm_sqr();
                        s.apply_pauli(q(a), Pauli::X).unwrap();
                        prop_assert!((s.tangle_of(q(a)).unwrap().norm_sqr() - before).abs() < 1e-12);
                        dense.apply(&[a], &gates::x());
                    }
                    Op::Z(a) if live.contains(&a) => {
                        s.apply_pauli(q(a), Pauli::Z).unwrap();
                        dense.apply(&[a], &gates::z());
                    }
                    Op::M(a, angle, outcome) if live.contains(&a) => {
                        let (p0, p1) = s.outcome_probabilities(q(a), angle).unwrap();
                        prop_assert!((p0 + p1 - 1.0).abs() < 1e-9);
                        let pick = if outcome { p1 } else { p0 };
                        if pick < 1e-6 {
                            continue;
                        }
                        let before = dense.norm_sqr();
                        let p = s.project_measure(q(a), angle, outcome).unwrap();
                        let after = dense.project(a, angle, if outcome { 1 } else { 0 });
                        prop_assert!((p - after / before).abs() < 1e-9);
                        dense.contract(a, gates::xy_basis(angle, if outcome { 1 } else { 0 }));
                        live.remove(&a);
                    }
                    _ => {}
                }
                prop_assert!(s.check_invariants(1e-9).is_ok());
            }
            let order: Vec<QubitRef> = live.iter().map(|&k| q(k)).collect();
            let labels: Vec<u32> = live.iter().copied().collect();
            let ours = s.reference_full_state(&order).unwrap();
            let theirs = oracle::normalized(&dense.in_order(&labels));
            prop_assert!(state_equal_up_to_phase(&ours, &theirs, 1e-9).unwrap());
        }
    }
}
