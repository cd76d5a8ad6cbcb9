//! Dense reference simulator.
//!
//! Everything in here works on one monolithic amplitude vector with
//! hard-coded gate matrices. It deliberately shares no code with the tangle
//! based VM so that it can serve as an independent check of it: measurement
//! is modelled as a non-destructive, non-renormalising projector (the branch
//! probability is the squared norm of what is left), whereas the VM removes
//! measured qubits and renormalises.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "matrix must be square");
            data.extend_from_slice(r);
        }
        Matrix { dim, data }
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), dim * dim);
        Matrix {
            dim,
            data: entries.iter().map(|&x| c(x, 0.0)).collect(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C64::default(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = c(1.0, 0.0);
        }
        Matrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut data = vec![C64::default(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::default() {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Matrix { dim: n, data }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.dim, v.len());
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.at(i, j) * v[j]).sum())
            .collect()
    }

    /// Column `j`, i.e. the image of basis state `|j⟩`.
    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self.at(i, j)).collect()
    }

    pub fn adjoint(&self) -> Matrix {
        let n = self.dim;
        let mut data = vec![C64::default(); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        Matrix { dim: n, data }
    }
}

/// Kronecker product; `a` acts on the more significant qubits.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.dim * b.dim;
    let mut data = vec![C64::default(); n * n];
    for i in 0..a.dim {
        for j in 0..a.dim {
            let x = a.at(i, j);
            for k in 0..b.dim {
                for l in 0..b.dim {
                    data[(i * b.dim + k) * n + j * b.dim + l] = x * b.at(k, l);
                }
            }
        }
    }
    Matrix { dim: n, data }
}

pub fn kron_all(ms: &[Matrix]) -> Matrix {
    ms.iter()
        .fold(Matrix::identity(1), |acc, m| kron(&acc, m))
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

pub mod gates {
    use super::*;

    pub fn h() -> Matrix {
        let s = FRAC_1_SQRT_2;
        Matrix::from_real(2, &[s, s, s, -s])
    }

    pub fn x() -> Matrix {
        Matrix::from_real(2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn z() -> Matrix {
        Matrix::from_real(2, &[1.0, 0.0, 0.0, -1.0])
    }

    /// `J(α) = 1/√2 [[1, e^{iα}], [1, −e^{iα}]]`.
    pub fn j(alpha: f64) -> Matrix {
        let s = FRAC_1_SQRT_2;
        let e = C64::from_polar(s, alpha);
        Matrix::from_rows(&[&[c(s, 0.0), e], &[c(s, 0.0), -e]])
    }

    pub fn cz() -> Matrix {
        Matrix::from_real(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, -1.0,
            ],
        )
    }

    /// Controlled-X with the control on the first (most significant) qubit.
    pub fn cnot() -> Matrix {
        Matrix::from_real(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        )
    }

    /// Basis vectors `|±_β⟩ = (|0⟩ ± e^{iβ}|1⟩)/√2`; outcome 0 is `+`.
    pub fn xy_basis(beta: f64, outcome: u8) -> [C64; 2] {
        let s = FRAC_1_SQRT_2;
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        [c(s, 0.0), C64::from_polar(sign * s, beta)]
    }

    /// Rank-one projector onto `|±_β⟩`.
    pub fn xy_projector(beta: f64, outcome: u8) -> Matrix {
        let v = xy_basis(beta, outcome);
        Matrix::from_rows(&[
            &[v[0] * v[0].conj(), v[0] * v[1].conj()],
            &[v[1] * v[0].conj(), v[1] * v[1].conj()],
        ])
    }
}

pub mod states {
    use super::*;

    pub fn zero() -> Vec<C64> {
        vec![c(1.0, 0.0), c(0.0, 0.0)]
    }

    pub fn one() -> Vec<C64> {
        vec![c(0.0, 0.0), c(1.0, 0.0)]
    }

    pub fn plus() -> Vec<C64> {
        vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]
    }

    pub fn minus() -> Vec<C64> {
        vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)]
    }

    pub fn basis(n: usize, index: usize) -> Vec<C64> {
        let mut v = vec![C64::default(); 1 << n];
        v[index] = c(1.0, 0.0);
        v
    }

    /// `(|0…0⟩ + |1…1⟩)/√2`.
    pub fn ghz(n: usize) -> Vec<C64> {
        let mut v = vec![C64::default(); 1 << n];
        v[0] = c(FRAC_1_SQRT_2, 0.0);
        v[(1 << n) - 1] = c(FRAC_1_SQRT_2, 0.0);
        v
    }

    /// GHZ state with a Hadamard on every qubit.
    pub fn ghz_diagonal(n: usize) -> Vec<C64> {
        let hs: Vec<Matrix> = (0..n).map(|_| gates::h()).collect();
        kron_all(&hs).apply(&ghz(n))
    }

    /// `α|0…0⟩ + β|1…1⟩`.
    pub fn cat(n: usize, alpha: C64, beta: C64) -> Vec<C64> {
        let mut v = vec![C64::default(); 1 << n];
        v[0] = alpha;
        v[(1 << n) - 1] = beta;
        v
    }

    /// Normalised state with i.i.d. Gaussian amplitudes (Haar distributed).
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
        let mut v: Vec<C64> = (0..1 << n)
            .map(|_| c(gaussian(rng), gaussian(rng)))
            .collect();
        let norm = norm(&v);
        for a in &mut v {
            *a /= norm;
        }
        v
    }

    fn gaussian<R: Rng>(rng: &mut R) -> f64 {
        // Box-Muller
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized(v: &[C64]) -> Vec<C64> {
    let n = norm(v);
    v.iter().map(|a| a / n).collect()
}

/// `‖a − e^{iθ} b‖∞` minimised over the phase picked from the largest entry
/// of `b`.
pub fn phase_distance(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (k, _) = b
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, x)| {
            if x.norm() > best.1 {
                (i, x.norm())
            } else {
                best
            }
        });
    let phase = if b[k].norm() == 0.0 || a[k].norm() == 0.0 {
        c(1.0, 0.0)
    } else {
        let r = a[k] / b[k];
        r / r.norm()
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}

pub fn equal_up_to_phase(a: &[C64], b: &[C64], tol: f64) -> bool {
    a.len() == b.len() && phase_distance(a, b) <= tol
}

/// A full state vector over labelled qubits. Label order is the bit order,
/// most significant first.
#[derive(Clone, Debug)]
pub struct DenseSim {
    labels: Vec<u32>,
    amps: Vec<C64>,
}

impl Default for DenseSim {
    fn default() -> Self {
        DenseSim::new()
    }
}

impl DenseSim {
    pub fn new() -> Self {
        DenseSim {
            labels: Vec::new(),
            amps: vec![c(1.0, 0.0)],
        }
    }

    /// Appends qubits (jointly in state `amps`) as the least significant bits.
    pub fn add(&mut self, labels: &[u32], amps: &[C64]) {
        assert_eq!(amps.len(), 1 << labels.len());
        for l in labels {
            assert!(!self.labels.contains(l), "qubit {l} added twice");
        }
        self.amps = kron_vec(&self.amps, amps);
        self.labels.extend_from_slice(labels);
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn position(&self, label: u32) -> usize {
        self.labels
            .iter()
            .position(|&l| l == label)
            .unwrap_or_else(|| panic!("unknown qubit {label}"))
    }

    fn shift(&self, label: u32) -> usize {
        self.labels.len() - 1 - self.position(label)
    }

    /// Applies a `2^k × 2^k` matrix to the listed qubits (first label is
    /// the most significant bit of the matrix index).
    pub fn apply(&mut self, targets: &[u32], m: &Matrix) {
        let k = targets.len();
        assert_eq!(m.dim(), 1 << k);
        let shifts: Vec<usize> = targets.iter().map(|&t| self.shift(t)).collect();
        let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let mut out = vec![C64::default(); self.amps.len()];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            let index = |sub: usize| -> usize {
                let mut i = base;
                for (bit, s) in shifts.iter().enumerate() {
                    if sub >> (k - 1 - bit) & 1 == 1 {
                        i |= 1 << s;
                    }
                }
                i
            };
            for row in 0..1 << k {
                let mut acc = C64::default();
                for col in 0..1 << k {
                    acc += m.at(row, col) * self.amps[index(col)];
                }
                out[index(row)] = acc;
            }
        }
        self.amps = out;
    }

    pub fn cz(&mut self, a: u32, b: u32) {
        self.apply(&[a, b], &gates::cz());
    }

    /// Projects `label` onto `|±_β⟩` without removing it or renormalising.
    /// Returns the squared norm afterwards.
    pub fn project(&mut self, label: u32, beta: f64, outcome: u8) -> f64 {
        self.apply(&[label], &gates::xy_projector(beta, outcome));
        self.norm_sqr()
    }

    /// Removes `label` by taking the inner product with `bra` on it.
    pub fn contract(&mut self, label: u32, bra: [C64; 2]) {
        let s = self.shift(label);
        let pos = self.position(label);
        let mut out = Vec::with_capacity(self.amps.len() / 2);
        for i in 0..self.amps.len() {
            if i >> s & 1 == 1 {
                continue;
            }
            let hi = i | (1 << s);
            out.push(bra[0].conj() * self.amps[i] + bra[1].conj() * self.amps[hi]);
        }
        // out is ordered by the remaining bits, which keep their relative order.
        self.amps = out;
        self.labels.remove(pos);
    }

    /// The state re-ordered to `order`, which must be a permutation of the
    /// labels.
    pub fn in_order(&self, order: &[u32]) -> Vec<C64> {
        assert_eq!(order.len(), self.labels.len());
        let n = order.len();
        let src_shift: Vec<usize> = order.iter().map(|&l| self.shift(l)).collect();
        (0..self.amps.len())
            .map(|dst| {
                let mut src = 0;
                for (k, s) in src_shift.iter().enumerate() {
                    if dst >> (n - 1 - k) & 1 == 1 {
                        src |= 1 << s;
                    }
                }
                self.amps[src]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_squares_to_identity() {
        let hh = gates::h().mul(&gates::h());
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((hh.at(i, j) - c(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn j_zero_is_hadamard() {
        assert!(phase_distance(&gates::j(0.0).column(0), &gates::h().column(0)) < 1e-15);
        assert!(phase_distance(&gates::j(0.0).column(1), &gates::h().column(1)) < 1e-15);
    }

    #[test]
    fn cnot_is_h_cz_h() {
        let ih = kron(&Matrix::identity(2), &gates::h());
        let m = ih.mul(&gates::cz()).mul(&ih);
        for i in 0..4 {
            assert!(phase_distance(&m.column(i), &gates::cnot().column(i)) < 1e-12);
        }
    }

    #[test]
    fn dense_apply_respects_label_order() {
        let mut sim = DenseSim::new();
        sim.add(&[7], &states::one());
        sim.add(&[3], &states::zero());
        sim.apply(&[3, 7], &gates::cnot());
        // control 3 is |0⟩: nothing happens
        assert_eq!(sim.in_order(&[7, 3]), states::basis(2, 0b10));
        sim.apply(&[7, 3], &gates::cnot());
        assert_eq!(sim.in_order(&[7, 3]), states::basis(2, 0b11));
    }

    #[test]
    fn projection_probabilities_sum_to_one() {
        let mut rng = rand::thread_rng();
        let psi = states::random(3, &mut rng);
        let mut total = 0.0;
        for o in 0..2 {
            let mut sim = DenseSim::new();
            sim.add(&[0, 1, 2], &psi);
            total += sim.project(1, 0.7, o);
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bell_projection_leaves_minus() {
        let mut sim = DenseSim::new();
        sim.add(&[1, 2], &states::ghz(2));
        let p = sim.project(1, 0.0, 1);
        assert!((p - 0.5).abs() < 1e-12);
        sim.contract(1, gates::xy_basis(0.0, 1));
        let rest = normalized(sim.amplitudes());
        assert!(equal_up_to_phase(&rest, &states::minus(), 1e-12));
    }
}
