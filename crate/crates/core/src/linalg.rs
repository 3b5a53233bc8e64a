//! Dense complex operators, Pauli strings and matrix exponentials.
//!
//! Qubit 0 is the most significant bit of a basis index, so an operator on
//! qubits `(0, 1, ..)` is the Kronecker product in that order. Basis state
//! `|0⟩` is spin up (`Z = +1`).

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense square complex matrix used for every Hamiltonian and propagator.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(pub DMatrix<C64>);

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(dim, dim, f))
    }

    /// Row-major construction, mostly for tests and small literals.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| rows[i][j])
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let dim = entries.len();
        Self::from_fn(dim, |i, j| if i == j { entries[i] } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Number of qubits, if the dimension is a power of two.
    pub fn n_qubits(&self) -> Option<usize> {
        let d = self.dim();
        d.is_power_of_two().then(|| d.trailing_zeros() as usize)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * C64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    /// `A† B A`.
    pub fn conjugate_by(&self, a: &Operator) -> Self {
        Self(a.0.adjoint() * &self.0 * &a.0)
    }

    /// `‖H − H†‖_F`.
    pub fn hermiticity_residual(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// `‖U†U − I‖_F`.
    pub fn unitarity_residual(&self) -> f64 {
        let d = self.dim();
        let p = self.0.adjoint() * &self.0;
        (p - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.0 * v
    }

    fn check_same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// Real eigenvalues (ascending) and eigenvectors of a Hermitian operator.
    pub fn eigh(&self) -> Result<(Vec<f64>, DMatrix<C64>)> {
        let res = self.hermiticity_residual();
        if res > 1e-9 * (1.0 + self.frobenius_norm()) {
            return Err(Error::NotHermitian { residual: res });
        }
        let herm = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
        Ok((values, vectors))
    }

    /// Maximum absolute entry difference.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn try_add(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self(&self.0 * &other.0))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        self.0 += &rhs.0;
    }
}

/// Single-qubit Pauli label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Operator {
        let o = ZERO;
        let l = ONE;
        match self {
            Pauli::I => Operator::from_rows(&[&[l, o], &[o, l]]),
            Pauli::X => Operator::from_rows(&[&[o, l], &[l, o]]),
            Pauli::Y => Operator::from_rows(&[&[o, -I], &[I, o]]),
            Pauli::Z => Operator::from_rows(&[&[l, o], &[o, -l]]),
        }
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn phases(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis, qubit 0 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n])
    }

    /// Identity except for the listed `(qubit, pauli)` factors.
    pub fn sparse(n: usize, factors: &[(usize, Pauli)]) -> Self {
        let mut s = Self::identity(n);
        for &(q, p) in factors {
            s.0[q] = p;
        }
        s
    }

    /// Parses labels like `"IXZ"`.
    pub fn parse(label: &str) -> Option<Self> {
        label
            .chars()
            .map(|c| match c {
                'I' => Some(Pauli::I),
                'X' => Some(Pauli::X),
                'Y' => Some(Pauli::Y),
                'Z' => Some(Pauli::Z),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    /// Decodes the base-4 index used by [`pauli_coefficients`].
    pub fn from_index(mut index: usize, n: usize) -> Self {
        let mut v = vec![Pauli::I; n];
        for q in (0..n).rev() {
            v[q] = Pauli::ALL[index % 4];
            index /= 4;
        }
        Self(v)
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, p| acc * 4 + *p as usize)
    }

    /// Qubits carrying a non-identity factor.
    pub fn support(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, p)| **p != Pauli::I).map(|(q, _)| q).collect()
    }

    pub fn weight(&self) -> usize {
        self.support().len()
    }

    fn masks(&self) -> (usize, usize, u32) {
        let n = self.0.len();
        let mut xm = 0;
        let mut zm = 0;
        let mut ny = 0;
        for (q, p) in self.0.iter().enumerate() {
            let bit = 1 << (n - 1 - q);
            if p.flips() {
                xm |= bit;
            }
            if p.phases() {
                zm |= bit;
            }
            if *p == Pauli::Y {
                ny += 1;
            }
        }
        (xm, zm, ny)
    }

    pub fn matrix(&self) -> Operator {
        let dim = 1 << self.0.len();
        let (xm, zm, ny) = self.masks();
        let global = I.powu(ny);
        let mut m = Operator::zeros(dim);
        for y in 0..dim {
            let sign = if (y & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m.0[(y ^ xm, y)] = global * sign;
        }
        m
    }

    /// `Tr(P M) / 2^n`.
    pub fn coefficient_in(&self, op: &Operator) -> C64 {
        let dim = op.dim();
        let (xm, zm, ny) = self.masks();
        let mut acc = ZERO;
        for x in 0..dim {
            let v = op.0[(x, x ^ xm)];
            if (x & zm).count_ones() % 2 == 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc * I.powu(ny) / dim as f64
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

/// All `4^n` Pauli coefficients `Tr(σ_ν M)/2^n`, indexed by [`PauliString::index`].
pub fn pauli_coefficients(op: &Operator) -> Result<Vec<C64>> {
    let n = op
        .n_qubits()
        .ok_or_else(|| Error::Domain(format!("dimension {} is not a power of two", op.dim())))?;
    Ok((0..1usize << (2 * n)).map(|k| PauliString::from_index(k, n).coefficient_in(op)).collect())
}

/// Real Pauli coefficients of a Hermitian operator; imaginary residue above
/// `1e-10` is an error.
pub fn real_pauli_coefficients(op: &Operator) -> Result<Vec<f64>> {
    let coeffs = pauli_coefficients(op)?;
    let worst = coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if worst > 1e-10 {
        return Err(Error::NotHermitian { residual: worst });
    }
    Ok(coeffs.into_iter().map(|c| c.re).collect())
}

/// Embeds a single-qubit operator at `qubit` in an `n`-qubit register.
pub fn embed(single: &Operator, qubit: usize, n: usize) -> Operator {
    let mut out = Operator::identity(1);
    for q in 0..n {
        out = if q == qubit { out.kron(single) } else { out.kron(&Operator::identity(2)) };
    }
    out
}

/// Kronecker product of a list, first factor most significant.
pub fn kron_all(ops: &[Operator]) -> Operator {
    ops.iter().fold(Operator::identity(1), |acc, o| acc.kron(o))
}

/// Pauli string operator from a label such as `"XZ"`.
pub fn pauli_op(label: &str) -> Operator {
    PauliString::parse(label).expect("invalid Pauli label").matrix()
}

/// `exp(-i θ/2 X)`.
pub fn rx(theta: f64) -> Operator {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    Operator::from_rows(&[&[c, s], &[s, c]])
}

/// `exp(-i θ/2 Y)`.
pub fn ry(theta: f64) -> Operator {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new((theta / 2.0).sin(), 0.0);
    Operator::from_rows(&[&[c, -s], &[s, c]])
}

/// `exp(-i θ/2 Z)`.
pub fn rz(theta: f64) -> Operator {
    Operator::diagonal(&[C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0)])
}

/// `exp(-i H dt)` for Hermitian `H`, via eigendecomposition. Reference path.
pub fn expm_hermitian(h: &Operator, dt: f64) -> Result<Operator> {
    let (vals, vecs) = h.eigh()?;
    let phases: Vec<C64> = vals.iter().map(|&e| C64::from_polar(1.0, -e * dt)).collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(phases));
    Ok(Operator(&vecs * d * vecs.adjoint()))
}

/// `exp(-i H dt)`. Closed form for 2×2, Padé scaling-and-squaring otherwise.
pub fn expm_step(h: &Operator, dt: f64) -> Operator {
    if h.dim() == 2 {
        return su2_step(h, dt);
    }
    expm(&h.scale_c(C64::new(0.0, -dt)))
}

fn su2_step(h: &Operator, dt: f64) -> Operator {
    // H = h0 I + hx X + hy Y + hz Z
    let m = &h.0;
    let h0 = 0.5 * (m[(0, 0)] + m[(1, 1)]).re;
    let hz = 0.5 * (m[(0, 0)] - m[(1, 1)]).re;
    let hx = 0.5 * (m[(0, 1)] + m[(1, 0)]).re;
    let hy = 0.5 * (m[(1, 0)] - m[(0, 1)]).im;
    su2_exp(h0, hx, hy, hz, dt)
}

/// `exp(-i dt (h0 + hx X + hy Y + hz Z))`.
pub fn su2_exp(h0: f64, hx: f64, hy: f64, hz: f64, dt: f64) -> Operator {
    let norm = (hx * hx + hy * hy + hz * hz).sqrt();
    let theta = norm * dt;
    let (c, s) = (theta.cos(), theta.sin());
    let (nx, ny, nz) = if norm > 0.0 { (hx / norm, hy / norm, hz / norm) } else { (0.0, 0.0, 0.0) };
    let g = C64::from_polar(1.0, -h0 * dt);
    let a = C64::new(c, -s * nz);
    let b = C64::new(-s * ny, -s * nx);
    let cc = C64::new(s * ny, -s * nx);
    let d = C64::new(c, s * nz);
    Operator::from_rows(&[&[g * a, g * b], &[g * cc, g * d]])
}

const PADE_ORDER: usize = 8;

/// Matrix exponential of a general complex matrix by scaling and squaring with
/// a diagonal Padé approximant.
pub fn expm(a: &Operator) -> Operator {
    let dim = a.dim();
    let norm1 = (0..dim)
        .map(|j| (0..dim).map(|i| a.0[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = &a.0 * C64::new(0.5f64.powi(squarings), 0.0);

    // c_k = (2q-k)! q! / ((2q)! k! (q-k)!)
    let q = PADE_ORDER;
    let mut coeffs = vec![1.0; q + 1];
    for k in 1..=q {
        coeffs[k] = coeffs[k - 1] * (q + 1 - k) as f64 / (k * (2 * q + 1 - k)) as f64;
    }
    let id = DMatrix::<C64>::identity(dim, dim);
    let mut num = &id * C64::new(coeffs[0], 0.0);
    let mut den = num.clone();
    let mut power = id.clone();
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        power = &power * &scaled;
        let term = &power * C64::new(c, 0.0);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut result = den.lu().solve(&num).expect("Padé denominator is singular");
    for _ in 0..squarings {
        result = &result * &result;
    }
    Operator(result)
}

/// `M^{-1/2}` for a Hermitian positive-definite matrix.
pub fn inverse_sqrt_psd(m: &Operator) -> Result<Operator> {
    let (vals, vecs) = m.eigh()?;
    if vals.iter().any(|&v| v <= 1e-14) {
        return Err(Error::Degenerate("matrix is not positive definite".into()));
    }
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::new(1.0 / v.sqrt(), 0.0)),
    ));
    Ok(Operator(&vecs * d * vecs.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_string_matrix_matches_kron() {
        let s = PauliString::parse("XYZ").unwrap();
        let k = Pauli::X.matrix().kron(&Pauli::Y.matrix()).kron(&Pauli::Z.matrix());
        assert!(s.matrix().max_abs_diff(&k) < 1e-15);
    }

    #[test]
    fn coefficients_recover_linear_combination() {
        let op = &pauli_op("XZ").scale(0.3) + &pauli_op("YY").scale(-1.25);
        let c = pauli_coefficients(&op).unwrap();
        for (k, v) in c.iter().enumerate() {
            let label = PauliString::from_index(k, 2).to_string();
            let expect = match label.as_str() {
                "XZ" => 0.3,
                "YY" => -1.25,
                _ => 0.0,
            };
            assert!((v - C64::new(expect, 0.0)).norm() < 1e-14, "{label}");
        }
    }

    #[test]
    fn index_round_trip() {
        for k in 0..64 {
            assert_eq!(PauliString::from_index(k, 3).index(), k);
        }
    }

    #[test]
    fn pade_matches_eigen_path() {
        let h = &(&pauli_op("XZ").scale(0.7) + &pauli_op("IY").scale(-0.4)) + &pauli_op("ZZ").scale(1.3);
        let a = expm_step(&h, 2.5);
        let b = expm_hermitian(&h, 2.5).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
        assert!(a.unitarity_residual() < 1e-12);
    }

    #[test]
    fn su2_closed_form_matches_pade() {
        let h = &(&pauli_op("X").scale(0.3) + &pauli_op("Y").scale(-0.2)) + &pauli_op("Z").scale(0.9);
        let h = &h + &Operator::identity(2).scale(0.1);
        let a = expm_step(&h, 1.7);
        let b = expm(&h.scale_c(C64::new(0.0, -1.7)));
        assert!(a.max_abs_diff(&b) < 1e-13);
    }

    #[test]
    fn embed_places_operator() {
        let e = embed(&Pauli::X.matrix(), 1, 3);
        assert!(e.max_abs_diff(&pauli_op("IXI")) < 1e-15);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = Operator::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]);
        assert!(matches!(m.eigh(), Err(Error::NotHermitian { .. })));
    }
}
