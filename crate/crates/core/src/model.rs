//! Spin-qubit Hamiltonians: the driven exchange-coupled pair, its effective
//! noise channels, lattices and crosstalk extraction.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse_sqrt_psd, pauli_op, Operator, Pauli, PauliString, C64, ONE, ZERO};
use crate::propagate::Hamiltonian;
use crate::pulse::Waveform;

/// Largest register handled with dense matrices.
pub const MAX_DENSE_QUBITS: usize = 12;

/// `θ = atan(J / (ΔE_z + √(J² + ΔE_z²)))`.
pub fn mixing_angle(j: f64, dez: f64) -> Result<f64> {
    if !(dez > 0.0) {
        return Err(Error::Domain(format!("Zeeman difference must be positive, got {dez}")));
    }
    if !(j >= 0.0) {
        return Err(Error::Domain(format!("coupling must be non-negative, got {j}")));
    }
    Ok((j / (dez + j.hypot(dez))).atan())
}

/// Exchange-coupled pair, drive on qubit 2 (the right factor).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoQubitModel {
    #[serde(rename = "Ez", default)]
    pub ez: f64,
    #[serde(rename = "dEz")]
    pub dez: f64,
    #[serde(rename = "J")]
    pub j: f64,
}

impl TwoQubitModel {
    pub fn new(ez: f64, dez: f64, j: f64) -> Result<Self> {
        mixing_angle(j, dez)?;
        Ok(Self { ez, dez, j })
    }

    /// `ΔE_z = 0.2 rad/ns` with the given coupling.
    pub fn reference(j: f64) -> Self {
        Self { ez: 0.0, dez: 0.2, j }
    }

    pub fn with_coupling(&self, j: f64) -> Self {
        Self { j, ..*self }
    }

    pub fn theta(&self) -> f64 {
        (self.j / (self.dez + self.j.hypot(self.dez))).atan()
    }

    /// `ΔẼ_z = √(J² + ΔE_z²)`.
    pub fn dressed_splitting(&self) -> f64 {
        self.j.hypot(self.dez)
    }
}

/// Rotating-frame pair Hamiltonian at one instant.
pub fn rotating_frame_hamiltonian(model: &TwoQubitModel, omega2: f64, t: f64) -> Operator {
    let tan = model.theta().tan();
    let phase = model.dressed_splitting() * t;
    let mut h = pauli_op("IX").scale(omega2 / 2.0);
    h += &pauli_op("ZZ").scale(model.j / 4.0);
    h += &pauli_op("XZ").scale(tan * omega2 / 2.0 * phase.cos());
    h += &pauli_op("YZ").scale(-tan * omega2 / 2.0 * phase.sin());
    h
}

/// Rotating-frame pair Hamiltonian driven by a waveform, optionally with
/// per-qubit frequency offsets `δ_i(t)/2·Z_i` held constant over each step.
pub struct RotatingFrame<'a> {
    pub model: TwoQubitModel,
    pub pulse: &'a dyn Waveform,
    pub detuning: Option<[&'a (dyn Fn(f64) -> f64 + Sync); 2]>,
}

impl<'a> RotatingFrame<'a> {
    pub fn new(model: TwoQubitModel, pulse: &'a dyn Waveform) -> Self {
        Self { model, pulse, detuning: None }
    }
}

impl Hamiltonian for RotatingFrame<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn at(&self, t: f64) -> Operator {
        let mut h = rotating_frame_hamiltonian(&self.model, self.pulse.amplitude(t), t);
        if let Some([d1, d2]) = &self.detuning {
            h += &pauli_op("ZI").scale(d1(t) / 2.0);
            h += &pauli_op("IZ").scale(d2(t) / 2.0);
        }
        h
    }
}

/// Which qubit-1 Pauli accompanies a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    /// `ZZ`, `v ≡ 1`.
    Static,
    /// `XZ`, `v = Ω cos(ΔẼ_z t)`.
    InPhase,
    /// `YZ`, `v = −Ω sin(ΔẼ_z t)`.
    Quadrature,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 3] = [ChannelKind::Static, ChannelKind::InPhase, ChannelKind::Quadrature];

    pub fn label(self) -> &'static str {
        match self {
            ChannelKind::Static => "ZZ",
            ChannelKind::InPhase => "XZ",
            ChannelKind::Quadrature => "YZ",
        }
    }

    /// Pauli on the undriven qubit.
    pub fn spectator_pauli(self) -> Pauli {
        match self {
            ChannelKind::Static => Pauli::Z,
            ChannelKind::InPhase => Pauli::X,
            ChannelKind::Quadrature => Pauli::Y,
        }
    }
}

/// One effective single-qubit noise channel `ε·v(t)·Z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseChannel {
    pub kind: ChannelKind,
    pub epsilon: f64,
    pub dressed_splitting: f64,
}

impl NoiseChannel {
    /// `v(t)` given the drive amplitude `Ω(t)`.
    pub fn profile(&self, t: f64, omega: f64) -> f64 {
        match self.kind {
            ChannelKind::Static => 1.0,
            ChannelKind::InPhase => omega * (self.dressed_splitting * t).cos(),
            ChannelKind::Quadrature => -omega * (self.dressed_splitting * t).sin(),
        }
    }

    pub fn sample(&self, pulse: &dyn Waveform, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.profile(t, pulse.amplitude(t))).collect()
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }
}

/// The three channels obtained after tracing out the undriven qubit.
pub fn effective_noise_channels(model: &TwoQubitModel) -> [NoiseChannel; 3] {
    let half_tan = model.theta().tan() / 2.0;
    let s = model.dressed_splitting();
    [
        NoiseChannel { kind: ChannelKind::Static, epsilon: model.j / 4.0, dressed_splitting: s },
        NoiseChannel { kind: ChannelKind::InPhase, epsilon: half_tan, dressed_splitting: s },
        NoiseChannel { kind: ChannelKind::Quadrature, epsilon: half_tan, dressed_splitting: s },
    ]
}

/// Qubit register with uniform exchange on a set of edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeModel {
    pub n_qubits: usize,
    pub edges: Vec<(usize, usize)>,
    pub omegas: Vec<f64>,
    #[serde(rename = "J")]
    pub j: f64,
    /// Uniform crosstalk factor; `None` derives `tanθ_ij/2` per edge.
    #[serde(default)]
    pub beta: Option<f64>,
}

impl LatticeModel {
    pub fn new(n_qubits: usize, edges: Vec<(usize, usize)>, omegas: Vec<f64>, j: f64) -> Result<Self> {
        let lat = Self { n_qubits, edges, omegas, j, beta: None };
        lat.validate()?;
        Ok(lat)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omegas.len() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, found: self.omegas.len() });
        }
        if !(self.j >= 0.0) {
            return Err(Error::Domain(format!("coupling must be non-negative, got {}", self.j)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == b {
                return Err(Error::Domain(format!("self-loop on qubit {a}")));
            }
            if a >= self.n_qubits || b >= self.n_qubits {
                return Err(Error::Domain(format!("edge ({a}, {b}) out of range")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Domain(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(())
    }

    /// Evenly spaced chain, `ω_i = i·spacing`.
    pub fn chain(n: usize, spacing: f64, j: f64) -> Self {
        Self {
            n_qubits: n,
            edges: (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            omegas: (0..n).map(|i| i as f64 * spacing).collect(),
            j,
            beta: None,
        }
    }

    /// Six-site ring (one hexagonal plaquette), `ω_i = i·spacing`.
    pub fn honeycomb6(spacing: f64, j: f64) -> Self {
        let mut lat = Self::chain(6, spacing, j);
        lat.edges.push((5, 0));
        lat
    }

    /// Two rows of five: top `0..5`, bottom `5..10`, rungs `(c, c+5)`.
    /// Frequencies follow the snake path `0..4, 9..5`.
    pub fn ladder10(spacing: f64, j: f64) -> Self {
        let mut edges = Vec::new();
        for c in 0..4 {
            edges.push((c, c + 1));
            edges.push((c + 5, c + 6));
        }
        for c in 0..5 {
            edges.push((c, c + 5));
        }
        let omegas = (0..10).map(|q| if q < 5 { q as f64 } else { (14 - q) as f64 } * spacing).collect();
        Self { n_qubits: 10, edges, omegas, j, beta: None }
    }

    /// Built-in topology by name (`chain4`, `honeycomb6`, `ladder10`).
    pub fn builtin(name: &str, spacing: f64, j: f64) -> Result<Self> {
        match name {
            "chain4" => Ok(Self::chain(4, spacing, j)),
            "honeycomb6" => Ok(Self::honeycomb6(spacing, j)),
            "ladder10" => Ok(Self::ladder10(spacing, j)),
            _ => Err(Error::Domain(format!("unknown topology '{name}', expected chain4, honeycomb6 or ladder10"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lat: Self = serde_json::from_str(text)?;
        lat.validate()?;
        Ok(lat)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn with_coupling(&self, j: f64) -> Self {
        Self { j, ..self.clone() }
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| if a == q { Some(b) } else if b == q { Some(a) } else { None })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    /// `Δ_ij = ω_j − ω_i`.
    pub fn detuning(&self, i: usize, j: usize) -> f64 {
        self.omegas[j] - self.omegas[i]
    }

    /// Crosstalk factor for the pair.
    pub fn beta_for(&self, i: usize, j: usize) -> f64 {
        match self.beta {
            Some(b) => b,
            None => {
                let d = self.detuning(i, j).abs();
                if d == 0.0 {
                    0.0
                } else {
                    (self.j / (d + self.j.hypot(d))).atan().tan() / 2.0
                }
            }
        }
    }
}

/// Lab-frame Heisenberg Hamiltonian `−Σ ω_i/2 Z_i + Σ J/4 (XX+YY+ZZ)`.
pub fn lattice_hamiltonian(lat: &LatticeModel) -> Result<Operator> {
    let n = lat.n_qubits;
    if n > MAX_DENSE_QUBITS {
        return Err(Error::ResourceLimit(format!("{n} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}")));
    }
    lat.validate()?;
    let dim = 1usize << n;
    let bit = |q: usize| 1usize << (n - 1 - q);
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for x in 0..dim {
        let mut diag = 0.0;
        for q in 0..n {
            let z = if x & bit(q) == 0 { 1.0 } else { -1.0 };
            diag -= lat.omegas[q] / 2.0 * z;
        }
        for &(a, b) in &lat.edges {
            let same = (x & bit(a) == 0) == (x & bit(b) == 0);
            diag += lat.j / 4.0 * if same { 1.0 } else { -1.0 };
            if !same {
                // (XX + YY)/4 swaps antiparallel pairs with amplitude 1/2
                h[(x ^ bit(a) ^ bit(b), x)] += C64::new(lat.j / 2.0, 0.0);
            }
        }
        h[(x, x)] += C64::new(diag, 0.0);
    }
    Ok(Operator(h))
}

/// Assignment of basis states to blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<usize>,
}

impl Partition {
    /// Every computational basis state is its own block.
    pub fn computational(n_qubits: usize) -> Self {
        Self { labels: (0..1usize << n_qubits).collect() }
    }

    /// Blocks labeled by the configuration of the qubits outside `active`.
    pub fn spectators(n_qubits: usize, active: &[usize]) -> Self {
        let mask: usize = (0..n_qubits).filter(|q| !active.contains(q)).map(|q| 1 << (n_qubits - 1 - q)).sum();
        Self { labels: (0..1usize << n_qubits).map(|x| x & mask).collect() }
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.iter().collect::<std::collections::BTreeSet<_>>().len()
    }

    fn same_block(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }
}

/// Least-action frame change that block-diagonalizes a Hermitian operator.
#[derive(Clone, Debug)]
pub struct BlockDiagonalization {
    pub transform: Operator,
    pub transformed: Operator,
    /// Frobenius norm of the inter-block part of `transformed`.
    pub leakage: f64,
    /// Smallest eigenvector weight inside its assigned block.
    pub min_weight: f64,
}

/// Effective crosstalk coefficients of a driven qubit, relative to `Ω` with
/// the bare drive written `(Ω/2)·X_k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrosstalkReport {
    /// Driven qubit `k` → coefficient of `X_k`.
    pub alpha: BTreeMap<usize, f64>,
    /// `(j, k)` → `C2` of `X_j Z_k`.
    pub c2: BTreeMap<(usize, usize), f64>,
    /// `(i, j, k)` → `C3` of `X_i Z_j Z_k`, `j < k`.
    pub c3: BTreeMap<(usize, usize, usize), f64>,
    /// Largest coefficient not classified above.
    pub other_max: f64,
}

impl CrosstalkReport {
    pub fn max_c2(&self) -> f64 {
        self.c2.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_c3(&self) -> f64 {
        self.c3.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "alpha": self.alpha.iter().map(|(k, v)| serde_json::json!({"qubit": k, "value": v})).collect::<Vec<_>>(),
            "c2": self.c2.iter().map(|((j, k), v)| serde_json::json!({"x": j, "z": k, "value": v})).collect::<Vec<_>>(),
            "c3": self.c3.iter().map(|((i, j, k), v)| serde_json::json!({"x": i, "z": [j, k], "value": v})).collect::<Vec<_>>(),
            "other_max": self.other_max,
        })
    }
}

/// Exact block diagonalization: eigenvectors are assigned to blocks by weight
/// and `T = S·S_BD†·(S_BD S_BD†)^{-1/2}` where `S_BD` is the block-diagonal
/// part of the eigenvector matrix `S`.
pub fn block_diagonalize(h: &Operator, partition: &Partition) -> Result<BlockDiagonalization> {
    let dim = h.dim();
    if partition.labels.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: partition.labels.len() });
    }
    let (_, vecs) = h.eigh()?;

    let mut capacity: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in &partition.labels {
        *capacity.entry(l).or_default() += 1;
    }
    let weight = |col: usize, block: usize| -> f64 {
        (0..dim).filter(|&r| partition.labels[r] == block).map(|r| vecs[(r, col)].norm_sqr()).sum()
    };
    // greedy assignment, strongest weights first
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for col in 0..dim {
        for &b in capacity.keys() {
            let w = weight(col, b);
            if w > 1e-3 {
                candidates.push((w, col, b));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned = vec![usize::MAX; dim];
    let mut min_weight: f64 = 1.0;
    for (w, col, b) in candidates {
        if assigned[col] != usize::MAX || capacity[&b] == 0 {
            continue;
        }
        assigned[col] = b;
        *capacity.get_mut(&b).unwrap() -= 1;
        min_weight = min_weight.min(w);
    }
    if assigned.iter().any(|&b| b == usize::MAX) || min_weight < 0.5 {
        return Err(Error::Degenerate(format!(
            "eigenvectors cannot be assigned to blocks uniquely (weight {min_weight:.3})"
        )));
    }

    // order the eigenvector columns so that column c lives in block of basis state c
    let mut slots: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for r in 0..dim {
        slots.entry(partition.labels[r]).or_default().push(r);
    }
    let mut s = DMatrix::<C64>::zeros(dim, dim);
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for col in 0..dim {
        let b = assigned[col];
        let k = next.entry(b).or_default();
        let target = slots[&b][*k];
        *k += 1;
        s.set_column(target, &vecs.column(col));
    }
    let s_bd = DMatrix::from_fn(dim, dim, |r, c| if partition.same_block(r, c) { s[(r, c)] } else { ZERO });
    let gram = Operator(&s_bd * s_bd.adjoint());
    let t = Operator(&s * s_bd.adjoint() * inverse_sqrt_psd(&gram)?.0);
    let transformed = h.conjugate_by(&t);
    let leakage = (0..dim)
        .flat_map(|r| (0..dim).map(move |c| (r, c)))
        .filter(|&(r, c)| !partition.same_block(r, c))
        .map(|(r, c)| transformed.0[(r, c)].norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(BlockDiagonalization { transform: t, transformed, leakage, min_weight })
}

/// Pauli-expands `T†·X_k·T` for each driven qubit and classifies the terms.
pub fn crosstalk_report(bd: &BlockDiagonalization, driven: &[usize]) -> Result<CrosstalkReport> {
    let n = bd.transform.n_qubits().ok_or_else(|| Error::Domain("dimension is not a power of two".into()))?;
    let mut report = CrosstalkReport::default();
    for &k in driven {
        let drive = PauliString::sparse(n, &[(k, Pauli::X)]).matrix().conjugate_by(&bd.transform);
        let coeffs = crate::linalg::real_pauli_coefficients(&drive)?;
        for (idx, &c) in coeffs.iter().enumerate() {
            if c.abs() < 1e-14 {
                continue;
            }
            let s = PauliString::from_index(idx, n);
            let xs: Vec<usize> = (0..n).filter(|&q| s.0[q] == Pauli::X).collect();
            let zs: Vec<usize> = (0..n).filter(|&q| s.0[q] == Pauli::Z).collect();
            let ys = s.0.iter().filter(|&&p| p == Pauli::Y).count();
            let half = c / 2.0;
            match (xs.as_slice(), zs.as_slice(), ys) {
                ([x], [], 0) if *x == k => {
                    report.alpha.insert(k, c);
                }
                ([x], [z], 0) if *x == k || *z == k => {
                    report.c2.insert((*x, *z), half);
                }
                ([x], [z1, z2], 0) => {
                    report.c3.insert((*x, *z1, *z2), half);
                }
                _ => report.other_max = report.other_max.max(half.abs()),
            }
        }
    }
    Ok(report)
}

/// Block-diagonalizes into computational states and reports crosstalk.
pub fn extract_crosstalk(h: &Operator, driven: &[usize]) -> Result<(BlockDiagonalization, CrosstalkReport)> {
    let n = h.n_qubits().ok_or_else(|| Error::Domain("dimension is not a power of two".into()))?;
    let bd = block_diagonalize(h, &Partition::computational(n))?;
    let report = crosstalk_report(&bd, driven)?;
    Ok((bd, report))
}

/// Simplified neighbor-crosstalk pair Hamiltonian, drive on qubit 2.
pub struct PairCrosstalkModel<'a> {
    pub omega1: f64,
    pub omega2: f64,
    pub j: f64,
    pub beta: f64,
    pub pulse: &'a dyn Waveform,
}

pub fn crosstalk_pair_model<'a>(omega1: f64, omega2: f64, j: f64, beta: f64, pulse: &'a dyn Waveform) -> PairCrosstalkModel<'a> {
    PairCrosstalkModel { omega1, omega2, j, beta, pulse }
}

impl Hamiltonian for PairCrosstalkModel<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn at(&self, t: f64) -> Operator {
        let om = self.pulse.amplitude(t);
        let d = self.omega2 - self.omega1;
        let mut h = pauli_op("IX").scale(om / 2.0);
        h += &pauli_op("ZZ").scale(self.j / 4.0);
        h += &pauli_op("XZ").scale(self.beta * om * (d * t).cos());
        h += &pauli_op("YZ").scale(self.beta * om * (d * t).sin());
        h
    }
}

/// Single-qubit reference drive `Ω(t)/2·X`.
pub struct XDrive<'a>(pub &'a dyn Waveform);

impl Hamiltonian for XDrive<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn at(&self, t: f64) -> Operator {
        let half = self.0.amplitude(t) / 2.0;
        Operator::from_rows(&[&[ZERO, ONE * half], &[ONE * half, ZERO]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_pauli_coefficients, PauliString};
    use crate::pulse::CosinePulse;

    #[test]
    fn mixing_angle_reference_points() {
        assert_eq!(mixing_angle(0.0, 0.2).unwrap(), 0.0);
        assert!((mixing_angle(0.3, 0.3).unwrap() - std::f64::consts::PI / 8.0).abs() < 1e-15);
        let t = mixing_angle(0.02, 0.2).unwrap().tan();
        assert!((t - 0.02 / (0.2 + 0.02f64.hypot(0.2))).abs() < 1e-15);
        assert!((t / 0.05 - 1.0).abs() < 3e-3);
        assert!(mixing_angle(0.1, 0.0).is_err());
        assert!(mixing_angle(-0.1, 0.2).is_err());
    }

    #[test]
    fn rotating_frame_limits() {
        let m = TwoQubitModel::reference(0.0);
        assert!(rotating_frame_hamiltonian(&m, 0.3, 4.0).max_abs_diff(&pauli_op("IX").scale(0.15)) < 1e-16);
        let m = TwoQubitModel::reference(0.02);
        assert!(rotating_frame_hamiltonian(&m, 0.0, 4.0).max_abs_diff(&pauli_op("ZZ").scale(0.005)) < 1e-16);
    }

    #[test]
    fn rotating_frame_is_hermitian_traceless() {
        let m = TwoQubitModel::reference(0.03);
        let h = rotating_frame_hamiltonian(&m, 0.41, 7.3);
        assert!(h.hermiticity_residual() < 1e-15);
        assert!(h.trace().norm() < 1e-15);
    }

    #[test]
    fn pair_model_matches_rotating_frame() {
        let m = TwoQubitModel::reference(0.02);
        let pulse = CosinePulse::new(50.0, std::f64::consts::PI);
        let beta = m.theta().tan() / 2.0;
        let pair = crosstalk_pair_model(m.dressed_splitting(), 0.0, m.j, beta, &pulse);
        let rf = RotatingFrame::new(m, &pulse);
        for t in [0.0, 3.1, 17.0, 42.5] {
            assert!(pair.at(t).max_abs_diff(&rf.at(t)) < 1e-15);
        }
        let at0 = real_pauli_coefficients(&pair.at(10.0 - 10.0)).unwrap();
        assert_eq!(at0[PauliString::parse("YZ").unwrap().index()], 0.0);
    }

    #[test]
    fn channels_vanish_without_coupling() {
        let ch = effective_noise_channels(&TwoQubitModel::reference(0.0));
        assert_eq!(ch[0].epsilon, 0.0);
        assert_eq!(ch[1].epsilon, 0.0);
        assert_eq!(ch[2].epsilon, 0.0);
    }

    #[test]
    fn channel_profiles_quarter_period() {
        let m = TwoQubitModel::reference(0.02);
        let ch = effective_noise_channels(&m);
        let t = std::f64::consts::FRAC_PI_2 / m.dressed_splitting();
        assert!(ch[1].profile(t, 0.3).abs() < 1e-16);
        assert!((ch[2].profile(t, 0.3) + 0.3).abs() < 1e-15);
        assert_eq!(ch[0].profile(t, 0.3), 1.0);
    }

    #[test]
    fn lattice_single_qubit_and_pair() {
        let one = LatticeModel::new(1, vec![], vec![0.2], 0.0).unwrap();
        assert!(lattice_hamiltonian(&one).unwrap().max_abs_diff(&pauli_op("Z").scale(-0.1)) < 1e-16);
        let pair = LatticeModel::new(2, vec![(0, 1)], vec![0.0, 0.0], 0.04).unwrap();
        let h = lattice_hamiltonian(&pair).unwrap();
        let expect = &(&pauli_op("XX") + &pauli_op("YY")) + &pauli_op("ZZ");
        assert!(h.max_abs_diff(&expect.scale(0.01)) < 1e-16);
        let (vals, _) = h.eigh().unwrap();
        assert!((vals[0] + 0.03).abs() < 1e-15);
        for v in &vals[1..] {
            assert!((v - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn lattice_guard_and_validation() {
        let big = LatticeModel::chain(13, 0.2, 0.01);
        assert!(matches!(lattice_hamiltonian(&big), Err(Error::ResourceLimit(_))));
        assert!(LatticeModel::new(2, vec![(0, 0)], vec![0.0, 0.1], 0.1).is_err());
        assert!(LatticeModel::new(2, vec![(0, 1), (1, 0)], vec![0.0, 0.1], 0.1).is_err());
    }

    #[test]
    fn builtin_topologies() {
        let l = LatticeModel::ladder10(0.2, 0.01);
        assert_eq!(l.edges.len(), 13);
        l.validate().unwrap();
        for (a, b) in &l.edges {
            assert!(l.detuning(*a, *b).abs() > 0.1);
        }
        assert_eq!(LatticeModel::honeycomb6(0.2, 0.01).neighbors(0), vec![1, 5]);
        assert!(LatticeModel::builtin("torus", 0.2, 0.0).is_err());
    }

    #[test]
    fn lattice_json_round_trip() {
        let l = LatticeModel::honeycomb6(0.2, 0.01);
        let back = LatticeModel::from_json(&serde_json::to_string(&l).unwrap()).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn block_diagonalization_uncoupled_is_trivial() {
        let l = LatticeModel::chain(3, 0.2, 0.0);
        let (bd, rep) = extract_crosstalk(&lattice_hamiltonian(&l).unwrap(), &[1]).unwrap();
        assert!(bd.leakage < 1e-14);
        assert!((rep.alpha[&1] - 1.0).abs() < 1e-14);
        assert!(rep.c2.is_empty() && rep.c3.is_empty());
    }

    #[test]
    fn two_qubit_crosstalk_matches_mixing_angle() {
        let (j, dez) = (0.02, 0.2);
        let l = LatticeModel::new(2, vec![(0, 1)], vec![5.0, 5.0 + dez], j).unwrap();
        let (bd, rep) = extract_crosstalk(&lattice_hamiltonian(&l).unwrap(), &[1]).unwrap();
        assert!(bd.leakage < 1e-12);
        let theta = mixing_angle(j, dez).unwrap();
        let alpha = rep.alpha[&1];
        assert!((alpha - theta.cos()).abs() < 1e-10);
        let c2 = rep.c2[&(0, 1)];
        assert!((c2.abs() / alpha - theta.tan() / 2.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_spectrum_flagged() {
        let l = LatticeModel::new(2, vec![(0, 1)], vec![0.0, 0.0], 0.02).unwrap();
        assert!(matches!(extract_crosstalk(&lattice_hamiltonian(&l).unwrap(), &[0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spectator_partition_blocks() {
        let p = Partition::spectators(3, &[1]);
        assert_eq!(p.n_blocks(), 4);
        let l = LatticeModel::new(3, vec![(0, 1), (1, 2)], vec![5.0, 5.21, 5.44], 0.01).unwrap();
        let h = lattice_hamiltonian(&l).unwrap();
        let bd = block_diagonalize(&h, &p).unwrap();
        assert!(bd.leakage < 1e-10);
        assert!(bd.transform.unitarity_residual() < 1e-10);
    }
}
